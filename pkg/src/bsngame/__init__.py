"""Channel and power selection game for co-located body sensor networks."""

__version__ = "0.1.0"
