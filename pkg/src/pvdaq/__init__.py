"""Multi-sensor data acquisition daemon for side-by-side PV panel experiments."""

__version__ = "0.1.0"
