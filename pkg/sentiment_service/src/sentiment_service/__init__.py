"""Financial-sentiment inference sidecar: HTTP service + batch file scorer."""

__version__ = "0.1.0"
