"""News-sentiment conditioned daily close-price forecasting toolkit."""

__version__ = "0.1.0"
