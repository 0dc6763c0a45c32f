"""Tweet-driven minute-level event study, condition mining and trade replay."""

__version__ = "0.1.0"
