"""Signal-chain model of a transparent surface-electrode ion trap with an integrated photodetector."""

__version__ = "0.1.0"
