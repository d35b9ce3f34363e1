"""Side-information-assisted greedy channel estimation for dual-band XL-MIMO."""

__version__ = "0.1.0"
