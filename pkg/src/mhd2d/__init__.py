"""2D incompressible MHD on a staggered grid, with a verified-estimates harness."""

__version__ = "0.1.0"
