"""Desk-scale simulator and training harness for decoder-side refinement of
codebook-compressed CSI in multi-user massive MIMO."""

__version__ = "0.1.0"
