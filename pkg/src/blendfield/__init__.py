"""3D-aware style-blended face synthesis."""

__version__ = "0.1.0"
