"""High-order DG on curved surface meshes with geometry-aligned moving frames."""

__version__ = "0.1.0"
