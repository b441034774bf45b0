"""Conforming virtual elements of arbitrary order on meshes with curved edges and faces."""

__version__ = "0.1.0"
