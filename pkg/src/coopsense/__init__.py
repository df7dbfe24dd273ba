"""Cooperative spectrum sensing game, one-point solutions and channel auction."""

__version__ = "0.1.0"
