"""Deterministic critical win-loss game trees and search-pathology experiments."""

__version__ = "0.1.0"
