"""Offline engine and experiment harness for multimodal query clarification."""

__version__ = "0.1.0"
