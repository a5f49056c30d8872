"""Stdin/stdout inference server speaking the line-JSON detection protocol (v1)."""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
