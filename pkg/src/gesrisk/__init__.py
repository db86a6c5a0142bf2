"""Generic energy storage dispatch and response-risk assessment."""

__version__ = "0.1.0"
