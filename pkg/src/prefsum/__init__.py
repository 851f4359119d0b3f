"""Interactive preference-driven multi-document summarization."""

__version__ = "0.1.0"
