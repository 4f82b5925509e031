"""Information-flow type checking, interpretation and non-interference testing for annotated P4 control blocks."""

__version__ = "0.1.0"
