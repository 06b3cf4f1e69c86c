"""epukit: build economic policy uncertainty indices from news corpora."""

__version__ = "0.1.0"
