"""epu-scorer: probability-serving sidecar speaking the epukit wire protocol."""

__version__ = "0.1.0"
