"""Word-level motion quantization, complexity estimation and reversibility filters."""

__version__ = "0.1.0"
