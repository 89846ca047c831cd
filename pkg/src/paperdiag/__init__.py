"""Build diagram captioning / analysis / outline datasets from LaTeX paper sources."""

from .tokenizer import tokenize, token_count

__version__ = "0.1.0"

__all__ = ["tokenize", "token_count", "__version__"]
