"""tagsift: build accurate per-label training sets from noisily tagged image corpora."""

__version__ = "0.1.0"
