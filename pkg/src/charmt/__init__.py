"""Corpus-analysis toolkit for comparing character-level and subword-level
machine translation systems."""

__version__ = "0.1.0"

FORMAT_VERSION = "1"
