"""lyrnet: multi-task transformer emotion recognition from song lyrics."""

__version__ = "0.1.0"
