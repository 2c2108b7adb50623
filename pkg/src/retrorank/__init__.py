"""retrorank: dialog response selection with permutation/flipping data
transforms combined at train and test time."""

__version__ = "0.1.0"
