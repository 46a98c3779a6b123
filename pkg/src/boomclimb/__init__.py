"""Planning and grasp analysis for a boom-limbed climbing robot."""

__version__ = "0.1.0"
