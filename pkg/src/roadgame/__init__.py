"""Safety-game synthesis, shielded Q-learning and strategy checking for lanelet scenarios."""

__version__ = "0.1.0"
