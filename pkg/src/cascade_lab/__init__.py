"""Monte Carlo simulation and fitting toolkit for rumor cascades on directed graphs."""

__version__ = "0.1.0"
