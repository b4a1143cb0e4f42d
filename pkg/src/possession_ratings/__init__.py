"""Player ratings from possession-level goal outcomes with penalised logistic regression."""
__version__ = "0.1.0"
