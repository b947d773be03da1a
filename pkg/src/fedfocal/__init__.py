"""Federated-learning simulator: focal loss + validation-gated sampling."""

__version__ = "0.1.0"
