"""guirl: a desk-scale GUI-agent RL and evaluation stack."""

__version__ = "0.1.0"
