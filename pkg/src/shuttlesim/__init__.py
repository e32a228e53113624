"""Data-driven badminton rally simulation: a probabilistic two-stage rally
environment fitted from shot logs, trainable agents, evaluation tools, and
an interactive session service."""

__version__ = "0.1.0"
