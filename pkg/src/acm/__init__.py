"""Adaptive continual memory: kNN-based online continual learning."""
