"""Synthetic scenarios, the rejection-sampling baseline and the power harness."""
