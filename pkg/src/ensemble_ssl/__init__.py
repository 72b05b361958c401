"""Uncertainty-aware three-teacher semi-supervised text classification."""
