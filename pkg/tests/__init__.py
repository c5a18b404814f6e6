"""Test package for grid-robustness."""
