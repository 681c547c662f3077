"""Steady-state 500 kV transmission planning toolkit."""
