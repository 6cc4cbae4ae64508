"""Shared numeric constants.

Tolerances are repo decisions, collected here so they are set in exactly
one place.
"""

# 95% two-sided normal quantile used for every Monte Carlo interval.
CONFIDENCE_Z = 1.96

# Absolute clamp threshold for one-step results. The step evaluates its
# noise terms as a perfect square, so a strict-mode result can only dip
# below zero through float cancellation at the parabola vertex, and then
# only by an amount far below this threshold.
CLAMP_ABS_TOL = 1e-30

# Relative tolerances tying iterated moment recurrences to their closed
# forms (accumulated round-off allowances, used by the test suite).
REL_TOL_MEAN_RECURRENCE = 1e-10
REL_TOL_SECOND_MOMENT_LIMIT = 1e-8

# Default master seed for CLI runs; any 64-bit value is valid.
DEFAULT_SEED = 7
