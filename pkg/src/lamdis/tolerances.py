"""Centralized numerical tolerance constants.

Stochastic-matrix checks at construction time use ATOL_CONSTRUCT; quantities
derived through linear solves are held to the looser ATOL_DERIVED. Operations
accept explicit overrides, these are only the defaults.
"""

# Row sums / normalization checks on freshly constructed tensors.
ATOL_CONSTRUCT = 1e-12

# Checks on derived quantities (occupancy posteriors, effective models, ...).
ATOL_DERIVED = 1e-9

# Discounted observation occupancy below this counts as unreachable.
OCCUPANCY_FLOOR = 1e-12

# A linear system with condition estimate above this triggers a warning.
CONDITION_WARN = 1e12
