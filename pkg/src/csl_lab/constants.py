"""Pinned physical constants (SI units).

Single source of truth for every dimensionful number in the package.
Values are CODATA 2018 (see README for the source table); they are pinned
as literals, not imported from scipy, so that regression output never
shifts underneath a scipy upgrade.
"""

# CODATA 2018
HBAR = 1.054_571_817e-34  # reduced Planck constant, J s (exact in SI 2019)
PROTON_MASS = 1.672_621_923_69e-27  # kg
SPEED_OF_LIGHT = 2.997_924_58e8  # m/s (exact)

# conventional conversions
YEAR = 3.155_76e7  # Julian year, s
AGE_OF_UNIVERSE = 4.3e17  # s, ~13.6 Gyr

# GRW parameter choices adopted for the physical model
GRW_COLLAPSE_RATE = 1.0e-16  # s^-1
GRW_SMEARING_LENGTH = 1.0e-7  # m  (10^-5 cm)
