"""Calibration - Parameter transforms, Nelder-Mead search and multi-start model fitting."""
