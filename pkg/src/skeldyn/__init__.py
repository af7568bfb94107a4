"""Induced planar dynamics of piecewise nonlinear autoregressive skeletons."""
