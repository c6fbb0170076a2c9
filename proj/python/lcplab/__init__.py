"""Python surface for the lateral Cauchy laboratory core."""

from lcplab._core import c1_lambda, m_inf, phi, temporal_weight

__all__ = ["temporal_weight", "phi", "c1_lambda", "m_inf"]
