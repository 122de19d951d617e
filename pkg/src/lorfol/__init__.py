"""Transversely Lorentzian foliations: exterior calculus, curvature, geodesics and cocycles."""
