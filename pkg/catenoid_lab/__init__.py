"""
catenoid-lab: numerical laboratory for the hyperbolic vanishing mean curvature flow
around the catenoid.
"""

__version__ = "1.0.0"
