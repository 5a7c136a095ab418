"""
motionguide - parametric-body guidance maps and toy guided diffusion.
"""

__version__ = "0.1.0"
