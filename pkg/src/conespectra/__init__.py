"""Spectral geometry of genus-2 translation surfaces with a single 6-pi
conical point: period matrices, canonical bidifferentials, scattering
coefficient matrices, model-cone resolvent asymptotics and Green functions.
"""

__version__ = "0.1.0"
