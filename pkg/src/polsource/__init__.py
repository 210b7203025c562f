"""Simulator of a fiber-based polarization-entangled photon-pair source.

Covers the emission/filter spectra, the two-photon polarization state and the
optics acting on it, HOM dip/peak scans, detector statistics, and Bell-CHSH
fringes.
"""

__version__ = "0.1.0"
