"""Physical and source constants used by the presets."""

# speed of light expressed so that nu[THz] = C_NM_THZ / lambda[nm]
C_NM_THZ = 299792.458

DEGENERATE_WAVELENGTH_NM = 1540.2
PUMP_WAVELENGTH_NM = DEGENERATE_WAVELENGTH_NM / 2.0
EMISSION_FWHM_NM = 0.85

WAVEGUIDE_WALKOFF_PS = 4.40
PMF_RATE_PS_PER_M = 1.38
PMF_LENGTH_M = 3.2

PUMP_POWER_MW = 2.5
BRIGHTNESS_PAIRS_S_MW_GHZ = 2.0e4
FILTER_BANDWIDTH_GHZ = 100.0
PER_PHOTON_LOSS_DB = 3.0
REPORTED_COINCIDENCE_RATE = 1100.0

PLUS_CHANNEL = 46
MINUS_CHANNEL = 47
ITU_ANCHOR_THZ = 190.0
ITU_SPACING_THZ = 0.1


def wavelength_to_frequency(wavelength_nm):
    return C_NM_THZ / wavelength_nm


def frequency_to_wavelength(frequency_thz):
    return C_NM_THZ / frequency_thz


def itu_frequency(channel):
    """Center frequency (THz) of a channel on the 100 GHz ITU grid."""
    return ITU_ANCHOR_THZ + channel * ITU_SPACING_THZ
