"""Named scenario presets built from the source constants.

The measurement presets share a 78 GHz, order-4 DWDM passband and use a 4.5 ns
(HOM) or 5.7 ns (Bell) coincidence window; these are calibrated (see README)
since none is published.
"""

from __future__ import annotations

from . import constants as k
from .config import ExperimentConfig

PAPER_WINDOW_NS = 4.5
BELL_WINDOW_NS = 5.7
PAPER_FILTER_FWHM_GHZ = 78.0


def _paper_base(scenario):
    cfg = ExperimentConfig()
    cfg.experiment.scenario = scenario
    cfg.filters.fwhm_ghz = PAPER_FILTER_FWHM_GHZ
    cfg.detectors.window_ns = PAPER_WINDOW_NS
    return cfg


def _hom_detectors(cfg):
    d = cfg.detectors
    d.noise = True
    d.det1_label, d.det1_efficiency, d.det1_dark_per_ns, d.det1_mode = "IDQ-220", 0.20, 1e-6, "free_running"
    d.det2_label, d.det2_efficiency, d.det2_dark_per_ns, d.det2_mode = "IDQ-201", 0.25, 1e-5, "gated"


def paper_spectrum():
    return _paper_base("spectrum")


def paper_no_pmf():
    cfg = _paper_base("hom_scan")
    _hom_detectors(cfg)
    cfg.hom.delay_min_ps, cfg.hom.delay_max_ps, cfg.hom.delay_step_ps = -20.0, 12.0, 0.2
    cfg.hom.visibility_factor = 0.95
    return cfg


def paper_pmf():
    cfg = paper_no_pmf()
    cfg.source.pmf_length_m = k.PMF_LENGTH_M
    cfg.hom.delay_min_ps, cfg.hom.delay_max_ps = -16.0, 16.0
    return cfg


def paper_phase():
    """Dip/peak setup with the SB plate and the two-DWDM interferometer.

    The extra free-space and coupling stages cost 7 dB per photon, offset by a
    higher pump power.
    """
    cfg = paper_pmf()
    cfg.experiment.scenario = "phase_scan"
    cfg.source.pump_mw = 20.0
    cfg.detectors.transmission = 0.1
    cfg.hom.visibility_factor = 0.94
    cfg.hom.channel_delay_ps = 22000.0
    return cfg


def paper_bell():
    cfg = _paper_base("chsh")
    cfg.source.pmf_length_m = k.PMF_LENGTH_M
    d = cfg.detectors
    d.noise = True
    d.det1_label = d.det2_label = "IDQ-220"
    d.det1_efficiency = d.det2_efficiency = 0.20
    d.det1_dark_per_ns = d.det2_dark_per_ns = 1e-6
    d.det1_mode = d.det2_mode = "free_running"
    d.window_ns = BELL_WINDOW_NS
    cfg.bell.source_visibility = 0.995
    return cfg


def paper_budget():
    cfg = paper_bell()
    cfg.experiment.scenario = "budget"
    return cfg


def ideal():
    cfg = ExperimentConfig()
    cfg.experiment.scenario = "hom_scan"
    cfg.source.pmf_length_m = k.WAVEGUIDE_WALKOFF_PS / k.PMF_RATE_PS_PER_M
    d = cfg.detectors
    d.noise = False
    d.det1_efficiency = d.det2_efficiency = 1.0
    d.det1_dark_per_ns = d.det2_dark_per_ns = 0.0
    d.det1_label = d.det2_label = "ideal"
    d.transmission = 1.0
    cfg.filters.fwhm_ghz = PAPER_FILTER_FWHM_GHZ
    return cfg


def sc_detector():
    """Bell preset with superconducting detectors (1e-9 dark counts per ns)."""
    cfg = paper_bell()
    d = cfg.detectors
    d.det1_label = d.det2_label = "superconducting"
    d.det1_dark_per_ns = d.det2_dark_per_ns = 1e-9
    return cfg


PRESETS = {
    "ideal": ideal,
    "paper-spectrum": paper_spectrum,
    "paper-no-pmf": paper_no_pmf,
    "paper-pmf": paper_pmf,
    "paper-phase": paper_phase,
    "paper-bell": paper_bell,
    "paper-budget": paper_budget,
    "sc-detector": sc_detector,
}


def preset(name):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
    cfg = factory()
    cfg.experiment.preset = name
    return cfg
