"""HOM-type coincidence probability versus delay and phase, scans and dip/peak fits.

After the 45-degree rotation and the f-PBS, coincidences between the two
cross-polarized outputs occur with probability

    p(tau) = (|a|^2 + |b|^2) / 2 - v Re(conj(a) b G(tau + walkoff))

where ``a`` and ``b`` are the H+V- and V+H- amplitudes, ``G`` the spectral
overlap kernel and ``v`` a visibility factor for alignment imperfections. For
``|Psi(phi)>`` this is ``(1 - v Re(exp(i phi) G)) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detection import expected_rates, sample_coincidences
from .fitting import (
    FitError,
    ScanResult,
    ShapeTemplate,
    fit_dip_gaussian,
    fit_dip_template,
    grid_from_range,
)
from .spectra import SpectralKernel

# cross-polarized subspace tolerance for HH / VV amplitudes
_CROSS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class HomConfig:
    state: object
    kernel: SpectralKernel
    artificial_delay_range: tuple = (-20.0, 20.0, 0.2)
    device_visibility_factor: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        lo, hi, step = self.artificial_delay_range
        if not step > 0:
            raise ValueError(f"delay step must be positive, got {step}")
        if not hi > lo:
            raise ValueError(f"empty delay range {lo}..{hi}")
        if not 0.0 <= self.device_visibility_factor <= 1.0:
            raise ValueError("device_visibility_factor must be in [0, 1]")
        amp = self.state.amp
        if abs(amp[0]) > _CROSS_TOL or abs(amp[3]) > _CROSS_TOL:
            raise ValueError("HOM analysis expects a state with only H+V- and V+H- terms")

    def with_state(self, state):
        return HomConfig(state, self.kernel, self.artificial_delay_range,
                         self.device_visibility_factor)

    @property
    def delays(self):
        return grid_from_range(*self.artificial_delay_range)


def coincidence_probability(config, tau):
    """Cross-polarized coincidence probability at artificial delay ``tau`` (ps).

    The channel delay of the state is passed to the kernel, where it multiplies
    both two-photon amplitudes by the same phase.
    """
    s = config.state
    a, b = s.amp[1], s.amp[2]
    g = config.kernel(np.asarray(tau, float) + s.walkoff_H_minus_V, channel_delay=s.channel_delay)
    base = (abs(a) ** 2 + abs(b) ** 2) / 2.0
    p = base - config.device_visibility_factor * np.real(np.conj(a) * b * g)
    if np.ndim(p) == 0:
        return float(p)
    return p


def _shape_template(config, half_range):
    """Normalized dip shape of this config; sign chosen so a dip fits with V > 0."""
    s = config.state
    a, b = s.amp[1], s.amp[2]
    z = np.conj(a) * b
    if abs(z) == 0:
        return None
    phase = z / abs(z)
    if phase.real < 0:
        phase = -phase
    key = ("template", round(half_range, 9), complex(phase))
    if key not in config._cache:
        config._cache[key] = ShapeTemplate(lambda t: np.real(phase * config.kernel(t)), half_range)
    return config._cache[key]


def scan(config, counting=None, seed=None, fit_model="kernel", workers=1, stream=0):
    """Coincidence scan over the artificial delay range, with a fit.

    Without ``counting`` the rates are the ideal probabilities. With it, they
    are Poisson-sampled coincidence counts per point (true + accidental),
    each point drawing from its own stream derived from the seed.

    ``fit_model`` is ``"kernel"`` (the config's own spectral shape, free
    baseline/amplitude/center) or ``"gaussian"``.
    """
    taus = config.delays
    probs = np.asarray(coincidence_probability(config, taus), float)
    if counting is None:
        rate = probs
        unc = np.zeros_like(rate)
        used_seed = None
    else:
        if seed is not None:
            from dataclasses import replace

            counting = replace(counting, rng_seed=int(seed))
        used_seed = int(counting.rng_seed)
        counts = sample_coincidences(counting, probs, stream=stream, workers=workers)
        rate = counts.astype(float)
        unc = np.sqrt(np.maximum(rate, 1.0))

    fitter = make_dip_fitter(config, taus, fit_model)
    fit = fitter(taus, rate, unc if counting is not None else None)
    meta = {"fit_model": fit_model}
    if counting is not None:
        r = expected_rates(counting, 0.5)
        meta["accidental_rate"] = r.accidental_coinc
        meta["integration_time"] = counting.integration_time
    result = ScanResult(taus, rate, unc, fit, used_seed, "hom", fitter, meta)
    if not fit.converged:
        raise FitError(fit.message, result)
    return result


def make_dip_fitter(config, taus, fit_model="kernel"):
    if fit_model == "gaussian":
        return fit_dip_gaussian
    if fit_model != "kernel":
        raise ValueError(f"unknown fit model {fit_model!r}")
    half = 1.25 * float(np.ptp(taus)) + 1.0
    template = _shape_template(config, half)
    if template is None:
        return fit_dip_gaussian

    def fitter(x, y, unc):
        return fit_dip_template(x, y, unc, template)

    return fitter


def pmf_length_for_compensation(walkoff, pmf_rate):
    """Fiber length (m) whose birefringence cancels ``walkoff`` (ps)."""
    if not pmf_rate > 0:
        raise ValueError(f"pmf_rate must be positive, got {pmf_rate}")
    return walkoff / pmf_rate


def channel_delay_sweep(config, delays, tau=0.0):
    """Coincidence probability at fixed ``tau`` for each extra + channel delay (ps)."""
    from .polarization import apply_element, channel_delay

    out = []
    for d in delays:
        state = apply_element(config.state, channel_delay(d))
        out.append(coincidence_probability(config.with_state(state), tau))
    return out


def dip_visibility(result):
    """Visibility magnitude of a fitted dip or peak."""
    return abs(result.fit.visibility)


def coherence_time(kernel, threshold=0.5, t_max=50.0, step=0.01):
    """Smallest |tau| where |G| first drops below ``threshold``."""
    t = np.arange(0.0, t_max, step)
    g = np.abs(kernel(t))
    idx = np.flatnonzero(g < threshold)
    return math.nan if idx.size == 0 else float(t[idx[0]])
