"""Polarization-correlation fringes and the CHSH parameter.

Analyzer angles (Alice on +, Bob on -) are polarization angles in degrees;
Bob's scan variable is his HWP angle, i.e. half the analyzer angle.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .detection import expected_rates, raw_and_net_visibility, sample_coincidences
from .fitting import ScanResult, fit_fringe
from .polarization import BiphotonState, analyzer_projector, transmission_probability

H, V, D, A = 0.0, 90.0, 45.0, -45.0
TSIRELSON = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class BellSettings:
    alice_angles: tuple = (H, V, D, A)
    bob_scan: tuple = tuple(np.arange(0.0, 90.0, 2.5).tolist())
    chsh_angles: tuple = (0.0, 45.0, 22.5, 67.5)

    def __post_init__(self):
        if not self.alice_angles or not len(self.bob_scan):
            raise ValueError("alice_angles and bob_scan must be non-empty")
        if len(self.chsh_angles) != 4:
            raise ValueError("chsh_angles must be (a, a', b, b')")
        for x in (*self.alice_angles, *self.bob_scan, *self.chsh_angles):
            if not math.isfinite(x):
                raise ValueError("angles must be finite")


def joint_probability(state, a, b):
    """Probability that both photons pass analyzers at ``a`` (+) and ``b`` (-)."""
    return transmission_probability(state, analyzer_projector(a, b))


def noisy_joint_probability(state, a, b, visibility=1.0):
    """Joint pass probability for the state mixed with white noise, weight ``1 - visibility``."""
    return visibility * joint_probability(state, a, b) + (1.0 - visibility) * 0.25


def correlation(state, a, b):
    """E(a, b) = P(pp) + P(ff) - P(pf) - P(fp); 'fail' is the orthogonal analyzer."""
    pp = joint_probability(state, a, b)
    ff = joint_probability(state, a + 90.0, b + 90.0)
    pf = joint_probability(state, a, b + 90.0)
    fp = joint_probability(state, a + 90.0, b)
    total = pp + ff + pf + fp
    return (pp + ff - pf - fp) / total if total else 0.0


@dataclass(frozen=True)
class CHSHResult:
    S: float
    sigma_S: float
    correlations: dict = field(default_factory=dict)
    sigmas: dict = field(default_factory=dict)
    form: int = 1

    @property
    def significance(self):
        return violation_significance(self.S, self.sigma_S)


def violation_significance(S, sigma):
    """Distance of S above the local bound 2, in standard deviations."""
    if not sigma > 0:
        return math.inf if S > 2 else 0.0
    return (S - 2.0) / sigma


def _chsh_combination(e_ab, e_abp, e_apb, e_apbp):
    """Largest |CHSH expression| over the four placements of the minus sign.

    Form 1 is ``E(a,b) - E(a,b') + E(a',b) + E(a',b')``; the others move the
    minus sign, which amounts to relabeling one analyzer output.
    """
    terms = np.array([e_ab, e_abp, e_apb, e_apbp])
    values = [abs(terms.sum() - 2 * terms[k]) for k in range(4)]
    order = [1, 0, 2, 3]  # keep form 1 first among ties
    best = max(order, key=lambda k: values[k])
    return values[best], best


def _settings_keys(settings):
    a, ap, b, bp = settings.chsh_angles
    return [(a, b), (a, bp), (ap, b), (ap, bp)]


def chsh_from_correlations(correlations, sigmas=None, settings=None):
    """S and its root-sum-square uncertainty from four correlation values.

    ``correlations`` is either a 4-sequence in the order (ab, ab', a'b, a'b')
    or a mapping keyed by ``(alice, bob)`` angles of ``settings``.
    """
    if isinstance(correlations, Mapping):
        keys = _settings_keys(settings or BellSettings())
        values = [correlations[k] for k in keys]
        errs = [0.0] * 4 if sigmas is None else [sigmas[k] for k in keys]
    else:
        keys = list(range(4))
        values = list(correlations)
        errs = [0.0] * 4 if sigmas is None else list(sigmas)
    if len(values) != 4:
        raise ValueError("need exactly four correlations")
    S, form = _chsh_combination(*values)
    sigma = math.sqrt(sum(e * e for e in errs))
    return CHSHResult(S, sigma, dict(zip(keys, values)), dict(zip(keys, errs)), form + 1)


def chsh_S(state_or_fringes, settings=None):
    """CHSH S from an ideal state, or from fitted fringes keyed by Alice's angle.

    With fringes, correlations are read off the fitted fringe models at Bob's
    CHSH angles and their orthogonals, with uncertainties propagated from the
    fit covariances.
    """
    settings = settings or BellSettings()
    if isinstance(state_or_fringes, BiphotonState):
        state = state_or_fringes
        return chsh_from_correlations(
            {k: correlation(state, *k) for k in _settings_keys(settings)}, settings=settings
        )
    if not isinstance(state_or_fringes, Mapping) or not state_or_fringes:
        raise ValueError("chsh_S needs a BiphotonState or a mapping of fitted fringes")
    corr, errs = {}, {}
    for a, b in _settings_keys(settings):
        corr[(a, b)], errs[(a, b)] = fringe_correlation(state_or_fringes, a, b)
    return chsh_from_correlations(corr, errs, settings)


def _lookup_fringe(fringes, angle):
    for key, res in fringes.items():
        if math.isclose((key - angle + 90.0) % 180.0 - 90.0, 0.0, abs_tol=1e-9):
            return res
    raise KeyError(f"no fitted fringe for Alice angle {angle} (mod 180)")


def fringe_correlation(fringes, a, b):
    """E(a, b) and its standard error from fitted fringes at ``a`` and ``a + 90``."""
    f_a = _lookup_fringe(fringes, a).fit
    f_o = _lookup_fringe(fringes, a + 90.0).fit
    for f in (f_a, f_o):
        if not f.params or f.covariance is None:
            raise ValueError("fringe has no fit parameters; cannot form correlations")
    th_b, th_bo = b / 2.0, (b + 90.0) / 2.0

    def value(pa, po):
        ca = _model(pa, th_b), _model(pa, th_bo)
        co = _model(po, th_b), _model(po, th_bo)
        num = ca[0] + co[1] - ca[1] - co[0]
        return num / (ca[0] + co[1] + ca[1] + co[0])

    pa = np.array([f_a.params[k] for k in ("c0", "ca", "cb")], float)
    po = np.array([f_o.params[k] for k in ("c0", "ca", "cb")], float)
    e = value(pa, po)
    grad_a, grad_o = np.zeros(3), np.zeros(3)
    for i in range(3):
        h = 1e-6 * max(abs(pa[0]), 1e-12)
        d = np.zeros(3)
        d[i] = h
        grad_a[i] = (value(pa + d, po) - value(pa - d, po)) / (2 * h)
        grad_o[i] = (value(pa, po + d) - value(pa, po - d)) / (2 * h)
    var = grad_a @ f_a.covariance @ grad_a + grad_o @ f_o.covariance @ grad_o
    return float(e), float(math.sqrt(max(var, 0.0)))


def _model(p, theta_deg):
    t = math.radians(4.0 * theta_deg)
    return p[0] + p[1] * math.cos(t) + p[2] * math.sin(t)


def fringe_scan(state, alice_setting, bob_grid, counting=None, source_visibility=1.0,
                stream=0, workers=1):
    """Coincidences versus Bob's HWP angle with Alice fixed, fitted to c0 + c1 cos(4 theta + c2).

    Ideal scans (no ``counting``) return probabilities; otherwise Poisson
    counts with one RNG stream per point keyed by ``(seed, stream, index)``.
    """
    thetas = np.asarray(bob_grid, float)
    if thetas.size < 3:
        raise ValueError("fringe fit needs at least three Bob angles")
    probs = np.array([noisy_joint_probability(state, alice_setting, 2.0 * t, source_visibility)
                      for t in thetas])
    if counting is None:
        rate, unc, seed = probs, np.zeros_like(probs), None
        fit = fit_fringe(thetas, rate, None)
        meta = {}
    else:
        counts = sample_coincidences(counting, probs, stream=stream, workers=workers)
        rate = counts.astype(float)
        unc = np.sqrt(np.maximum(rate, 1.0))
        seed = int(counting.rng_seed)
        fit = fit_fringe(thetas, rate, unc)
        meta = {"accidental_rate": expected_rates(counting, 0.0).accidental_coinc,
                "integration_time": counting.integration_time}
    meta["alice"] = float(alice_setting)
    return ScanResult(thetas, rate, unc, fit, seed, f"alice_{alice_setting:g}", fit_fringe, meta)


def fringe_set(state, settings, counting=None, source_visibility=1.0, workers=1):
    """Fringes for every Alice angle; stream index is the setting's position."""
    return {
        a: fringe_scan(state, a, settings.bob_scan, counting, source_visibility, stream=i,
                       workers=workers)
        for i, a in enumerate(settings.alice_angles)
    }


def net_fringes(fringes):
    """Fringes refitted after subtracting the expected accidentals from each point."""
    out = {}
    for a, res in fringes.items():
        acc = res.meta.get("accidental_rate", 0.0)
        t = res.meta.get("integration_time", 1.0)
        out[a] = raw_and_net_visibility(res, acc, t).net_scan
    return out


@dataclass(frozen=True)
class BellReport:
    raw: CHSHResult
    net: CHSHResult
    raw_visibilities: dict
    net_visibilities: dict

    @property
    def mean_raw_visibility(self):
        return float(np.mean(list(self.raw_visibilities.values())))

    @property
    def mean_net_visibility(self):
        return float(np.mean(list(self.net_visibilities.values())))

    @property
    def visibility_route_raw(self):
        return TSIRELSON * self.mean_raw_visibility

    @property
    def visibility_route_net(self):
        return TSIRELSON * self.mean_net_visibility

    def to_text(self):
        buf = io.StringIO()
        for tag, r in (("raw", self.raw), ("net", self.net)):
            buf.write(f"S_{tag} = {r.S:.6f}\n")
            buf.write(f"sigma_S_{tag} = {r.sigma_S:.6f}\n")
            buf.write(f"sigmas_of_violation_{tag} = {r.significance:.3f}\n")
        buf.write(f"S_visibility_route_raw = {self.visibility_route_raw:.6f}\n")
        buf.write(f"S_visibility_route_net = {self.visibility_route_net:.6f}\n")
        for a in self.raw_visibilities:
            buf.write(f"visibility_raw_alice_{a:g} = {self.raw_visibilities[a]:.6f}\n")
            buf.write(f"visibility_net_alice_{a:g} = {self.net_visibilities[a]:.6f}\n")
        buf.write(f"mean_visibility_raw = {self.mean_raw_visibility:.6f}\n")
        buf.write(f"mean_visibility_net = {self.mean_net_visibility:.6f}\n")
        return buf.getvalue()


def bell_report(fringes, settings=None):
    settings = settings or BellSettings()
    net = net_fringes(fringes)
    return BellReport(
        chsh_S(fringes, settings), chsh_S(net, settings),
        {a: r.fit.visibility for a, r in fringes.items()},
        {a: r.fit.visibility for a, r in net.items()},
    )
