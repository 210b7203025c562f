"""Scan containers and the least-squares fits used for dips, peaks and fringes."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import OptimizeWarning, curve_fit


class FitError(RuntimeError):
    """A fit did not converge; the scan points are still available on ``result``."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FitResult:
    center: float = math.nan
    visibility: float = 0.0
    fwhm: float = math.nan
    baseline: float = math.nan
    flat: bool = False
    converged: bool = True
    message: str = ""
    params: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    covariance: np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class ScanResult:
    control: np.ndarray
    rate: np.ndarray
    uncertainty: np.ndarray
    fit: FitResult
    seed: int | None = None
    label: str = ""
    fitter: Callable | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("control", "rate", "uncertainty"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if not (self.control.shape == self.rate.shape == self.uncertainty.shape):
            raise ValueError("control, rate and uncertainty must have equal length")
        if np.any(self.uncertainty < 0):
            raise ValueError("uncertainties must be non-negative")

    @property
    def points(self):
        return list(zip(self.control.tolist(), self.rate.tolist(), self.uncertainty.tolist()))

    def refit(self, rate, uncertainty=None, **meta):
        """Re-run this scan's fit on modified rates (e.g. after background subtraction)."""
        if self.fitter is None:
            raise FitError("scan carries no fitter")
        if uncertainty is None:
            uncertainty = self.uncertainty
        fit = self.fitter(self.control, np.asarray(rate, float), np.asarray(uncertainty, float))
        return replace(self, rate=rate, uncertainty=uncertainty, fit=fit,
                       meta={**self.meta, **meta})

    def to_csv(self, path=None, control_name="control_ps", extra_header=None):
        buf = io.StringIO()
        f = self.fit
        buf.write(f"# label={self.label}\n")
        buf.write(f"# seed={'none' if self.seed is None else self.seed}\n")
        buf.write(
            f"# fit center={_fmt(f.center)} visibility={_fmt(f.visibility)} "
            f"fwhm={_fmt(f.fwhm)} baseline={_fmt(f.baseline)} flat={f.flat} "
            f"converged={f.converged}\n"
        )
        for key in sorted(f.params):
            err = f.errors.get(key, math.nan)
            buf.write(f"# param {key}={_fmt(f.params[key])} +/- {_fmt(err)}\n")
        for line in extra_header or ():
            buf.write(f"# {line}\n")
        buf.write(f"{control_name},rate,uncertainty\n")
        for x, y, e in zip(self.control, self.rate, self.uncertainty):
            buf.write(f"{_fmt(x)},{_fmt(y)},{_fmt(e)}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt(x):
    return f"{float(x):.12g}"


def grid_from_range(start, stop, step):
    """Inclusive uniform grid ``start, start+step, ..., <= stop``."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if not stop >= start:
        raise ValueError(f"empty range: {start}..{stop}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _sigma(uncertainty):
    if uncertainty is None or not np.all(uncertainty > 0):
        return None
    return uncertainty


def _is_flat(y):
    scale = max(float(np.max(np.abs(y))), 1e-300)
    return float(np.ptp(y)) <= 1e-12 * scale


def _outer_baseline(x, y, fraction=0.1):
    n = max(2, int(round(fraction * len(x))))
    order = np.argsort(x)
    return float(np.mean(np.concatenate([y[order[:n]], y[order[-n:]]])))


def _extremum(y, baseline):
    return int(np.argmax(np.abs(y - baseline)))


class ShapeTemplate:
    """Dip/peak shape ``s(t)`` with ``s(0) = 1`` sampled once and spline-interpolated.

    ``shape`` is evaluated on ``[-half_range, half_range]`` with step ``step``;
    outside that range the template is taken as zero.
    """

    def __init__(self, shape, half_range, step=0.02):
        t = grid_from_range(-half_range, half_range, step)
        values = np.real(np.asarray(shape(t), dtype=complex))
        self.half_range = half_range
        self.peak = float(np.real(shape(np.array([0.0]))[0]))
        self._spline = CubicSpline(t, values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self._spline(np.clip(t, -self.half_range, self.half_range))
        return np.where(np.abs(t) <= self.half_range, out, 0.0)

    def lobe_fwhm(self):
        """Full width of the central lobe at half its height."""
        half = self.peak / 2
        t = np.linspace(0, self.half_range, 20001)
        v = self(t)
        idx = np.flatnonzero((v - half) * np.sign(self.peak) <= 0)
        if idx.size == 0:
            return math.nan
        i = idx[0]
        t_half = t[i - 1] + (half - v[i - 1]) * (t[i] - t[i - 1]) / (v[i] - v[i - 1])
        return 2.0 * t_half


def fit_dip_template(control, rate, uncertainty, template):
    """Fit ``b (1 - V s(t - c))`` with a known shape ``s``.

    Reports visibility ``(b - model(c)) / b = V s(0)``: positive for a dip,
    negative for a peak.
    """
    x = np.asarray(control, float)
    y = np.asarray(rate, float)
    if _is_flat(y):
        return _flat_result(y)
    b0 = _outer_baseline(x, y)
    k = _extremum(y, b0)
    v0 = (b0 - y[k]) / (b0 * template.peak) if b0 else 0.0

    def model(t, b, v, c):
        return b * (1.0 - v * template(t - c))

    span = x.max() - x.min()
    try:
        popt, pcov = curve_fit(
            model, x, y, p0=[b0, v0, x[k]], sigma=_sigma(uncertainty),
            absolute_sigma=_sigma(uncertainty) is not None,
            bounds=([-np.inf, -2.0, x.min() - 0.1 * span], [np.inf, 2.0, x.max() + 0.1 * span]),
            xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000,
        )
    except (RuntimeError, ValueError) as exc:
        return FitResult(converged=False, message=f"template fit failed: {exc}")
    b, v, c = popt
    errs = np.sqrt(np.clip(np.diag(pcov), 0, None)) if np.all(np.isfinite(pcov)) else [math.nan] * 3
    return FitResult(
        center=float(c), visibility=float(v * template.peak), fwhm=template.lobe_fwhm(),
        baseline=float(b), params={"baseline": b, "amplitude": v, "center": c},
        errors={"baseline": errs[0], "amplitude": errs[1], "center": errs[2]}, covariance=pcov,
    )


def fit_dip_gaussian(control, rate, uncertainty):
    """Baseline-anchored Gaussian dip/peak.

    The baseline is the mean of the outer 10% of points on each side and is
    held fixed; depth, center and width are fitted over the central lobe
    (between the nearest baseline crossings around the extremum).
    """
    x = np.asarray(control, float)
    y = np.asarray(rate, float)
    if _is_flat(y):
        return _flat_result(y)
    order = np.argsort(x)
    x, y = x[order], y[order]
    sig = None if uncertainty is None else np.asarray(uncertainty, float)[order]
    b = _outer_baseline(x, y)
    k = _extremum(y, b)
    sign = np.sign(b - y[k])
    lo = k
    while lo > 0 and sign * (b - y[lo - 1]) > 0:
        lo -= 1
    hi = k
    while hi < len(x) - 1 and sign * (b - y[hi + 1]) > 0:
        hi += 1
    sl = slice(lo, hi + 1)
    if hi - lo + 1 < 3:
        return FitResult(converged=False, baseline=b, message="central lobe has fewer than 3 points")
    width0 = max((x[hi] - x[lo]) / 2.355, 1e-3)

    def model(t, v, c, s):
        return b * (1.0 - v * np.exp(-0.5 * ((t - c) / s) ** 2))

    s_sl = None if sig is None else _sigma(sig[sl])
    try:
        with warnings.catch_warnings():
            # exact data leave the covariance undefined; errors are then reported as nan
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(model, x[sl], y[sl], p0=[(b - y[k]) / b, x[k], width0],
                                   sigma=s_sl, absolute_sigma=s_sl is not None, maxfev=5000)
    except (RuntimeError, ValueError) as exc:
        return FitResult(converged=False, baseline=b, message=f"gaussian fit failed: {exc}")
    v, c, s = popt
    errs = np.sqrt(np.clip(np.diag(pcov), 0, None)) if np.all(np.isfinite(pcov)) else [math.nan] * 3
    return FitResult(
        center=float(c), visibility=float(v), fwhm=float(2.3548200450309493 * abs(s)),
        baseline=b, params={"amplitude": v, "center": c, "sigma": abs(s)},
        errors={"amplitude": errs[0], "center": errs[1], "sigma": errs[2]}, covariance=pcov,
    )


def fit_fringe(angle_deg, rate, uncertainty):
    """Linear least squares for ``c0 + c1 cos(4 theta + c2)``, theta the HWP angle.

    Visibility is ``|c1| / c0``. Parameters are reported as ``c0``, ``ca``,
    ``cb`` with ``c0 + ca cos 4t + cb sin 4t``; ``center`` holds ``c2`` in
    degrees.
    """
    th = np.radians(np.asarray(angle_deg, float))
    y = np.asarray(rate, float)
    if _is_flat(y):
        return _flat_result(y)
    design = np.column_stack([np.ones_like(th), np.cos(4 * th), np.sin(4 * th)])
    sig = _sigma(None if uncertainty is None else np.asarray(uncertainty, float))
    w = np.ones_like(y) if sig is None else 1.0 / sig
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    normal = (design * w[:, None]).T @ (design * w[:, None])
    cov = np.linalg.inv(normal)
    if sig is None:
        resid = y - design @ coef
        dof = max(len(y) - 3, 1)
        cov = cov * float(resid @ resid) / dof
    c0, ca, cb = coef
    c1 = math.hypot(ca, cb)
    phase = math.degrees(math.atan2(-cb, ca))
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        center=phase, visibility=c1 / c0 if c0 else 0.0, baseline=float(c0),
        params={"c0": c0, "ca": ca, "cb": cb}, errors={"c0": errs[0], "ca": errs[1], "cb": errs[2]},
        covariance=cov,
    )


def fringe_model(fit, angle_deg):
    th = np.radians(np.asarray(angle_deg, float))
    p = fit.params
    if not p:
        return np.full_like(th, fit.baseline)
    return p["c0"] + p["ca"] * np.cos(4 * th) + p["cb"] * np.sin(4 * th)


def _flat_result(y):
    return FitResult(visibility=0.0, baseline=float(np.mean(y)), flat=True,
                     message="flat scan: no dip or peak")
