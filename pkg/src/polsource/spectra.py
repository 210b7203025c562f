"""Emission spectra, DWDM filters, pair leakage and the HOM interference kernel.

Frequencies are in THz and delays in ps, so ``nu * tau`` is dimensionless.

Channel labels follow wavelength: ``+`` is the long-wavelength window
(ITU-46, lower frequency) and ``-`` the short-wavelength one (ITU-47).

The pump is monochromatic, so a pair with the H photon at ``nu`` has its V
photon at ``nu_p - nu``. Unless told otherwise, ``nu_p`` is twice the grid
center, which makes the mirror ``nu -> nu_p - nu`` a plain array reversal.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import (
    C_NM_THZ,
    DEGENERATE_WAVELENGTH_NM,
    FILTER_BANDWIDTH_GHZ,
    itu_frequency,
    wavelength_to_frequency,
)

MIN_POINTS_PER_FWHM = 8
# sinc(x)**2 == 1/2 at this x (numpy's normalized sinc)
_SINC2_HALF = 0.44294647


@dataclass(frozen=True)
class FrequencyGrid:
    center_frequency: float
    span: float
    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not self.span > 0:
            raise ValueError(f"span must be positive, got {self.span}")
        if not self.center_frequency - self.span / 2 > 0:
            raise ValueError("grid extends to non-positive frequencies")

    @classmethod
    def around_wavelength(cls, center_nm=DEGENERATE_WAVELENGTH_NM, span_nm=6.0, n_points=4096):
        """Grid centered on ``center_nm`` covering ``span_nm`` of wavelength."""
        lo = C_NM_THZ / (center_nm + span_nm / 2)
        hi = C_NM_THZ / (center_nm - span_nm / 2)
        return cls(wavelength_to_frequency(center_nm), hi - lo, int(n_points))

    @property
    def step(self):
        return self.span / (self.n_points - 1)

    @property
    def frequencies(self):
        return np.linspace(
            self.center_frequency - self.span / 2,
            self.center_frequency + self.span / 2,
            self.n_points,
        )

    @property
    def bounds(self):
        return (self.center_frequency - self.span / 2, self.center_frequency + self.span / 2)

    def refined(self, factor):
        """Same span with ``factor`` times the sample density."""
        return FrequencyGrid(self.center_frequency, self.span, (self.n_points - 1) * factor + 1)


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    grid: FrequencyGrid
    amplitude: np.ndarray
    label: str = ""

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=complex)
        if amp.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitude has shape {amp.shape}, grid expects ({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitude contains non-finite values")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitude", amp)

    @property
    def frequencies(self):
        return self.grid.frequencies

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    def power(self):
        """Trapezoidal integral of |amplitude|^2 over the grid (THz units)."""
        return float(np.trapezoid(self.intensity, dx=self.grid.step))

    def normalized(self):
        p = self.power()
        if p <= 0:
            raise ValueError("cannot normalize an all-zero profile")
        return SpectralProfile(self.grid, self.amplitude / math.sqrt(p), self.label)

    def sqrt_amplitude(self):
        """Profile carrying the square root of this amplitude (principal branch)."""
        return SpectralProfile(self.grid, np.sqrt(self.amplitude), self.label)

    def allclose(self, other, atol=1e-12):
        """Same samples within ``atol`` on grids equal to within float round-off."""
        g, h = self.grid, other.grid
        same_grid = (
            g.n_points == h.n_points
            and math.isclose(g.center_frequency, h.center_frequency, rel_tol=1e-12)
            and math.isclose(g.span, h.span, rel_tol=1e-9)
        )
        return same_grid and np.allclose(self.amplitude, other.amplitude, atol=atol)

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write("frequency_thz,amp_re,amp_im\n")
        for nu, a in zip(self.frequencies, self.amplitude):
            buf.write(f"{nu:.17g},{a.real:.17g},{a.imag:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, label=""):
        """Read a profile written by :meth:`to_csv`; ``source`` is a path or CSV text."""
        text = source
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["frequency_thz", "amp_re", "amp_im"]:
            raise ValueError("expected header 'frequency_thz,amp_re,amp_im'")
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        if data.shape[0] < 2:
            raise ValueError("profile CSV needs at least two rows")
        nu = data[:, 0]
        steps = np.diff(nu)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-6 * abs(steps.mean()):
            raise ValueError("frequencies must be uniformly spaced and increasing")
        grid = FrequencyGrid(float((nu[0] + nu[-1]) / 2), float(nu[-1] - nu[0]), len(nu))
        return cls(grid, data[:, 1] + 1j * data[:, 2], label)


@dataclass(frozen=True)
class FilterSpec:
    """DWDM channel. ``role`` is ``"+"`` (long wavelength) or ``"-"``."""

    itu_center: float
    role: str
    bandwidth_fwhm: float = FILTER_BANDWIDTH_GHZ
    shape_order: float = 4.0

    def __post_init__(self):
        if self.role not in ("+", "-"):
            raise ValueError(f"role must be '+' or '-', got {self.role!r}")
        if not self.itu_center > 0:
            raise ValueError("itu_center must be a positive wavelength in nm")
        if not self.bandwidth_fwhm > 0:
            raise ValueError("bandwidth_fwhm must be positive")
        if not self.shape_order >= 1:
            raise ValueError("shape_order must be >= 1")

    @classmethod
    def itu(cls, channel, role, bandwidth_fwhm=FILTER_BANDWIDTH_GHZ, shape_order=4.0):
        return cls(C_NM_THZ / itu_frequency(channel), role, bandwidth_fwhm, shape_order)

    @property
    def center_frequency(self):
        return wavelength_to_frequency(self.itu_center)


def _fwhm_nm_to_thz(center_nm, fwhm_nm):
    return C_NM_THZ / (center_nm - fwhm_nm / 2) - C_NM_THZ / (center_nm + fwhm_nm / 2)


def make_source_spectrum(polarization, center, fwhm, grid, shape="gaussian"):
    """Normalized real-positive emission envelope for one polarization.

    ``center`` and ``fwhm`` are in nm; the FWHM refers to the spectral
    density |amplitude|^2. ``shape`` is ``"gaussian"`` or ``"sinc2"``
    (phase-matching envelope).
    """
    if polarization not in ("H", "V"):
        raise ValueError(f"polarization must be 'H' or 'V', got {polarization!r}")
    if not fwhm > 0:
        raise ValueError("fwhm must be positive")
    nu0 = wavelength_to_frequency(center)
    lo, hi = grid.bounds
    if not lo < nu0 < hi:
        raise ValueError(f"center {center} nm ({nu0:.4f} THz) lies outside the grid")
    width = _fwhm_nm_to_thz(center, fwhm)
    if width / grid.step < MIN_POINTS_PER_FWHM:
        raise ValueError(
            f"grid too coarse: {width / grid.step:.1f} points across the FWHM, "
            f"need at least {MIN_POINTS_PER_FWHM}"
        )
    x = (grid.frequencies - nu0) / width
    if shape == "gaussian":
        amp = np.exp(-2.0 * math.log(2.0) * x**2)
    elif shape == "sinc2":
        amp = np.abs(np.sinc(2.0 * _SINC2_HALF * x))
    else:
        raise ValueError(f"unknown spectral shape {shape!r}")
    return SpectralProfile(grid, amp, f"source_{polarization}").normalized()


def measure_fwhm(profile):
    """FWHM (THz) of |amplitude|^2, linearly interpolated at the half-maximum crossings."""
    y = profile.intensity
    nu = profile.frequencies
    k = int(np.argmax(y))
    half = y[k] / 2
    if half <= 0:
        raise ValueError("profile is identically zero")
    left = k
    while left > 0 and y[left] > half:
        left -= 1
    right = k
    while right < len(y) - 1 and y[right] > half:
        right += 1
    if y[left] > half or y[right] > half:
        raise ValueError("half-maximum not reached inside the grid")
    nl = nu[left] + (half - y[left]) * (nu[left + 1] - nu[left]) / (y[left + 1] - y[left])
    nr = nu[right - 1] + (half - y[right - 1]) * (nu[right] - nu[right - 1]) / (y[right] - y[right - 1])
    return nr - nl


def make_dwdm_filter(spec, grid):
    """Amplitude transmission of a flat-top DWDM channel.

    Intensity transmission is ``exp(-ln2 * |2 d / FWHM|**(2 m))`` with ``m`` the
    shape order, so ``m = 1`` is a Gaussian and large ``m`` approaches a box.
    """
    nu_c = spec.center_frequency
    width = spec.bandwidth_fwhm * 1e-3
    lo, hi = grid.bounds
    if nu_c - width < lo or nu_c + width > hi:
        raise ValueError(
            f"filter passband {nu_c - width:.4f}..{nu_c + width:.4f} THz "
            f"is not contained in the grid {lo:.4f}..{hi:.4f} THz"
        )
    d = np.abs(2.0 * (grid.frequencies - nu_c) / width)
    transmission = np.exp(-math.log(2.0) * d ** (2.0 * spec.shape_order))
    return SpectralProfile(grid, np.sqrt(transmission), f"dwdm{spec.role}")


def window_filter(grid, low, high, label="window"):
    """Ideal rectangular filter passing ``low <= nu < high`` (THz)."""
    nu = grid.frequencies
    return SpectralProfile(grid, ((nu >= low) & (nu < high)).astype(float), label)


def _check_same_grid(*profiles):
    g = profiles[0].grid
    for p in profiles[1:]:
        if p.grid != g:
            raise ValueError(f"grid mismatch: {p.grid} vs {g}")
    return g


def filtered_profile(source, filt):
    """Pointwise amplitude product; deliberately not renormalized."""
    _check_same_grid(source, filt)
    label = f"{source.label}*{filt.label}" if source.label or filt.label else ""
    return SpectralProfile(source.grid, source.amplitude * filt.amplitude, label)


def filter_overlap(filt_a, filt_b):
    """Intensity transmission where the two filter edges cross (max of the pointwise min)."""
    _check_same_grid(filt_a, filt_b)
    return float(np.max(np.minimum(filt_a.intensity, filt_b.intensity)))


def _pump(grid, pump_frequency):
    return 2.0 * grid.center_frequency if pump_frequency is None else float(pump_frequency)


def mirrored(values, grid, pump_frequency=None):
    """Sample ``values`` at the conjugate frequency ``nu_p - nu`` (zero off-grid)."""
    nu_p = _pump(grid, pump_frequency)
    lo, hi = grid.bounds
    if abs(nu_p - (lo + hi)) <= 1e-12 * nu_p:
        return np.asarray(values)[::-1]
    target = nu_p - grid.frequencies
    values = np.asarray(values)
    out = np.interp(target, grid.frequencies, values.real, left=0.0, right=0.0)
    if np.iscomplexobj(values):
        out = out + 1j * np.interp(target, grid.frequencies, values.imag, left=0.0, right=0.0)
    return out


def pair_density(source_H, source_V, pump_frequency=None):
    """Normalized pair density versus the H photon frequency.

    Equal to the geometric mean ``|A_H(nu)| |A_V(nu_p - nu)|``, so each photon
    keeps the marginal bandwidth of its emission spectrum.
    """
    grid = _check_same_grid(source_H, source_V)
    w = np.abs(source_H.amplitude) * np.abs(mirrored(source_V.amplitude, grid, pump_frequency))
    total = np.trapezoid(w, dx=grid.step)
    if total <= 0:
        raise ValueError("source spectra do not overlap under the pump energy constraint")
    return w / total


def same_side_probability(source_H, source_V, filt_plus, filt_minus, pump_frequency=None):
    """Fraction of transmitted pairs whose two photons end up in the same window.

    The filters are cascaded as in the setup: the ``+`` DWDM transmits its
    channel and reflects the rest into the ``-`` DWDM, so a photon at ``nu``
    reaches ``+`` with probability ``T+(nu)`` and ``-`` with
    ``(1 - T+(nu)) T-(nu)``.
    """
    grid = _check_same_grid(source_H, source_V, filt_plus, filt_minus)
    w = pair_density(source_H, source_V, pump_frequency)
    p_plus = filt_plus.intensity
    p_minus = (1.0 - p_plus) * filt_minus.intensity
    q_plus = mirrored(p_plus, grid, pump_frequency)
    q_minus = mirrored(p_minus, grid, pump_frequency)
    same = np.trapezoid(w * (p_plus * q_plus + p_minus * q_minus), dx=grid.step)
    split = np.trapezoid(w * (p_plus * q_minus + p_minus * q_plus), dx=grid.step)
    total = same + split
    if not total > 0:
        raise ZeroDivisionError("filters transmit no pairs; same-side fraction undefined")
    return float(same / total)


def channel_profiles(source_H, source_V, filt_plus, filt_minus):
    """Per-channel inputs for :class:`SpectralKernel` built from sources and filters.

    The kernel multiplies a ``+`` profile by a mirrored ``-`` profile. Passing
    the square root of each source amplitude makes that product carry the pair
    amplitude ``sqrt(A_H A_V) F+ F-``, consistent with :func:`pair_density`.
    """
    rh, rv = source_H.sqrt_amplitude(), source_V.sqrt_amplitude()
    return {
        "plus_H": filtered_profile(rh, filt_plus),
        "plus_V": filtered_profile(rv, filt_plus),
        "minus_H": filtered_profile(rh, filt_minus),
        "minus_V": filtered_profile(rv, filt_minus),
    }


# tau values evaluated per vectorized block; fixed so results never depend on batching
_KERNEL_BLOCK = 64


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """Overlap G(tau) of the |H+V-> and |V+H-> two-photon spectral amplitudes.

    Both amplitudes are written as functions of the ``+`` photon frequency
    ``nu``. A delay ``tau`` on H gives the first term ``exp(2i pi nu tau)`` and
    the second ``exp(2i pi (nu_p - nu) tau)``; a delay on the ``+`` channel
    multiplies both by the same factor and cancels.
    """

    plus_H: SpectralProfile
    plus_V: SpectralProfile
    minus_H: SpectralProfile
    minus_V: SpectralProfile
    pump_frequency: float | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = _check_same_grid(self.plus_H, self.plus_V, self.minus_H, self.minus_V)
        first = self.plus_H.amplitude * mirrored(self.minus_V.amplitude, grid, self.pump_frequency)
        second = self.plus_V.amplitude * mirrored(self.minus_H.amplitude, grid, self.pump_frequency)
        n1 = np.trapezoid(np.abs(first) ** 2, dx=grid.step)
        n2 = np.trapezoid(np.abs(second) ** 2, dx=grid.step)
        if not (n1 > 0 and n2 > 0):
            raise ValueError("a two-photon amplitude is identically zero")
        self._cache["product"] = np.conj(first) * second / math.sqrt(n1 * n2)
        nu_p = _pump(grid, self.pump_frequency)
        self._cache["offset"] = nu_p - 2.0 * grid.frequencies

    @classmethod
    def from_sources(cls, source_H, source_V, filt_plus, filt_minus, pump_frequency=None):
        return cls(**channel_profiles(source_H, source_V, filt_plus, filt_minus),
                   pump_frequency=pump_frequency)

    @property
    def grid(self):
        return self.plus_H.grid

    def __call__(self, tau, channel_delay=0.0):
        taus = np.asarray(tau, dtype=float)
        if not np.all(np.isfinite(taus)):
            raise ValueError("tau must be finite")
        flat = taus.ravel()
        product = self._cache["product"]
        if channel_delay:
            phase = np.exp(2j * np.pi * self.grid.frequencies * channel_delay)
            product = np.conj(phase) * phase * product
        offset = self._cache["offset"]
        out = np.empty(flat.shape, dtype=complex)
        for start in range(0, flat.size, _KERNEL_BLOCK):
            block = flat[start:start + _KERNEL_BLOCK]
            integrand = product[None, :] * np.exp(2j * np.pi * block[:, None] * offset[None, :])
            out[start:start + _KERNEL_BLOCK] = np.trapezoid(integrand, dx=self.grid.step, axis=1)
        if taus.ndim == 0:
            return complex(out[0])
        return out.reshape(taus.shape)


def interference_kernel(profile_plus_H, profile_plus_V, profile_minus_H, profile_minus_V, tau,
                        pump_frequency=None):
    """G(tau) for the given filtered channel profiles; see :class:`SpectralKernel`."""
    kernel = SpectralKernel(profile_plus_H, profile_plus_V, profile_minus_H, profile_minus_V,
                            pump_frequency)
    return kernel(tau)
