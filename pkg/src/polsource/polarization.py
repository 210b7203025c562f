"""Two-photon polarization state over the (+, -) channel pair and the optics acting on it.

Amplitudes are ordered (H+H-, H+V-, V+H-, V+V-) and handled internally as a
2x2 matrix ``M[p, m]`` with ``p`` the + photon and ``m`` the - photon
polarization. A Jones matrix ``U`` on the + channel acts as ``U @ M``, on the
- channel as ``M @ U.T``.

Temporal walk-off is carried as a classical number next to the amplitudes;
``polsource.interference`` turns it into distinguishability.

Angle conventions: a HWP at ``theta`` (degrees, from H) has Jones matrix
``[[cos 2t, sin 2t], [sin 2t, -cos 2t]]``, so linear analysis at ``alpha``
is a HWP at ``alpha / 2`` followed by a PBS transmitting H. A polarization
rotation by ``alpha`` maps H to ``cos(a) H + sin(a) V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

BASIS = ("HH", "HV", "VH", "VV")
_POL_INDEX = {"H": 0, "V": 1}


@dataclass(frozen=True, eq=False)
class BiphotonState:
    amp: np.ndarray
    walkoff_H_minus_V: float = 0.0
    channel_delay: float = 0.0

    def __post_init__(self):
        a = np.array(self.amp, dtype=complex).reshape(-1)
        if a.shape != (4,):
            raise ValueError(f"expected 4 amplitudes, got shape {a.shape}")
        a.flags.writeable = False
        object.__setattr__(self, "amp", a)
        object.__setattr__(self, "walkoff_H_minus_V", float(self.walkoff_H_minus_V))
        object.__setattr__(self, "channel_delay", float(self.channel_delay))

    @property
    def matrix(self):
        return self.amp.reshape(2, 2)

    def norm(self):
        return float(np.sum(np.abs(self.amp) ** 2))

    def replace(self, amp=None, walkoff_H_minus_V=None, channel_delay=None):
        return BiphotonState(
            self.amp if amp is None else amp,
            self.walkoff_H_minus_V if walkoff_H_minus_V is None else walkoff_H_minus_V,
            self.channel_delay if channel_delay is None else channel_delay,
        )

    def gauge_fixed(self, tol=1e-12):
        """Copy with the first non-negligible amplitude made real positive."""
        nz = np.flatnonzero(np.abs(self.amp) > tol)
        if nz.size == 0:
            return self
        a = self.amp[nz[0]]
        return self.replace(amp=self.amp * (abs(a) / a))

    def equivalent(self, other, atol=1e-9):
        """Equal amplitudes up to global phase, and equal delays."""
        return (
            np.allclose(self.gauge_fixed().amp, other.gauge_fixed().amp, atol=atol)
            and math.isclose(self.walkoff_H_minus_V, other.walkoff_H_minus_V, abs_tol=atol)
            and math.isclose(self.channel_delay, other.channel_delay, abs_tol=atol)
        )

    @property
    def relative_phase(self):
        """Phase of amp[V+H-] relative to amp[H+V-] (radians)."""
        return float(np.angle(self.amp[2] * np.conj(self.amp[1])))

    def to_csv_row(self):
        parts = []
        for a in self.amp:
            parts += [f"{a.real:.17g}", f"{a.imag:.17g}"]
        parts += [f"{self.walkoff_H_minus_V:.17g}", f"{self.channel_delay:.17g}"]
        return ",".join(parts)

    @classmethod
    def from_csv_row(cls, row):
        vals = [float(x) for x in row.strip().split(",")]
        if len(vals) != 10:
            raise ValueError(f"state row needs 10 numbers, got {len(vals)}")
        amp = [complex(vals[i], vals[i + 1]) for i in range(0, 8, 2)]
        return cls(amp, vals[8], vals[9])


def make_psi_phi(phi):
    """(|H>+|V>- + e^{i phi} |V>+|H>-) / sqrt(2)."""
    s = 1.0 / math.sqrt(2.0)
    return BiphotonState([0.0, s, s * np.exp(1j * phi), 0.0])


def product_state(pol_plus, pol_minus):
    amp = np.zeros(4, dtype=complex)
    amp[2 * _POL_INDEX[pol_plus] + _POL_INDEX[pol_minus]] = 1.0
    return BiphotonState(amp)


class ElementKind(str, Enum):
    HWP = "HWP"
    QWP = "QWP"
    GENERAL_UNITARY = "GeneralUnitary"
    SB_PHASE = "SBPhase"
    BIREFRINGENT_DELAY = "BirefringentDelay"
    CHANNEL_DELAY = "ChannelDelay"
    PBS_PROJECT = "PBSProject"


_TARGETS = ("plus", "minus", "both")


@dataclass(frozen=True, eq=False)
class OpticalElement:
    """One optical element.

    ``parameter`` is an angle in degrees (HWP, QWP), a phase in radians
    (SBPhase) or a delay in ps (BirefringentDelay, ChannelDelay).
    GeneralUnitary carries its 2x2 ``matrix``; PBSProject its transmitted
    ``outcome`` ("H" or "V").
    """

    kind: ElementKind
    parameter: float = 0.0
    target: str = "both"
    matrix: np.ndarray | None = None
    outcome: str = "H"

    def __post_init__(self):
        object.__setattr__(self, "kind", ElementKind(self.kind))
        if self.target not in _TARGETS:
            raise ValueError(f"target must be one of {_TARGETS}, got {self.target!r}")
        if not math.isfinite(self.parameter):
            raise ValueError("element parameter must be finite")
        if self.kind is ElementKind.GENERAL_UNITARY:
            m = np.array(self.matrix, dtype=complex)
            if m.shape != (2, 2):
                raise ValueError("GeneralUnitary needs a 2x2 matrix")
            if not np.allclose(m.conj().T @ m, np.eye(2), atol=1e-10):
                raise ValueError("GeneralUnitary matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        if self.outcome not in _POL_INDEX:
            raise ValueError(f"PBS outcome must be 'H' or 'V', got {self.outcome!r}")


def hwp(angle, target="both"):
    return OpticalElement(ElementKind.HWP, angle, target)


def qwp(angle, target="both"):
    return OpticalElement(ElementKind.QWP, angle, target)


def rotation(angle, target="both"):
    """Ideal polarization controller rotating linear polarization by ``angle`` degrees."""
    t = math.radians(angle)
    m = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return OpticalElement(ElementKind.GENERAL_UNITARY, 0.0, target, matrix=m)


def unitary(matrix, target="both"):
    return OpticalElement(ElementKind.GENERAL_UNITARY, 0.0, target, matrix=matrix)


def sb_phase(phi):
    """Soleil-Babinet plate on the + channel: V picks up ``exp(i phi)``."""
    return OpticalElement(ElementKind.SB_PHASE, phi, "plus")


def birefringent_delay(delay_ps):
    """Adds ``delay_ps`` to the H-minus-V walk-off (waveguide positive)."""
    return OpticalElement(ElementKind.BIREFRINGENT_DELAY, delay_ps)


def pmf(length_m, rate_ps_per_m):
    """Polarization-maintaining fiber with its axes rotated by 90 degrees."""
    return birefringent_delay(-rate_ps_per_m * length_m)


def channel_delay(delay_ps):
    """Extra path delay of the + channel relative to the - channel."""
    return OpticalElement(ElementKind.CHANNEL_DELAY, delay_ps, "plus")


def pbs(outcome="H", target="both"):
    return OpticalElement(ElementKind.PBS_PROJECT, 0.0, target, outcome=outcome)


def hwp_matrix(angle):
    t = 2.0 * math.radians(angle)
    return np.array([[math.cos(t), math.sin(t)], [math.sin(t), -math.cos(t)]], dtype=complex)


def qwp_matrix(angle):
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    return np.array(
        [[c * c + 1j * s * s, (1 - 1j) * s * c], [(1 - 1j) * s * c, s * s + 1j * c * c]]
    )


def jones_matrix(element):
    kind = element.kind
    if kind is ElementKind.HWP:
        return hwp_matrix(element.parameter)
    if kind is ElementKind.QWP:
        return qwp_matrix(element.parameter)
    if kind is ElementKind.GENERAL_UNITARY:
        return element.matrix
    if kind is ElementKind.SB_PHASE:
        return np.diag([1.0, np.exp(1j * element.parameter)])
    if kind is ElementKind.PBS_PROJECT:
        p = np.zeros((2, 2), dtype=complex)
        i = _POL_INDEX[element.outcome]
        p[i, i] = 1.0
        return p
    raise ValueError(f"{kind.value} has no Jones matrix")


def apply_element(state, element):
    kind = element.kind
    if kind is ElementKind.BIREFRINGENT_DELAY:
        return state.replace(walkoff_H_minus_V=state.walkoff_H_minus_V + element.parameter)
    if kind is ElementKind.CHANNEL_DELAY:
        return state.replace(channel_delay=state.channel_delay + element.parameter)
    u = jones_matrix(element)
    m = state.matrix
    if element.target in ("plus", "both"):
        m = u @ m
    if element.target in ("minus", "both"):
        m = m @ u.T
    return state.replace(amp=m.reshape(-1))


def apply_elements(state, elements):
    for element in elements:
        state = apply_element(state, element)
    return state


def pbs_project(state, outcome_plus, outcome_minus):
    """Born-rule probability of the joint outcome and the collapsed state.

    Temporal distinguishability is ignored here. The collapsed state is
    renormalized unless the probability is zero.
    """
    idx = 2 * _POL_INDEX[outcome_plus] + _POL_INDEX[outcome_minus]
    prob = float(abs(state.amp[idx]) ** 2)
    amp = np.zeros(4, dtype=complex)
    if prob > 0:
        amp[idx] = state.amp[idx] / math.sqrt(prob)
    return prob, state.replace(amp=amp)


def outcome_probabilities(state):
    return {k: float(abs(a) ** 2) for k, a in zip(BASIS, state.amp)}


def analyzer_projector(angle_plus, angle_minus):
    """Elements for linear analysis at the given angles on each channel."""
    if not (math.isfinite(angle_plus) and math.isfinite(angle_minus)):
        raise ValueError("analyzer angles must be finite")
    return [
        hwp(angle_plus / 2.0, "plus"),
        hwp(angle_minus / 2.0, "minus"),
        pbs("H", "plus"),
        pbs("H", "minus"),
    ]


def transmission_probability(state, elements):
    return apply_elements(state, elements).norm()
