"""Detector count statistics: rates, accidentals, Poisson sampling, raw/net visibility."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import BRIGHTNESS_PAIRS_S_MW_GHZ, REPORTED_COINCIDENCE_RATE

log = logging.getLogger(__name__)

FREE_RUNNING = "free_running"
GATED = "gated"


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float
    dark_prob_per_ns: float
    mode: str = FREE_RUNNING
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if not self.dark_prob_per_ns >= 0.0:
            raise ValueError(f"dark_prob_per_ns must be >= 0, got {self.dark_prob_per_ns}")
        if self.mode not in (FREE_RUNNING, GATED):
            raise ValueError(f"mode must be {FREE_RUNNING!r} or {GATED!r}")

    @property
    def dark_rate(self):
        """Dark counts per second if the detector were always armed."""
        return self.dark_prob_per_ns * 1e9


IDQ_220 = DetectorParams(0.20, 1e-6, FREE_RUNNING, "IDQ-220")
IDQ_201 = DetectorParams(0.25, 1e-5, GATED, "IDQ-201")
SUPERCONDUCTING = DetectorParams(0.20, 1e-9, FREE_RUNNING, "superconducting")
IDEAL = DetectorParams(1.0, 0.0, FREE_RUNNING, "ideal")


@dataclass(frozen=True)
class CountingConfig:
    """Counting setup.

    ``analyzer_pass`` is the probability that a single photon reaches its
    detector through the polarization analysis (1/2 behind a PBS port for an
    unpolarized marginal); it scales the singles but not the coincidences,
    whose post-selection is carried by the coincidence probability itself.
    """

    coincidence_window: float = 1.0
    integration_time: float = 1.0
    pair_rate_at_source: float = 0.0
    per_photon_transmission: float = 0.5
    detectors: tuple = (IDQ_220, IDQ_220)
    rng_seed: int = 0
    analyzer_pass: float = 1.0

    def __post_init__(self):
        if not self.coincidence_window > 0:
            raise ValueError("coincidence_window must be positive (ns)")
        if not self.integration_time > 0:
            raise ValueError("integration_time must be positive (s)")
        if not self.pair_rate_at_source >= 0:
            raise ValueError("pair_rate_at_source must be >= 0")
        if not 0.0 <= self.per_photon_transmission <= 1.0:
            raise ValueError("per_photon_transmission must be in [0, 1]")
        if not 0.0 <= self.analyzer_pass <= 1.0:
            raise ValueError("analyzer_pass must be in [0, 1]")
        if len(self.detectors) != 2:
            raise ValueError("exactly two detectors are required")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


def db_to_transmission(loss_db):
    return 10.0 ** (-loss_db / 10.0)


def brightness_to_pair_rate(brightness, pump_mw, bandwidth_ghz):
    """Generated pairs per second from a spectral brightness in pairs/s/mW/GHz."""
    if brightness < 0 or pump_mw < 0 or bandwidth_ghz < 0:
        raise ValueError("brightness, pump power and bandwidth must be >= 0")
    return brightness * pump_mw * bandwidth_ghz


@dataclass(frozen=True)
class ExpectedRates:
    singles1: float
    singles2: float
    true_coinc: float
    accidental_coinc: float

    @property
    def total_coinc(self):
        return self.true_coinc + self.accidental_coinc

    def as_dict(self):
        return {
            "singles1": self.singles1,
            "singles2": self.singles2,
            "true_coinc": self.true_coinc,
            "accidental_coinc": self.accidental_coinc,
        }


def expected_rates(config, ideal_coincidence_prob):
    """Mean rates (1/s) for a given post-selection probability.

    Accidentals use the window-product estimator ``S1 S2 w``. A gated second
    detector is only armed while a gate (one window long) is open after a
    first-detector click, so its reported singles are the clicks falling in
    gates; its accidental contribution is the same window product.
    """
    p = float(ideal_coincidence_prob)
    if not 0.0 <= p <= 1.0 + 1e-12:
        raise ValueError(f"coincidence probability must be in [0, 1], got {p}")
    d1, d2 = config.detectors
    pair = config.pair_rate_at_source
    t = config.per_photon_transmission
    photon1 = pair * t * d1.efficiency * config.analyzer_pass
    photon2 = pair * t * d2.efficiency * config.analyzer_pass
    s1 = photon1 + d1.dark_rate
    armed2 = photon2 + d2.dark_rate
    window_s = config.coincidence_window * 1e-9
    true = pair * t * t * d1.efficiency * d2.efficiency * p
    acc = s1 * armed2 * window_s
    s2 = true + acc if d2.mode == GATED else armed2
    return ExpectedRates(s1, s2, true, acc)


def point_rng(seed, *key):
    """Independent generator for one scan point, derived from ``(seed, key)`` only."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


CATEGORIES = ("singles1", "singles2", "true_coinc", "accidental_coinc")


@dataclass(frozen=True)
class CountRecord:
    counts: dict = field(default_factory=dict)
    integration_time: float = 1.0
    seed: int | None = None

    @property
    def coincidences(self):
        return self.counts["true_coinc"] + self.counts["accidental_coinc"]

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write("category,count\n")
        for k in CATEGORIES:
            buf.write(f"{k},{self.counts[k]}\n")
        buf.write(f"coincidences,{self.coincidences}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def simulate_counts(config, expected, rng=None):
    """Poisson counts per category over ``config.integration_time``.

    Without an explicit ``rng`` the generator comes from ``config.rng_seed``,
    so the record is a pure function of its inputs.
    """
    if rng is None:
        rng = point_rng(config.rng_seed)
    t = config.integration_time
    rates = expected.as_dict()
    counts = {k: int(rng.poisson(max(rates[k], 0.0) * t)) for k in CATEGORIES}
    return CountRecord(counts, t, config.rng_seed)


def sample_coincidences(config, probabilities, stream=0, workers=1):
    """Poisson coincidence counts for each probability, one RNG stream per point."""
    probs = np.asarray(probabilities, float)
    t = config.integration_time

    def one(i):
        r = expected_rates(config, probs[i])
        return point_rng(config.rng_seed, stream, i).poisson(r.total_coinc * t)

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(one, range(len(probs))))
    else:
        counts = [one(i) for i in range(len(probs))]
    return np.array(counts, dtype=np.int64)


@dataclass(frozen=True)
class VisibilityPair:
    raw: float
    net: float
    clamped: bool = False
    net_scan: object = None


def raw_and_net_visibility(fringe_counts, accidental_rate, integration_time):
    """Raw visibility from the scan's fit, net after removing accidentals from every point.

    Points driven negative by the subtraction are clamped at zero and flagged.
    """
    rate = np.asarray(fringe_counts.rate, float)
    if np.any(rate < 0):
        raise ValueError("counts must be non-negative")
    background = accidental_rate * integration_time
    net_counts = rate - background
    clamped = bool(np.any(net_counts < 0))
    if clamped:
        log.warning("background subtraction drove %d point(s) negative; clamped at 0",
                    int(np.sum(net_counts < 0)))
        net_counts = np.clip(net_counts, 0.0, None)
    if background == 0:
        net_scan = fringe_counts
    else:
        net_scan = fringe_counts.refit(net_counts, np.sqrt(np.maximum(rate, 1.0)),
                                       subtracted=background)
    return VisibilityPair(fringe_counts.fit.visibility, net_scan.fit.visibility, clamped, net_scan)


def accidentals_from_tag_streams(rate1, rate2, window_ns, duration_s, rng):
    """Event-level count of coincidences between two independent Poisson click streams.

    A coincidence is any pair of clicks with ``|t1 - t2| <= window/2``.
    """
    n1 = rng.poisson(rate1 * duration_s)
    n2 = rng.poisson(rate2 * duration_s)
    t1 = np.sort(rng.uniform(0.0, duration_s, n1))
    t2 = np.sort(rng.uniform(0.0, duration_s, n2))
    half = window_ns * 1e-9 / 2
    lo = np.searchsorted(t2, t1 - half, side="left")
    hi = np.searchsorted(t2, t1 + half, side="right")
    return int(np.sum(hi - lo))


@dataclass(frozen=True)
class BudgetReport:
    brightness: float
    pump_mw: float
    bandwidth_ghz: float
    pair_rate: float
    per_photon_transmission: float
    efficiencies: tuple
    singles: tuple
    expected_coincidences: float
    reported_coincidences: float

    @property
    def discrepancy_factor(self):
        """Expected over reported coincidence rate (> 1: losses the model does not include)."""
        if self.reported_coincidences <= 0:
            return math.inf
        return self.expected_coincidences / self.reported_coincidences

    def to_text(self):
        rows = [
            ("brightness_pairs_per_s_mw_ghz", self.brightness),
            ("pump_mw", self.pump_mw),
            ("bandwidth_ghz", self.bandwidth_ghz),
            ("pair_rate_per_s", self.pair_rate),
            ("per_photon_transmission", self.per_photon_transmission),
            ("per_photon_loss_db", -10 * math.log10(self.per_photon_transmission)
             if self.per_photon_transmission > 0 else math.inf),
            ("efficiency_1", self.efficiencies[0]),
            ("efficiency_2", self.efficiencies[1]),
            ("singles_1_per_s", self.singles[0]),
            ("singles_2_per_s", self.singles[1]),
            ("expected_coincidences_per_s", self.expected_coincidences),
            ("reported_coincidences_per_s", self.reported_coincidences),
            ("discrepancy_factor", self.discrepancy_factor),
        ]
        return "".join(f"{k} = {v:.6g}\n" for k, v in rows)


def source_budget(config, pump_mw, bandwidth_ghz, brightness=BRIGHTNESS_PAIRS_S_MW_GHZ,
                  coincidence_prob=1.0, reported=REPORTED_COINCIDENCE_RATE):
    """Rate/loss budget from brightness to detected coincidences, without polarization analysis."""
    pair = brightness_to_pair_rate(brightness, pump_mw, bandwidth_ghz)
    cfg = CountingConfig(config.coincidence_window, config.integration_time, pair,
                         config.per_photon_transmission, config.detectors, config.rng_seed, 1.0)
    r = expected_rates(cfg, coincidence_prob)
    return BudgetReport(brightness, pump_mw, bandwidth_ghz, pair, config.per_photon_transmission,
                        tuple(d.efficiency for d in config.detectors), (r.singles1, r.singles2),
                        r.total_coinc, reported)
