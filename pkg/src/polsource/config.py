"""Experiment configuration: typed, sectioned key-value files with strict parsing.

A config file is INI-style. Every key belongs to a known section and has a
fixed type; unknown sections or keys are errors. ``[experiment] preset``
names a starting preset that the remaining keys override.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field, fields

from . import constants as k

SCENARIOS = ("spectrum", "hom_scan", "phase_scan", "bell_fringe", "chsh", "budget")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentSection:
    scenario: str = "hom_scan"
    seed: int = 1
    preset: str = ""
    output_dir: str = ""


@dataclass
class SourceSection:
    center_nm: float = k.DEGENERATE_WAVELENGTH_NM
    fwhm_nm: float = k.EMISSION_FWHM_NM
    shape: str = "gaussian"
    pump_nm: float = k.PUMP_WAVELENGTH_NM
    pump_mw: float = k.PUMP_POWER_MW
    brightness: float = k.BRIGHTNESS_PAIRS_S_MW_GHZ
    walkoff_ps: float = k.WAVEGUIDE_WALKOFF_PS
    pmf_rate_ps_per_m: float = k.PMF_RATE_PS_PER_M
    pmf_length_m: float = 0.0
    grid_points: int = 4096
    grid_span_nm: float = 6.0


@dataclass
class FiltersSection:
    plus_channel: int = k.PLUS_CHANNEL
    minus_channel: int = k.MINUS_CHANNEL
    fwhm_ghz: float = k.FILTER_BANDWIDTH_GHZ
    shape_order: float = 4.0


@dataclass
class DetectorsSection:
    noise: bool = False
    det1_label: str = "IDQ-220"
    det1_efficiency: float = 0.20
    det1_dark_per_ns: float = 1e-6
    det1_mode: str = "free_running"
    det2_label: str = "IDQ-220"
    det2_efficiency: float = 0.20
    det2_dark_per_ns: float = 1e-6
    det2_mode: str = "free_running"
    window_ns: float = 1.0
    transmission: float = 0.5
    analyzer_pass: float = 0.5
    integration_s: float = 1.0


@dataclass
class HomSection:
    delay_min_ps: float = -20.0
    delay_max_ps: float = 20.0
    delay_step_ps: float = 0.2
    phase_rad: float = 0.0
    visibility_factor: float = 1.0
    channel_delay_ps: float = 0.0
    fit_model: str = "kernel"


@dataclass
class BellSection:
    alice_angles: tuple = (0.0, 90.0, 45.0, -45.0)
    bob_min_deg: float = 0.0
    bob_max_deg: float = 87.5
    bob_step_deg: float = 2.5
    chsh_angles: tuple = (0.0, 45.0, 22.5, 67.5)
    source_visibility: float = 1.0
    phase_rad: float = 0.0


@dataclass
class BudgetSection:
    reported_coincidence_rate: float = k.REPORTED_COINCIDENCE_RATE


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    source: SourceSection = field(default_factory=SourceSection)
    filters: FiltersSection = field(default_factory=FiltersSection)
    detectors: DetectorsSection = field(default_factory=DetectorsSection)
    hom: HomSection = field(default_factory=HomSection)
    bell: BellSection = field(default_factory=BellSection)
    budget: BudgetSection = field(default_factory=BudgetSection)

    def copy(self):
        return dataclasses.replace(
            self, **{f.name: dataclasses.replace(getattr(self, f.name)) for f in fields(self)}
        )

    def to_ini(self):
        return dump_config(self)


_SECTIONS = [f.name for f in fields(ExperimentConfig)]


def _field_types(section_cls):
    hints = {f.name: f.default for f in fields(section_cls)}
    return {name: type(default) for name, default in hints.items()}


def _parse_value(raw, typ, where):
    text = raw.strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if typ is int:
            return int(text)
        if typ is float:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError("non-finite number")
            return v
        if typ is tuple:
            parts = [p for p in text.split(",") if p.strip()]
            vals = tuple(float(p) for p in parts)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("non-finite number in list")
            return vals
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def _new_parser():
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       default_section="__unused_default__")
    parser.optionxform = str
    return parser


def parse_config(text, presets=None):
    """Parse config text into an :class:`ExperimentConfig` (strict)."""
    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for section in parser.sections():
        if section not in _SECTIONS and section != "manifest":
            raise ConfigError(f"unknown section [{section}]")

    cfg = ExperimentConfig()
    preset_name = parser.get("experiment", "preset", fallback="").strip()
    if preset_name:
        if presets is None:
            from .presets import preset as presets
        try:
            cfg = presets(preset_name)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None

    for section in _SECTIONS:
        if not parser.has_section(section):
            continue
        target = getattr(cfg, section)
        types = _field_types(type(target))
        for key, raw in parser.items(section):
            if key not in types:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            setattr(target, key, _parse_value(raw, types[key], f"[{section}] {key}"))
    return cfg


def dump_config(cfg, extra=None):
    """Fully resolved config text; :func:`parse_config` reads it back unchanged."""
    parser = _new_parser()
    for section in _SECTIONS:
        parser.add_section(section)
        for f in fields(getattr(cfg, section)):
            parser.set(section, f.name, _format_value(getattr(getattr(cfg, section), f.name)))
    if extra:
        parser.add_section("manifest")
        for key, val in extra.items():
            parser.set("manifest", key, str(val))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
