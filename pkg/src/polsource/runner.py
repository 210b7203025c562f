"""Scenario execution: config -> module objects -> output files."""

from __future__ import annotations

import hashlib
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .bell import BellSettings, bell_report, chsh_S, fringe_set
from .config import SCENARIOS, ConfigError, dump_config
from .constants import C_NM_THZ, wavelength_to_frequency
from .detection import (
    CountingConfig,
    DetectorParams,
    brightness_to_pair_rate,
    raw_and_net_visibility,
    source_budget,
)
from .fitting import grid_from_range
from .interference import HomConfig, channel_delay_sweep, coherence_time, scan
from .polarization import apply_element, birefringent_delay, channel_delay, make_psi_phi, pmf
from .spectra import (
    FilterSpec,
    FrequencyGrid,
    SpectralKernel,
    filter_overlap,
    make_dwdm_filter,
    make_source_spectrum,
    measure_fwhm,
    same_side_probability,
)

OUTPUT_ENV = "POLSOURCE_OUTPUT_DIR"
DEFAULT_OUTPUT = "polsource-out"


@dataclass
class Setup:
    """Validated module objects for one config."""

    config: object
    grid: FrequencyGrid
    source_H: object
    source_V: object
    filt_plus: object
    filt_minus: object
    pump_frequency: float
    counting: CountingConfig | None
    bell: BellSettings
    pair_rate: float

    _kernel: SpectralKernel | None = None

    @property
    def kernel(self):
        if self._kernel is None:
            self._kernel = SpectralKernel(
                **_channel_profiles(self), pump_frequency=self.pump_frequency
            )
        return self._kernel

    def state(self, phase):
        c = self.config
        s = make_psi_phi(phase)
        s = apply_element(s, birefringent_delay(c.source.walkoff_ps))
        if c.source.pmf_length_m:
            s = apply_element(s, pmf(c.source.pmf_length_m, c.source.pmf_rate_ps_per_m))
        return s

    def hom_config(self, phase, channel_delay_ps=0.0):
        h = self.config.hom
        s = self.state(phase)
        if channel_delay_ps:
            s = apply_element(s, channel_delay(channel_delay_ps))
        return HomConfig(s, self.kernel, (h.delay_min_ps, h.delay_max_ps, h.delay_step_ps),
                         h.visibility_factor)


def _channel_profiles(setup):
    from .spectra import channel_profiles

    return channel_profiles(setup.source_H, setup.source_V, setup.filt_plus, setup.filt_minus)


def _detector(d, n):
    return DetectorParams(getattr(d, f"det{n}_efficiency"), getattr(d, f"det{n}_dark_per_ns"),
                          getattr(d, f"det{n}_mode"), getattr(d, f"det{n}_label"))


def build(cfg):
    """Validate every module precondition the scenario can reach; raise ConfigError."""
    e = cfg.experiment
    if e.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {e.scenario!r}; expected one of {', '.join(SCENARIOS)}")
    if not 0 <= e.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    s, f, d, h, b = cfg.source, cfg.filters, cfg.detectors, cfg.hom, cfg.bell
    try:
        if not s.pump_nm > 0:
            raise ValueError("pump_nm must be positive")
        if not s.grid_span_nm > 0 or not s.grid_span_nm < s.center_nm:
            raise ValueError("grid_span_nm must be positive and smaller than center_nm")
        if s.pmf_length_m < 0:
            raise ValueError("pmf_length_m must be >= 0")
        if not s.pmf_rate_ps_per_m > 0:
            raise ValueError("pmf_rate_ps_per_m must be positive")
        if s.pump_mw < 0 or s.brightness < 0:
            raise ValueError("pump_mw and brightness must be >= 0")
        grid = FrequencyGrid.around_wavelength(s.center_nm, s.grid_span_nm, s.grid_points)
        pump_frequency = wavelength_to_frequency(s.pump_nm)
        src_h = make_source_spectrum("H", s.center_nm, s.fwhm_nm, grid, s.shape)
        src_v = make_source_spectrum("V", s.center_nm, s.fwhm_nm, grid, s.shape)
        fp = make_dwdm_filter(FilterSpec.itu(f.plus_channel, "+", f.fwhm_ghz, f.shape_order), grid)
        fm = make_dwdm_filter(FilterSpec.itu(f.minus_channel, "-", f.fwhm_ghz, f.shape_order), grid)
        if f.plus_channel >= f.minus_channel:
            raise ValueError("the + (long-wavelength) channel must have the lower ITU number")
        pair_rate = brightness_to_pair_rate(s.brightness, s.pump_mw, f.fwhm_ghz)
        counting = None
        if d.noise:
            counting = CountingConfig(d.window_ns, d.integration_s, pair_rate, d.transmission,
                                      (_detector(d, 1), _detector(d, 2)), e.seed, d.analyzer_pass)
        elif cfg.experiment.scenario == "budget":
            raise ValueError("budget scenario needs [detectors] noise = true")
        bob = tuple(grid_from_range(b.bob_min_deg, b.bob_max_deg, b.bob_step_deg).tolist())
        if len(bob) < 3:
            raise ValueError("Bob scan needs at least three angles")
        bell = BellSettings(tuple(b.alice_angles), bob, tuple(b.chsh_angles))
        if not 0 <= b.source_visibility <= 1:
            raise ValueError("source_visibility must be in [0, 1]")
        if e.scenario == "chsh":
            for a in bell.chsh_angles[:2]:
                for needed in (a, a + 90.0):
                    if not any(math.isclose((x - needed + 90) % 180 - 90, 0, abs_tol=1e-9)
                               for x in bell.alice_angles):
                        raise ValueError(f"chsh needs an Alice fringe at {needed:g} deg (mod 180)")
        grid_from_range(h.delay_min_ps, h.delay_max_ps, h.delay_step_ps)
        if not h.delay_max_ps > h.delay_min_ps:
            raise ValueError("empty delay range")
        if not 0 <= h.visibility_factor <= 1:
            raise ValueError("visibility_factor must be in [0, 1]")
        if h.fit_model not in ("kernel", "gaussian"):
            raise ValueError(f"unknown fit_model {h.fit_model!r}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return Setup(cfg, grid, src_h, src_v, fp, fm, pump_frequency, counting, bell, pair_rate)


def _fmt(x):
    return f"{float(x):.12g}"


def _kv(rows):
    return "".join(f"{k} = {v}\n" for k, v in rows)


def _hom_outputs(setup, phase, channel_delay_ps, name, workers, stream=0):
    hcfg = setup.hom_config(phase, channel_delay_ps)
    res = scan(hcfg, setup.counting, fit_model=setup.config.hom.fit_model, workers=workers,
               stream=stream)
    header = [f"phase_rad={_fmt(phase)}",
              f"walkoff_H_minus_V_ps={_fmt(hcfg.state.walkoff_H_minus_V)}",
              f"channel_delay_ps={_fmt(hcfg.state.channel_delay)}",
              f"device_visibility_factor={_fmt(hcfg.device_visibility_factor)}"]
    if setup.counting is not None:
        vis = raw_and_net_visibility(res, res.meta["accidental_rate"], res.meta["integration_time"])
        header += [f"raw_visibility={_fmt(vis.raw)}", f"net_visibility={_fmt(vis.net)}",
                   f"accidental_rate={_fmt(res.meta['accidental_rate'])}"]
    return {name: res.to_csv(extra_header=header)}, res


def run_spectrum(setup, workers=1):
    out = {
        "source_H.csv": setup.source_H.to_csv(),
        "source_V.csv": setup.source_V.to_csv(),
        "filter_plus.csv": setup.filt_plus.to_csv(),
        "filter_minus.csv": setup.filt_minus.to_csv(),
    }
    center = setup.config.source.center_nm
    fwhm_thz = measure_fwhm(setup.source_H)
    fwhm_nm = C_NM_THZ * fwhm_thz / wavelength_to_frequency(center) ** 2
    rows = [
        ("same_side_probability", _fmt(same_side_probability(
            setup.source_H, setup.source_V, setup.filt_plus, setup.filt_minus,
            setup.pump_frequency))),
        ("filter_crossover_transmission", _fmt(filter_overlap(setup.filt_plus, setup.filt_minus))),
        ("source_fwhm_thz", _fmt(fwhm_thz)),
        ("source_fwhm_nm", _fmt(fwhm_nm)),
        ("kernel_half_coherence_ps", _fmt(coherence_time(setup.kernel))),
    ]
    out["spectrum_summary.txt"] = _kv(rows)
    return out


def run_hom(setup, workers=1):
    out, _ = _hom_outputs(setup, setup.config.hom.phase_rad, setup.config.hom.channel_delay_ps,
                          "hom_scan.csv", workers)
    return out


def run_phase(setup, workers=1):
    h = setup.config.hom
    out = {}
    fits = []
    for i, (phase, name) in enumerate(((0.0, "phase_0.csv"), (math.pi, "phase_pi.csv"))):
        o, res = _hom_outputs(setup, phase, h.channel_delay_ps, name, workers, stream=i)
        out.update(o)
        fits.append(res.fit)
    probs = channel_delay_sweep(setup.hom_config(math.pi), [0.0, h.channel_delay_ps])
    rows = [
        ("dip_visibility", _fmt(fits[0].visibility)),
        ("peak_visibility", _fmt(fits[1].visibility)),
        ("dip_center_ps", _fmt(fits[0].center)),
        ("peak_center_ps", _fmt(fits[1].center)),
        ("p_phi_pi_channel_delay_0", _fmt(probs[0])),
        (f"p_phi_pi_channel_delay_{_fmt(h.channel_delay_ps)}", _fmt(probs[1])),
        ("channel_delay_spread", _fmt(max(probs) - min(probs))),
    ]
    out["phase_summary.txt"] = _kv(rows)
    return out


def _fringes(setup, workers):
    b = setup.config.bell
    state = make_psi_phi(b.phase_rad)
    return fringe_set(state, setup.bell, setup.counting, b.source_visibility, workers=workers)


def run_bell_fringe(setup, workers=1):
    fringes = _fringes(setup, workers)
    return {f"fringe_alice_{a:g}.csv": r.to_csv(control_name="bob_hwp_deg")
            for a, r in fringes.items()}


def run_chsh(setup, workers=1):
    b = setup.config.bell
    if setup.counting is None and b.source_visibility == 1.0:
        res = chsh_S(make_psi_phi(b.phase_rad), setup.bell)
        text = _kv([("S", _fmt(res.S)), ("sigma_S", _fmt(res.sigma_S)),
                    ("sigmas_of_violation", _fmt(res.significance)), ("form", res.form)])
        return {"chsh.txt": text}
    fringes = _fringes(setup, workers)
    out = {f"fringe_alice_{a:g}.csv": r.to_csv(control_name="bob_hwp_deg")
           for a, r in fringes.items()}
    out["chsh.txt"] = bell_report(fringes, setup.bell).to_text()
    return out


def run_budget(setup, workers=1):
    c = setup.config
    rep = source_budget(setup.counting, c.source.pump_mw, c.filters.fwhm_ghz, c.source.brightness,
                        reported=c.budget.reported_coincidence_rate)
    return {"budget.txt": rep.to_text()}


RUNNERS = {
    "spectrum": run_spectrum,
    "hom_scan": run_hom,
    "phase_scan": run_phase,
    "bell_fringe": run_bell_fringe,
    "chsh": run_chsh,
    "budget": run_budget,
}


def execute(cfg, workers=1):
    """Run the configured scenario; returns ``{filename: text}`` including the manifest."""
    setup = build(cfg)
    outputs = RUNNERS[cfg.experiment.scenario](setup, workers=workers)
    digests = {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(outputs.items())}
    extra = {"tool": "polsource", "tool_version": __version__}
    extra.update({f"sha256_{name}": h for name, h in digests.items()})
    outputs["manifest.ini"] = dump_config(cfg, extra)
    return outputs


def resolve_output_dir(cli_value, cfg):
    if cli_value:
        return Path(cli_value)
    if cfg.experiment.output_dir:
        return Path(cfg.experiment.output_dir)
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def write_outputs(outputs, directory):
    """Write all files, each via a temporary file and rename, after computation finished."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(outputs.items()):
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{name}.")
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, directory / name)
    return [directory / n for n in sorted(outputs)]
