"""The command implementations behind the CLI.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns plain
results; each ``cmd_*`` function additionally writes CSV files into an
output directory and returns the written paths (plus the report where there
are checks to act on).  Everything is
deterministic: fixed step sizes, fixed quadrature and no wall-clock input.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np
from scipy import signal

from . import _kernels as K
from . import checks
from .checks import CheckResult
from .config import ConfigError, ExperimentConfig
from .describing_function import DfPoint, SimplifiedFhigs, df_sweep, reduce_filters
from .element import FhigsElement, Mode
from .lti import TransferFunction, tf_to_ss
from .simulator import (ClosedLoop, InputSignal, IntegrationError, SimConfig, Step, SumOfSines,
                        Trajectory, simulate_closed_loop, simulate_epds, simulate_open_loop)

__all__ = [
    "GainLossRow",
    "GainLossReport",
    "StepRow",
    "StepReport",
    "step_metrics",
    "run_df",
    "run_simulate",
    "run_gainloss",
    "run_step",
    "write_df_csv",
    "cmd_df",
    "cmd_simulate",
    "cmd_gainloss",
    "cmd_step",
    "run_verify",
    "cmd_verify",
]

log = logging.getLogger(__name__)

DF_HEADER = ["omega_rad_s", "k", "a_k", "b_k", "mag_db", "phase_deg", "case"]

_LOCKS = {
    "none": None,
    "integrator": Mode.INTEGRATOR,
    "k1": Mode.GAIN_K1,
    "k2": Mode.GAIN_K2,
}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _names(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


# describing function -------------------------------------------------------

def run_df(cfg: ExperimentConfig, *, validate: bool = True) -> tuple[list[DfPoint], list[DfPoint]]:
    """DF sweeps of the configured element and of the plain HIGS with the
    same gains, on the same grid.

    The element's two filters are reduced to the single filter
    ``F = F1^-1 F2`` first.
    """
    params = cfg.params("element")
    f1 = cfg.transfer_function(cfg.string("element", "f1", "1"))
    f2 = cfg.transfer_function(cfg.string("element", "f2", "1"))
    try:
        reduced = reduce_filters(f1, f2)
    except ValueError as exc:
        raise ConfigError("element", "f1", f"cannot reduce the filters: {exc}") from None
    grid = sorted(cfg.grid("sweep"))
    harmonics = [int(k) for k in cfg.numbers("sweep", "harmonics", [1])]
    try:
        fhigs = SimplifiedFhigs(params, tf_to_ss(reduced))
        higs = SimplifiedFhigs(params, tf_to_ss(TransferFunction((1.0,), (1.0,))))
    except ValueError as exc:
        raise ConfigError("element", None, str(exc)) from None
    return (df_sweep(fhigs, grid, harmonics, validate=validate),
            df_sweep(higs, grid, harmonics, validate=validate))


def write_df_csv(points: list[DfPoint], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DF_HEADER)
        for p in points:
            case = p.case.value if p.case is not None else "error"
            w.writerow([_fmt(p.omega), p.k, _fmt(p.a_k), _fmt(p.b_k), _fmt(p.mag_db),
                        _fmt(p.phase_deg), case])


def cmd_df(cfg: ExperimentConfig, out: Path, *, validate: bool = True) -> list[Path]:
    fhigs, higs = run_df(cfg, validate=validate)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "fhigs_df.csv", out / "higs_df.csv"]
    write_df_csv(fhigs, paths[0])
    write_df_csv(higs, paths[1])
    failed = [p for p in fhigs + higs if p.error is not None]
    for p in failed:
        log.warning("DF point at %.6g rad/s failed: %s", p.omega, p.error)
    return paths


# time-domain simulation ----------------------------------------------------

def run_simulate(cfg: ExperimentConfig) -> Trajectory:
    """Open-loop run of ``[element]`` driven by ``[input]``.

    ``[sim] periods`` (instead of ``total_time``) picks a step size that
    divides the period of the first input frequency exactly.
    """
    element = cfg.element("element")
    inp = cfg.input_signal("input")
    if cfg.has("sim", "periods"):
        if not inp.omegas:
            raise ConfigError("sim", "periods", "needs a sinusoidal input")
        try:
            sim = SimConfig.periodic(inp.omegas[0], cfg.integer("sim", "periods"),
                                     h_max=cfg.number("sim", "h", 1e-5),
                                     decimation=cfg.integer("sim", "decimation", 1))
        except ValueError as exc:
            raise ConfigError("sim", None, str(exc)) from None
    else:
        sim = cfg.sim("sim")
    method = cfg.string("simulate", "method", "pwl").strip().lower()
    if method == "pwl":
        return simulate_open_loop(element, inp, sim)
    if method == "epds":
        return simulate_epds(element, inp, sim)
    raise ConfigError("simulate", "method", f"expected pwl or epds, got {method!r}")


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    traj = run_simulate(cfg)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "trajectory.csv", out / "events.csv"]
    traj.to_csv(paths[0])
    traj.events_to_csv(paths[1])
    return paths


# gain loss -----------------------------------------------------------------

@dataclass(frozen=True)
class GainLossRow:
    name: str
    rms: float
    reference_rms: float
    correlation: float
    events_per_period: float

    @property
    def rms_ratio(self) -> float:
        return self.rms / self.reference_rms


@dataclass(frozen=True)
class GainLossReport:
    """Rows ``higs_pure``, ``higs_mixed``, ``higs_lifted``, ``fhigs_mixed``;
    the reference for RMS ratios and correlations is ``higs_pure``."""

    rows: tuple[GainLossRow, ...]
    ratio_max: float
    correlation_min: float
    max_sector_product: float = 0.0

    def row(self, name: str) -> GainLossRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def checks(self) -> dict[str, bool]:
        mixed, lifted, fhigs = (self.row(n) for n in ("higs_mixed", "higs_lifted", "fhigs_mixed"))
        return {
            "higs_mixed_ratio": mixed.rms_ratio < self.ratio_max,
            "fhigs_correlation": fhigs.correlation > self.correlation_min,
            "lifted_below_fhigs": lifted.correlation < fhigs.correlation,
        }

    def to_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["config", "rms", "reference_rms", "rms_ratio", "correlation",
                        "events_per_period"])
            for r in self.rows:
                w.writerow([r.name, _fmt(r.rms), _fmt(r.reference_rms), _fmt(r.rms_ratio),
                            _fmt(r.correlation), _fmt(r.events_per_period)])


def _last_period(traj: Trajectory, values: np.ndarray, period: float) -> np.ndarray:
    # the grid is commensurate with the period, so this is exactly one period of samples
    n = int(round(period / (traj.t[1] - traj.t[0])))
    return values[-n:]


def run_gainloss(cfg: ExperimentConfig) -> GainLossReport:
    """Pure versus mixed input for HIGS, HIGS between lifting filters and
    FHIGS; metrics over the final period of the low frequency."""
    s = "gainloss"
    w1, w2 = cfg.number(s, "omega1"), cfg.number(s, "omega2")
    a1, a2 = cfg.number(s, "amplitude1", 1.0), cfg.number(s, "amplitude2", 1.0)
    periods = cfg.integer(s, "periods", 12)
    if not (w1 > 0 and w2 > 0):
        raise ConfigError(s, "omega1", "frequencies must be positive")
    try:
        sim = SimConfig.periodic(w1, periods, h_max=cfg.number(s, "h", 1e-4))
    except ValueError as exc:
        raise ConfigError(s, None, str(exc)) from None
    higs = cfg.element(cfg.string(s, "higs", "element higs"))
    fhigs = cfg.element(cfg.string(s, "fhigs", "element fhigs"))
    lift_name = cfg.string(s, "lift")
    lift = cfg.transfer_function(lift_name)
    lifted = FhigsElement(higs.params, tf_to_ss(lift), tf_to_ss(lift))
    try:
        delift = lift.inverse()
    except ValueError as exc:
        raise ConfigError(s, "lift", f"lifting filter is not invertible: {exc}") from None

    pure_in = SumOfSines([a1], [w1])
    mixed_in = SumOfSines([a1, a2], [w1, w2])
    period = 2 * math.pi / w1

    def run(element: FhigsElement, inp: InputSignal, name: str) -> Trajectory:
        try:
            return simulate_open_loop(element, inp, sim)
        except IntegrationError as exc:
            raise RuntimeError(f"gain-loss run {name!r} failed at t = {exc.t:.6g} s: {exc}") from None

    runs = {
        "higs_pure": run(higs, pure_in, "higs_pure"),
        "higs_mixed": run(higs, mixed_in, "higs_mixed"),
        "higs_lifted": run(lifted, mixed_in, "higs_lifted"),
        "fhigs_mixed": run(fhigs, mixed_in, "fhigs_mixed"),
    }
    outputs = {name: tr.x_h for name, tr in runs.items()}
    tr = runs["higs_lifted"]
    _, outputs["higs_lifted"], _ = signal.lsim((delift.num, delift.den), tr.x_h, tr.t)

    ref = _last_period(runs["higs_pure"], outputs["higs_pure"], period)
    ref_rms = float(np.sqrt(np.mean(ref**2)))
    rows = []
    for name, tr in runs.items():
        y = _last_period(tr, outputs[name], period)
        start = tr.t[-1] - period
        n_ev = int(np.count_nonzero(tr.event_t >= start))
        rows.append(GainLossRow(name, float(np.sqrt(np.mean(y**2))), ref_rms,
                                float(np.corrcoef(y, ref)[0, 1]), float(n_ev)))
    sector = max(tr.diagnostics["max_sector_product"] for tr in runs.values())
    return GainLossReport(tuple(rows), cfg.number(s, "ratio_max", 0.1),
                          cfg.number(s, "correlation_min", 0.9), sector)


def cmd_gainloss(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], GainLossReport]:
    report = run_gainloss(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "gainloss.csv"
    report.to_csv(path)
    return [path], report


# step response -------------------------------------------------------------

@dataclass(frozen=True)
class StepRow:
    name: str
    overshoot_pct: float
    settling_time: float
    steady_state_error: float
    status: str = "ok"


@dataclass(frozen=True)
class StepReport:
    """``linear`` and ``nonlinear`` name the rows the checks compare."""

    rows: tuple[StepRow, ...]
    linear: str | None = None
    nonlinear: tuple[str, ...] = ()
    overshoot_max: float = 0.1
    max_sector_product: float = 0.0

    def row(self, name: str) -> StepRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def checks(self) -> dict[str, bool]:
        out: dict[str, bool] = {}
        lin = self.row(self.linear) if self.linear else None
        if lin is not None:
            out[f"{lin.name}_overshoots"] = lin.status == "ok" and lin.overshoot_pct > 0.0
        for name in self.nonlinear:
            r = self.row(name)
            out[f"{name}_overshoot_at_most_{self.overshoot_max:g}pct"] = (
                r.status == "ok" and r.overshoot_pct <= self.overshoot_max)
            if lin is not None:
                out[f"{name}_settles_before_{lin.name}"] = (
                    r.status == "ok" and r.settling_time < lin.settling_time)
        return out

    def to_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["controller", "overshoot_pct", "settling_time_s", "steady_state_error",
                        "status"])
            for r in self.rows:
                w.writerow([r.name, _fmt(r.overshoot_pct), _fmt(r.settling_time),
                            _fmt(r.steady_state_error), r.status])


def step_metrics(t: np.ndarray, y: np.ndarray, height: float,
                 band: float = 0.02) -> tuple[float, float, float]:
    """Overshoot [% of the step], settling time [s] into ``band`` and final error."""
    r = float(height)
    overshoot = max(0.0, (float(np.max(y)) - r) / r) * 100.0
    outside = np.nonzero(np.abs(y - r) > band * abs(r))[0]
    if outside.size == 0:
        settling = float(t[0])
    elif outside[-1] == t.size - 1:
        settling = math.inf
    else:
        settling = float(t[outside[-1] + 1])
    return overshoot, settling, abs(float(y[-1]) - r)


def run_step(cfg: ExperimentConfig) -> StepReport:
    """Closed-loop step responses of the controllers listed in
    ``[step] controllers``.

    Each ``[controller NAME]`` section names an element section, the filter
    ``f3`` between element and plant, an optional parallel error filter and
    an optional mode lock (``none``, ``integrator``, ``k1``, ``k2``).
    """
    s = "step"
    G = cfg.transfer_function(cfg.string(s, "plant", "plant"))
    height = cfg.number(s, "height", 1.0)
    if height == 0:
        raise ConfigError(s, "height", "step height must be non-zero")
    ref = Step(height, 0.0, cfg.number(s, "rise", 1e-4))
    sim = cfg.sim(s)
    band = cfg.number(s, "band", 0.02)
    controllers = _names(cfg.string(s, "controllers"))
    linear = cfg.string(s, "linear", "") or None
    nonlinear = tuple(_names(cfg.string(s, "nonlinear", "")))
    for key, listed in (("linear", [linear] if linear else []), ("nonlinear", nonlinear)):
        unknown = [n for n in listed if n not in controllers]
        if unknown:
            raise ConfigError(s, key, f"not among the controllers: {', '.join(unknown)}")
    rows = []
    sector = 0.0
    for name in controllers:
        sec = f"controller {name}"
        if sec not in cfg.sections:
            raise ConfigError(sec, None, "missing section")
        element = cfg.element(cfg.string(sec, "element"))
        f3 = cfg.transfer_function(cfg.string(sec, "f3", "1"))
        parallel = cfg.string(sec, "parallel", "")
        lock_name = cfg.string(sec, "lock", "none").strip().lower()
        if lock_name not in _LOCKS:
            raise ConfigError(sec, "lock", f"expected one of {sorted(_LOCKS)}, got {lock_name!r}")
        try:
            loop = ClosedLoop(element, tf_to_ss(f3 * G), ref,
                              feedthrough=cfg.state_space(parallel) if parallel else 0.0,
                              locked=_LOCKS[lock_name])
        except ValueError as exc:
            raise ConfigError(sec, None, str(exc)) from None
        traj = simulate_closed_loop(loop, sim, raise_on_error=False)
        sector = max(sector, traj.diagnostics["max_sector_product"])
        status = traj.diagnostics["status"]
        if status != 0:
            log.warning("controller %s: integration stopped at t = %.6g s (status %d)",
                        name, traj.diagnostics["failure_time"], status)
            rows.append(StepRow(name, math.nan, math.nan, math.nan,
                                "diverged" if status == K.DIVERGED else "failed"))
            continue
        rows.append(StepRow(name, *step_metrics(traj.t, traj.y, height, band)))
    return StepReport(tuple(rows), linear, nonlinear, cfg.number(s, "overshoot_max", 0.1), sector)


def cmd_step(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], StepReport]:
    report = run_step(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "step.csv"
    report.to_csv(path)
    return [path], report


# verification suite --------------------------------------------------------

VERIFY_HEADER = ["check", "passed", "measured", "tolerance", "detail"]


def run_verify(cfg: ExperimentConfig, seed: int | None = None) -> list[CheckResult]:
    """Oracle and invariant checks with counts and tolerances from ``[verify]``.

    The incremental checks use the element in ``[verify] incremental``
    (section name); its hypotheses are enforced, so an element that violates
    them yields a failed check.  ``seed`` overrides ``[verify] seed``.
    """
    v = "verify"
    seed = cfg.integer(v, "seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    num = partial(cfg.number, v)
    cnt = partial(cfg.integer, v)

    results: list[CheckResult] = []

    def add(result):
        for r in result if isinstance(result, list) else [result]:
            log.info("%s", r.line())
            results.append(r)

    add(checks.check_equivalence(rng, n=cnt("equivalence_configs", 20),
                                 total_time=num("equivalence_time", 2.0),
                                 h=num("equivalence_h", 1e-5), tol=num("equivalence_tol", 1e-5)))
    add(checks.check_higs_phase(tol_deg=num("higs_phase_tol_deg", 0.5)))
    add(checks.check_fhigs_lead(mag_tol=num("fhigs_hf_tol", 0.05)))
    add(checks.check_switching_closed_forms(rng, n=cnt("switching_draws", 100),
                                            residual_tol=num("switching_residual_tol", 1e-10),
                                            gap_tol=num("switching_gap_tol", 1e-11)))
    add(checks.check_fundamental_closed_form(rng, n=cnt("lead_frequencies", 50),
                                             tol=num("fundamental_tol", 1e-9)))
    add(checks.check_symmetry(rng, n=cnt("symmetry_responses", 60),
                              even_tol=num("even_tol", 1e-10),
                              half_wave_tol=num("half_wave_tol", 1e-12)))
    add(checks.check_df_vs_simulation(settle_periods=cnt("df_settle_periods", 20),
                                      tol=num("df_tol", 1e-4)))
    section = cfg.string(v, "incremental", "element incremental")
    element = cfg.element(section) if section in cfg.sections else None
    add(checks.check_incremental(rng, element, pairs=cnt("incremental_pairs", 100),
                                 total_time=num("incremental_time", 200.0),
                                 h=num("incremental_h", 2e-3), tol=num("incremental_tol", 1e-3)))
    add(checks.check_decay_envelope(rng, alpha_h=num("envelope_alpha", 2.0),
                                    pairs=cnt("envelope_pairs", 100)))
    add(checks.check_sector(results, tol=num("sector_tol", 1e-9)))
    return results


def write_verify_csv(results: list[CheckResult], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VERIFY_HEADER)
        for r in results:
            w.writerow([r.name, int(r.passed), _fmt(r.measured), _fmt(r.tolerance), r.detail])


def cmd_verify(cfg: ExperimentConfig, out: Path, seed: int | None = None
               ) -> tuple[list[Path], list[CheckResult]]:
    results = run_verify(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "verify.csv"
    write_verify_csv(results, path)
    return [path], results
