"""Monte-Carlo sweeps over pilot length or SNR, energy profiles and result files.

Randomness is drawn from child streams keyed by ``(seed, label, trial)``:
the channel of trial ``i`` is the same at every sweep point, the pilots
depend on ``(trial, T)`` and the noise on ``(trial, T, SNR)``. Every method
sees the same ``(H, C, Y)`` within a trial.

NMSE is aggregated as the mean of linear ratios over trials, summed in
trial order so results do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .channel import generate_channel
from .config import SystemConfig, child_rng
from .dictionary import (
    UnifiedDictionary,
    block_energy,
    blocks_for_energy,
    default_block_size,
    polar_dictionary,
    unified_dictionary,
)
from .measurement import gen_pilots, synthesize_observations
from .solvers import METHODS, Problem, SolverConfig, nmse_ratio, run_method, to_db

T_AXIS = "T"
SNR_AXIS = "snr"
BASELINES = ("p-omp", "bomp", "pcsbl", "p-somp", "2d-pcsbl")
CSV_HEADER = ("method", "axis", "value", "nmse_linear", "nmse_db", "trials", "std_err", "failures")


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    """One sweep: ``axis`` is ``"T"`` (fixed SNR) or ``"snr"`` (fixed T)."""

    cfg: SystemConfig
    axis: str
    values: tuple[float, ...]
    fixed: float
    methods: tuple[str, ...] = BASELINES
    trials: int = 50
    seed: int = 0
    out_dir: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    n_rings: int = 4
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.axis not in (T_AXIS, SNR_AXIS):
            raise PlanError(f"axis must be {T_AXIS!r} or {SNR_AXIS!r}")
        if self.trials < 1:
            raise PlanError("trials must be >= 1")
        if not self.values:
            raise PlanError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise PlanError("sweep values must be strictly increasing")
        if not self.methods:
            raise PlanError("method list is empty")
        unknown = sorted(set(self.methods) - set(METHODS))
        if unknown:
            raise PlanError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
        pilot_lengths = self.values if self.axis == T_AXIS else (self.fixed,)
        if any(t < 1 or t != int(t) for t in pilot_lengths):
            raise PlanError("pilot lengths must be positive integers")

    def point(self, value: float) -> tuple[int, float]:
        """``(T, snr_db)`` at one sweep value."""
        if self.axis == T_AXIS:
            return int(value), float(self.fixed)
        return int(self.fixed), float(value)

    def to_dict(self) -> dict:
        return dict(
            cfg=self.cfg.to_dict(),
            axis=self.axis,
            values=list(self.values),
            fixed=self.fixed,
            methods=list(self.methods),
            trials=self.trials,
            seed=self.seed,
            out_dir=self.out_dir,
            solver=self.solver.to_dict(),
            n_rings=self.n_rings,
            gamma=self.gamma,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        data = dict(data)
        data["cfg"] = SystemConfig.from_dict(data["cfg"])
        data["solver"] = SolverConfig(**data["solver"])
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise PlanError(f"unknown plan keys {sorted(extra)}")
        return cls(**data)


@dataclass(frozen=True)
class ResultRow:
    method: str
    value: float
    nmse_linear: float
    nmse_db: float
    trials: int
    std_err: float
    wall_time_s: float
    failures: int = 0


@dataclass
class ResultTable:
    plan: ExperimentPlan
    rows: list[ResultRow]
    errors: list[str] = field(default_factory=list)

    def row(self, method: str, value: float) -> ResultRow:
        for r in self.rows:
            if r.method == method and r.value == value:
                return r
        raise KeyError((method, value))

    def series(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.method == method]
        return np.array([r.value for r in rows]), np.array([r.nmse_db for r in rows])


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass
class _TrialOutcome:
    trial: int
    ratios: dict  # (method, value) -> float or None on failure
    seconds: dict
    errors: list


def _solver_for(plan: ExperimentPlan, method: str) -> SolverConfig:
    data = plan.solver.to_dict()
    data["method"] = method
    return SolverConfig(**data)


def _run_trial(plan: ExperimentPlan, trial: int, dictionary: UnifiedDictionary, polar) -> _TrialOutcome:
    cfg = plan.cfg
    H = generate_channel(cfg, child_rng(plan.seed, "channel", trial)).H
    ratios, seconds, errors = {}, {}, []
    pilots_cache = {}
    for value in plan.values:
        T, snr = plan.point(value)
        if T not in pilots_cache:
            pilots_cache[T] = gen_pilots(cfg, T, child_rng(plan.seed, f"pilots-T{T}", trial)).c_matrix()
        C = pilots_cache[T]
        obs = synthesize_observations(H, C, snr, child_rng(plan.seed, f"noise-T{T}-snr{snr!r}", trial))
        problem = Problem(cfg, dictionary, C, obs.y, obs.noise_var, H, polar, plan.n_rings, plan.gamma)
        for method in plan.methods:
            start = time.perf_counter()
            try:
                res = run_method(method, problem, _solver_for(plan, method))
                ratios[method, value] = nmse_ratio(res.h_hat, H)
            except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
                ratios[method, value] = None
                errors.append(f"trial {trial}, {method} at {plan.axis}={value}: {exc}")
            seconds[method, value] = time.perf_counter() - start
    return _TrialOutcome(trial, ratios, seconds, errors)


def _trial_worker(args):
    plan, trial = args
    dictionary = unified_dictionary(plan.cfg)
    polar = polar_dictionary(plan.cfg, plan.n_rings, plan.gamma) if _needs_polar(plan) else None
    return _run_trial(plan, trial, dictionary, polar)


def _needs_polar(plan: ExperimentPlan) -> bool:
    return any(m in ("p-omp", "p-somp") for m in plan.methods)


def run_sweep(plan: ExperimentPlan, jobs: int = 1, progress=None) -> ResultTable:
    """Run every method at every sweep point for ``plan.trials`` trials.

    ``progress(done, total)`` is called after each trial. Solver failures are
    counted per row and listed in ``ResultTable.errors``; the run continues.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    outcomes: list[_TrialOutcome] = []
    if jobs == 1:
        dictionary = unified_dictionary(plan.cfg)
        polar = polar_dictionary(plan.cfg, plan.n_rings, plan.gamma) if _needs_polar(plan) else None
        for trial in range(plan.trials):
            outcomes.append(_run_trial(plan, trial, dictionary, polar))
            if progress:
                progress(trial + 1, plan.trials)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for done, outcome in enumerate(pool.map(_trial_worker, [(plan, t) for t in range(plan.trials)]), 1):
                outcomes.append(outcome)
                if progress:
                    progress(done, plan.trials)
    outcomes.sort(key=lambda o: o.trial)
    return _aggregate(plan, outcomes)


def _aggregate(plan: ExperimentPlan, outcomes: list[_TrialOutcome]) -> ResultTable:
    rows, errors = [], []
    for outcome in outcomes:
        errors.extend(outcome.errors)
    for method in plan.methods:
        for value in plan.values:
            vals = [o.ratios[method, value] for o in outcomes if o.ratios[method, value] is not None]
            failures = len(outcomes) - len(vals)
            wall = float(sum(o.seconds[method, value] for o in outcomes))
            if vals:
                mean = math.fsum(vals) / len(vals)
                std_err = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
            else:
                mean, std_err = math.nan, math.nan
            db = to_db(mean) if vals else math.nan
            rows.append(ResultRow(method, value, mean, db, len(vals), std_err, wall, failures))
    return ResultTable(plan, rows, errors)


# ---------------------------------------------------------------------------
# energy profile
# ---------------------------------------------------------------------------


@dataclass
class EnergyProfile:
    energy: np.ndarray  # (trials, n_blocks, P)
    counts: np.ndarray  # (trials, P) blocks holding `fraction` of each column's energy
    block_size: int
    fraction: float


def energy_profile(
    cfg: SystemConfig,
    trials: int,
    seed: int = 0,
    block_size: int | None = None,
    fraction: float = 0.95,
    mu_ref=None,
) -> EnergyProfile:
    """Per-(block, subcarrier) energy of the sparse coefficients of sampled channels."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    block_size = default_block_size(cfg.n_ris) if block_size is None else block_size
    dictionary = unified_dictionary(cfg, mu_ref)
    energy, counts = [], []
    for trial in range(trials):
        x = dictionary.analyze(generate_channel(cfg, child_rng(seed, "channel", trial)).H)
        energy.append(block_energy(x, block_size))
        counts.append(blocks_for_energy(x, block_size, fraction))
    return EnergyProfile(np.array(energy), np.array(counts), block_size, fraction)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _open_for_write(path: Path):
    try:
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def versions() -> dict:
    return dict(xlris=__version__, numpy=np.__version__, scipy=scipy.__version__, python=platform.python_version())


def emit(table: ResultTable, out_dir) -> dict[str, Path]:
    """Write ``results.csv``, ``results.json`` and one ``series_<method>.csv`` per method.

    The CSV holds only seed-determined quantities (no timings) so repeated
    runs of the same plan produce identical bytes; wall times go to the JSON.
    """
    if not table.plan.methods or not table.rows:
        raise PlanError("nothing to emit: the result table is empty")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = {"csv": out / "results.csv", "json": out / "results.json"}
    with _open_for_write(paths["csv"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in table.rows:
            w.writerow(
                [r.method, table.plan.axis, _fmt(r.value), _fmt(r.nmse_linear), _fmt(r.nmse_db), r.trials, _fmt(r.std_err), r.failures]
            )
    for method in table.plan.methods:
        path = out / f"series_{method}.csv"
        xs, ys = table.series(method)
        with _open_for_write(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([table.plan.axis, "nmse_db"])
            for x, y in zip(xs, ys):
                w.writerow([_fmt(float(x)), _fmt(float(y))])
        paths[f"series_{method}"] = path
    meta = dict(
        plan=table.plan.to_dict(),
        columns=list(CSV_HEADER),
        versions=versions(),
        wall_time_s={f"{r.method}@{r.value}": r.wall_time_s for r in table.rows},
        errors=table.errors,
    )
    try:
        paths["json"].write_text(json.dumps(meta, indent=2, sort_keys=True))
    except OSError as exc:
        raise OSError(f"cannot write {paths['json']}: {exc}") from exc
    return paths


def load_plan(path) -> ExperimentPlan:
    """Rebuild the plan stored in a ``results.json``."""
    return ExperimentPlan.from_dict(json.loads(Path(path).read_text())["plan"])


def emit_energy_profile(profile: EnergyProfile, cfg: SystemConfig, seed: int, out_dir) -> dict[str, Path]:
    """``energy_profile.csv`` (trial, block, subcarrier, energy) plus the 95% block counts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "energy_profile.csv", "counts": out / "energy_counts.csv", "json": out / "energy_profile.json"}
    with _open_for_write(paths["csv"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "block", "subcarrier", "energy"])
        n_trials, n_blocks, n_sc = profile.energy.shape
        for t in range(n_trials):
            for b in range(n_blocks):
                for p in range(n_sc):
                    w.writerow([t, b, p + 1, _fmt(float(profile.energy[t, b, p]))])
    with _open_for_write(paths["counts"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "subcarrier", "blocks_for_fraction"])
        for t in range(profile.counts.shape[0]):
            for p in range(profile.counts.shape[1]):
                w.writerow([t, p + 1, int(profile.counts[t, p])])
    meta = dict(
        config=cfg.to_dict(),
        seed=seed,
        block_size=profile.block_size,
        fraction=profile.fraction,
        versions=versions(),
    )
    paths["json"].write_text(json.dumps(meta, indent=2, sort_keys=True))
    return paths
