"""Monte-Carlo harness: variance-tracking, ROC and false-alarm-control runs.

Every experiment walks the same per-trial pipeline:

    scene -> partial-Fourier matrix -> noisy measurement -> recovery ->
    variance estimates (converged + engine claim) -> thresholded detections

Trial ``t`` is seeded with ``base_seed + t`` and derives independent
child streams for the matrix, the scene and the noise, so results are
invariant to execution order and worker count, and a re-run from the
same config reproduces output files byte for byte.

Detector failures (too few null samples, collapsed variance, a
degenerate recovery) are recorded per trial and excluded from rate
denominators with the failure count reported; they never abort a
sweep.  Non-finite numbers inside the recovery engine do abort: they
mean the configuration itself is broken.
"""

from __future__ import annotations

import functools
import json
import math
import multiprocessing
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    DegenerateDivergenceError,
    DetectorFailureError,
    InsufficientNullSamplesError,
    ThresholdDomainError,
)
from .pcd_detector import PcdConfig, pcd_variance_estimate, rayleigh_threshold, test_statistic
from .signal_model import gen_partial_fourier, gen_scene, measure
from .vamp_core import (
    LmmseSolver,
    UnfoldedModel,
    load_params,
    matched_params,
    perturb_params,
    vamp_unfold,
)

__all__ = [
    "ParamMode",
    "ExperimentConfig",
    "TrialRecord",
    "MetricsRow",
    "MetricsTable",
    "SigmaConvergenceReport",
    "load_config",
    "build_model",
    "run_trials",
    "run_sigma_convergence",
    "run_roc",
    "run_pfa_control",
    "export_fixtures",
    "ecdf",
    "wilson_interval",
]

KNOWN_DETECTORS = ("pcd", "vamp_eq8")

# Failure classes counted per trial instead of aborting a sweep.
_DETECTOR_FAILURES = (
    DetectorFailureError,
    ThresholdDomainError,
    InsufficientNullSamplesError,
)


@dataclass(frozen=True)
class ParamMode:
    """How the layer parameters are obtained.

    ``mode`` is one of ``matched``, ``perturbed`` (requires ``factor``)
    or ``learned`` (requires ``path`` to a parameter file).
    """

    mode: str
    factor: Optional[float] = None
    path: Optional[str] = None

    def validate(self) -> None:
        if self.mode not in ("matched", "perturbed", "learned"):
            raise ConfigError(f"param_mode: unknown mode {self.mode!r}")
        if self.mode == "perturbed" and not (self.factor and self.factor > 0):
            raise ConfigError("perturb_factor: required and > 0 for perturbed mode")
        if self.mode == "learned" and not self.path:
            raise ConfigError("params_path: required for learned mode")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings of one Monte-Carlo experiment."""

    m: int
    n: int
    k_targets: int
    snr_db: float
    noise_var: float
    k_layers: int
    param_mode: ParamMode
    pcd: PcdConfig
    trials: int
    base_seed: int
    pfa_grid: tuple = ()
    detectors: tuple = KNOWN_DETECTORS

    def validate(self) -> None:
        if self.m < 1 or self.n < 1 or self.m > self.n:
            raise ConfigError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if not (0 <= self.k_targets <= self.n):
            raise ConfigError(f"k_targets must be in [0, n], got {self.k_targets}")
        if self.noise_var < 0:
            raise ConfigError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.noise_var == 0 and self.k_targets > 0:
            raise ConfigError("noise_var = 0 is only meaningful with k_targets = 0")
        if self.k_layers < 1:
            raise ConfigError(f"k_layers must be >= 1, got {self.k_layers}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.base_seed < 0:
            raise ConfigError(f"base_seed must be >= 0, got {self.base_seed}")
        for p in self.pfa_grid:
            if not (0 < p <= 1):
                raise ConfigError(f"pfa_grid entries must be in (0, 1], got {p}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("detectors must be distinct")
        for d in self.detectors:
            if d not in KNOWN_DETECTORS:
                raise ConfigError(
                    f"unknown detector {d!r}; known: {', '.join(KNOWN_DETECTORS)}"
                )
        self.param_mode.validate()

    def to_dict(self) -> dict:
        doc = {
            "m": self.m,
            "n": self.n,
            "k_targets": self.k_targets,
            "snr_db": self.snr_db,
            "noise_var": self.noise_var,
            "k_layers": self.k_layers,
            "param_mode": self.param_mode.mode,
            "pcd": {
                "pfa": self.pcd.pfa,
                "pfa0": self.pcd.pfa0,
                "c_tol": self.pcd.c_tol,
                "m_max": self.pcd.m_max,
            },
            "trials": self.trials,
            "base_seed": self.base_seed,
            "pfa_grid": list(self.pfa_grid),
            "detectors": list(self.detectors),
        }
        if self.param_mode.factor is not None:
            doc["perturb_factor"] = self.param_mode.factor
        if self.param_mode.path is not None:
            doc["params_path"] = self.param_mode.path
        return doc


def _req(raw: dict, key: str, kinds, where: str = ""):
    path = f"{where}{key}"
    if key not in raw:
        raise ConfigError(f"missing key {path!r}")
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"{path}: expected {kinds}, got {value!r}")
    return value


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from plain data
    (the parsed form of a TOML or JSON config file)."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table/object")
    known = {
        "m", "n", "k_targets", "snr_db", "noise_var", "k_layers", "param_mode",
        "perturb_factor", "params_path", "pcd", "trials", "base_seed",
        "pfa_grid", "detectors",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")

    mode = raw.get("param_mode", "matched")
    if not isinstance(mode, str):
        raise ConfigError(f"param_mode: expected a string, got {mode!r}")
    factor = raw.get("perturb_factor")
    if factor is not None and (isinstance(factor, bool) or not isinstance(factor, (int, float))):
        raise ConfigError(f"perturb_factor: expected a number, got {factor!r}")
    path = raw.get("params_path")
    if path is not None and not isinstance(path, str):
        raise ConfigError(f"params_path: expected a string, got {path!r}")
    param_mode = ParamMode(mode=mode,
                           factor=float(factor) if factor is not None else None,
                           path=path)

    pcd_raw = raw.get("pcd", {})
    if not isinstance(pcd_raw, dict):
        raise ConfigError("pcd: expected a table/object")
    for key in pcd_raw:
        if key not in {"pfa", "pfa0", "c_tol", "m_max"}:
            raise ConfigError(f"unknown config key 'pcd.{key}'")

    def _pcd_num(key, default):
        value = pcd_raw.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"pcd.{key}: expected a number, got {value!r}")
        return value

    try:
        pcd = PcdConfig(
            pfa=float(_pcd_num("pfa", 1e-3)),
            pfa0=float(_pcd_num("pfa0", 1e-3)),
            c_tol=float(_pcd_num("c_tol", 1e-5)),
            m_max=int(_pcd_num("m_max", 50)),
        )
    except ValueError as exc:
        raise ConfigError(f"pcd: {exc}") from exc

    grid = raw.get("pfa_grid", [])
    if not isinstance(grid, (list, tuple)):
        raise ConfigError(f"pfa_grid: expected an array, got {grid!r}")
    for p in grid:
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise ConfigError(f"pfa_grid: expected numbers, got {p!r}")

    detectors = raw.get("detectors", list(KNOWN_DETECTORS))
    if not isinstance(detectors, (list, tuple)) or not all(isinstance(d, str) for d in detectors):
        raise ConfigError(f"detectors: expected an array of strings, got {detectors!r}")

    cfg = ExperimentConfig(
        m=int(_req(raw, "m", int)),
        n=int(_req(raw, "n", int)),
        k_targets=int(_req(raw, "k_targets", int)),
        snr_db=float(_req(raw, "snr_db", (int, float))),
        noise_var=float(_req(raw, "noise_var", (int, float))),
        k_layers=int(_req(raw, "k_layers", int)),
        param_mode=param_mode,
        pcd=pcd,
        trials=int(_req(raw, "trials", int)),
        base_seed=int(_req(raw, "base_seed", int)),
        pfa_grid=tuple(float(p) for p in grid),
        detectors=tuple(detectors),
    )
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse a TOML (``.toml``) or JSON (``.json``) experiment config."""
    text_path = os.fspath(path)
    try:
        if text_path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(text_path, "rb") as fh:
                raw = tomllib.load(fh)
        elif text_path.endswith(".json"):
            with open(text_path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        else:
            raise ConfigError(f"config must be .toml or .json, got {text_path!r}")
    except ConfigError:
        raise
    except OSError as exc:
        raise ConfigError(f"cannot read config {text_path!r}: {exc}") from exc
    except Exception as exc:  # TOML/JSON syntax errors
        raise ConfigError(f"cannot parse config {text_path!r}: {exc}") from exc
    return config_from_dict(raw)


def build_model(cfg: ExperimentConfig, params_path=None) -> UnfoldedModel:
    """Materialize the layer parameters for a run.

    ``params_path`` (the CLI ``--params`` flag) overrides the config's
    parameter mode with a learned-parameter file.  Perturbed mode draws
    its multipliers from ``base_seed`` so a rerun perturbs identically.
    Degenerate zero-target configs fall back to placeholder matched
    parameters (the recovery of an all-zero measurement ignores them).
    """
    cfg.validate()
    if params_path is not None:
        return load_params(params_path)
    mode = cfg.param_mode
    if mode.mode == "learned":
        return load_params(mode.path)
    # Matched parameters need a nonzero sparsity and noise level; clamp
    # for degenerate target-free configs where they are never exercised.
    sparsity = min(max(cfg.k_targets / cfg.n, 1.0 / (2.0 * cfg.n)), 0.5)
    noise_var = cfg.noise_var if cfg.noise_var > 0 else 1.0
    model = matched_params(cfg.k_layers, sparsity, noise_var)
    if mode.mode == "perturbed":
        model = perturb_params(model, mode.factor, seed=cfg.base_seed)
    return model


@dataclass
class TrialRecord:
    """Everything one trial contributes to the aggregations."""

    trial: int
    seed: int
    n_targets: int
    n_null: int
    support: frozenset = frozenset()
    recovery_failed: bool = False
    failure_reason: str = ""
    sigma_emp: float = math.nan
    sigma_vamp: float = math.nan
    sigma_pcd: Optional[float] = None
    pcd_failure: str = ""
    pcd_iterations: int = 0
    pcd_converged: bool = False
    sigma_trace: list = field(default_factory=list)
    detector_sigma2: dict = field(default_factory=dict)
    detector_failures: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)


def _run_one_trial(cfg: ExperimentConfig, model: UnfoldedModel, t: int) -> TrialRecord:
    seed = cfg.base_seed + t
    mat_seed, scene_seed, noise_seed = (
        np.random.SeedSequence((seed, i)) for i in range(3)
    )
    a = gen_partial_fourier(cfg.n, cfg.m, mat_seed)
    scene = gen_scene(cfg.n, cfg.k_targets, cfg.snr_db, cfg.noise_var, scene_seed)
    meas = measure(a, scene, cfg.noise_var, noise_seed)
    solver = LmmseSolver(a.stacked, assume_row_orthonormal=True)

    record = TrialRecord(
        trial=t, seed=seed,
        n_targets=len(scene.support), n_null=cfg.n - len(scene.support),
        support=scene.support,
    )
    try:
        out, _state = vamp_unfold(meas.stacked, None, model, solver=solver)
    except DegenerateDivergenceError as exc:
        record.recovery_failed = True
        record.failure_reason = str(exc)
        for det in cfg.detectors:
            record.detector_failures[det] = str(exc)
        return record

    w = out.r_ri - scene.stacked
    record.sigma_emp = float(np.std(w))
    record.sigma_vamp = float(np.sqrt(out.sigma2_vamp))
    r_r, r_i = out.r_ri[: cfg.n], out.r_ri[cfg.n:]
    stat = test_statistic(r_r, r_i)
    truth = scene.amplitudes != 0

    sigma2_by_detector = {}
    try:
        sigma2_pcd, trace = pcd_variance_estimate(out.xhat_ri, out.r_ri, r_r, r_i, cfg.pcd)
        record.sigma_pcd = float(np.sqrt(sigma2_pcd))
        record.pcd_iterations = trace.iterations_used
        record.pcd_converged = trace.converged
        record.sigma_trace = list(
            zip(trace.sigma2_per_iter, trace.l_per_iter, trace.thresholds_per_iter)
        )
        sigma2_by_detector["pcd"] = sigma2_pcd
    except _DETECTOR_FAILURES as exc:
        record.pcd_failure = str(exc)
        if "pcd" in cfg.detectors:
            record.detector_failures["pcd"] = str(exc)
    sigma2_by_detector["vamp_eq8"] = out.sigma2_vamp

    for det in cfg.detectors:
        if det not in sigma2_by_detector or det in record.detector_failures:
            continue
        sigma2 = sigma2_by_detector[det]
        record.detector_sigma2[det] = sigma2
        per_pfa = {}
        try:
            for pfa in cfg.pfa_grid:
                det_mask = stat > rayleigh_threshold(sigma2, pfa)
                tp = int(np.count_nonzero(det_mask & truth))
                fp = int(np.count_nonzero(det_mask & ~truth))
                per_pfa[pfa] = (tp, fp)
        except _DETECTOR_FAILURES as exc:
            record.detector_failures[det] = str(exc)
            continue
        record.counts[det] = per_pfa
    return record


def run_trials(cfg: ExperimentConfig, model: Optional[UnfoldedModel] = None,
               workers: int = 1) -> list:
    """Run all configured trials, optionally across worker processes.

    Results are returned in trial order and are identical for any
    worker count: each trial owns its full seed and no state crosses
    trial boundaries.
    """
    cfg.validate()
    if model is None:
        model = build_model(cfg)
    model.validate()
    worker = functools.partial(_run_one_trial, cfg, model)
    if workers <= 1 or cfg.trials == 1:
        return [worker(t) for t in range(cfg.trials)]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, cfg.trials // (workers * 4))
    with ctx.Pool(processes=workers) as pool:
        return pool.map(worker, range(cfg.trials), chunksize=chunk)


def ecdf(samples) -> list:
    """Empirical CDF as ``(value, cumulative fraction)`` pairs.

    Values are sorted and deduplicated; fractions follow the
    right-continuous convention ``F(v) = #{x <= v} / len(samples)``.
    """
    samples = np.asarray(list(samples), dtype=float)
    if samples.size == 0:
        raise ValueError("ecdf of an empty sample is undefined")
    values, counts = np.unique(samples, return_counts=True)
    fractions = np.cumsum(counts) / samples.size
    return list(zip(values.tolist(), fractions.tolist()))


_WILSON_Z = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, total: int, z: float = _WILSON_Z) -> tuple:
    """Wilson score interval for a binomial proportion.

    Always contains the point estimate ``successes/total``; for zero
    observed events the upper bound stays strictly positive.  With no
    decisions at all the interval degenerates to the vacuous (0, 1).
    """
    if total == 0:
        return 0.0, 1.0
    p_hat = successes / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p_hat + z2 / (2.0 * total)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / total + z2 / (4.0 * total * total)) / denom
    # the Wilson interval contains p_hat analytically; enforce it under
    # floating-point rounding at the p_hat = 0 / 1 boundaries
    lo = min(max(0.0, center - half), p_hat)
    hi = max(min(1.0, center + half), p_hat)
    return lo, hi


@dataclass(frozen=True)
class MetricsRow:
    """Pooled per-bin rates for one (detector, nominal pfa) pair."""

    detector: str
    nominal_pfa: float
    empirical_pd: float
    pd_ci_low: float
    pd_ci_high: float
    empirical_pfa: float
    pfa_ci_low: float
    pfa_ci_high: float
    trials_used: int
    failures: int
    target_decisions: int
    true_detections: int
    null_decisions: int
    false_alarms: int

    @property
    def log10_pfa_ratio(self) -> float:
        """``log10(empirical/nominal)``; -inf when nothing fired."""
        if self.empirical_pfa > 0:
            return math.log10(self.empirical_pfa / self.nominal_pfa)
        return -math.inf


@dataclass
class MetricsTable:
    """Rows for every configured detector and nominal rate."""

    rows: list

    def for_detector(self, detector: str) -> list:
        return [row for row in self.rows if row.detector == detector]

    def row(self, detector: str, nominal_pfa: float) -> MetricsRow:
        for r in self.rows:
            if r.detector == detector and r.nominal_pfa == nominal_pfa:
                return r
        raise KeyError((detector, nominal_pfa))


def aggregate_metrics(cfg: ExperimentConfig, records: list) -> MetricsTable:
    """Pool per-bin detection counts into Pd/Pfa rows with Wilson CIs.

    Trials whose detector failed are excluded from that detector's
    denominators and surface in the ``failures`` column.
    """
    rows = []
    for det in cfg.detectors:
        used = [r for r in records if det in r.counts]
        failures = len(records) - len(used)
        target_total = sum(r.n_targets for r in used)
        null_total = sum(r.n_null for r in used)
        for pfa in cfg.pfa_grid:
            tp = sum(r.counts[det][pfa][0] for r in used)
            fp = sum(r.counts[det][pfa][1] for r in used)
            pd = tp / target_total if target_total else math.nan
            pfa_emp = fp / null_total if null_total else math.nan
            pd_lo, pd_hi = wilson_interval(tp, target_total)
            fa_lo, fa_hi = wilson_interval(fp, null_total)
            rows.append(MetricsRow(
                detector=det, nominal_pfa=pfa,
                empirical_pd=pd, pd_ci_low=pd_lo, pd_ci_high=pd_hi,
                empirical_pfa=pfa_emp, pfa_ci_low=fa_lo, pfa_ci_high=fa_hi,
                trials_used=len(used), failures=failures,
                target_decisions=target_total, true_detections=tp,
                null_decisions=null_total, false_alarms=fp,
            ))
    table = MetricsTable(rows=rows)
    _assert_monotone(cfg, table)
    return table


def _assert_monotone(cfg: ExperimentConfig, table: MetricsTable) -> None:
    # Per trial the thresholds are monotone in the nominal rate, so the
    # pooled detection sets are nested; a violation means a harness bug.
    order = sorted(cfg.pfa_grid)
    for det in cfg.detectors:
        by_pfa = {r.nominal_pfa: r for r in table.for_detector(det)}
        for low, high in zip(order, order[1:]):
            a, b = by_pfa[low], by_pfa[high]
            if a.true_detections > b.true_detections or a.false_alarms > b.false_alarms:
                raise AssertionError(
                    f"non-monotone pooled counts for detector {det!r}"
                )


@dataclass
class SigmaConvergenceReport:
    """Per-trial variance estimates plus pooled ECDFs."""

    records: list
    ecdfs: dict
    recovery_failures: int
    pcd_failures: int


def run_sigma_convergence(cfg: ExperimentConfig, out_dir=None, workers: int = 1,
                          model: Optional[UnfoldedModel] = None) -> SigmaConvergenceReport:
    """Track how the converged variance estimate compares to the truth.

    Per trial this records the empirical recovery-error std (from the
    known scene), the engine's closed-form claim, the converged
    estimate and its per-iteration trace; the report pools each
    estimator's values into an ECDF.  With ``out_dir`` set, writes
    ``trials.csv``, ``sigma_trace.csv``, ``ecdf.csv`` and
    ``manifest.json``.
    """
    records = run_trials(cfg, model=model, workers=workers)
    recovery_failures = sum(1 for r in records if r.recovery_failed)
    pcd_failures = sum(1 for r in records if r.pcd_failure or r.recovery_failed)
    ecdfs = {}
    emp = [r.sigma_emp for r in records if not r.recovery_failed]
    vamp = [r.sigma_vamp for r in records if not r.recovery_failed]
    pcd = [r.sigma_pcd for r in records if r.sigma_pcd is not None]
    if emp:
        ecdfs["empirical"] = ecdf(emp)
        ecdfs["vamp_eq8"] = ecdf(vamp)
    if pcd:
        ecdfs["pcd"] = ecdf(pcd)
    report = SigmaConvergenceReport(
        records=records, ecdfs=ecdfs,
        recovery_failures=recovery_failures, pcd_failures=pcd_failures,
    )
    if out_dir is not None:
        _write_sigma_outputs(cfg, report, out_dir)
    return report


def run_roc(cfg: ExperimentConfig, out_dir=None, workers: int = 1,
            model: Optional[UnfoldedModel] = None) -> MetricsTable:
    """Pd/Pfa sweep over the nominal-rate grid for each detector.

    With ``out_dir`` set, writes ``roc.csv`` and ``manifest.json``.
    """
    if not cfg.pfa_grid:
        raise ConfigError("pfa_grid must be nonempty for a ROC run")
    records = run_trials(cfg, model=model, workers=workers)
    table = aggregate_metrics(cfg, records)
    if out_dir is not None:
        out = _prepare_dir(out_dir)
        _write_metrics_csv(table, os.path.join(out, "roc.csv"))
        _write_manifest(cfg, "roc", len(records), out)
    return table


def run_pfa_control(cfg: ExperimentConfig, out_dir=None, workers: int = 1,
                    model: Optional[UnfoldedModel] = None) -> MetricsTable:
    """Empirical vs nominal false-alarm rate per detector.

    Same aggregation as :func:`run_roc`, viewed through the
    false-alarm columns plus the log10 ratio used by the control plot.
    With ``out_dir`` set, writes ``pfa_control.csv`` and
    ``manifest.json``.
    """
    if not cfg.pfa_grid:
        raise ConfigError("pfa_grid must be nonempty for a false-alarm-control run")
    records = run_trials(cfg, model=model, workers=workers)
    table = aggregate_metrics(cfg, records)
    if out_dir is not None:
        out = _prepare_dir(out_dir)
        _write_pfa_control_csv(table, os.path.join(out, "pfa_control.csv"))
        _write_manifest(cfg, "pfa-control", len(records), out)
    return table


# ---------------------------------------------------------------------------
# deterministic file output

def _prepare_dir(out_dir) -> str:
    out = os.fspath(out_dir)
    os.makedirs(out, exist_ok=True)
    return out


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    text = str(value)
    return text.replace(",", ";").replace("\n", " ")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(cfg: ExperimentConfig, command: str, trials_run: int,
                    out: str, extra: Optional[dict] = None) -> None:
    doc = {
        "toolkit": "vamp-cfar",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "trials_run": trials_run,
        "seed_rule": "trial t uses seed base_seed + t",
    }
    if extra:
        doc.update(extra)
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_sigma_outputs(cfg: ExperimentConfig, report: SigmaConvergenceReport,
                         out_dir) -> None:
    out = _prepare_dir(out_dir)
    _write_csv(
        os.path.join(out, "trials.csv"),
        ["trial", "seed", "sigma_emp", "sigma_vamp", "sigma_pcd",
         "pcd_iterations", "pcd_converged", "status"],
        (
            (
                r.trial, r.seed, r.sigma_emp, r.sigma_vamp,
                r.sigma_pcd if r.sigma_pcd is not None else math.nan,
                r.pcd_iterations, r.pcd_converged,
                r.failure_reason or r.pcd_failure or "ok",
            )
            for r in report.records
        ),
    )
    _write_csv(
        os.path.join(out, "sigma_trace.csv"),
        ["trial", "iteration", "sigma", "n_null", "threshold_pfa0"],
        (
            (r.trial, i + 1, math.sqrt(s2), l, thr)
            for r in report.records
            for i, (s2, l, thr) in enumerate(r.sigma_trace)
        ),
    )
    _write_csv(
        os.path.join(out, "ecdf.csv"),
        ["estimator", "value", "cumulative_fraction"],
        (
            (estimator, value, fraction)
            for estimator in sorted(report.ecdfs)
            for value, fraction in report.ecdfs[estimator]
        ),
    )
    _write_manifest(cfg, "sigma-convergence", len(report.records), out, extra={
        "recovery_failures": report.recovery_failures,
        "pcd_failures": report.pcd_failures,
    })


_METRICS_HEADER = [
    "detector", "nominal_pfa", "empirical_pd", "pd_ci_low", "pd_ci_high",
    "empirical_pfa", "pfa_ci_low", "pfa_ci_high", "trials_used", "failures",
    "target_decisions", "true_detections", "null_decisions", "false_alarms",
]


def _metrics_row_values(row: MetricsRow) -> tuple:
    return (
        row.detector, row.nominal_pfa, row.empirical_pd, row.pd_ci_low,
        row.pd_ci_high, row.empirical_pfa, row.pfa_ci_low, row.pfa_ci_high,
        row.trials_used, row.failures, row.target_decisions,
        row.true_detections, row.null_decisions, row.false_alarms,
    )


def _write_metrics_csv(table: MetricsTable, path) -> None:
    _write_csv(path, _METRICS_HEADER, (_metrics_row_values(r) for r in table.rows))


def _write_pfa_control_csv(table: MetricsTable, path) -> None:
    _write_csv(
        path,
        ["detector", "nominal_pfa", "empirical_pfa", "pfa_ci_low", "pfa_ci_high",
         "log10_ratio", "null_decisions", "false_alarms", "trials_used", "failures"],
        (
            (
                r.detector, r.nominal_pfa, r.empirical_pfa, r.pfa_ci_low,
                r.pfa_ci_high, r.log10_pfa_ratio, r.null_decisions,
                r.false_alarms, r.trials_used, r.failures,
            )
            for r in table.rows
        ),
    )


def export_fixtures(cfg: ExperimentConfig, out_dir, count: Optional[int] = None,
                    model: Optional[UnfoldedModel] = None) -> None:
    """Write reference batches for external reimplementations.

    ``fixtures.csv`` holds one row per (sample, vector, index, value)
    in long form; the vectors per sample are ``selected_rows`` (DFT
    rows of the observation matrix), ``y_ri`` (stacked measurement),
    ``x0_ri`` (stacked ground truth) and the recovery outputs ``r_ri``
    and ``xhat_ri`` under ``params.json``.  Sample ``t`` uses the same
    seed derivation as experiment trial ``t``, so an external generator
    mirroring the conventions must reproduce the vectors exactly.
    """
    cfg.validate()
    if model is None:
        model = build_model(cfg)
    if count is None:
        count = cfg.trials
    if count < 1:
        raise ConfigError(f"fixture count must be >= 1, got {count}")
    out = _prepare_dir(out_dir)

    from .vamp_core import save_params

    save_params(model, os.path.join(out, "params.json"))

    def rows():
        for t in range(count):
            seed = cfg.base_seed + t
            mat_seed, scene_seed, noise_seed = (
                np.random.SeedSequence((seed, i)) for i in range(3)
            )
            a = gen_partial_fourier(cfg.n, cfg.m, mat_seed)
            scene = gen_scene(cfg.n, cfg.k_targets, cfg.snr_db, cfg.noise_var, scene_seed)
            meas = measure(a, scene, cfg.noise_var, noise_seed)
            solver = LmmseSolver(a.stacked, assume_row_orthonormal=True)
            out_rec, _ = vamp_unfold(meas.stacked, None, model, solver=solver)
            vectors = [
                ("selected_rows", a.selected_rows),
                ("y_ri", meas.stacked),
                ("x0_ri", scene.stacked),
                ("r_ri", out_rec.r_ri),
                ("xhat_ri", out_rec.xhat_ri),
            ]
            for name, vec in vectors:
                for i, value in enumerate(vec):
                    yield (t, seed, name, i, value)

    _write_csv(
        os.path.join(out, "fixtures.csv"),
        ["sample", "seed", "vector", "index", "value"],
        rows(),
    )
    _write_manifest(cfg, "export-fixtures", count, out, extra={
        "fixture_columns": "sample, seed, vector, index, value",
        "fixture_vectors": ["selected_rows", "y_ri", "x0_ri", "r_ri", "xhat_ri"],
    })
