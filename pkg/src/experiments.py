"""
Experiment Harness
Multi-trial separation benchmarks and the census total-variation decay run

Separation experiment:
  For every grid point and trial: sample a tree, draw an I(h0, h1) instance,
  build the dataset, run the deep pipeline and each baseline, and score them
  on the unlabeled leaves. Trials run in parallel (joblib); each trial is
  single-threaded and seeded from (experiment seed, grid index, trial index),
  so the report does not depend on the worker count.

Reference columns:
  local_bound_ref   = d^-h0 * (1 + C_local * k * lambda^(h-h1) * q)
  shallow_bound_ref = d^-h0 + C_shallow * m * d^h0 * exp(-c * (h-h1))
  Constants are taken from the config as given; these are reference shapes,
  not verified bounds.

Config JSON:
  {"model": {"variant": "IIDM", "q": 4, "k": 5000, "lambda": 0.9, "regime": "random"},
   "tree": {"d": 2, "h": 8}, "instance": {"h0": 1, "h1": 3},
   "trials": 10, "seed": 1, "methods": ["deep", "local_nn", "shallow_nb", "trivial"],
   "reconstruct": {"r": 2}}
Any scalar under model/tree/instance/reconstruct may be a list; lists expand
into a parameter grid.
"""

import json
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.metrics import accuracy_score
from sklearn.model_selection import ParameterGrid

from .baselines import BaselineKind, classify_dataset
from .config import get_settings
from .core import Model, ModelParams, PermutationRegime, build_tree, default_rewirings
from .errors import InvalidParamsError
from .reconstruct import DeepLabeler
from .samplers import InstanceSpec, generate_instance, make_dataset, simulate, true_leaf_labels
from .utils.seeding import derive_seed
from .validation import census_sampler, estimate_tv_distance, leaf_census, wilson_interval

logger = logging.getLogger("experiments")

METHODS = ("deep", "local_nn", "local_ml", "shallow_nb", "shallow_s", "trivial")
GRID_SECTIONS = {
    "model": ("variant", "q", "k", "lambda", "regime"),
    "tree": ("d", "h"),
    "instance": ("h0", "h1"),
    "reconstruct": ("r",),
}
DEFAULT_BOUNDS = {"c_local": 1.0, "c_shallow": 1.0, "c_decay": 1.0, "m": 1.0}


# ============================================================================
# CONFIGURATION
# ============================================================================

@dataclass
class ExperimentConfig:
    """Parsed experiment configuration"""
    model: Dict[str, Any]
    tree: Dict[str, Any]
    instance: Dict[str, Any]
    trials: int
    seed: int = 0
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    reconstruct: Dict[str, Any] = field(default_factory=dict)
    shallow_s: int = 2
    bounds: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))

    def __post_init__(self):
        if int(self.trials) < 1:
            raise InvalidParamsError(f"An experiment needs at least one trial, got {self.trials}")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise InvalidParamsError(f"Unknown or empty methods {unknown}; choose from {', '.join(METHODS)}")
        for section in ("model", "tree", "instance"):
            missing = [key for key in GRID_SECTIONS[section]
                       if key not in getattr(self, section) and key != "regime"]
            if missing:
                raise InvalidParamsError(f"Config section '{section}' misses {', '.join(missing)}")
        if not self.grid():
            raise InvalidParamsError("Parameter grid is empty")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        try:
            return cls(
                model=dict(raw["model"]), tree=dict(raw["tree"]), instance=dict(raw["instance"]),
                trials=int(raw["trials"]), seed=int(raw.get("seed", 0)),
                methods=list(raw.get("methods", METHODS)),
                reconstruct=dict(raw.get("reconstruct", {})),
                shallow_s=int(raw.get("shallow_s", 2)),
                bounds={**DEFAULT_BOUNDS, **raw.get("bounds", {})},
            )
        except KeyError as e:
            raise InvalidParamsError(f"Config misses required key {e}") from e

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError as e:
                raise InvalidParamsError(f"Config {path} is not valid JSON: {e}") from e
        return cls.from_dict(raw)

    def grid(self) -> List[Dict[str, Any]]:
        """Grid points in a fixed order; keys are flattened (e.g. 'lambda', 'd')"""
        flat: Dict[str, List[Any]] = {}
        for section, keys in GRID_SECTIONS.items():
            values = getattr(self, section)
            for key in keys:
                if key in values:
                    value = values[key]
                    flat[key] = list(value) if isinstance(value, (list, tuple)) else [value]
        flat.setdefault("regime", [PermutationRegime.RANDOM.value])
        flat.setdefault("r", [get_settings().default_r])
        return list(ParameterGrid(flat))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model, "tree": self.tree, "instance": self.instance,
            "trials": self.trials, "seed": self.seed, "methods": self.methods,
            "reconstruct": self.reconstruct, "shallow_s": self.shallow_s, "bounds": self.bounds,
        }


# ============================================================================
# TRIALS
# ============================================================================

@dataclass
class TrialRecord:
    """Outcome of one trial"""
    grid_index: int
    trial: int
    seed: int
    n_unlabeled: int
    accuracy: Dict[str, float]
    deep_failed: bool = False
    deep_tree_recovered: bool = False
    failure_reason: Optional[str] = None
    min_margin: Optional[float] = None
    runtime: Dict[str, float] = field(default_factory=dict)


def _model_params(point: Dict[str, Any], seed: int) -> ModelParams:
    variant = Model(point["variant"])
    rewiring = default_rewirings(point["k"], point["h"], seed) if variant == Model.FIM else None
    return ModelParams(variant=variant, q=point["q"], k=point["k"], lam=float(point["lambda"]),
                       regime=PermutationRegime(point["regime"]), rewiring=rewiring, seed=seed)


def run_trial(point: Dict[str, Any], grid_index: int, trial: int, seed: int,
              methods: Sequence[str], shallow_s: int = 2) -> TrialRecord:
    """
    One end-to-end trial at a grid point

    Deep reconstruction failures are recorded (accuracy 0, failure flag and
    reason) instead of raised.
    """
    tree = build_tree(point["d"], point["h"])
    params = _model_params(point, seed)
    spec = InstanceSpec(point["h0"], point["h1"])

    truth = simulate(tree, params, "uniform", n_jobs=1)
    labels, labeled_set = generate_instance(tree, spec, seed)
    truth = truth.with_instance(labels, labeled_set)
    data = make_dataset(truth)

    leaf_truth = true_leaf_labels(truth)
    y_true = leaf_truth[[node.index for node in data.unlabeled_nodes]]
    n_labeled = len(data.labeled_nodes)

    def score(pred: np.ndarray) -> float:
        return float(accuracy_score(y_true, pred)) if len(y_true) else 1.0

    record = TrialRecord(grid_index=grid_index, trial=trial, seed=seed, n_unlabeled=len(y_true), accuracy={})
    for method in methods:
        start = time.perf_counter()
        if method == "deep":
            result = DeepLabeler(params, point["r"]).run(data)
            record.deep_failed = not result.success
            record.failure_reason = result.diagnostics.failure_reason
            record.min_margin = result.diagnostics.min_margin()
            record.deep_tree_recovered = bool(result.success and result.tree.matches(tree))
            record.accuracy[method] = 0.0 if record.deep_failed else score(result.leaf_labels[n_labeled:])
        else:
            pred = classify_dataset(data, BaselineKind(method), lam=params.lam,
                                    depth=2 * (tree.h - spec.h1), s=shallow_s)
            record.accuracy[method] = score(pred)
        record.runtime[method] = time.perf_counter() - start

    logger.debug(f"Trial {grid_index}/{trial}: " +
                 ", ".join(f"{m}={a:.3f}" for m, a in record.accuracy.items()))
    return record


# ============================================================================
# REPORT
# ============================================================================

@dataclass
class Report:
    """Aggregated rows, per-trial rows, diagnostics and (separately) timing"""
    rows: pd.DataFrame
    trials: pd.DataFrame = field(default_factory=pd.DataFrame)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    timing: Dict[str, Any] = field(default_factory=dict)

    @property
    def any_failures(self) -> bool:
        return bool(len(self.trials)) and "deep_failed" in self.trials and bool(self.trials["deep_failed"].any())

    def to_json(self) -> str:
        """Config, rows and diagnostics as stable, sorted JSON"""
        payload = {
            "config": self.config,
            "rows": json.loads(self.rows.to_json(orient="records", double_precision=10)),
            "diagnostics": self.diagnostics,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> Path:
        """Write summary.csv, trials.csv, report.json and timing.json"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.rows.to_csv(out_dir / "summary.csv", index=False, float_format="%.6f")
        self.trials.to_csv(out_dir / "trials.csv", index=False, float_format="%.6f")
        (out_dir / "report.json").write_text(self.to_json(), encoding="utf-8")
        (out_dir / "timing.json").write_text(json.dumps(self.timing, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
        logger.info(f"Report written to {out_dir}")
        return out_dir


class SeparationExperiment:
    """
    Runs the deep pipeline and the baselines over a parameter grid
    """

    def __init__(self, config: ExperimentConfig, n_jobs: Optional[int] = None):
        self.config = config
        self.n_jobs = n_jobs if n_jobs is not None else get_settings().n_jobs
        self.records: List[TrialRecord] = []
        self.logger = logger

    def run(self) -> Report:
        grid = self.config.grid()
        jobs = [
            (gi, point, t, derive_seed(self.config.seed, gi, t))
            for gi, point in enumerate(grid)
            for t in range(self.config.trials)
        ]
        self.logger.info(f"Running {len(jobs)} trials over {len(grid)} grid points (n_jobs={self.n_jobs})")
        start = time.perf_counter()
        records = Parallel(n_jobs=self.n_jobs)(
            delayed(run_trial)(point, gi, t, seed, self.config.methods, self.config.shallow_s)
            for gi, point, t, seed in jobs
        )
        self.records = sorted(records, key=lambda rec: (rec.grid_index, rec.trial))
        elapsed = time.perf_counter() - start

        rows = [self._aggregate(gi, point) for gi, point in enumerate(grid)]
        report = Report(
            rows=pd.DataFrame(rows),
            trials=self._trial_frame(),
            diagnostics=self._diagnostics(grid),
            config=self.config.to_dict(),
            timing=self._timing(grid, elapsed),
        )
        self.logger.info(f"Finished {len(jobs)} trials in {elapsed:.1f}s")
        return report

    # ========================================================================
    # AGGREGATION
    # ========================================================================

    def _aggregate(self, gi: int, point: Dict[str, Any]) -> Dict[str, Any]:
        recs = [rec for rec in self.records if rec.grid_index == gi]
        n = len(recs)
        d, h, h0, h1 = point["d"], point["h"], point["h0"], point["h1"]
        lam, q, k = float(point["lambda"]), point["q"], point["k"]
        bounds = self.config.bounds

        row: Dict[str, Any] = {key: point[key] for key in sorted(point)}
        row["trials"] = n
        for method in self.config.methods:
            mean = float(np.mean([rec.accuracy[method] for rec in recs]))
            low, high = wilson_interval(mean, n)
            row[f"{method}_acc"] = mean
            row[f"{method}_lo"] = low
            row[f"{method}_hi"] = high
        if "deep" in self.config.methods:
            row["deep_tree_rate"] = float(np.mean([rec.deep_tree_recovered for rec in recs]))
            row["deep_failures"] = int(sum(rec.deep_failed for rec in recs))
        row["trivial_rate"] = d ** -h0
        row["d_lambda"] = d * lam
        row["d_lambda2"] = d * lam * lam
        row["local_bound_ref"] = d ** -h0 * (1.0 + bounds["c_local"] * k * lam ** (h - h1) * q)
        row["shallow_bound_ref"] = d ** -h0 + bounds["c_shallow"] * bounds["m"] * d ** h0 * math.exp(
            -bounds["c_decay"] * (h - h1))
        return row

    def _trial_frame(self) -> pd.DataFrame:
        rows = []
        for rec in self.records:
            row = {"grid_index": rec.grid_index, "trial": rec.trial, "seed": rec.seed,
                   "n_unlabeled": rec.n_unlabeled}
            row.update({f"{m}_acc": a for m, a in rec.accuracy.items()})
            if "deep" in rec.accuracy:
                row.update(deep_failed=rec.deep_failed, deep_tree_recovered=rec.deep_tree_recovered,
                           failure_reason=rec.failure_reason or "", min_margin=rec.min_margin)
            rows.append(row)
        return pd.DataFrame(rows)

    def _diagnostics(self, grid: List[Dict[str, Any]]) -> Dict[str, Any]:
        out = {}
        for gi in range(len(grid)):
            recs = [rec for rec in self.records if rec.grid_index == gi]
            margins = [rec.min_margin for rec in recs if rec.min_margin is not None]
            reasons = Counter(rec.failure_reason for rec in recs if rec.failure_reason)
            out[str(gi)] = {
                "failure_reasons": dict(sorted(reasons.items())),
                "mean_min_margin": round(float(np.mean(margins)), 6) if margins else None,
            }
        return out

    def _timing(self, grid: List[Dict[str, Any]], elapsed: float) -> Dict[str, Any]:
        per_method: Dict[str, float] = {}
        for rec in self.records:
            for method, seconds in rec.runtime.items():
                per_method[method] = per_method.get(method, 0.0) + seconds
        return {"total_seconds": elapsed, "method_seconds": per_method,
                "grid_points": len(grid), "n_jobs": self.n_jobs}


def run_separation_experiment(config: ExperimentConfig, n_jobs: Optional[int] = None) -> Report:
    """Run the deep-versus-baseline comparison described by a config"""
    return SeparationExperiment(config, n_jobs).run()


# ============================================================================
# CENSUS TOTAL VARIATION
# ============================================================================

def run_count_tv_experiment(d: int, lam: float, q: int, k: int, h_list: Sequence[int], n_samples: int,
                            seed: int = 0, n_bootstrap: int = 200) -> Report:
    """
    Total variation between leaf-census distributions for two fixed roots

    The roots are the all-zero and the all-one representations. Rows record
    the regime value d * lambda^2 next to each estimate.

    Returns:
        Report with one row per h (h, tv, stderr, d_lambda2, regime)
    """
    rows = []
    start = time.perf_counter()
    for h in h_list:
        sampler_a = census_sampler(d, h, q, k, lam, [0] * k)
        sampler_b = census_sampler(d, h, q, k, lam, [1] * k)
        estimate = estimate_tv_distance(sampler_a, sampler_b, lambda s: leaf_census(s, q), n_samples,
                                        seed=derive_seed(seed, h), n_bootstrap=n_bootstrap)
        rows.append({
            "h": int(h), "tv": estimate.value, "stderr": estimate.stderr,
            "n_samples": n_samples, "outcomes": estimate.n_outcomes,
            "d_lambda2": d * lam * lam,
            "regime": "above_ks" if d * lam * lam > 1 else "below_ks",
        })
        logger.info(f"Census TV at h={h}: {estimate.value:.4f} +/- {estimate.stderr:.4f}")

    config = {"d": d, "lambda": lam, "q": q, "k": k, "h_list": list(h_list), "samples": n_samples, "seed": seed}
    return Report(rows=pd.DataFrame(rows), config=config,
                  diagnostics={"d_lambda2": d * lam * lam},
                  timing={"total_seconds": time.perf_counter() - start})
