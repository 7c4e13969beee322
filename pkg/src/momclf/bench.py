"""Experiment drivers: robustness comparison, K-sweep, convergence rates,
and timing probes.

Every experiment takes a master seed and derives per-run seeds through
``derive_seed``, which hashes (master_seed, *path) with numpy's
SeedSequence.  Rerunning an experiment with the same master seed reproduces
every non-timing record value exactly; runs are independent, so the records
could equally be produced in parallel.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from momclf.data import Dataset, generate_gaussians, generate_moons, generate_toy
from momclf.losses import LossKind
from momclf.model import KernelSpec, LinearModel, predict
from momclf.optim import (
    FastKlrConfig,
    MomGdConfig,
    StepSchedule,
    erm_gd_train,
    fast_klr_mom_train,
    klr_mom_train,
    mom_gd_train,
)

TOY_TEST_SIZE = 500
RATE_TEST_SIZE = 1_000_000
RATE_GRID = (250, 500, 1000, 2000, 4000, 8000)
RATE_T = 2000
# Per-dataset descent configuration for the rate experiment.  The clean
# Gaussian blobs measure the statistical decay, so a small block count and
# a moderate step suffice; on the moons the statistical excess of the
# 3-parameter model is tiny, and the measured curve is dominated by the
# descent's own block-sampling inefficiency, which needs many blocks to be
# visible and a strong step to keep the optimization floor below it.
RATE_CONFIG = {"gaussians": {"k": 10, "eta0": 2.0},
               "moons": {"k": 120, "eta0": 10.0}}


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed for (master_seed, *path)."""
    ss = np.random.SeedSequence([int(master_seed), *map(int, path)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class ExperimentReport:
    """Per-run records plus summary statistics of one experiment."""

    name: str
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    slope: float | None = None
    intercept: float | None = None
    r_squared: float | None = None

    def to_json(self, path) -> None:
        payload = {"name": self.name, "records": self.records,
                   "summary": self.summary}
        if self.slope is not None:
            payload["fit"] = {"slope": self.slope, "intercept": self.intercept,
                              "r_squared": self.r_squared}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)

    def write_records_csv(self, path) -> None:
        if not self.records:
            raise ValueError("no records to write")
        cols = sorted({k for rec in self.records for k in rec})
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for rec in self.records:
                fh.write(",".join(str(rec.get(c, "")) for c in cols) + "\n")


def accuracy(model, test: Dataset) -> float:
    """Fraction of test labels matched by sign(score), sign(0) = +1."""
    if test.n < 1:
        raise ValueError("test set is empty")
    return float(np.mean(predict(model, test.X) == test.y))


def summarize_accuracies(records) -> dict:
    """Per-method mean/median/quartiles of the accuracy records."""
    out = {}
    methods = sorted({rec["method"] for rec in records if "accuracy" in rec})
    for method in methods:
        accs = np.array([rec["accuracy"] for rec in records
                         if rec["method"] == method and rec["accuracy"] is not None])
        if accs.size == 0:
            continue
        out[method] = {
            "mean": float(accs.mean()),
            "median": float(np.median(accs)),
            "q1": float(np.quantile(accs, 0.25)),
            "q3": float(np.quantile(accs, 0.75)),
            "n": int(accs.size),
        }
    return out


def fit_loglog(ns, values) -> tuple[float, float, float, int]:
    """Least-squares line through (log n, log value); non-positive values
    are dropped with a warning.  Returns (slope, intercept, r2, points)."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if not np.all(keep):
        warnings.warn(f"dropping {int((~keep).sum())} non-positive excess-risk "
                      "points from the log-log fit", stacklevel=2)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points for a slope fit")
    lx = np.log(ns[keep])
    ly = np.log(values[keep])
    design = np.c_[lx, np.ones(lx.size)]
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2, int(keep.sum())


def _train_toy_method(method: str, train: Dataset, k: int, t: int,
                      eta0: float, seed: int):
    schedule = StepSchedule(kind="inverse-t", eta0=eta0)
    init = LinearModel.zeros(train.p)
    if method == "mom-logistic":
        cfg = MomGdConfig(k=k, t=t, schedule=schedule, loss=LossKind.LOGISTIC,
                          seed=seed)
        return mom_gd_train(train, init, cfg)[0]
    if method == "mom-hinge":
        cfg = MomGdConfig(k=k, t=t, schedule=schedule, loss=LossKind.HINGE,
                          seed=seed)
        return mom_gd_train(train, init, cfg)[0]
    if method == "erm-logistic":
        return erm_gd_train(train, init, t, schedule, LossKind.LOGISTIC)
    raise ValueError(f"unknown method {method!r}")


def run_robustness_experiment(n_runs: int, master_seed: int = 0,
                              n_inliers: int = 600, n_outliers: int = 30,
                              k: int = 120, t: int = 2000,
                              eta0: float = 0.5) -> ExperimentReport:
    """Paired accuracy comparison on the corrupted toy setup.

    Each run draws a fresh corrupted training set and a clean test set,
    then trains MOM-logistic, MOM-hinge and the ERM-logistic baseline on
    the same data.  Per-run training failures are recorded, not fatal.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    report = ExperimentReport(name="robustness")
    methods = ("mom-logistic", "mom-hinge", "erm-logistic")
    for r in range(n_runs):
        train = generate_toy(n_inliers, n_outliers, derive_seed(master_seed, r, 0))
        test = generate_toy(TOY_TEST_SIZE, 0, derive_seed(master_seed, r, 1))
        for m_i, method in enumerate(methods):
            t0 = time.perf_counter()
            try:
                model = _train_toy_method(method, train, k, t, eta0,
                                          derive_seed(master_seed, r, 2 + m_i))
                acc = accuracy(model, test)
                err = None
            except Exception as exc:  # recorded per run, not fatal to the report
                acc, err = None, repr(exc)
            report.records.append({
                "run": r, "method": method, "k": k if method != "erm-logistic" else 1,
                "t": t, "accuracy": acc, "wall_time": time.perf_counter() - t0,
                "error": err,
            })
    report.summary = summarize_accuracies(report.records)
    return report


def run_k_sweep(k_values, n_runs: int, master_seed: int = 0,
                n_inliers: int = 600, n_outliers: int = 30,
                t: int = 2000, eta0: float = 0.5) -> ExperimentReport:
    """Mean MOM-logistic accuracy as a function of the block count K."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    report = ExperimentReport(name="k-sweep")
    for k in k_values:
        if not 1 <= k <= (n_inliers + n_outliers) // 2:
            raise ValueError(f"k={k} outside [1, n/2]")
    for r in range(n_runs):
        train = generate_toy(n_inliers, n_outliers, derive_seed(master_seed, r, 0))
        test = generate_toy(TOY_TEST_SIZE, 0, derive_seed(master_seed, r, 1))
        for j, k in enumerate(k_values):
            model = _train_toy_method("mom-logistic", train, k, t, eta0,
                                      derive_seed(master_seed, r, 2 + j))
            report.records.append({
                "run": r, "method": f"mom-logistic-k{k}", "k": k,
                "accuracy": accuracy(model, test),
            })
    report.summary = summarize_accuracies(report.records)
    report.summary["mean_accuracy_by_k"] = {
        str(k): report.summary[f"mom-logistic-k{k}"]["mean"] for k in k_values
    }
    return report


def _rate_generator(kind: str):
    if kind == "moons":
        return lambda n, seed: generate_moons(n, 0.3, seed)
    if kind == "gaussians":
        return generate_gaussians
    raise ValueError(f"unknown dataset kind {kind!r}")


def run_rate_experiment(dataset_kind: str, n_values=RATE_GRID,
                        n_runs: int = 20, master_seed: int = 0,
                        k: int | None = None, t: int = RATE_T,
                        eta0: float | None = None,
                        test_size: int = RATE_TEST_SIZE) -> ExperimentReport:
    """Excess-risk decay of MOM-logistic as the sample size grows.

    For each n, a reference classifier is trained once on a clean sample
    ten times larger, then each run trains MOM-logistic on a fresh n-sample
    set and measures the 0-1 risk difference to the reference on a large
    independent Monte-Carlo test set, paired so the common test noise
    cancels.  The report carries the least-squares slope of log(mean
    excess) against log(n).
    """
    n_values = list(n_values)
    if len(n_values) < 4 or any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be strictly increasing with >= 4 points")
    gen = _rate_generator(dataset_kind)
    defaults = RATE_CONFIG[dataset_kind]
    k = defaults["k"] if k is None else k
    eta0 = defaults["eta0"] if eta0 is None else eta0
    report = ExperimentReport(name=f"rates-{dataset_kind}")
    mean_excess = []
    for i, n in enumerate(n_values):
        ref_ds = gen(10 * n, derive_seed(master_seed, i, 0))
        reference = erm_gd_train(ref_ds, LinearModel.zeros(ref_ds.p), 500,
                                 StepSchedule(kind="constant", eta0=2.0),
                                 LossKind.LOGISTIC)
        excesses = []
        for r in range(n_runs):
            train = gen(n, derive_seed(master_seed, i, 1 + 3 * r))
            test = gen(test_size, derive_seed(master_seed, i, 2 + 3 * r))
            cfg = MomGdConfig(k=min(k, train.n // 2), t=t,
                              schedule=StepSchedule(kind="inverse-t", eta0=eta0),
                              loss=LossKind.LOGISTIC,
                              seed=derive_seed(master_seed, i, 3 + 3 * r),
                              gradient_mode="mean")
            model, _ = mom_gd_train(train, LinearModel.zeros(train.p), cfg)
            excess = (1.0 - accuracy(model, test)) - (1.0 - accuracy(reference, test))
            excesses.append(excess)
            report.records.append({"n": n, "run": r, "method": "mom-logistic",
                                   "excess_risk": excess})
        mean_excess.append(float(np.mean(excesses)))
    slope, intercept, r2, kept = fit_loglog(n_values, mean_excess)
    report.slope, report.intercept, report.r_squared = slope, intercept, r2
    report.summary = {
        "mean_excess_by_n": dict(zip(map(str, n_values), mean_excess)),
        "slope": slope, "intercept": intercept, "r_squared": r2,
        "points_kept": kept,
    }
    return report


def _timing_algorithms():
    def linear(method):
        def run(train, test, seed, k, t_steps):
            model = _train_toy_method(method, train, k, t_steps, 0.5, seed)
            predict(model, test.X)
        return run

    def kernel(full):
        def run(train, test, seed, k, t_steps):
            cfg = FastKlrConfig(k=k, t=t_steps,
                                schedule=StepSchedule(kind="inverse-t", eta0=0.5),
                                beta=1e-3,
                                kernel=KernelSpec(kind="rbf",
                                                  gamma=1.0 / train.p),
                                seed=seed)
            train_fn = klr_mom_train if full else fast_klr_mom_train
            model, _ = train_fn(train, cfg)
            predict(model, test.X)
        return run

    return {
        "mom-logistic": linear("mom-logistic"),
        "mom-hinge": linear("mom-hinge"),
        "erm-logistic": linear("erm-logistic"),
        "klr-mom": kernel(full=True),
        "fast-klr-mom": kernel(full=False),
    }


def run_timing_probe(algorithms, n: int, master_seed: int = 0, k: int = 20,
                     t_linear: int = 2000, t_kernel: int = 50) -> ExperimentReport:
    """Wall-clock train-plus-test time of each named algorithm on clean
    Gaussian blobs of size n.

    One warm-up run per algorithm is discarded before timing.  Absolute
    times are machine-dependent; the report also carries ratios to the
    fastest algorithm.
    """
    if n < k:
        raise ValueError("n must be at least k")
    registry = _timing_algorithms()
    for name in algorithms:
        if name not in registry:
            raise ValueError(f"unknown algorithm {name!r}; "
                             f"choose from {sorted(registry)}")
    report = ExperimentReport(name="timing")
    train = generate_gaussians(n, derive_seed(master_seed, 0))
    test = generate_gaussians(n, derive_seed(master_seed, 1))
    times = {}
    for name in algorithms:
        t_steps = t_kernel if "klr" in name else t_linear
        runner = registry[name]
        runner(train, test, derive_seed(master_seed, 2), k, t_steps)  # warm-up
        t0 = time.perf_counter()
        runner(train, test, derive_seed(master_seed, 3), k, t_steps)
        elapsed = time.perf_counter() - t0
        times[name] = elapsed
        report.records.append({"method": name, "n": n, "k": k,
                               "t": t_steps, "wall_time": elapsed})
    fastest = min(times.values())
    report.summary = {
        "wall_time": times,
        "relative_to_fastest": {name: v / fastest for name, v in times.items()},
    }
    return report
