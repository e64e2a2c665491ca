"""Replica orchestration and the statistical decision layer.

All reductions go through ``math.fsum`` so that aggregated numbers do not
depend on the order in which replicas finish.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

SIGMAS = 4.0
# two-sided tail of a 4-sigma normal interval
TAIL = 2.0 * sps.norm.sf(SIGMAS)


class ReplicaError(RuntimeError):
    def __init__(self, index: int, spawn_key, cause: BaseException):
        super().__init__(f"replica {index} (spawn_key={tuple(spawn_key)}) failed: {cause!r}")
        self.index = index
        self.spawn_key = tuple(spawn_key)


def fmean(x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return math.fsum(x.tolist()) / x.size


def fcov(x, y) -> float:
    """Unbiased covariance with order-independent sums."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if n < 2:
        return math.nan
    dx = x - fmean(x)
    dy = y - fmean(y)
    return math.fsum((dx * dy).tolist()) / (n - 1)


@dataclass(frozen=True, eq=False)
class ReplicaStats:
    """Aggregate over replicas of one or several scalar statistics."""

    n: int
    mean: np.ndarray
    variance: np.ndarray
    covariance: np.ndarray
    stderr: np.ndarray
    ci95: tuple[np.ndarray, np.ndarray]
    samples: np.ndarray = field(repr=False)

    @classmethod
    def from_samples(cls, samples) -> "ReplicaStats":
        s = np.asarray(samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        n, k = s.shape
        mean = np.array([fmean(s[:, j]) for j in range(k)])
        cov = np.full((k, k), math.nan)
        if n >= 2:
            for i in range(k):
                for j in range(i, k):
                    cov[i, j] = cov[j, i] = fcov(s[:, i], s[:, j])
        var = np.diag(cov).copy()
        se = np.sqrt(var / n)
        half = sps.norm.isf(0.025) * se
        return cls(n, mean, var, cov, se, (mean - half, mean + half), s)

    def scalar(self, j: int = 0) -> dict:
        return {"n": self.n, "mean": float(self.mean[j]), "variance": float(self.variance[j]),
                "stderr": float(self.stderr[j])}

    def covariance_stderr(self) -> np.ndarray:
        """Delta-method standard errors of the covariance entries."""
        s = self.samples
        n, k = s.shape
        d = s - self.mean[None, :]
        out = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                prod = d[:, i] * d[:, j]
                out[i, j] = out[j, i] = math.sqrt(fcov(prod, prod) / n)
        return out

    def skewness(self) -> np.ndarray:
        d = self.samples - self.mean[None, :]
        m2 = np.array([fmean(c**2) for c in d.T])
        m3 = np.array([fmean(c**3) for c in d.T])
        return m3 / m2**1.5

    def excess_kurtosis(self) -> np.ndarray:
        d = self.samples - self.mean[None, :]
        m2 = np.array([fmean(c**2) for c in d.T])
        m4 = np.array([fmean(c**4) for c in d.T])
        return m4 / m2**2 - 3.0


def replica_seeds(master_seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(master_seed).spawn(n)


def _call(args):
    fn, index, seed = args
    try:
        return np.atleast_1d(np.asarray(fn(seed), dtype=float))
    except Exception as exc:  # noqa: BLE001 - re-raised with the seed attached
        raise ReplicaError(index, seed.spawn_key, exc) from exc


def run_replicas(experiment: Callable, n: int, master_seed: int, threads: int = 1) -> ReplicaStats:
    """Run ``experiment(seed_sequence)`` for ``n`` independent child seeds.

    Results are collected in seed order, so the output does not depend on
    ``threads``. ``experiment`` must be picklable when ``threads > 1``.
    """
    if n < 2:
        raise ValueError("need at least two replicas")
    seeds = replica_seeds(master_seed, n)
    jobs = [(experiment, i, s) for i, s in enumerate(seeds)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_call, jobs, chunksize=max(1, n // (8 * threads))))
    else:
        rows = [_call(j) for j in jobs]
    return ReplicaStats.from_samples(np.vstack(rows))


@dataclass
class Verdict:
    test_id: str
    statistic: float
    target: float
    stderr_or_ci: object
    z_or_chi2: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        if isinstance(d["stderr_or_ci"], tuple):
            d["stderr_or_ci"] = list(d["stderr_or_ci"])
        return d

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True)

    def line(self) -> str:
        return (f"[{'PASS' if self.passed else 'FAIL'}] {self.test_id}: statistic={self.statistic:.6g} "
                f"target={self.target:.6g} score={self.z_or_chi2:.3g}")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def z_test(test_id: str, estimate: float, stderr: float, target: float, sigmas: float = SIGMAS) -> Verdict:
    if stderr == 0:
        z = 0.0 if estimate == target else math.inf
    else:
        z = (estimate - target) / stderr
    return Verdict(test_id, float(estimate), float(target), float(stderr), float(z), bool(abs(z) <= sigmas))


def variance_interval(s2: float, n: int, tail: float = TAIL) -> tuple[float, float]:
    """Chi-square interval for a variance from ``n`` normal samples."""
    df = n - 1
    return df * s2 / sps.chi2.isf(tail / 2.0, df), df * s2 / sps.chi2.ppf(tail / 2.0, df)


def chi2_test(test_id: str, s2: float, n: int, target: float, tail: float = TAIL) -> Verdict:
    lo, hi = variance_interval(s2, n, tail)
    chi2 = (n - 1) * s2 / target if target > 0 else math.inf
    return Verdict(test_id, float(s2), float(target), (float(lo), float(hi)), float(chi2),
                   bool(lo <= target <= hi), {"n": n})


def test_against(stats: ReplicaStats, target: float, kind: str = "mean", j: int = 0,
                 test_id: str = "") -> Verdict:
    """4-sigma z-test of the mean, or a chi-square interval test of the variance."""
    if stats.n < 30:
        raise ValueError("at least 30 replicas are required")
    tid = test_id or f"{kind}[{j}]"
    if kind == "mean":
        return z_test(tid, stats.mean[j], stats.stderr[j], target)
    if kind == "variance":
        return chi2_test(tid, stats.variance[j], stats.n, target)
    raise ValueError(f"unknown test kind {kind!r}")


test_against.__test__ = False


def normality_verdicts(stats: ReplicaStats, prefix: str = "normality") -> list[Verdict]:
    """Skewness and excess kurtosis against 4 * sqrt(6/n) and 4 * sqrt(24/n)."""
    n = stats.n
    out = []
    sk_se, ku_se = math.sqrt(6.0 / n), math.sqrt(24.0 / n)
    for j, (sk, ku) in enumerate(zip(stats.skewness(), stats.excess_kurtosis())):
        out.append(z_test(f"{prefix}.skewness[{j}]", sk, sk_se, 0.0))
        out.append(z_test(f"{prefix}.kurtosis[{j}]", ku, ku_se, 0.0))
    return out


def correlation(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = fcov(x, y)
    sx, sy = math.sqrt(fcov(x, x)), math.sqrt(fcov(y, y))
    if sx == 0 or sy == 0:
        return math.nan
    return c / (sx * sy)


def fisher_interval(r: float, n: int, sigmas: float = SIGMAS) -> tuple[float, float]:
    z = math.atanh(max(min(r, 1 - 1e-15), -1 + 1e-15))
    h = sigmas / math.sqrt(n - 3)
    return math.tanh(z - h), math.tanh(z + h)


@dataclass(frozen=True)
class ConvergenceFit:
    epsilons: tuple
    values: tuple
    target: float
    fitted_rate: float
    intercept: float
    r_squared: float
    excluded: tuple = ()

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def fit_rate(points: Sequence[tuple[float, float]], target: float) -> ConvergenceFit:
    """Least-squares slope of ``log|value - target|`` against ``log eps``."""
    pts = sorted(((float(e), float(v)) for e, v in points), key=lambda p: -p[0])
    eps = [e for e, _ in pts]
    if len(pts) < 3:
        raise ValueError("need at least three epsilon levels")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon levels must be distinct")
    keep = [(e, v) for e, v in pts if v != target]
    excluded = tuple(e for e, v in pts if v == target)
    if len(keep) < 2:
        raise ValueError("fewer than two levels with nonzero residual")
    lx = np.log([e for e, _ in keep])
    ly = np.log([abs(v - target) for _, v in keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ConvergenceFit(tuple(eps), tuple(v for _, v in pts), float(target), float(slope),
                          float(intercept), r2, excluded)
