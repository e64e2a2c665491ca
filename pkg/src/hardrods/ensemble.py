"""Poisson rod configurations, signed mass and the dilation map."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from ._exact import ExactWeights, scalar_to_float
from .measures import MacroParams, VelocityLengthMeasure, mean_functional

MAX_EXPECTED_POINTS = 10**8


class SupportError(ValueError):
    """A test function reaches outside the region where the configuration is exact."""


class RodPoint(NamedTuple):
    x: float
    v: float
    r: float


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def make_rng(seed) -> tuple[np.random.Generator, dict]:
    """Generator plus a provenance record from an int, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed, {"generator": type(seed.bit_generator).__name__}
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    info = {"entropy": ss.entropy, "spawn_key": list(ss.spawn_key)}
    return np.random.Generator(np.random.PCG64(ss)), info


@dataclass(frozen=True, eq=False)
class Configuration:
    """Finite marked point set on ``window``, sorted by position.

    Positions are macroscopic; a rod with mark ``r`` has physical length
    ``epsilon * r``. ``v_bound`` bounds |v| for points *outside* the window
    (the law's support, or a quantile cutoff); it defines the buffer zone.
    """

    x: np.ndarray
    v: np.ndarray
    r: np.ndarray
    epsilon: float
    rho: float
    window: tuple[float, float]
    v_bound: float = math.nan
    seed_info: dict = field(default_factory=dict)

    def __post_init__(self):
        x, v, r = (np.asarray(a, dtype=np.float64) for a in (self.x, self.v, self.r))
        if not (x.shape == v.shape == r.shape) or x.ndim != 1:
            raise ValueError("x, v, r must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and np.all(np.isfinite(r))):
            raise ValueError("coordinates must be finite")
        if np.any(r < 0):
            raise ValueError("rod lengths must be nonnegative")
        lo, hi = map(float, self.window)
        if hi < lo:
            raise ValueError("empty window")
        if x.size and (x.min() < lo or x.max() > hi):
            raise ValueError("points outside the window")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if x.size > 1 and not np.all(x[1:] >= x[:-1]):
            order = np.argsort(x, kind="stable")
            x, v, r = x[order], v[order], r[order]
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "v", _readonly(v))
        object.__setattr__(self, "r", _readonly(r))
        object.__setattr__(self, "window", (lo, hi))
        if math.isnan(self.v_bound):
            object.__setattr__(self, "v_bound", float(np.abs(v).max()) if v.size else 0.0)

    def __len__(self):
        return self.x.size

    @property
    def points(self) -> list[RodPoint]:
        return [RodPoint(*p) for p in zip(self.x.tolist(), self.v.tolist(), self.r.tolist())]

    @cached_property
    def weights(self) -> ExactWeights:
        return ExactWeights(self.r)

    @cached_property
    def _prefix(self) -> np.ndarray:
        return self.weights.prefix()

    def left_mass_raw(self, idx):
        """Raw exact ``sum r`` over the first ``idx`` points."""
        return self.weights.take(self._prefix, idx)

    def to_bytes(self) -> bytes:
        return np.stack([self.x, self.v, self.r]).tobytes()

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.x, self.v, self.r]), delimiter=",",
                   header="x,v,r", comments="", fmt="%.17g")


def sample(
    epsilon: float,
    rho: float,
    mu: VelocityLengthMeasure,
    window: tuple[float, float],
    seed=None,
    max_expected: float = MAX_EXPECTED_POINTS,
    tail: float = 1e-12,
) -> Configuration:
    """Poisson process with intensity ``rho/epsilon dx dmu(v, r)`` on ``window``."""
    if not epsilon > 0 or not rho > 0:
        raise ValueError("epsilon and rho must be positive")
    lo, hi = map(float, window)
    if hi < lo:
        raise ValueError("empty window")
    mean_count = rho * (hi - lo) / epsilon
    if mean_count > max_expected:
        raise ValueError(f"expected {mean_count:.3g} points exceeds the cap {max_expected:.3g}")
    rng, info = make_rng(seed)
    n = int(rng.poisson(mean_count))
    x = np.sort(rng.uniform(lo, hi, n))
    v, r = mu.sample(rng, n)
    return Configuration(x, v, r, float(epsilon), float(rho), (lo, hi),
                         v_bound=mu.velocity_bound(tail), seed_info=info)


def with_points(config: Configuration, points) -> tuple[Configuration, np.ndarray]:
    """Add deterministic points (Palm sampling of tagged rods).

    Returns the new configuration and the indices of the added points in it.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    # added points go after existing points at the same position, in input order
    k = np.argsort(pts[:, 0], kind="stable")
    at = np.searchsorted(config.x, pts[k, 0], side="right")
    x = np.insert(config.x, at, pts[k, 0])
    v = np.insert(config.v, at, pts[k, 1])
    r = np.insert(config.r, at, pts[k, 2])
    new = Configuration(x, v, r, config.epsilon, config.rho, config.window,
                        max(config.v_bound, float(np.abs(pts[:, 1]).max())), dict(config.seed_info))
    where = np.empty(k.size, dtype=np.int64)
    where[k] = at + np.arange(k.size)
    return new, where


def mass(config: Configuration, a: float, b: float) -> float:
    """Signed rod volume ``m_a^b``: ``eps * sum r`` over ``x in (a, b]``, negated for b < a."""
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    i = np.searchsorted(config.x, [a, b], side="right")
    raw = config.left_mass_raw(i[1]) - config.left_mass_raw(i[0])
    return sign * config.epsilon * scalar_to_float(config.weights, raw)


def anchor_index(config: Configuration) -> int:
    """Number of points strictly left of the origin."""
    return int(np.searchsorted(config.x, 0.0, side="left"))


@dataclass(frozen=True, eq=False)
class DilatedConfiguration:
    """Rod positions ``y = x + m_0^x`` with a back-reference to each source point."""

    y: np.ndarray
    source_index: np.ndarray
    v: np.ndarray
    r: np.ndarray
    epsilon: float
    image: tuple[float, float]

    def __len__(self):
        return self.y.size

    @property
    def entries(self):
        return list(zip(self.y.tolist(), self.source_index.tolist(), self.v.tolist(), self.r.tolist()))


def dilation_offsets(config: Configuration, idx=None) -> np.ndarray:
    """``m_0^x`` for the points ``idx`` under the left-closed rod convention.

    A rod occupies ``[y, y + eps r]``: for x > 0 the offset counts rods in
    ``[0, x)`` (itself excluded), for x < 0 it is minus the rods in ``[x, 0)``.
    """
    n = len(config)
    idx = np.arange(n) if idx is None else np.asarray(idx)
    w = config.weights
    raw = w.take(config._prefix, idx) - w.take(config._prefix, np.full(idx.shape, anchor_index(config)))
    return config.epsilon * w.to_float(raw)


def dilate(config: Configuration) -> DilatedConfiguration:
    lo, hi = config.window
    if not lo <= 0.0 <= hi:
        raise ValueError("the dilation is anchored at 0, which must lie in the window")
    m = dilation_offsets(config)
    y = config.x + m
    n0 = anchor_index(config)
    w = config.weights
    left = config.epsilon * scalar_to_float(w, w.take(config._prefix, n0))
    total = config.epsilon * scalar_to_float(w, w.take(config._prefix, len(config)))
    return DilatedConfiguration(
        y=_readonly(y),
        source_index=np.arange(len(config)),
        v=config.v,
        r=config.r,
        epsilon=config.epsilon,
        image=(lo - left, hi + total - left),
    )


@dataclass(frozen=True)
class FieldSample:
    """One replica's value of a fluctuation field.

    ``raw`` is the uncentered statistic ``eps * sum r phi``; ``value`` is
    ``eps^{-1/2} (raw - center)``.
    """

    value: float
    raw: float
    center: float
    phi_id: str = ""
    scaling: str = "static"
    replica_seed: object = None


def check_support(phi, v: np.ndarray, region: tuple[float, float]) -> None:
    vv = v if np.size(v) else np.zeros(1)
    lo, hi = phi.support_bounds(vv)
    if np.min(lo) <= region[0] or np.max(hi) >= region[1]:
        raise SupportError(
            f"test function support [{np.min(lo):.4g}, {np.max(hi):.4g}] is not strictly inside "
            f"[{region[0]:.4g}, {region[1]:.4g}]"
        )


def asymptotic_center(phi, params: MacroParams) -> float:
    """``<phi> / (1 + sigma)``."""
    return mean_functional(phi, params) / (1.0 + params.sigma)


def linear_statistic(positions, v, r, phi, epsilon) -> float:
    return float(epsilon * np.dot(r, phi(positions, v, r))) if np.size(r) else 0.0


def field_estimate(dilated: DilatedConfiguration, phi, params: MacroParams, center=None,
                   phi_id: str = "", replica_seed=None) -> FieldSample:
    """Static fluctuation field of the dilated configuration.

    ``center=None`` uses the asymptotic mean ``<phi>/(1+sigma)``; pass the
    replica mean of ``raw`` to center empirically.
    """
    check_support(phi, dilated.v, dilated.image)
    raw = linear_statistic(dilated.y, dilated.v, dilated.r, phi, dilated.epsilon)
    c = asymptotic_center(phi, params) if center is None else float(center)
    return FieldSample((raw - c) / math.sqrt(dilated.epsilon), raw, c, phi_id, "static", replica_seed)
