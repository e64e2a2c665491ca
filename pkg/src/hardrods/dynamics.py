"""Exact tagged-rod evolution: free motion plus the crossing flux.

Under the exchange dynamics a rod keeps its point's free trajectory
``x + v t`` and is displaced by the rod volume it overtakes (forward) or is
overtaken by (backward). For a finite configuration the signed crossing sum
collapses to two one-dimensional prefix sums,

    j(x, v, t) = eps * [ W(z' < x + v t) - W(x' < x) ],   z' = x' + v' t,

where ``W`` is the rod volume of points satisfying the condition (pairs with
a tied coordinate are corrected separately). ``flux_batch`` evaluates this in
O((N + M) log N); ``flux_naive`` enumerates crossings directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import Configuration, dilation_offsets
from .measures import MacroParams, VelocityLengthMeasure, moment, v_eff

# queries at or below this count use the direct O(N M) kernel
DIRECT_QUERY_LIMIT = 8


class BufferError(ValueError):
    """A query sees points that might lie outside the sampled window."""


@dataclass(frozen=True)
class FluxQuery:
    x: float
    v: float
    t: float

    def __post_init__(self):
        if not self.t >= 0:
            raise ValueError(f"flux queries need t >= 0, got {self.t}")


def _as_arrays(queries):
    if isinstance(queries, FluxQuery):
        queries = [queries]
    queries = list(queries)
    if not queries:
        return np.empty(0), np.empty(0), 0.0
    ts = {q.t for q in queries}
    if len(ts) != 1:
        raise ValueError("a batch must share one time")
    xq = np.array([q.x for q in queries], dtype=float)
    vq = np.array([q.v for q in queries], dtype=float)
    return xq, vq, float(ts.pop())


def buffer_violations(config: Configuration, xq, vq, t: float) -> np.ndarray:
    """Indices of queries whose crossing partners may lie outside the window.

    A point outside ``[lo, hi]`` has |v'| <= ``v_bound``, so it cannot cross a
    query whose free position ``x + v t`` stays in ``[lo + v_bound t, hi - v_bound t]``.
    """
    lo, hi = config.window
    xq = np.asarray(xq, dtype=float)
    zq = xq + np.asarray(vq, dtype=float) * t
    reach = config.v_bound * t
    bad = (xq < lo) | (xq > hi) | (zq < lo + reach) | (zq > hi - reach)
    return np.flatnonzero(bad)


def _check(config, xq, vq, t, what="query"):
    if not t >= 0:
        raise ValueError(f"negative time t={t} is not supported")
    bad = buffer_violations(config, xq, vq, t)
    if bad.size:
        i = int(bad[0])
        raise BufferError(
            f"{what} {i} (x={float(np.asarray(xq)[i]):.6g}, v={float(np.asarray(vq)[i]):.6g}) violates the "
            f"buffer at t={t:g} in window {config.window}; {bad.size} offending in total"
        )


def flux_naive(config: Configuration, query: FluxQuery) -> float:
    """Crossing flux by direct enumeration of the defining sum."""
    x, v, t = query.x, query.v, query.t
    _check(config, [x], [v], t)
    xp, vp, rp = config.x, config.v, config.r
    plus = (vp < v) & (x < xp) & (xp < x + (v - vp) * t)
    minus = (vp > v) & (x + (v - vp) * t < xp) & (xp < x)
    return config.epsilon * math.fsum(np.concatenate([rp[plus], -rp[minus]]).tolist())


def _flux_raw_direct(config, xq, vq, t):
    # a crossing partner of (x, v) has x' in [x + (v - v_b) t, x + (v + v_b) t]
    reach = config.v_bound * t
    zq = xq + vq * t
    a = int(np.searchsorted(config.x, (zq - reach).min(), side="left"))
    b = int(np.searchsorted(config.x, (zq + reach).max(), side="right"))
    xp = config.x[None, a:b]
    zp = xp + config.v[None, a:b] * t
    coeff = np.zeros((xq.size, len(config)), dtype=np.int8)
    coeff[:, a:b] = ((xp > xq[:, None]) & (zp < zq[:, None])).astype(np.int8) - \
        ((xp < xq[:, None]) & (zp > zq[:, None])).astype(np.int8)
    return config.weights.signed_matmul(coeff)


def _flux_raw_sorted(config, xq, vq, t):
    w = config.weights
    xs = config.x
    z = xs + config.v * t
    order_z = np.argsort(z, kind="stable")
    zs = z[order_z]
    cum_z = w.prefix(order_z)
    cum_x = config._prefix
    zq = xq + vq * t

    ix = np.searchsorted(xs, xq, side="left")
    nx = np.searchsorted(xs, xq, side="right") - ix
    iz = np.searchsorted(zs, zq, side="left")
    nz = np.searchsorted(zs, zq, side="right") - iz
    raw = w.take(cum_z, iz) - w.take(cum_x, ix)

    # pairs tied in x or in z are not crossings; undo what the prefix sums counted
    single = (nx <= 1) & (nz <= 1)
    corr = w.zeros(xq.size)
    units = w.units
    q = np.flatnonzero(single & (nx == 1))
    if q.size:
        p = ix[q]
        hit = z[p] < zq[q]
        corr[..., q[hit]] -= units[..., p[hit]]
    q = np.flatnonzero(single & (nz == 1))
    if q.size:
        p = order_z[iz[q]]
        hit = xs[p] < xq[q]
        corr[..., q[hit]] += units[..., p[hit]]
    for k in np.flatnonzero(~single):
        px = np.arange(ix[k], ix[k] + nx[k])
        px = px[z[px] < zq[k]]
        pz = order_z[iz[k]: iz[k] + nz[k]]
        pz = pz[xs[pz] < xq[k]]
        corr[..., k] += units[..., pz].sum(axis=-1) - units[..., px].sum(axis=-1)
    return raw + corr


def flux_at(config: Configuration, xq, vq, t: float, check: bool = True) -> np.ndarray:
    """Array form of :func:`flux_batch`."""
    xq = np.atleast_1d(np.asarray(xq, dtype=float))
    vq = np.broadcast_to(np.asarray(vq, dtype=float), xq.shape)
    if check:
        _check(config, xq, vq, t)
    if xq.size == 0:
        return np.empty(0)
    if t == 0 or len(config) == 0:
        return np.zeros(xq.size)
    if xq.size <= DIRECT_QUERY_LIMIT:
        raw = _flux_raw_direct(config, xq, vq, t)
    else:
        raw = _flux_raw_sorted(config, xq, vq, t)
    return config.epsilon * config.weights.to_float(raw)


def flux_batch(config: Configuration, queries) -> np.ndarray:
    """Fluxes for queries sharing one time; equal to :func:`flux_naive` bit for bit."""
    xq, vq, t = _as_arrays(queries)
    return flux_at(config, xq, vq, t)


@dataclass(frozen=True)
class TrajectoryRecord:
    source_index: int
    y0: float
    yt: float
    displacement: float
    recentered: float
    flux: float


@dataclass(frozen=True, eq=False)
class Trajectories:
    """Column-wise trajectory records for a set of tagged rods."""

    source_index: np.ndarray
    v: np.ndarray
    y0: np.ndarray
    yt: np.ndarray
    flux: np.ndarray
    t: float
    recentered: np.ndarray

    @property
    def displacement(self) -> np.ndarray:
        return self.yt - self.y0

    def __len__(self):
        return self.source_index.size

    def records(self) -> list[TrajectoryRecord]:
        d = self.displacement
        return [
            TrajectoryRecord(int(i), float(a), float(b), float(c), float(e), float(f))
            for i, a, b, c, e, f in zip(self.source_index, self.y0, self.yt, d, self.recentered, self.flux)
        ]


def evolve_tagged(config: Configuration, tagged, t: float, params: MacroParams | None = None) -> Trajectories:
    """Positions at time ``t`` of the rods at source indices ``tagged``.

    ``yt = x + m_0^x + v t + j(x, v, t)``; ``recentered`` subtracts
    ``v_eff(v) t`` (NaN without ``params``).
    """
    idx = np.atleast_1d(np.asarray(tagged, dtype=np.int64))
    if idx.size and (idx.min() < 0 or idx.max() >= len(config)):
        raise IndexError("tagged index out of range")
    xq, vq = config.x[idx], config.v[idx]
    if not t >= 0:
        raise ValueError(f"negative time t={t} is not supported")
    bad = buffer_violations(config, xq, vq, t)
    if bad.size:
        i = int(idx[bad[0]])
        raise BufferError(f"tagged rod {i} (x={config.x[i]:.6g}, v={config.v[i]:.6g}) violates the buffer "
                          f"at t={t:g}; {bad.size} offending in total")
    j = flux_at(config, xq, vq, t, check=False)
    y0 = xq + dilation_offsets(config, idx)
    yt = y0 + vq * t + j
    if params is None:
        rec = np.full(idx.size, np.nan)
    else:
        rec = yt - y0 - v_eff(vq, params) * t
    return Trajectories(idx, vq, y0, yt, j, float(t), rec)


def flux_variance_exact(rho: float, mu: VelocityLengthMeasure, v: float, t_micro: float, epsilon: float) -> float:
    """Poisson variance of ``j(x, v, t_micro)`` at a deterministic ``x``.

    Each point contributes ``(eps r')^2`` when it lies in the crossing interval
    of length ``|v - w| t``; the intensity is ``rho / eps``.
    """
    if not t_micro >= 0:
        raise ValueError("t_micro must be nonnegative")

    def crossing_volume(w, r):
        span = np.maximum(v - w, 0.0) * t_micro + np.maximum(w - v, 0.0) * t_micro
        return (epsilon * r) ** 2 * span

    return (rho / epsilon) * moment(mu, crossing_volume, split_velocity_at=v)


def flux_mean_exact(rho: float, mu: VelocityLengthMeasure, v: float, t: float) -> float:
    """Poisson mean of the flux, ``rho t E[r (v - w)]``."""
    return rho * t * moment(mu, lambda w, r: r * (v - w))
