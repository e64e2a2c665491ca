"""Fluctuation fields at time 0, under Euler scaling and under diffusive scaling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dynamics import evolve_tagged
from .ensemble import (Configuration, FieldSample, SupportError, asymptotic_center, dilate,
                       field_estimate, linear_statistic)
from .measures import MacroParams, _hermite, diffusivity, theoretical_covariance, v_eff

__all__ = [
    "FieldSample", "transported", "euler_field", "diffusive_field", "evolved_positions",
    "rigid_translation_stats", "RigidStats", "diffusive_variance_oracle", "transport_generator",
    "field_estimate",
]


def transported(phi, t: float, params: MacroParams):
    """``(y, v, r) -> phi(y + v_eff(v) t, v, r)``."""
    if t == 0:
        return phi
    return phi.with_shift(lambda v: v_eff(np.asarray(v, dtype=float), params) * t)


def transport_generator(phi, t: float, params: MacroParams):
    """``v_eff(v) d/dy phi_t``, the time derivative of ``phi_t``."""
    return transported(phi, t, params).derivative().times_velocity_poly((-params.pi, 1.0 + params.sigma))


def _velocity_probe(config: Configuration) -> np.ndarray:
    vb = config.v_bound
    return np.concatenate([config.v, np.linspace(-vb, vb, 65)])


def evolved_positions(config: Configuration, t: float, params: MacroParams | None = None):
    """Time-``t`` positions of every rod whose position is exactly known.

    Rods whose free position stays ``v_bound t`` inside the window cannot have
    met a point from outside it. Returns ``(trajectories, (y_min, y_max))``;
    every rod of the infinite system lying strictly between ``y_min`` and
    ``y_max`` at time ``t`` is among the returned ones (rod order at time t
    is the order of free positions).
    """
    lo, hi = config.window
    reach = config.v_bound * t
    z = config.x + config.v * t
    inside = np.flatnonzero((z >= lo + reach) & (z <= hi - reach))
    traj = evolve_tagged(config, inside, t, params)
    if len(traj) == 0:
        return traj, (math.inf, -math.inf)
    return traj, (float(traj.yt.min()), float(traj.yt.max()))


def _covered(phi, vprobe, extra_shift, span, what):
    lo, hi = phi.support_bounds(vprobe)
    lo = lo + extra_shift
    hi = hi + extra_shift
    if np.min(lo) <= span[0] or np.max(hi) >= span[1]:
        raise SupportError(
            f"{what}: test function reaches [{np.min(lo):.4g}, {np.max(hi):.4g}] but exact rod positions "
            f"only cover ({span[0]:.4g}, {span[1]:.4g}); enlarge the window"
        )


def euler_field(config: Configuration, phi, t: float, params: MacroParams, center=None,
                phi_id: str = "", replica_seed=None) -> FieldSample:
    """``eps^{-1/2} [eps sum r phi(y_t, v, r) - <phi>/(1+sigma)]``."""
    if t == 0:
        s = field_estimate(dilate(config), phi, params, center, phi_id, replica_seed)
        return FieldSample(s.value, s.raw, s.center, phi_id, "euler(0)", replica_seed)
    traj, span = evolved_positions(config, t)
    vprobe = _velocity_probe(config)
    _covered(phi, vprobe, 0.0, span, "euler_field")
    idx = traj.source_index
    raw = linear_statistic(traj.yt, config.v[idx], config.r[idx], phi, config.epsilon)
    c = asymptotic_center(phi, params) if center is None else float(center)
    return FieldSample((raw - c) / math.sqrt(config.epsilon), raw, c, phi_id, f"euler({t:g})", replica_seed)


def diffusive_field(config: Configuration, phi, t: float, params: MacroParams, center=None,
                    phi_id: str = "", replica_seed=None) -> FieldSample:
    """Recentered field at micro time ``t/eps``:
    ``eps^{-1/2} [eps sum r phi(y_{t/eps} - v_eff(v) t/eps, v, r) - <phi>/(1+sigma)]``.
    """
    eps = config.epsilon
    if t == 0:
        s = field_estimate(dilate(config), phi, params, center, phi_id, replica_seed)
        return FieldSample(s.value, s.raw, s.center, phi_id, "diffusive(0)", replica_seed)
    T = t / eps
    traj, span = evolved_positions(config, T, params)
    vb = config.v_bound
    ve = v_eff(np.array([-vb, vb]), params) * T
    vprobe = _velocity_probe(config)
    lo, hi = phi.support_bounds(vprobe)
    need = (float(np.min(lo) + ve.min()), float(np.max(hi) + ve.max()))
    if need[0] <= span[0] or need[1] >= span[1]:
        raise SupportError(
            f"diffusive_field: rods landing in the support may sit in [{need[0]:.4g}, {need[1]:.4g}] "
            f"but exact positions only cover ({span[0]:.4g}, {span[1]:.4g}); enlarge the window"
        )
    idx = traj.source_index
    pos = traj.yt - v_eff(config.v[idx], params) * T
    raw = linear_statistic(pos, config.v[idx], config.r[idx], phi, eps)
    c = asymptotic_center(phi, params) if center is None else float(center)
    return FieldSample((raw - c) / math.sqrt(eps), raw, c, phi_id, f"diffusive({t:g})", replica_seed)


@dataclass(frozen=True)
class RigidStats:
    variance: float
    pair_correlation: float
    n: int
    degenerate: bool
    first: np.ndarray
    second: np.ndarray


def _pick_pair(config: Configuration, v_tag: float, band: float, separation: float):
    eligible = np.flatnonzero(np.abs(config.v - v_tag) <= band)
    if eligible.size < 2:
        raise ValueError(f"fewer than 2 rods with velocity within {band} of {v_tag}")
    i = eligible[np.argmin(np.abs(config.x[eligible]))]
    target = config.x[i] + separation
    far = eligible[np.abs(config.x[eligible] - config.x[i]) >= 1.0]
    if far.size == 0:
        raise ValueError("no second tagged rod at macroscopic distance >= 1")
    j = far[np.argmin(np.abs(config.x[far] - target))]
    return int(i), int(j)


def rigid_translation_stats(config_set: Iterable, v_tag: float, t: float, params: MacroParams,
                            band: float = 0.05, separation: float = 2.0) -> RigidStats:
    """Variance and pair correlation of recentered tagged displacements at micro time ``t/eps``.

    ``config_set`` yields configurations, or ``(configuration, (i, j))`` with
    the tagged pair given explicitly (e.g. Palm-inserted rods). Otherwise the
    eligible rod nearest the origin and the eligible rod nearest
    ``separation`` to its right are tagged.
    """
    a, b = [], []
    for item in config_set:
        if isinstance(item, Configuration):
            config, pair = item, None
        else:
            config, pair = item
        if pair is None:
            pair = _pick_pair(config, v_tag, band, separation)
        else:
            i, j = pair
            if abs(config.x[j] - config.x[i]) < 1.0:
                raise ValueError("tagged rods must be at macroscopic distance >= 1")
        T = t / config.epsilon
        tr = evolve_tagged(config, list(pair), T, params)
        a.append(tr.recentered[0])
        b.append(tr.recentered[1])
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.size
    if n < 2:
        raise ValueError("need at least two replicas")
    var = float(np.var(a, ddof=1))
    sa, sb = np.std(a), np.std(b)
    if t == 0 or sa == 0 or sb == 0:
        return RigidStats(var, math.nan, n, True, a, b)
    corr = float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))
    return RigidStats(var, corr, n, False, a, b)


def diffusive_variance_oracle(phi, t: float, params: MacroParams, n_nodes: int = 64) -> float:
    """``E_W[cov(phi(. + sqrt(D(v)) W), same)]`` with one ``W ~ N(0, t)`` shared by all velocities.

    For test functions carried by a single velocity the answer does not depend
    on how the Brownian motions of different velocities are coupled.
    """
    mu = params.mu
    cache = {}

    def root_D(v):
        v = np.asarray(v, dtype=float)
        out = np.empty(v.shape)
        for k, val in np.ndenumerate(v):
            if val not in cache:
                cache[val] = math.sqrt(diffusivity(float(val), params.rho, mu))
            out[k] = cache[val]
        return out

    w, wt = _hermite(n_nodes)
    total = 0.0
    for node, weight in zip(w * math.sqrt(t), wt):
        shifted = phi.with_shift(lambda v, s=node: root_D(v) * s)
        total += weight * theoretical_covariance(shifted, shifted, params)
    return total
