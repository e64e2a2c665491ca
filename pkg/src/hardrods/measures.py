"""Mark measures over (velocity, rod length) and the macroscopic constants they induce."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import interpolate, special, stats

N_NODES = 64
WEIGHT_TOL = 1e-12


class QuadratureError(ValueError):
    """Raised when a moment cannot be evaluated to a finite number."""


class DomainError(ValueError):
    """Raised when an operator is undefined for the given parameters."""


@lru_cache(maxsize=None)
def _legendre(n):
    return special.roots_legendre(n)


@lru_cache(maxsize=None)
def _hermite(n):
    x, w = special.roots_hermitenorm(n)
    return x, w / math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=None)
def _laguerre(n):
    return special.roots_laguerre(n)


def legendre_nodes(lo: float, hi: float, n: int = N_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[lo, hi]`` (plain Lebesgue weight)."""
    x, w = _legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


# --------------------------------------------------------------------------
# one-dimensional laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    value: float

    kind = "atom"

    def nodes(self, n: int = N_NODES):
        return np.array([float(self.value)]), np.array([1.0])

    def split_nodes(self, at: float, n: int = N_NODES):
        return self.nodes(n)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.value))

    def mean(self) -> float:
        return float(self.value)

    def second_moment(self) -> float:
        return float(self.value) ** 2

    def bound(self, tail: float = 1e-12) -> float:
        return abs(float(self.value))

    def support_min(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        return {"atom": float(self.value)}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    kind = "uniform"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"uniform law needs lo < hi, got [{self.lo}, {self.hi}]")

    def nodes(self, n: int = N_NODES):
        x, w = legendre_nodes(self.lo, self.hi, n)
        return x, w / (self.hi - self.lo)

    def split_nodes(self, at: float, n: int = N_NODES):
        if not self.lo < at < self.hi:
            return self.nodes(n)
        x1, w1 = legendre_nodes(self.lo, at, n)
        x2, w2 = legendre_nodes(at, self.hi, n)
        return np.concatenate([x1, x2]), np.concatenate([w1, w2]) / (self.hi - self.lo)

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def second_moment(self):
        return (self.lo**2 + self.lo * self.hi + self.hi**2) / 3.0

    def bound(self, tail=1e-12):
        return max(abs(self.lo), abs(self.hi))

    def support_min(self):
        return float(self.lo)

    def to_dict(self):
        return {"uniform": [float(self.lo), float(self.hi)]}


@dataclass(frozen=True)
class Gaussian:
    loc: float
    sd: float

    kind = "gaussian"

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError(f"gaussian law needs sd > 0, got {self.sd}")

    def nodes(self, n=N_NODES):
        x, w = _hermite(n)
        return self.loc + self.sd * x, w.copy()

    def split_nodes(self, at, n=N_NODES):
        # Gauss-Legendre on each side of the kink against the density; tails past
        # 12 sd are below double precision.
        lo, hi = self.loc - 12.0 * self.sd, self.loc + 12.0 * self.sd
        if not lo < at < hi:
            return self.nodes(n)
        xs, ws = [], []
        for a, b in ((lo, at), (at, hi)):
            x, w = legendre_nodes(a, b, n)
            xs.append(x)
            ws.append(w * stats.norm.pdf(x, self.loc, self.sd))
        return np.concatenate(xs), np.concatenate(ws)

    def sample(self, rng, size):
        return rng.normal(self.loc, self.sd, size)

    def mean(self):
        return float(self.loc)

    def second_moment(self):
        return self.loc**2 + self.sd**2

    def bound(self, tail=1e-12):
        # two-sided: P(|V - m| > q) = tail
        return abs(self.loc) + self.sd * float(stats.norm.isf(tail / 2.0))

    def support_min(self):
        return -math.inf

    def to_dict(self):
        return {"gaussian": [float(self.loc), float(self.sd)]}


@dataclass(frozen=True)
class Exponential:
    rate: float

    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"exponential law needs rate > 0, got {self.rate}")

    def nodes(self, n=N_NODES):
        x, w = _laguerre(n)
        return x / self.rate, w.copy()

    def split_nodes(self, at, n=N_NODES):
        if not at > 0:
            return self.nodes(n)
        x1, w1 = legendre_nodes(0.0, at, n)
        w1 = w1 * self.rate * np.exp(-self.rate * x1)
        # memoryless tail beyond the kink
        x2, w2 = _laguerre(n)
        return (
            np.concatenate([x1, at + x2 / self.rate]),
            np.concatenate([w1, w2 * math.exp(-self.rate * at)]),
        )

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def mean(self):
        return 1.0 / self.rate

    def second_moment(self):
        return 2.0 / self.rate**2

    def bound(self, tail=1e-12):
        return -math.log(tail) / self.rate

    def support_min(self):
        return 0.0

    def to_dict(self):
        return {"exponential": float(self.rate)}


DistSpec = Atom | Uniform | Gaussian | Exponential


def parse_dist(spec) -> DistSpec:
    """Build a law from its serialized form, e.g. ``{"uniform": [-1, 1]}`` or a bare number (atom)."""
    if isinstance(spec, (Atom, Uniform, Gaussian, Exponential)):
        return spec
    if isinstance(spec, (int, float)):
        return Atom(float(spec))
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError(f"cannot parse law {spec!r}")
    (kind, args), = spec.items()
    if kind == "atom":
        return Atom(float(args))
    if kind == "uniform":
        return Uniform(*map(float, args))
    if kind == "gaussian":
        return Gaussian(*map(float, args))
    if kind == "exponential":
        return Exponential(float(args))
    raise ValueError(f"unknown law kind {kind!r}")


# --------------------------------------------------------------------------
# the joint mark measure
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    weight: float
    velocity: DistSpec
    length: DistSpec


@dataclass(frozen=True)
class VelocityLengthMeasure:
    """Finite mixture of product laws ``velocity x length``.

    Each component draws the velocity and the (scale-free) rod length
    independently; correlations between v and r come from mixing.
    """

    components: tuple[Component, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a measure needs at least one component")
        weights = np.array([c.weight for c in comps], dtype=float)
        if np.any(weights < 0):
            raise ValueError("component weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"component weights sum to {weights.sum()!r}, not 1")
        for c in comps:
            if c.length.support_min() < 0:
                raise ValueError(f"length law {c.length} charges negative lengths")

    @classmethod
    def product(cls, velocity, length) -> "VelocityLengthMeasure":
        return cls((Component(1.0, parse_dist(velocity), parse_dist(length)),))

    @classmethod
    def from_dict(cls, data) -> "VelocityLengthMeasure":
        """Parse ``[{"weight": w, "velocity": law, "length": law}, ...]``."""
        if isinstance(data, dict):
            data = data.get("components", [data])
        comps = []
        for item in data:
            comps.append(
                Component(
                    float(item.get("weight", 1.0)),
                    parse_dist(item["velocity"]),
                    parse_dist(item["length"]),
                )
            )
        return cls(tuple(comps))

    def to_dict(self) -> list[dict]:
        return [
            {"weight": c.weight, "velocity": c.velocity.to_dict(), "length": c.length.to_dict()}
            for c in self.components
        ]

    @property
    def is_atomic(self) -> bool:
        return all(c.velocity.kind == "atom" and c.length.kind == "atom" for c in self.components)

    def nodes(self, split_velocity_at: float | None = None):
        """Quadrature nodes ``(v, r, w)`` of the whole measure; weights sum to one."""
        vs, rs, ws = [], [], []
        for c in self.components:
            if c.weight == 0:
                continue
            if split_velocity_at is None:
                v, wv = c.velocity.nodes()
            else:
                v, wv = c.velocity.split_nodes(split_velocity_at)
            r, wr = c.length.nodes()
            vs.append(np.repeat(v, r.size))
            rs.append(np.tile(r, v.size))
            ws.append(c.weight * np.outer(wv, wr).ravel())
        return np.concatenate(vs), np.concatenate(rs), np.concatenate(ws)

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        if len(self.components) == 1:
            c = self.components[0]
            return c.velocity.sample(rng, size), c.length.sample(rng, size)
        p = np.array([c.weight for c in self.components])
        idx = rng.choice(len(self.components), size=size, p=p / p.sum())
        if self.is_atomic:
            # atoms draw nothing, so a lookup yields the same stream as the loop below
            vals = np.array([[float(c.velocity.value), float(c.length.value)] for c in self.components])
            return vals[idx, 0], vals[idx, 1]
        v = np.empty(size)
        r = np.empty(size)
        for k, c in enumerate(self.components):
            sel = idx == k
            m = int(sel.sum())
            v[sel] = c.velocity.sample(rng, m)
            r[sel] = c.length.sample(rng, m)
        return v, r

    def velocity_bound(self, tail: float = 1e-12) -> float:
        """Largest |v| charged by the measure; a quantile cutoff for unbounded laws."""
        return max(c.velocity.bound(tail) for c in self.components if c.weight > 0)

    def velocity_atoms(self) -> np.ndarray:
        return np.unique([c.velocity.value for c in self.components
                          if c.weight > 0 and c.velocity.kind == "atom"])


def moment(mu: VelocityLengthMeasure, f: Callable, split_velocity_at: float | None = None) -> float:
    """Integrate ``f(v, r)`` against ``mu``.

    Atoms are summed exactly; continuous factors use 64-node Gauss rules.
    ``split_velocity_at`` splits continuous velocity laws at a kink of ``f``.
    """
    v, r, w = mu.nodes(split_velocity_at)
    with np.errstate(all="raise"):
        try:
            vals = np.broadcast_to(np.asarray(f(v, r), dtype=float), w.shape)
            out = float(np.dot(w, vals))
        except (FloatingPointError, OverflowError) as exc:
            raise QuadratureError(f"integrand not evaluable on the support: {exc}") from exc
    if not math.isfinite(out):
        raise QuadratureError("moment evaluated to a non-finite value")
    return out


# --------------------------------------------------------------------------
# macroscopic constants
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MacroParams:
    rho: float
    sigma: float
    pi: float
    rho_bar: float
    mu: VelocityLengthMeasure | None = field(default=None, repr=False, compare=False)


def macro_params(rho: float, mu: VelocityLengthMeasure) -> MacroParams:
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    sigma = rho * moment(mu, lambda v, r: r)
    pi = rho * moment(mu, lambda v, r: r * v)
    return MacroParams(rho=rho, sigma=sigma, pi=pi, rho_bar=rho / (1.0 + sigma), mu=mu)


def v_eff(v, params: MacroParams):
    """Effective velocity ``v (1 + sigma) - pi``."""
    out = np.multiply(v, 1.0 + params.sigma) - params.pi
    return float(out) if np.ndim(out) == 0 else out


def v_eff_integral(v: float, rho: float, mu: VelocityLengthMeasure) -> float:
    """Effective velocity from its integral form ``v + rho * E[r (v - w)]``."""
    return v + rho * moment(mu, lambda w, r: r * (v - w))


def diffusivity(v: float, rho: float, mu: VelocityLengthMeasure) -> float:
    """``rho * E[r^2 |v - w|]``, the variance rate of the rigid Brownian shift."""
    return rho * moment(mu, lambda w, r: r * r * np.abs(v - w), split_velocity_at=v)


def project_P(phi: Callable, rho: float, sigma: float, mu: VelocityLengthMeasure) -> Callable:
    """Return ``x -> (rho/sigma) E[r phi(x, v, r)]`` as a function of ``(x, v, r)``."""
    if not sigma > 0:
        raise DomainError("the projection is undefined for sigma = 0")
    vn, rn, wn = mu.nodes()
    coef = (rho / sigma) * wn * rn

    def P(x, v=None, r=None):
        x = np.asarray(x, dtype=float)
        vals = phi(x[..., None], vn, rn)
        out = np.asarray(vals, dtype=float) @ coef
        if v is not None or r is not None:
            out = np.broadcast_to(out, np.broadcast_shapes(x.shape, np.shape(v), np.shape(r)))
        return out

    return P


def _spatial_grid(lo: float, hi: float, scale: float, per_panel: int = 16):
    panels = max(8, int(math.ceil((hi - lo) / (0.25 * scale))))
    edges = np.linspace(lo, hi, panels + 1)
    x, w = _legendre(per_panel)
    half = 0.5 * np.diff(edges)
    ys = (edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return ys, ws


def apply_C(values: np.ndarray, rn: np.ndarray, wn: np.ndarray, params: MacroParams) -> np.ndarray:
    """Apply ``C = I - sigma/(1+sigma) P`` to values tabulated on (y-grid, mark-nodes).

    ``sigma/(1+sigma) * rho/sigma = rho_bar``, so sigma = 0 (C = I) needs no special case.
    """
    proj = values @ (wn * rn)
    return values - params.rho_bar * proj[:, None]


def theoretical_covariance(phi, psi, params: MacroParams, mu: VelocityLengthMeasure | None = None) -> float:
    """Limit covariance ``rho_bar * iint r^2 (C phi)(C psi) dy dmu`` of the static field.

    ``phi`` and ``psi`` need ``__call__(y, v, r)``, ``support_bounds(v)`` and a
    characteristic ``scale``.
    """
    mu = mu if mu is not None else params.mu
    if mu is None:
        raise ValueError("no measure supplied")
    vn, rn, wn = mu.nodes()
    lo1, hi1 = phi.support_bounds(vn)
    lo2, hi2 = psi.support_bounds(vn)
    lo, hi = max(np.min(lo1), np.min(lo2)), min(np.max(hi1), np.max(hi2))
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise QuadratureError("test functions must have a finite support")
    if hi <= lo:
        return 0.0
    ys, wy = _spatial_grid(lo, hi, min(phi.scale, psi.scale))
    A = np.asarray(phi(ys[:, None], vn[None, :], rn[None, :]), dtype=float)
    B = A if psi is phi else np.asarray(psi(ys[:, None], vn[None, :], rn[None, :]), dtype=float)
    CA = apply_C(A, rn, wn, params)
    CB = CA if psi is phi else apply_C(B, rn, wn, params)
    out = params.rho_bar * float(wy @ ((CA * CB) @ (wn * rn * rn)))
    if not math.isfinite(out):
        raise QuadratureError("covariance integrand is not integrable")
    return out


def mean_functional(phi, params: MacroParams, mu: VelocityLengthMeasure | None = None) -> float:
    """``<phi> = rho * iiint r phi(y, v, r) dy dmu``."""
    mu = mu if mu is not None else params.mu
    vn, rn, wn = mu.nodes()
    lo, hi = phi.support_bounds(vn)
    ys, wy = _spatial_grid(float(np.min(lo)), float(np.max(hi)), phi.scale)
    vals = np.asarray(phi(ys[:, None], vn[None, :], rn[None, :]), dtype=float)
    return params.rho * float(wy @ (vals @ (wn * rn)))


def gram_matrix(phis: Sequence, params: MacroParams, mu=None) -> np.ndarray:
    n = len(phis)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = theoretical_covariance(phis[i], phis[j], params, mu)
    return G


def transported_covariance(phi, psi, t: float, params: MacroParams, mu=None) -> float:
    """``rho_bar * iint r^2 (C phi)(y + v_eff(v) t, v, r) (C psi)(y, v, r) dy dmu``.

    The transport acts on ``C phi``, not on ``phi``: this is the same-replica
    covariance between a field evolved for time ``t`` and a static field.
    """
    mu = mu if mu is not None else params.mu
    vn, rn, wn = mu.nodes()
    shift = (vn * (1.0 + params.sigma) - params.pi) * t
    lo1, hi1 = phi.support_bounds(vn)
    lo1, hi1 = lo1 - shift, hi1 - shift
    lo2, hi2 = psi.support_bounds(vn)
    lo, hi = max(np.min(lo1), np.min(lo2)), min(np.max(hi1), np.max(hi2))
    if hi <= lo:
        return 0.0
    scale = min(phi.scale, psi.scale)
    ys, wy = _spatial_grid(lo, hi, scale)

    # P-part of C phi is a function of y alone: tabulate, then interpolate at shifted points
    glo, ghi = float(np.min(phi.support_bounds(vn)[0])), float(np.max(phi.support_bounds(vn)[1]))
    grid = np.linspace(glo, ghi, max(2001, int((ghi - glo) / (scale / 400.0))))
    G = np.asarray(phi(grid[:, None], vn[None, :], rn[None, :]), dtype=float) @ (wn * rn)
    Y = ys[:, None] + shift[None, :]
    A = np.asarray(phi(Y, vn[None, :], rn[None, :]), dtype=float)
    spline = interpolate.CubicSpline(grid, G)
    inside = (Y >= grid[0]) & (Y <= grid[-1])
    CA = A - params.rho_bar * np.where(inside, spline(np.clip(Y, grid[0], grid[-1])), 0.0)
    B = np.asarray(psi(ys[:, None], vn[None, :], rn[None, :]), dtype=float)
    CB = apply_C(B, rn, wn, params)
    return params.rho_bar * float(wy @ ((CA * CB) @ (wn * rn * rn)))
