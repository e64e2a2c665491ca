"""Separable test functions ``phi(y, v, r) = f(y + s(v)) g(v) h(r)``.

``s(v)`` is a velocity-dependent spatial shift, zero for plain test functions
and ``v_eff(v) t`` after transport.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

# |exp(-u^2/2)| < 1e-14 for |u| > GAUSS_RADIUS
GAUSS_RADIUS = math.sqrt(2.0 * 14.0 * math.log(10.0)) + 0.05


@dataclass(frozen=True)
class Profile:
    """Spatial factor ``f``; ``order`` counts d/dy derivatives taken."""

    kind: str
    center: float
    width: float
    wavenumber: float = 0.0
    order: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian_bump", "cosine_packet", "poly_bump"):
            raise ValueError(f"unknown spatial profile {self.kind!r}")
        if not self.width > 0:
            raise ValueError("profile width must be positive")
        if self.order not in (0, 1):
            raise ValueError("only first derivatives are supported")

    @property
    def radius(self) -> float:
        if self.kind == "poly_bump":
            return self.width
        return GAUSS_RADIUS * self.width

    def __call__(self, y):
        u = (np.asarray(y, dtype=float) - self.center) / self.width
        w = self.width
        if self.kind == "poly_bump":
            inside = np.abs(u) < 1.0
            q = np.where(inside, 1.0 - u * u, 0.0)
            if self.order == 0:
                return q**3
            return -6.0 * u * q**2 / w
        env = np.exp(-0.5 * u * u)
        env = np.where(np.abs(u) > GAUSS_RADIUS, 0.0, env)
        if self.kind == "gaussian_bump":
            return env if self.order == 0 else -u * env / w
        k = self.wavenumber
        phase = k * (np.asarray(y, dtype=float) - self.center)
        if self.order == 0:
            return env * np.cos(phase)
        return -env * (u / w * np.cos(phase) + k * np.sin(phase))

    def derivative(self) -> "Profile":
        return replace(self, order=self.order + 1)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "center": self.center, "width": self.width}
        if self.kind == "cosine_packet":
            d["wavenumber"] = self.wavenumber
        return d


def _zero_shift(v):
    return np.zeros_like(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class TestFunction:
    """``phi(y, v, r) = coef * f(y + shift(v)) * g(v) * h(r)`` with polynomial g, h.

    Polynomial coefficients are in ascending order.
    """

    spatial: Profile
    velocity_poly: tuple = (1.0,)
    length_poly: tuple = (1.0,)
    coef: float = 1.0
    shift: Callable = field(default=_zero_shift, compare=False)
    name: str = ""

    __test__ = False  # not a pytest class

    def __call__(self, y, v, r):
        v = np.asarray(v, dtype=float)
        r = np.asarray(r, dtype=float)
        return (
            self.coef
            * self.spatial(np.asarray(y, dtype=float) + self.shift(v))
            * npoly.polyval(v, self.velocity_poly)
            * npoly.polyval(r, self.length_poly)
        )

    @property
    def scale(self) -> float:
        s = self.spatial.width
        if self.spatial.kind == "cosine_packet" and self.spatial.wavenumber:
            s = min(s, 1.0 / abs(self.spatial.wavenumber))
        return s

    def support_bounds(self, v):
        """Per-velocity spatial support ``(lo, hi)``; |phi| < 1e-14 outside."""
        s = self.shift(np.asarray(v, dtype=float))
        c, R = self.spatial.center, self.spatial.radius
        return c - R - s, c + R - s

    @property
    def is_zero(self) -> bool:
        return self.coef == 0 or not np.any(self.velocity_poly) or not np.any(self.length_poly)

    def scaled(self, a: float) -> "TestFunction":
        return replace(self, coef=self.coef * a)

    def with_shift(self, extra: Callable) -> "TestFunction":
        old = self.shift
        return replace(self, shift=lambda v: old(v) + extra(v))

    def times_velocity_poly(self, coeffs) -> "TestFunction":
        return replace(self, velocity_poly=tuple(npoly.polymul(self.velocity_poly, coeffs)))

    def derivative(self) -> "TestFunction":
        """d/dy of the test function (shift included)."""
        return replace(self, spatial=self.spatial.derivative())

    def to_dict(self) -> dict:
        d = self.spatial.to_dict()
        d["velocity_poly"] = [float(c) for c in self.velocity_poly]
        d["length_poly"] = [float(c) for c in self.length_poly]
        if self.coef != 1.0:
            d["coef"] = self.coef
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        prof = Profile(
            kind=d["kind"],
            center=float(d.get("center", 0.0)),
            width=float(d["width"]),
            wavenumber=float(d.get("wavenumber", 0.0)),
        )
        return cls(
            prof,
            velocity_poly=tuple(float(c) for c in d.get("velocity_poly", (1.0,))),
            length_poly=tuple(float(c) for c in d.get("length_poly", (1.0,))),
            coef=float(d.get("coef", 1.0)),
            name=str(d.get("name", "")),
        )


class LinearCombination:
    """``sum_k a_k phi_k`` evaluated termwise; used for linearity checks."""

    def __init__(self, terms):
        self.terms = [(float(a), phi) for a, phi in terms]

    def __call__(self, y, v, r):
        out = 0.0
        for a, phi in self.terms:
            out = out + a * phi(y, v, r)
        return out

    @property
    def scale(self):
        return min(phi.scale for _, phi in self.terms)

    def support_bounds(self, v):
        los, his = zip(*(phi.support_bounds(v) for _, phi in self.terms))
        return np.minimum.reduce(los), np.maximum.reduce(his)


def gaussian_bump(center=0.0, width=1.0, velocity_poly=(1.0,), length_poly=(1.0,), name=""):
    return TestFunction(Profile("gaussian_bump", center, width), tuple(velocity_poly), tuple(length_poly), name=name)


def cosine_packet(center=0.0, width=1.0, wavenumber=1.0, velocity_poly=(1.0,), length_poly=(1.0,), name=""):
    return TestFunction(Profile("cosine_packet", center, width, wavenumber), tuple(velocity_poly),
                        tuple(length_poly), name=name)


def poly_bump(center=0.0, width=1.0, velocity_poly=(1.0,), length_poly=(1.0,), name=""):
    return TestFunction(Profile("poly_bump", center, width), tuple(velocity_poly), tuple(length_poly), name=name)
