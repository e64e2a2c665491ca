"""Order-independent exact sums of nonnegative float weights.

Every weight is an integer multiple of ``2**emin``; sums are carried as exact
integers (float64 when the grand total stays below 2**52, otherwise 30-bit
int64 limbs) and rounded once at the end. Any two summation orders therefore
give the same, correctly rounded, float.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

LIMB_BITS = 30
_MASK = np.uint64((1 << LIMB_BITS) - 1)
_FAST_LIMIT = 2.0**52


def _trailing_zeros(M: np.ndarray) -> np.ndarray:
    low = M & (-M)
    return np.round(np.log2(low.astype(np.float64))).astype(np.int64)


class ExactWeights:
    """Integer representation of a weight vector for exact prefix sums."""

    def __init__(self, r):
        r = np.asarray(r, dtype=np.float64)
        if r.ndim != 1:
            raise ValueError("weights must be one-dimensional")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ValueError("weights must be finite and nonnegative")
        self.n = r.size
        nz = r > 0
        if not nz.any():
            self.emin = 0
            self.fast = True
            self.units = np.zeros(self.n)
            return
        r0 = r[nz][0]
        m0, e0 = math.frexp(float(r0))
        M0 = int(math.ldexp(m0, 53))
        tz = (M0 & -M0).bit_length() - 1
        if float(M0 >> tz) * self.n < _FAST_LIMIT and r.max() == r0 and r[nz].min() == r0:
            # equal weights: the sum is an integer count of one shared unit
            self.emin = e0 - 53 + tz
            self.fast = True
            self.units = np.where(nz, float(M0 >> tz), 0.0)
            return
        m, e = np.frexp(r[nz])
        M = np.ldexp(m, 53).astype(np.int64)
        tz = _trailing_zeros(M)
        M >>= tz
        E = e.astype(np.int64) - 53 + tz
        self.emin = int(E.min())
        shift = E - self.emin
        with np.errstate(over="ignore"):
            scaled = np.ldexp(M.astype(np.float64), shift)
        # the fast path needs every partial sum exact in float64
        if int(shift.max()) + 53 < 1000 and (
                float(scaled.max()) * scaled.size < _FAST_LIMIT or math.fsum(scaled) < _FAST_LIMIT):
            self.fast = True
            self.units = np.zeros(self.n)
            self.units[nz] = scaled
            return
        self.fast = False
        top = int((shift + 53).max())
        K = top // LIMB_BITS + 1
        Mu = M.astype(np.uint64)
        limbs = np.zeros((K, self.n), dtype=np.int64)
        for k in range(K):
            a = LIMB_BITS * k - shift
            out = np.zeros(Mu.size, dtype=np.uint64)
            right = (a >= 0) & (a < 64)
            out[right] = (Mu[right] >> a[right].astype(np.uint64)) & _MASK
            left = (a < 0) & (a > -LIMB_BITS)
            out[left] = (Mu[left] << (-a[left]).astype(np.uint64)) & _MASK
            limbs[k, nz] = out.astype(np.int64)
        self.units = limbs

    # raw values are float64 (fast) or int64 limb columns (K, ...)

    def prefix(self, order=None) -> np.ndarray:
        """Exact cumulative sums along ``order`` with a leading zero."""
        u = self.units if order is None else self.units[..., order]
        if self.fast:
            return np.concatenate([[0.0], np.cumsum(u)])
        pad = np.zeros((u.shape[0], 1), dtype=np.int64)
        return np.concatenate([pad, np.cumsum(u, axis=1)], axis=1)

    def take(self, cum: np.ndarray, idx) -> np.ndarray:
        return cum[..., idx]

    def signed_matmul(self, coeffs: np.ndarray) -> np.ndarray:
        """Raw ``coeffs @ weights`` for an integer coefficient matrix ``(M, N)``."""
        if self.fast:
            return coeffs.astype(np.float64) @ self.units
        return self.units @ coeffs.astype(np.int64).T

    def zeros(self, m: int) -> np.ndarray:
        if self.fast:
            return np.zeros(m)
        return np.zeros((self.units.shape[0], m), dtype=np.int64)

    def to_float(self, raw) -> np.ndarray:
        """Correctly rounded floats from raw exact values."""
        if self.fast:
            return np.ldexp(np.asarray(raw, dtype=np.float64), self.emin)
        raw = np.asarray(raw)
        if raw.ndim == 1:
            raw = raw[:, None]
        out = np.empty(raw.shape[1])
        for j in range(raw.shape[1]):
            S = 0
            for k in range(raw.shape[0] - 1, -1, -1):
                S = (S << LIMB_BITS) + int(raw[k, j])
            out[j] = _int_to_float(S, self.emin)
        return out


def scalar_to_float(weights: ExactWeights, raw) -> float:
    return float(np.ravel(weights.to_float(raw))[0])


def _int_to_float(S: int, emin: int) -> float:
    try:
        val = math.ldexp(float(S), emin)
        if val == 0.0 and S != 0 or abs(val) < 2.2250738585072014e-308 and S != 0:
            raise OverflowError
        return val
    except OverflowError:
        return float(Fraction(S) * Fraction(2) ** emin)
