"""Multivariate polynomials with exact gradients and Hessian quadratic forms.

The JSON wire format is a monomial list ``[[coeff, e1, ..., en], ...]`` with
total degree capped at 8; this is the inline constraint/vector-field format
accepted by the CLI config.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_DEGREE = 8


@dataclass(frozen=True)
class Polynomial:
    nvars: int
    coeffs: np.ndarray    # (m,) monomial coefficients
    exponents: np.ndarray  # (m, nvars) nonnegative integer exponents

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        e = np.asarray(self.exponents, dtype=int).reshape(len(c), self.nvars)
        if np.any(e < 0):
            raise ValueError("negative exponent")
        if len(c) and int(e.sum(axis=1).max()) > MAX_DEGREE:
            raise ValueError(f"total degree exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "exponents", e)

    @classmethod
    def from_terms(cls, nvars: int, terms: Sequence[Sequence[float]]) -> "Polynomial":
        """Build from the wire format [[coeff, e1, ..., en], ...]."""
        if not terms:
            return cls(nvars, np.zeros(0), np.zeros((0, nvars), dtype=int))
        coeffs = [t[0] for t in terms]
        exps = [t[1:] for t in terms]
        if any(len(e) != nvars for e in exps):
            raise ValueError("each term needs one exponent per variable")
        return cls(nvars, np.asarray(coeffs, dtype=float), np.asarray(exps, dtype=int))

    def __call__(self, x: np.ndarray):
        """Evaluate at a point (n,) or a batch (..., n)."""
        x = np.asarray(x, dtype=float)
        if len(self.coeffs) == 0:
            return 0.0 if x.ndim == 1 else np.zeros(x.shape[:-1])
        monomials = np.prod(x[..., None, :] ** self.exponents, axis=-1)
        out = monomials @ self.coeffs
        return float(out) if x.ndim == 1 else out

    def partial(self, i: int) -> "Polynomial":
        keep = self.exponents[:, i] > 0
        coeffs = self.coeffs[keep] * self.exponents[keep, i]
        exps = self.exponents[keep].copy()
        exps[:, i] -= 1
        return Polynomial(self.nvars, coeffs, exps)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.partial(i)(x) for i in range(self.nvars)])

    def hessian(self, x: np.ndarray) -> np.ndarray:
        H = np.empty((self.nvars, self.nvars))
        for i in range(self.nvars):
            pi = self.partial(i)
            for j in range(i, self.nvars):
                H[i, j] = H[j, i] = pi.partial(j)(x)
        return H

    def hessian_quadform(self, x: np.ndarray, h: np.ndarray) -> float:
        h = np.asarray(h, dtype=float)
        return float(h @ self.hessian(x) @ h)

    def degree(self) -> int:
        if len(self.coeffs) == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())
