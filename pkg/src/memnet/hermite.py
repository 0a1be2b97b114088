"""Normalized Hermite polynomials and Hermite expansions of activations.

The project-wide convention is the probabilists' Hermite polynomial divided
by sqrt(m!), so that {H_m} is orthonormal against the standard Gaussian:
E[H_m(X) H_m'(X)] = delta_{m,m'} for X ~ N(0,1).  With this normalization

    H_0 = 1,  H_1(x) = x,  H_m(x) = (x H_{m-1}(x) - sqrt(m-1) H_{m-2}(x)) / sqrt(m)

and H_m' = sqrt(m) H_{m-1}.  Internally coefficients are the exact integer
coefficients of the unnormalized polynomials, with the 1/sqrt(m!) factor
kept symbolic until evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ParameterError

__all__ = [
    "HermiteBasis", "HermiteExpansion", "hermite_eval",
    "orthogonality_check", "expand_activation_derivative",
    "gauss_expectation",
]


def _he_integer_coeffs(max_degree: int) -> list[list[int]]:
    """Monomial coefficients of the unnormalized He_m, exact integers.

    Row m has m+1 entries, constant term first.  Recursion:
    He_m = x He_{m-1} - (m-1) He_{m-2}.
    """
    rows = [[1]]
    if max_degree >= 1:
        rows.append([0, 1])
    for m in range(2, max_degree + 1):
        prev, prev2 = rows[m - 1], rows[m - 2]
        row = [0] * (m + 1)
        for k, c in enumerate(prev):
            row[k + 1] += c
        for k, c in enumerate(prev2):
            row[k] -= (m - 1) * c
        rows.append(row)
    return rows


@dataclass(frozen=True)
class HermiteBasis:
    """Monomial coefficient table for H_0 .. H_max_degree."""

    max_degree: int

    def __post_init__(self):
        if self.max_degree < 0:
            raise ParameterError("max_degree must be >= 0")
        object.__setattr__(self, "_he_rows", _he_integer_coeffs(self.max_degree))

    def he_coeffs(self, m: int) -> list[int]:
        """Exact integer coefficients of the unnormalized He_m (constant first)."""
        return list(self._he_rows[m])

    def he_coeffs_exact(self, m: int) -> list[Fraction]:
        return [Fraction(c) for c in self._he_rows[m]]

    @property
    def monomial_coeffs(self) -> list[np.ndarray]:
        """Float coefficients of the normalized H_m = He_m / sqrt(m!)."""
        return [np.array(row, dtype=np.float64) / math.sqrt(math.factorial(m))
                for m, row in enumerate(self._he_rows)]

    def eval_monomial(self, m: int, z):
        """Direct monomial (Horner) evaluation of H_m; supports complex z."""
        coeffs = self._he_rows[m]
        z = np.asarray(z)
        acc = np.zeros_like(z, dtype=np.result_type(z.dtype, np.float64))
        for c in reversed(coeffs):
            acc = acc * z + c
        return acc / math.sqrt(math.factorial(m))


def hermite_eval(m: int, z):
    """H_m(z) by the three-term recursion; z may be real/complex, scalar/array."""
    if m < 0:
        raise ParameterError("degree must be >= 0")
    z = np.asarray(z)
    one = np.ones_like(z, dtype=np.result_type(z.dtype, np.float64))
    if m == 0:
        return one
    h_prev, h = one, z * one
    for k in range(2, m + 1):
        h_prev, h = h, (z * h - math.sqrt(k - 1) * h_prev) / math.sqrt(k)
    return h


def orthogonality_check(m: int, m2: int, rho: float, samples: int, seed: int,
                        return_stderr: bool = False):
    """Monte Carlo estimate of E[H_m(X) H_m2(Y)] with corr(X, Y) = rho.

    The exact value is delta_{m,m2} * rho^m.
    """
    if abs(rho) > 1.0:
        raise ParameterError("|rho| must be <= 1")
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    z1 = rng.standard_normal(samples)
    z2 = rng.standard_normal(samples)
    x = z1
    y = rho * z1 + math.sqrt(max(0.0, 1.0 - rho * rho)) * z2
    prod = hermite_eval(m, x) * hermite_eval(m2, y)
    est = float(np.mean(prod))
    if return_stderr:
        return est, float(np.std(prod) / math.sqrt(samples))
    return est


# -- Gaussian quadrature ------------------------------------------------------

def _composite_gl(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                  panels: int, order: int = 16) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = f(pts.ravel()).reshape(pts.shape)
    if not np.all(np.isfinite(vals)):
        raise ParameterError("non-finite function values on quadrature nodes")
    return float(np.sum(vals @ weights * half))


def gauss_expectation(f: Callable[[np.ndarray], np.ndarray], tol: float = 1e-8,
                      radius: float = 15.0, max_panels: int = 8192) -> float:
    """E[f(X)] for X ~ N(0,1) by panel-doubling composite Gauss-Legendre.

    Panels are doubled until the estimate moves by less than ``tol``; the
    panel boundary at 0 makes this robust for piecewise-smooth integrands
    with a kink or jump at the origin (e.g. the ReLU derivative).
    """
    gauss = lambda t: f(t) * np.exp(-t * t / 2.0) / math.sqrt(2.0 * math.pi)
    panels = 8
    prev = _composite_gl(gauss, -radius, radius, panels)
    while panels < max_panels:
        panels *= 2
        cur = _composite_gl(gauss, -radius, radius, panels)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


@dataclass(frozen=True)
class HermiteExpansion:
    """Hermite coefficients a_0..a_L of a function (typically psi')."""

    coeffs: np.ndarray
    truncation_degree: int
    tail_mass: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def tail_sum(self, from_index: int) -> float:
        """sum of a_l^2 for l >= from_index (within the truncation)."""
        return float(np.sum(self.coeffs[from_index:] ** 2))


def expand_activation_derivative(psi_prime: Callable[[np.ndarray], np.ndarray],
                                 L: int, tol: float = 1e-8) -> HermiteExpansion:
    """Hermite coefficients a_l = E[psi'(X) H_l(X)], l = 0..L.

    Quadrature is refined until each coefficient is stable to ``tol``.
    ``tail_mass`` is the Parseval remainder E[psi'(X)^2] - sum a_l^2,
    clipped at zero.
    """
    if L < 0:
        raise ParameterError("truncation degree must be >= 0")
    coeffs = np.array([
        gauss_expectation(lambda t, l=l: np.asarray(psi_prime(t)) * hermite_eval(l, t),
                          tol=tol)
        for l in range(L + 1)
    ])
    energy = gauss_expectation(lambda t: np.asarray(psi_prime(t)) ** 2, tol=tol)
    tail = max(0.0, energy - float(coeffs @ coeffs))
    return HermiteExpansion(coeffs=coeffs, truncation_degree=L, tail_mass=tail)
