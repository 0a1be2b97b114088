"""Harmonic (complex-perturbation) network construction.

Pipeline for one boosting step:

1. draw a random base weight w and a uniform phase a, perturb by the
   residual-driven vector v(w), and keep the best complex neuron
   g(x) = Re(z * phi((w~ + i w~') . x)) with phi = H_m / sqrt(m);
2. rewrite Re(z * phi(x + i y)) as a sum of univariate polynomials in the
   directions x + j y, j = 0..m (integer-node Vandermonde solve, exact
   rational arithmetic);
3. represent each truncated univariate polynomial as a signed mixture of
   ReLUs using psi'' = delta_0, with biases distributed as |f''| / int|f''|;
4. return the single ReLU realization maximizing the correlation with the
   residual, which dominates the mixture mean.

The tuning constants (cutoff, correlation floor, variance cap) are
calibrated once on a reference fixture and frozen in
``calibrated_constants.txt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

from .data import Dataset, GenericityReport, genericity
from .errors import (ConvergenceError, ParameterError, QuadratureResolutionError,
                     SamplerFailureError)
from .hermite import HermiteBasis, hermite_eval
from .network import FitTrace, IterationRecord, Neuron, TwoLayerNetwork, total_weight


def _load_constants() -> dict[str, float]:
    table = {}
    text = resources.files("memnet").joinpath("calibrated_constants.txt").read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, value = line.split()[:2]
        table[name] = float(value)
    return table


CONSTANTS = _load_constants()


def choose_degree(n: int, gamma: float) -> int:
    """Smallest m >= 3 with n * gamma^(m-2) <= 1/2."""
    if not (0.0 < gamma < 1.0):
        raise ParameterError("gamma must lie in (0, 1)")
    m = 3
    while n * gamma ** (m - 2) > 0.5:
        m += 1
    return m


def perturbation_vector(ds: Dataset, residual: np.ndarray, w: np.ndarray,
                        m: int, gamma: float) -> np.ndarray:
    """v(w) = (n gamma^2)^(-1/2) sum_i r_i H_{m-1}(w . x_i) x_i."""
    r = np.asarray(residual, dtype=np.float64)
    h = np.real(hermite_eval(m - 1, ds.points @ w))
    return ((r * h) @ ds.points) / math.sqrt(ds.n * gamma * gamma)


def hermite_gram(ds: Dataset, m: int) -> np.ndarray:
    """H_ij = E_w[phi'(w.x_i) phi'(w.x_j) x_i.x_j] = (x_i . x_j)^m (unit rows)."""
    norms = np.linalg.norm(ds.points, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise ParameterError("hermite_gram requires unit-norm rows")
    return (ds.points @ ds.points.T) ** m


@dataclass(frozen=True)
class ComplexNeuron:
    """g(x) = Re(z * phi((w_re + i w_im) . x)), phi = H_m / sqrt(m)."""

    w_re: np.ndarray
    w_im: np.ndarray
    z: complex
    m: int

    def __post_init__(self):
        if abs(abs(self.z) - 1.0) > 1e-12:
            raise ParameterError("z must have unit modulus")

    def values(self, points: np.ndarray) -> np.ndarray:
        t = points @ self.w_re + 1j * (points @ self.w_im)
        return np.real(self.z * hermite_eval(self.m, t)) / math.sqrt(self.m)


def projection_cutoff(n: int, m: int) -> float:
    """The calibrated cutoff (4 C log n)^(m/2) on data projections."""
    return (4.0 * CONSTANTS["cutoff_c"] * math.log(n)) ** (m / 2.0)


def sample_complex_neuron(ds: Dataset, residual: np.ndarray, m: int,
                          candidates: int, seed: int, gamma: float
                          ) -> tuple[ComplexNeuron, float]:
    """Best-of-pool complex neuron; returns (neuron, correlation).

    Candidates violating the projection cutoff are discarded; the winner
    must reach the calibrated correlation floor
    ||r||^2 / (2 corr_c sqrt(n gamma^2)), else SamplerFailureError carries
    the best achieved correlation.
    """
    r = np.asarray(residual, dtype=np.float64)
    n = ds.n
    r_sq = float(r @ r)
    if r_sq == 0.0:
        raise ParameterError("residual must be nonzero")
    if np.max(r * r) > n * gamma * gamma * (1 + 1e-9) or r_sq > n * (1 + 1e-9):
        raise ParameterError("residual violates the trimming preconditions")

    cutoff = projection_cutoff(n, m)
    floor = r_sq / (2.0 * CONSTANTS["corr_c"] * math.sqrt(n * gamma * gamma))
    # spawn-keyed stream: a dataset sampled with the same integer seed would
    # otherwise share its Gaussian draws, aligning every candidate with a
    # data point and clipping the whole pool
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    W = rng.standard_normal((candidates, ds.d))
    theta = rng.uniform(0.0, 2.0 * math.pi, size=candidates)
    # batched perturbation vectors: V[c] = v(W[c]) for the shared residual
    H = np.real(hermite_eval(m - 1, W @ ds.points.T))            # (C, n)
    V = ((H * r) @ ds.points) / math.sqrt(n * gamma * gamma)     # (C, d)
    ar, ai = np.cos(theta), np.sin(theta)
    re_proj = (W + ar[:, None] * V) @ ds.points.T                # (C, n)
    im_proj = (ai[:, None] * V) @ ds.points.T
    z = ar - 1j * ai
    vals = np.real(z[:, None] * hermite_eval(m, re_proj + 1j * im_proj))
    F = (vals @ r) / math.sqrt(m)
    ok = np.maximum(np.max(np.abs(re_proj), axis=1),
                    np.max(np.abs(im_proj), axis=1)) <= cutoff
    best_raw = float(np.max(F))
    if np.any(ok):
        idx = int(np.flatnonzero(ok)[np.argmax(F[ok])])
        if F[idx] >= floor:
            neuron = ComplexNeuron(w_re=W[idx] + ar[idx] * V[idx],
                                   w_im=ai[idx] * V[idx], z=complex(z[idx]), m=m)
            return neuron, float(F[idx])
    raise SamplerFailureError(
        f"no candidate reached the correlation floor {floor:.3e}",
        best_value=best_raw)


# -- directional decomposition ------------------------------------------------

def _solve_fraction(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Exact Gaussian elimination for small systems."""
    k = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(k):
        piv = next(i for i in range(col, k) if M[i][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for i in range(k):
            if i != col and M[i][col] != 0:
                f = M[i][col]
                M[i] = [x - f * y for x, y in zip(M[i], M[col])]
    return [M[i][k] for i in range(k)]


@dataclass(frozen=True)
class DirectionalDecomposition:
    """Re(z * phi(x + i y)) = sum_j p_j(x + j y), polynomials p_j exact
    rationals up to the common irrational factor ``scale`` = 1/(sqrt(m!) sqrt(m))."""

    m: int
    polys: tuple            # m+1 tuples of Fractions, constant term first
    scale: float
    z: complex | None = None  # set when built from a unit z; enables reuse
                              # of per-degree mixture quadrature (linearity)

    def poly_float(self, j: int) -> np.ndarray:
        return np.array([float(c) for c in self.polys[j]]) * self.scale

    def evaluate(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        acc = np.zeros(np.broadcast(x, y).shape)
        for j in range(self.m + 1):
            coeffs = self.poly_float(j)
            t = x + j * y
            val = np.zeros_like(acc)
            for c in reversed(coeffs):
                val = val * t + c
            acc += val
        return acc


def _re_z_i_pow(zr: Fraction, zi: Fraction, s: int) -> Fraction:
    # Re(z * i^s) for z = zr + i zi
    return (zr, -zi, -zr, zi)[s % 4]


_decomp_basis_cache: dict[int, tuple] = {}


def _decomp_basis(m: int) -> tuple:
    """Per-degree exact decomposition bases for z = 1 and z = -i.

    The Vandermonde targets Re(z * i^s) are linear in (Re z, Im z), so the
    (k+1)-node solves are done once per degree and combined per z.
    Returns (polys_re, polys_im): p_{z,j} = Re(z) * p_re + Im(z) * p_im.
    """
    if m not in _decomp_basis_cache:
        basis = HermiteBasis(m)
        he = basis.he_coeffs_exact(m)
        one, zero = Fraction(1), Fraction(0)
        out = []
        for zr, zi in ((one, zero), (zero, one)):
            polys = [[Fraction(0)] * (m + 1) for _ in range(m + 1)]
            for k, ck in enumerate(he):
                if ck == 0:
                    continue
                if k == 0:
                    polys[0][0] += zr * ck
                    continue
                targets = [ck * _re_z_i_pow(zr, zi, s) for s in range(k + 1)]
                vander = [[Fraction(j ** s if s else 1) for j in range(k + 1)]
                          for s in range(k + 1)]
                sol = _solve_fraction(vander, targets)
                for j in range(k + 1):
                    polys[j][k] += sol[j]
            out.append(tuple(tuple(p) for p in polys))
        _decomp_basis_cache[m] = tuple(out)
    return _decomp_basis_cache[m]


def decompose_directions(z: complex, m: int) -> DirectionalDecomposition:
    """Exact directional decomposition of Re(z * phi(x + i y)).

    Each homogeneous degree k of He_m is expressed in the basis
    {(x + j y)^k, j = 0..k} by solving the integer-node Vandermonde system
    over exact rationals (cached per degree); Fraction(float) keeps z exact.
    """
    polys_re, polys_im = _decomp_basis(m)
    zr, zi = Fraction(z.real), Fraction(z.imag)
    polys = tuple(
        tuple(zr * a + zi * b for a, b in zip(pr, pi))
        for pr, pi in zip(polys_re, polys_im))
    scale = 1.0 / (math.sqrt(math.factorial(m)) * math.sqrt(m))
    return DirectionalDecomposition(m=m, polys=polys, scale=scale, z=z)


# -- smooth bump and ReLU mixture ---------------------------------------------

def _ramp(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g, g', g'') for the exp(-1/s) smooth step on (0, 1).

    g(s) = h(s) / (h(s) + h(1-s)) with h = exp(-1/s).  Writing
    q = exp(phi), phi = 1/s - 1/(1-s), gives g = 1/(1+q) and closed-form
    derivatives (sympy differentiation of g serves as the test oracle).
    """
    t = 1.0 - s
    phi = 1.0 / s - 1.0 / t
    phi1 = -1.0 / s ** 2 - 1.0 / t ** 2
    phi2 = 2.0 / s ** 3 - 2.0 / t ** 3
    q = np.exp(np.clip(phi, -700.0, 700.0))
    g = 1.0 / (1.0 + q)
    # q/(1+q)^2 = g(1-g) and q^2/(1+q)^3 = g(1-g)^2 avoid overflow of q alone
    e = g * (1.0 - g)
    g1 = -phi1 * e
    g2 = -(phi2 + phi1 ** 2) * e + 2.0 * phi1 ** 2 * e * (1.0 - g)
    return g, g1, g2


def bump_eval(t: np.ndarray, M: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """chi_M and its first two analytic derivatives.

    chi_M = 1 on [-M, M], 0 outside [-2M, 2M], smooth exp-ramp in between.
    """
    t = np.asarray(t, dtype=np.float64)
    at = np.abs(t)
    chi = np.zeros_like(t)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    chi[at <= M] = 1.0
    trans = (at > M) & (at < 2.0 * M)
    if np.any(trans):
        s = np.clip((2.0 * M - at[trans]) / M, 1e-9, 1.0 - 1e-9)
        g, g1, g2 = _ramp(s)
        chi[trans] = g
        sgn = np.sign(t[trans])
        d1[trans] = g1 * (-sgn / M)
        d2[trans] = g2 / (M * M)
    return chi, d1, d2


@dataclass(frozen=True)
class MixtureComponent:
    j: int
    prob: float
    nodes: np.ndarray           # bias grid (quadrature nodes on [-2M, 2M])
    quad_f2: np.ndarray         # quadrature weight * f_j''(node)
    mass: float                 # int |f_j''|

    @property
    def density_weights(self) -> np.ndarray:
        return np.abs(self.quad_f2) / self.mass

    @property
    def signs(self) -> np.ndarray:
        return np.sign(self.quad_f2)

    def expectation(self, t) -> np.ndarray:
        """E[S psi(t - B) | J = j] = int psi(t - y) f''(y) dy / int |f''|."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        vals = np.maximum(t[:, None] - self.nodes[None, :], 0.0) @ self.quad_f2
        return vals / self.mass


@dataclass(frozen=True)
class ReluMixture:
    components: tuple
    M: float
    scale: float                # c_{z,m} / M^m = 1 / sum_j int |f_j''|
    bump: str = "exp-ramp"

    def expectation(self, x_proj, y_proj) -> np.ndarray:
        """E[S psi(W-projection - B)] at scalar projections (x, y) = (w~.x, w~'.x)."""
        x_proj = np.atleast_1d(np.asarray(x_proj, dtype=np.float64))
        y_proj = np.atleast_1d(np.asarray(y_proj, dtype=np.float64))
        acc = np.zeros(np.broadcast(x_proj, y_proj).shape)
        for comp in self.components:
            t = x_proj + comp.j * y_proj
            vals = np.maximum(t[:, None] - comp.nodes[None, :], 0.0) @ comp.quad_f2
            acc += vals
        return acc * self.scale


_leggauss_cache: dict[int, tuple] = {}


def _gl_grid(lo: float, hi: float, panels: int, order: int = 16
             ) -> tuple[np.ndarray, np.ndarray]:
    if order not in _leggauss_cache:
        _leggauss_cache[order] = np.polynomial.legendre.leggauss(order)
    nodes, weights = _leggauss_cache[order]
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    wts = (half[:, None] * weights[None, :]).ravel()
    return pts, wts


def _poly_eval(coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(t)
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def _poly_deriv(coeffs: np.ndarray) -> np.ndarray:
    if len(coeffs) <= 1:
        return np.zeros(1)
    return coeffs[1:] * np.arange(1, len(coeffs))


_panels_cache: dict[tuple, int] = {}
_mixture_basis_cache: dict[tuple, tuple] = {}


def _basis_second_derivatives(coeff_rows: list, nodes: np.ndarray,
                              chis: tuple) -> np.ndarray:
    chi, chi1, chi2 = chis
    rows = []
    for c in coeff_rows:
        c1, c2 = _poly_deriv(c), _poly_deriv(_poly_deriv(c))
        rows.append(_poly_eval(c2, nodes) * chi + 2.0 * _poly_eval(c1, nodes) * chi1
                    + _poly_eval(c, nodes) * chi2)
    return np.vstack(rows)


def _mixture_basis(m: int, M: float, tol: float, max_panels: int) -> tuple:
    """Quadrature grid plus (p * chi_M)'' values for the z = 1 and z = -i
    decomposition bases; any unit z combines them linearly."""
    key = (m, round(M, 9))
    if key not in _mixture_basis_cache:
        polys_re, polys_im = _decomp_basis(m)
        scale = 1.0 / (math.sqrt(math.factorial(m)) * math.sqrt(m))
        cre = [np.array([float(c) for c in p]) * scale for p in polys_re]
        cim = [np.array([float(c) for c in p]) * scale for p in polys_im]
        panels, prev = 64, None
        while True:
            nodes, wts = _gl_grid(-2.0 * M, 2.0 * M, panels)
            chis = bump_eval(nodes, M)
            f2_re = _basis_second_derivatives(cre, nodes, chis)
            f2_im = _basis_second_derivatives(cim, nodes, chis)
            masses = np.abs(np.vstack([f2_re, f2_im]) * wts).sum(axis=1)
            if prev is not None:
                ref = max(float(masses.max()), 1e-300)
                if np.all(np.abs(masses - prev)
                          <= tol * np.maximum(np.abs(masses), ref * 1e-12)):
                    break
            if panels >= max_panels:
                break
            prev = masses
            panels *= 2
        _mixture_basis_cache[key] = (nodes, wts, f2_re, f2_im)
    return _mixture_basis_cache[key]


def relu_mixture(dd: DirectionalDecomposition, M: float,
                 tol: float = 1e-6, max_panels: int = 4096) -> ReluMixture:
    """Signed ReLU mixture realizing scale * sum_j p_j(x + j y) on [-M, M].

    Each f_j = p_j * chi_M is compactly supported and C^2, so
    f_j(t) = int psi(t - y) f_j''(y) dy exactly; biases follow |f_j''|,
    signs follow sign(f_j'').  The quadrature grid is refined until every
    int |f_j''| is stable to ``tol`` relative.
    """
    if M <= 0.0:
        raise ParameterError("M must be positive")
    polys = []
    for j in range(dd.m + 1):
        c = dd.poly_float(j)
        polys.append(c if np.max(np.abs(c)) > 0.0 else None)

    if dd.z is not None:
        # f'' is linear in (Re z, Im z): combine the cached per-degree bases
        nodes, wts, f2_re, f2_im = _mixture_basis(dd.m, M, tol, max_panels)
        f2 = dd.z.real * f2_re + dd.z.imag * f2_im
        masses = np.abs(f2 * wts).sum(axis=1)
        for j, c in enumerate(polys):
            if c is not None and masses[j] <= 0.0:
                raise QuadratureResolutionError(
                    f"int |f_{j}''| vanished for a nonzero p_{j}")
        total = float(masses.sum())
        if total <= 0.0:
            raise QuadratureResolutionError("all mixture components are zero")
        components = tuple(
            MixtureComponent(j=j, prob=float(masses[j]) / total, nodes=nodes,
                             quad_f2=wts * f2[j], mass=float(masses[j]))
            for j in range(dd.m + 1) if polys[j] is not None)
        return ReluMixture(components=components, M=M, scale=1.0 / total)

    def second_derivatives(t: np.ndarray) -> list:
        # one bump evaluation shared by every component polynomial
        chi, chi1, chi2 = bump_eval(t, M)
        out = []
        for c in polys:
            if c is None:
                out.append(None)
                continue
            c1, c2 = _poly_deriv(c), _poly_deriv(_poly_deriv(c))
            out.append(_poly_eval(c2, t) * chi + 2.0 * _poly_eval(c1, t) * chi1
                       + _poly_eval(c, t) * chi2)
        return out

    cache_key = (dd.m, round(M, 9))
    cached = _panels_cache.get(cache_key)
    panels = cached if cached is not None else 64
    prev_masses = None
    while True:
        nodes, wts = _gl_grid(-2.0 * M, 2.0 * M, panels)
        f2 = second_derivatives(nodes)
        masses = [float(np.abs(wts * v).sum()) if v is not None else 0.0 for v in f2]
        if cached is not None:
            # grid already validated for this (degree, M); spike resolution is
            # set by the bump bands, which do not depend on z
            break
        if prev_masses is not None:
            ref = max(max(masses), 1e-300)
            if all(abs(a - b) <= tol * max(abs(a), ref * 1e-12, 1e-300)
                   for a, b in zip(masses, prev_masses)):
                break
        if panels >= max_panels:
            break
        prev_masses = masses
        panels *= 2

    _panels_cache[cache_key] = panels
    for j, c in enumerate(polys):
        if c is not None and masses[j] <= 0.0:
            raise QuadratureResolutionError(f"int |f_{j}''| vanished for a nonzero p_{j}")

    total = sum(masses)
    if total <= 0.0:
        raise QuadratureResolutionError("all mixture components are zero")
    components = tuple(
        MixtureComponent(j=j, prob=masses[j] / total, nodes=nodes,
                         quad_f2=wts * f2[j], mass=masses[j])
        for j in range(dd.m + 1) if f2[j] is not None
    )
    return ReluMixture(components=components, M=M, scale=1.0 / total)


# -- single-neuron step and the trimmed iterative fit -------------------------

@dataclass
class SingleNeuronStep:
    neuron: Neuron
    values: np.ndarray
    correlation: float
    mixture_mean_correlation: float
    complex_neuron: ComplexNeuron
    M: float


def single_neuron_step(ds: Dataset, residual: np.ndarray, m: int, seed: int,
                       gamma: float, candidates: int = 64,
                       grid_per_j: int = 512) -> SingleNeuronStep:
    """One harmonic step: a single ReLU neuron correlating with the residual.

    The returned neuron sigma * psi((w~ + j w~') . x - b) is the argmax of
    |r . f| over directions j, signs, and a bias grid mixing density
    quantiles of |f_j''| with a uniform cover of the data projection range;
    the argmax dominates the signed mixture mean by construction.
    """
    r = np.asarray(residual, dtype=np.float64)
    cn, corr_g = sample_complex_neuron(ds, r, m, candidates, seed, gamma)
    M = 2.0 * m * projection_cutoff(ds.n, m)
    dd = decompose_directions(cn.z, m)
    mix = relu_mixture(dd, M)
    mean_corr = mix.scale * corr_g

    best = None
    for j in range(m + 1):
        w = cn.w_re + j * cn.w_im
        proj = ds.points @ w
        comp = next((c for c in mix.components if c.j == j), None)
        grids = []
        if comp is not None:
            cdf = np.cumsum(np.abs(comp.quad_f2))
            cdf /= cdf[-1]
            q = (np.arange(grid_per_j) + 0.5) / grid_per_j
            grids.append(comp.nodes[np.searchsorted(cdf, q)])
        span = max(np.max(np.abs(proj)), 1e-6)
        grids.append(np.linspace(-1.5 * span, 1.5 * span, 128))
        biases = np.unique(np.concatenate(grids))
        corr = np.maximum(proj[:, None] - biases[None, :], 0.0).T @ r
        idx = int(np.argmax(np.abs(corr)))
        score = abs(float(corr[idx]))
        if best is None or score > best[0]:
            sigma = 1.0 if corr[idx] >= 0.0 else -1.0
            best = (score, Neuron(sigma, w, -float(biases[idx])))
    score, neuron = best
    if score < mean_corr * (1.0 - 1e-9):
        raise AssertionError("bias-grid argmax fell below the mixture mean")
    values = neuron.a * np.maximum(ds.points @ neuron.w + neuron.b, 0.0)
    return SingleNeuronStep(neuron=neuron, values=values, correlation=score,
                            mixture_mean_correlation=mean_corr,
                            complex_neuron=cn, M=M)


@dataclass
class HarmonicFitResult:
    network: TwoLayerNetwork
    trace: FitTrace
    active_set: np.ndarray
    m: int
    gamma: float

    def __iter__(self):
        return iter((self.network, self.trace, self.active_set))


def harmonic_fit(ds: Dataset, epsilon: float, seed: int = 0,
                 max_iters: int = 4000, candidates: int = 64,
                 eta_mode: str = "adaptive", retry_budget: int = 20,
                 report: GenericityReport | None = None) -> HarmonicFitResult:
    """Trimmed iterative harmonic fit.

    Labels are normalized to ||y||^2 = n internally (undone on output).
    Indices whose residual exceeds n gamma^2 are trimmed from the active
    set A, which only shrinks; the guarantee |A| >= n - ceil(1/gamma^2) is
    asserted on exit.  The fit stops when the trimmed residual reaches
    epsilon * ||y||^2.
    """
    if not (0.0 < epsilon < 1.0):
        raise ParameterError("epsilon must lie in (0, 1)")
    n = ds.n
    y = ds.labels
    y_sq = float(y @ y)
    if report is None:
        report = genericity(ds)
    gamma = report.gamma_clamped(n)
    if gamma >= 1.0:
        raise ParameterError("harmonic_fit requires coherence < 1")
    m = choose_degree(n, gamma)
    trace = FitTrace(notes={"m": m, "gamma": gamma,
                            "gamma_clamped": gamma != report.gamma})
    if y_sq == 0.0:
        trace.final_error_ratio = 0.0
        trace.total_weight = 0.0
        return HarmonicFitResult(TwoLayerNetwork((), "relu"), trace,
                                 np.arange(n), m, gamma)

    norm_scale = math.sqrt(n / y_sq)
    yn = y * norm_scale
    trim_sq = n * gamma * gamma
    if eta_mode == "fixed":
        eta_c = CONSTANTS["eta_c"]
        fixed_eta = (eta_c ** 2) * epsilon / math.log(n) ** (m * m / 2.0 + m)

    r = yn.copy()
    active = np.ones(n, dtype=bool)
    neurons: list[Neuron] = []
    seed_root = np.random.SeedSequence(seed)
    converged = False
    for it in range(max_iters):
        active &= (r * r) <= trim_sq * (1 + 1e-12)
        r_trim = np.where(active, r, 0.0)
        r_trim_sq = float(r_trim @ r_trim)
        if r_trim_sq <= epsilon * n:
            converged = True
            break
        step = None
        for attempt in range(retry_budget):
            attempt_seed = int(np.random.SeedSequence(
                entropy=seed_root.entropy, spawn_key=(it, attempt)).generate_state(1)[0])
            try:
                cand = single_neuron_step(ds, r_trim, m, attempt_seed, gamma,
                                          candidates=candidates)
            except SamplerFailureError:
                continue
            f_trim = np.where(active, cand.values, 0.0)
            corr = float(r_trim @ f_trim)
            norm_sq = float(f_trim @ f_trim)
            if corr > 0.0 and norm_sq > 0.0:
                step = (cand, f_trim, corr, norm_sq)
                break
        if step is None:
            trace.final_error_ratio = r_trim_sq / n
            raise ConvergenceError(f"harmonic step retries exhausted at iteration {it}",
                                   trace=trace)
        cand, f_trim, corr, norm_sq = step
        eta = corr / norm_sq if eta_mode == "adaptive" else fixed_eta
        neurons.append(cand.neuron.scaled(eta))
        r = r - eta * cand.values
        trace.iterations.append(IterationRecord(
            residual_sq=r_trim_sq, step_correlation_alpha=corr / r_trim_sq,
            step_norm_beta=norm_sq / r_trim_sq, eta=eta, neurons_added=1,
            active_set_size=int(active.sum())))

    active &= (r * r) <= trim_sq * (1 + 1e-12)
    r_trim = np.where(active, r, 0.0)
    net = TwoLayerNetwork(tuple(nr.scaled(1.0 / norm_scale) for nr in neurons), "relu")
    trace.final_error_ratio = float(r_trim @ r_trim) / n
    trace.total_weight = total_weight(net)
    min_active = n - math.ceil(1.0 / (gamma * gamma))
    if int(active.sum()) < min_active:
        raise AssertionError(
            f"active set {int(active.sum())} below the guarantee {min_active}")
    if not converged and trace.final_error_ratio > epsilon:
        raise ConvergenceError(
            f"harmonic_fit hit the iteration cap at ratio {trace.final_error_ratio:.3g}",
            trace=trace)
    return HarmonicFitResult(network=net, trace=trace,
                             active_set=np.flatnonzero(active), m=m, gamma=gamma)


def tail_diagnostic(ds: Dataset, residual: np.ndarray, m: int, samples: int,
                    seed: int, gamma: float, probe_points: int = 8,
                    thresholds: np.ndarray | None = None) -> list[dict]:
    """Empirical exceedance table for the perturbed-weight projections.

    Draws (w, phase) pairs, forms W = w + Re(a) v(w), W' = Im(a) v(w), and
    pools |W . x_i|, |W' . x_i| over a few probe points.  Rows carry the
    threshold s and the exceedance frequencies of the real and imaginary
    projections.
    """
    r = np.asarray(residual, dtype=np.float64)
    rng = np.random.default_rng(seed)
    probes = rng.choice(ds.n, size=min(probe_points, ds.n), replace=False)
    Xp = ds.points[probes]
    re_vals, im_vals = [], []
    batch = 2048
    left = samples
    scale = 1.0 / math.sqrt(ds.n * gamma * gamma)
    while left > 0:
        b = min(batch, left)
        left -= b
        W = rng.standard_normal((b, ds.d))
        theta = rng.uniform(0.0, 2.0 * math.pi, size=b)
        H = np.real(hermite_eval(m - 1, W @ ds.points.T))       # (b, n)
        V = (H * r) @ ds.points * scale                          # (b, d)
        re_vals.append(np.abs((W + np.cos(theta)[:, None] * V) @ Xp.T).ravel())
        im_vals.append(np.abs((np.sin(theta)[:, None] * V) @ Xp.T).ravel())
    re_all = np.concatenate(re_vals)
    im_all = np.concatenate(im_vals)
    if thresholds is None:
        hi = max(np.max(re_all), np.max(im_all))
        lo = max(np.median(re_all) * 0.5, hi * 1e-6)
        thresholds = np.geomspace(lo, hi, 24)
    return [{"s": float(s),
             "freq_re": float(np.mean(re_all > s)),
             "freq_im": float(np.mean(im_all > s))}
            for s in thresholds]
