"""Exact memorization constructions: generic n-neuron fit, Baum threshold
networks, and the four-ReLU-per-group derivative-neuron network.

The derivative neuron of psi is the finite difference

    f_{delta,u,v,b}(x) = [psi((u + delta v) . x - b) - psi(u . x - b)] / delta

which, for the ReLU and delta below half the data's margin-to-slope ratio,
coincides on every data point with psi'(u . x - b) * (v . x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, sample_sphere, rademacher_labels
from .errors import DataError, DegenerateDataError, ParameterError, RankDeficiencyError
from .network import Neuron, TwoLayerNetwork, evaluate, get_activation, total_weight

_SLOPE_EPS = 1e-14


@dataclass(frozen=True)
class DerivativeNeuronPair:
    """Two ReLU neurons realizing the derivative neuron f_{delta,u,v,b}."""

    u: np.ndarray
    v: np.ndarray
    b: float
    delta: float

    def neurons(self, sign: float = 1.0) -> tuple[Neuron, Neuron]:
        s = sign / self.delta
        return (Neuron(s, self.u + self.delta * self.v, -self.b),
                Neuron(-s, self.u, -self.b))

    def values(self, points: np.ndarray) -> np.ndarray:
        """Exact finite-difference evaluation (the two-ReLU realization)."""
        hi = np.maximum(points @ (self.u + self.delta * self.v) - self.b, 0.0)
        lo = np.maximum(points @ self.u - self.b, 0.0)
        return (hi - lo) / self.delta

    def linearized_values(self, points: np.ndarray) -> np.ndarray:
        """psi'(u.x - b) * (v.x); equals values() on points where delta is safe."""
        gate = (points @ self.u - self.b >= 0.0).astype(float)
        return gate * (points @ self.v)


def safe_delta(points: np.ndarray, u: np.ndarray, v: np.ndarray, b: float) -> float:
    """delta = (1/2) min_i |u.x_i - b| / |v.x_i|, skipping near-zero slopes."""
    margins = np.abs(points @ u - b)
    slopes = np.abs(points @ v)
    keep = slopes >= _SLOPE_EPS
    if not np.any(keep):
        return 1.0
    return float(0.5 * np.min(margins[keep] / slopes[keep]))


def exact_fit_generic(ds: Dataset, activation: str = "relu", seed: int = 0,
                      candidate_factor: int = 10) -> TwoLayerNetwork:
    """Exact fit with exactly n neurons via random features + column selection.

    Samples random (w, b) pairs, selects n independent columns of the
    evaluation matrix by pivoted QR, and solves for the outer coefficients.
    """
    psi = get_activation(activation)
    n, d = ds.n, ds.d
    rng = np.random.default_rng(seed)
    K = candidate_factor * n
    W = rng.standard_normal((K, d))
    b = rng.standard_normal(K)
    A = psi(ds.points @ W.T + b)                      # (n, K)
    from scipy.linalg import qr
    _, R, piv = qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size < n or diag[n - 1] <= 1e-10 * max(diag[0], 1.0):
        raise RankDeficiencyError(
            f"rank {int(np.sum(diag > 1e-10 * max(diag[0], 1.0)))} < n={n} "
            f"within {K} candidates")
    cols = piv[:n]
    a = np.linalg.solve(A[:, cols], ds.labels)
    net = TwoLayerNetwork(
        tuple(Neuron(a[j], W[cols[j]], b[cols[j]]) for j in range(n)), activation)
    resid = np.linalg.norm(evaluate(net, ds) - ds.labels)
    if resid > 1e-6 * max(1.0, np.linalg.norm(ds.labels)):
        raise RankDeficiencyError(f"selected columns too ill-conditioned (residual {resid:.3e})")
    return net


def _hyperplane_through(points_group: np.ndarray) -> tuple[np.ndarray, float]:
    """(u, b) with ||u|| = 1 and u . x = b for each group row.

    Solves the homogeneous system [X, -1] (u, b) = 0 by SVD null space.
    """
    g, d = points_group.shape
    M = np.hstack([points_group, -np.ones((g, 1))])
    _, _, Vt = np.linalg.svd(M, full_matrices=True)
    null = Vt[-1]
    u, b = null[:d], null[d]
    norm = np.linalg.norm(u)
    if norm < 1e-12:
        raise DegenerateDataError("degenerate hyperplane (zero normal)")
    return u / norm, float(b / norm)


def _partition(n: int, d: int, rng: np.random.Generator,
               indices: np.ndarray | None = None) -> list[np.ndarray]:
    idx = np.arange(n) if indices is None else np.asarray(indices)
    idx = idx[rng.permutation(len(idx))]
    return [idx[i:i + d] for i in range(0, len(idx), d)]


def baum_threshold_fit(ds: Dataset, seed: int = 0, retries: int = 20) -> TwoLayerNetwork:
    """Baum's combinatorial construction for binary {0,1} labels.

    Groups of at most d minority points are each captured by the indicator
    of a thin slab around a hyperplane through the group (two threshold
    neurons); one extra constant neuron flips the picture when label 1 is
    the majority.  Exact fit with at most 2*ceil(n_minority/d) + 1 neurons.
    """
    y = ds.labels
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DataError("baum_threshold_fit needs labels in {0, 1}")
    ones = int(np.sum(y == 1.0))
    minority_label = 1.0 if ones <= ds.n - ones else 0.0
    minority_idx = np.flatnonzero(y == minority_label)

    neurons: list[Neuron] = []
    if len(minority_idx) > 0:
        slabs = _fit_indicator_slabs(ds, minority_idx, seed, retries)
        neurons.extend(slabs)
    if minority_label == 0.0:
        # f = 1 - (indicator of 0-points): negate and add the constant neuron.
        neurons = [Neuron(-nr.a, nr.w, nr.b) for nr in neurons]
        neurons.append(Neuron(1.0, np.zeros(ds.d), 1.0))
    net = TwoLayerNetwork(tuple(neurons), "threshold")
    if np.max(np.abs(evaluate(net, ds) - y), initial=0.0) > 1e-9:
        raise DegenerateDataError("threshold construction failed to certify the fit")
    return net


def _fit_indicator_slabs(ds: Dataset, target_idx: np.ndarray, seed: int,
                         retries: int) -> list[Neuron]:
    """Two threshold neurons per group realizing the indicator of target_idx."""
    last_err: Exception | None = None
    for attempt in range(retries):
        rng = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        try:
            neurons: list[Neuron] = []
            for group in _partition(len(target_idx), ds.d, rng, target_idx):
                u, b = _hyperplane_through(ds.points[group])
                others = np.setdiff1d(np.arange(ds.n), group)
                if len(others):
                    tau = 0.5 * float(np.min(np.abs(ds.points[others] @ u - b)))
                else:
                    tau = 1.0
                if tau <= 1e-12:
                    raise DegenerateDataError(
                        f"another point lies on the group hyperplane (group {group.tolist()})")
                neurons.append(Neuron(1.0, u, -(b - tau)))
                neurons.append(Neuron(-1.0, u, -(b + tau)))
            return neurons
        except DegenerateDataError as err:
            last_err = err
    raise DegenerateDataError(f"indicator construction failed after {retries} partitions: {last_err}")


def baum_relu_fit(ds: Dataset, seed: int = 0, retries: int = 20) -> TwoLayerNetwork:
    """Exact ReLU fit of arbitrary real labels with at most 4*ceil(n/d) neurons.

    Per group of at most d points: a hyperplane through the group, a slope
    vector v with X_group v = y_group, and the difference of two derivative
    neurons at biases b -+ tau, which is supported on a thin slab around the
    hyperplane and linear (equal to v . x) on it.
    """
    last_err: Exception | None = None
    for attempt in range(retries):
        rng = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        try:
            neurons: list[Neuron] = []
            for group in _partition(ds.n, ds.d, rng):
                neurons.extend(_group_neurons(ds, group))
            net = TwoLayerNetwork(tuple(neurons), "relu")
            if np.max(np.abs(evaluate(net, ds) - ds.labels)) > 1e-6:
                raise DegenerateDataError("construction failed to certify the fit")
            return net
        except DegenerateDataError as err:
            last_err = err
    raise DegenerateDataError(f"baum_relu_fit failed after {retries} partitions: {last_err}")


def _group_neurons(ds: Dataset, group: np.ndarray) -> list[Neuron]:
    Xg, yg = ds.points[group], ds.labels[group]
    u, b = _hyperplane_through(Xg)
    if len(group) == ds.d:
        try:
            v = np.linalg.solve(Xg, yg)
        except np.linalg.LinAlgError:
            raise DegenerateDataError(f"singular group system (group {group.tolist()})")
    else:
        v = np.linalg.lstsq(Xg, yg, rcond=None)[0]
    if np.max(np.abs(Xg @ v - yg), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(yg), initial=0.0)):
        raise DegenerateDataError(f"group labels not realizable (group {group.tolist()})")
    others = np.setdiff1d(np.arange(ds.n), group)
    if len(others):
        tau = 0.5 * float(np.min(np.abs(ds.points[others] @ u - b)))
    else:
        tau = 1.0
    if tau <= 1e-12:
        raise DegenerateDataError(
            f"another point lies on the group hyperplane (group {group.tolist()})")
    out: list[Neuron] = []
    for bias, sign in ((b - tau, 1.0), (b + tau, -1.0)):
        pair = DerivativeNeuronPair(u, v, bias, safe_delta(ds.points, u, v, bias))
        out.extend(pair.neurons(sign))
    return out


def measure_baum_weight_scaling(d: int, n_list: list[int], seeds: list[int]
                                ) -> tuple[list[dict], dict[int, float]]:
    """Total weight of the Baum ReLU fit on sphere data with +-1 labels.

    Returns per-run rows (n, d, seed, k, total_weight, max_residual) and the
    median weight per n.
    """
    if not n_list:
        raise ParameterError("n_list must be nonempty")
    rows = []
    for n in n_list:
        for seed in seeds:
            ds = rademacher_labels(sample_sphere(n, d, seed), seed + 1)
            net = baum_relu_fit(ds, seed=seed)
            rows.append({
                "n": n, "d": d, "seed": seed, "k": net.k,
                "total_weight": total_weight(net),
                "max_residual": float(np.max(np.abs(evaluate(net, ds) - ds.labels))),
            })
    medians = {n: float(np.median([r["total_weight"] for r in rows if r["n"] == n]))
               for n in n_list}
    return rows, medians
