"""Empirical verification of the sqrt(n)/(8L) total-weight lower bound.

Any 1-Lipschitz-activation network that fits Rademacher labels to half
error must carry total weight at least sqrt(n)/(8L); a constructed network
below that line would falsify the implementation (of the evaluation or of
the weight measure), never the bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DataError
from .network import TwoLayerNetwork, evaluate, total_weight


@dataclass
class WeightBoundReport:
    n: int
    L: float
    bound: float
    measured_weights: dict = field(default_factory=dict)
    error_ratios: dict = field(default_factory=dict)
    falsifications: list = field(default_factory=list)

    @property
    def falsified(self) -> bool:
        return bool(self.falsifications)

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n, "L": self.L, "bound": self.bound,
            "measured_weights": self.measured_weights,
            "error_ratios": self.error_ratios,
            "falsifications": self.falsifications,
        }, indent=2)


def verify_weight_bound(ds: Dataset, nets: list[tuple[str, TwoLayerNetwork]],
                        L: float = 1.0) -> WeightBoundReport:
    """Check every half-fitting network against the sqrt(n)/(8L) floor.

    Networks with error ratio above 1/2 are reported but exempt.  A
    FALSIFICATION entry indicates an implementation bug, not new math.
    """
    y = ds.labels
    if not np.all(np.abs(y) == 1.0):
        raise DataError("verify_weight_bound requires +-1 labels")
    y_sq = float(y @ y)
    report = WeightBoundReport(n=ds.n, L=L, bound=math.sqrt(ds.n) / (8.0 * L))
    for name, net in nets:
        ratio = float(np.sum((evaluate(net, ds) - y) ** 2)) / y_sq
        weight = total_weight(net)
        report.error_ratios[name] = ratio
        report.measured_weights[name] = weight
        if ratio <= 0.5 and weight < report.bound:
            report.falsifications.append(name)
    return report


def _normalized_correlation(ds: Dataset, w: np.ndarray, b: float, psi) -> float:
    denom = math.sqrt(float(w @ w) + b * b)
    if denom == 0.0:
        return 0.0
    return float(ds.labels @ psi(ds.points @ w - b)) / denom


def single_neuron_correlation_cap(ds: Dataset, trials: int, seed: int,
                                  psi=None, refine_steps: int = 200) -> float:
    """Empirical max of sum_i y_i psi(w.x_i - b) / sqrt(||w||^2 + b^2).

    Random restarts plus a perturbation refinement pass around the best
    candidate.  This is a lower bound on the true max, used as a
    consistency probe against the 2 L sqrt(n) Rademacher ceiling.
    """
    if psi is None:
        psi = lambda t: np.maximum(t, 0.0)
    rng = np.random.default_rng(seed)
    best_val = -math.inf
    best = None
    for _ in range(trials):
        w = rng.standard_normal(ds.d)
        b = rng.standard_normal()
        val = _normalized_correlation(ds, w, b, psi)
        if val > best_val:
            best_val, best = val, (w, b)
    if best is None:
        return best_val
    w, b = best
    step = 0.5
    for i in range(refine_steps):
        w2 = w + step * rng.standard_normal(ds.d)
        b2 = b + step * rng.standard_normal()
        val = _normalized_correlation(ds, w2, b2, psi)
        if val > best_val:
            best_val, w, b = val, w2, b2
        else:
            step *= 0.97
    return best_val
