"""Two-layer networks: representation, evaluation, total weight, and the
generic residual-boosting driver.

A network computes ``x -> sum_l a_l * psi(w_l . x + b_l)`` and its total
weight is ``sum_l |a_l| * sqrt(||w_l||^2 + b_l^2)``.  The boosting driver
consumes a user-supplied one-step constructor that proposes a small network
correlating with the current residual, and accumulates scaled copies of the
proposals until the residual is small.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import Dataset
from .errors import ConvergenceError, ParameterError
from .hermite import hermite_eval


def relu(t):
    return np.maximum(t, 0.0)


def threshold(t):
    # Boundary t = 0 maps to 1.
    return np.where(t >= 0.0, 1.0, 0.0)


def get_activation(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Resolve an activation by name: 'relu', 'threshold', or 'hermite:m'."""
    if name == "relu":
        return relu
    if name == "threshold":
        return threshold
    if name.startswith("hermite:"):
        m = int(name.split(":", 1)[1])
        return lambda t: np.real(hermite_eval(m, t)) / math.sqrt(max(m, 1))
    raise ParameterError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class Neuron:
    """One neuron ``a * psi(w . x + b)``."""

    a: float
    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if not (np.isfinite(self.a) and np.isfinite(self.b) and np.all(np.isfinite(w))):
            raise ParameterError("neuron parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def weight(self) -> float:
        return abs(self.a) * math.sqrt(float(self.w @ self.w) + self.b ** 2)

    def scaled(self, c: float) -> "Neuron":
        return Neuron(self.a * c, self.w, self.b)


@dataclass(frozen=True)
class TwoLayerNetwork:
    neurons: tuple
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "neurons", tuple(self.neurons))
        get_activation(self.activation)  # validate name eagerly
        if self.neurons:
            d = self.neurons[0].w.shape[0]
            if any(nr.w.shape != (d,) for nr in self.neurons):
                raise ParameterError("all neurons must share the input dimension")

    @property
    def k(self) -> int:
        return len(self.neurons)

    @property
    def d(self):
        return self.neurons[0].w.shape[0] if self.neurons else None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return evaluate_points(self, points)

    def concat(self, other: "TwoLayerNetwork") -> "TwoLayerNetwork":
        if other.activation != self.activation:
            raise ParameterError("cannot concatenate networks with different activations")
        return TwoLayerNetwork(self.neurons + other.neurons, self.activation)

    def to_json(self) -> str:
        return json.dumps({
            "activation": self.activation,
            "neurons": [{"a": nr.a, "w": nr.w.tolist(), "b": nr.b} for nr in self.neurons],
        })

    @staticmethod
    def from_json(text: str) -> "TwoLayerNetwork":
        obj = json.loads(text)
        neurons = tuple(Neuron(nr["a"], np.array(nr["w"]), nr["b"]) for nr in obj["neurons"])
        return TwoLayerNetwork(neurons, obj["activation"])


def evaluate_points(net: TwoLayerNetwork, points: np.ndarray) -> np.ndarray:
    """Network values on the rows of ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.zeros(points.shape[0])
    if not net.neurons:
        return out
    if points.shape[1] != net.d:
        raise ParameterError(f"dimension mismatch: network d={net.d}, points d={points.shape[1]}")
    psi = get_activation(net.activation)
    W = np.stack([nr.w for nr in net.neurons])          # (k, d)
    a = np.array([nr.a for nr in net.neurons])
    b = np.array([nr.b for nr in net.neurons])
    return (psi(points @ W.T + b) @ a)


def evaluate(net: TwoLayerNetwork, ds: Dataset) -> np.ndarray:
    return evaluate_points(net, ds.points)


def total_weight(net: TwoLayerNetwork) -> float:
    return float(sum(nr.weight for nr in net.neurons))


@dataclass(frozen=True)
class StepProposal:
    """One boosting step: a few neurons plus their values on the data."""

    neurons: Sequence[Neuron]
    values: np.ndarray


# A step builder maps (residual, attempt_seed) to a proposal, or None to
# signal a degenerate draw that the driver should retry.
StepBuilder = Callable[[np.ndarray, int], StepProposal | None]


@dataclass
class IterationRecord:
    residual_sq: float
    step_correlation_alpha: float
    step_norm_beta: float
    eta: float
    neurons_added: int
    active_set_size: int


@dataclass
class FitTrace:
    iterations: list = field(default_factory=list)
    final_error_ratio: float = math.nan
    total_weight: float = math.nan
    notes: dict = field(default_factory=dict)

    def to_csv(self, path: str) -> None:
        cols = ["iteration", "residual_sq", "step_correlation_alpha",
                "step_norm_beta", "eta", "neurons_added", "active_set_size"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for i, rec in enumerate(self.iterations):
                writer.writerow([i, rec.residual_sq, rec.step_correlation_alpha,
                                 rec.step_norm_beta, rec.eta, rec.neurons_added,
                                 rec.active_set_size])


def boost_fit(step_builder: StepBuilder, ds: Dataset, epsilon: float,
              max_iters: int, eta_mode: str | float = "adaptive",
              activation: str = "relu", seed: int = 0,
              retry_budget: int = 50,
              labels: np.ndarray | None = None) -> tuple[TwoLayerNetwork, FitTrace]:
    """Greedy residual fitting: r <- r - eta * f for proposals f.

    In adaptive mode eta is the exact line-search optimum (r.f)/||f||^2,
    which never increases ||r||^2; passing a float runs the fixed-eta
    variant.  Steps whose correlation with the residual is nonpositive are
    resampled up to ``retry_budget`` times per iteration; exhausting the
    budget raises ConvergenceError carrying the trace so far.
    """
    if not (0.0 < epsilon < 1.0):
        raise ParameterError("epsilon must lie in (0, 1)")
    y = ds.labels if labels is None else np.asarray(labels, dtype=np.float64)
    y_sq = float(y @ y)
    trace = FitTrace()
    neurons: list[Neuron] = []
    if y_sq == 0.0:
        trace.final_error_ratio = 0.0
        trace.total_weight = 0.0
        return TwoLayerNetwork((), activation), trace

    r = y.copy()
    seed_root = np.random.SeedSequence(seed)
    for it in range(max_iters):
        r_sq = float(r @ r)
        if r_sq <= epsilon * y_sq:
            break
        proposal = None
        corr = norm_sq = 0.0
        for attempt in range(retry_budget):
            attempt_seed = int(np.random.SeedSequence(entropy=seed_root.entropy,
                                                      spawn_key=(it, attempt)).generate_state(1)[0])
            cand = step_builder(r, attempt_seed)
            if cand is None:
                continue
            corr = float(r @ cand.values)
            norm_sq = float(cand.values @ cand.values)
            if corr > 0.0 and norm_sq > 0.0:
                proposal = cand
                break
        if proposal is None:
            trace.final_error_ratio = r_sq / y_sq
            trace.total_weight = total_weight(TwoLayerNetwork(tuple(neurons), activation))
            raise ConvergenceError(
                f"step retry budget exhausted at iteration {it}", trace=trace)

        eta = corr / norm_sq if eta_mode == "adaptive" else float(eta_mode)
        neurons.extend(nr.scaled(eta) for nr in proposal.neurons)
        r = r - eta * proposal.values
        trace.iterations.append(IterationRecord(
            residual_sq=r_sq,
            step_correlation_alpha=corr / r_sq,
            step_norm_beta=norm_sq / r_sq,
            eta=eta,
            neurons_added=len(proposal.neurons),
            active_set_size=len(y),
        ))
        if eta_mode == "adaptive" and float(r @ r) > r_sq * (1 + 1e-12):
            raise AssertionError("adaptive step increased the residual")

    net = TwoLayerNetwork(tuple(neurons), activation)
    trace.final_error_ratio = float(r @ r) / y_sq
    trace.total_weight = total_weight(net)
    return net, trace
