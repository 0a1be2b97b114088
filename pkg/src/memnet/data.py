"""Datasets: synthetic samplers, genericity statistics, and (de)serialization.

A dataset is an immutable collection of ``n`` points in ``R^d`` with real
labels.  The genericity report carries the coherence ``gamma`` (largest
normalized inner product between distinct points), the spread parameter
``omega`` (``d`` times the top eigenvalue of the empirical second moment
matrix), the minimal row norm, and a probabilistic general-position
certificate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError

_MAGIC = b"MEMNETDS"

#: Coherence below this is clamped by consumers that need log(1/gamma) finite.
def gamma_floor(n: int) -> float:
    return 1.0 / (2.0 * n)


@dataclass(frozen=True)
class Dataset:
    """n points in R^d (rows of ``points``) with real labels."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ParameterError("points must be a nonempty n x d matrix")
        if lab.shape != (pts.shape[0],):
            raise ParameterError("labels must be a length-n vector")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(lab))):
            raise DataError("points and labels must be finite")
        if np.any(np.all(pts == 0.0, axis=1)):
            raise DataError("dataset contains a zero row")
        pts.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.points, np.asarray(labels, dtype=np.float64))


@dataclass(frozen=True)
class GenericityReport:
    gamma: float
    omega: float
    min_norm: float
    general_position: bool

    def gamma_clamped(self, n: int) -> float:
        """Coherence clamped away from zero, for log(1/gamma) consumers."""
        return max(self.gamma, gamma_floor(n))


def sample_sphere(n: int, d: int, seed: int) -> Dataset:
    """i.i.d. uniform points on the unit sphere S^{d-1}, labels zero.

    Deterministic given ``seed`` (normalized Gaussian rows).
    """
    if n < 1 or d < 2:
        raise ParameterError(f"need n >= 1 and d >= 2, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, d))
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    # Resample the (measure-zero) degenerate rows rather than dividing by ~0.
    while np.any(norms < 1e-8):
        bad = norms[:, 0] < 1e-8
        pts[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(pts, axis=1, keepdims=True)
    return Dataset(pts / norms, np.zeros(n))


def rademacher_labels(ds: Dataset, seed: int) -> Dataset:
    """Replace labels by i.i.d. uniform +-1; points unchanged."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=ds.n) * 2.0 - 1.0
    return ds.with_labels(labels)


def gaussian_labels(ds: Dataset, seed: int) -> Dataset:
    """Replace labels by i.i.d. standard normals; points unchanged."""
    rng = np.random.default_rng(seed)
    return ds.with_labels(rng.standard_normal(ds.n))


def genericity(ds: Dataset, subset_samples: int = 32, cond_threshold: float = 1e12,
               seed: int = 0) -> GenericityReport:
    """Measure (gamma, omega) and certify general position probabilistically.

    gamma is the exact max pairwise normalized coherence, omega is
    ``d * lambda_max((1/n) sum x_i x_i^T)``.  General position is tested by
    drawing ``subset_samples`` random d-subsets of rows and requiring each
    d x d submatrix to have condition number below ``cond_threshold``.
    """
    X = ds.points
    n, d = X.shape
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise DataError("zero row in dataset")
    if n == 1:
        gamma = 0.0
    else:
        C = (X @ X.T) / np.outer(norms, norms)
        np.fill_diagonal(C, 0.0)
        gamma = float(np.max(np.abs(C)))
    second_moment = (X.T @ X) / n
    lam_max = float(np.linalg.eigvalsh(second_moment)[-1])
    omega = d * lam_max

    general = True
    if n >= d:
        rng = np.random.default_rng(seed)
        for _ in range(subset_samples):
            idx = rng.choice(n, size=d, replace=False)
            if np.linalg.cond(X[idx]) >= cond_threshold:
                general = False
                break
    return GenericityReport(gamma=gamma, omega=omega,
                            min_norm=float(np.min(norms)),
                            general_position=general)


def save_dataset(ds: Dataset, path: str, label_kind: str = "unknown") -> None:
    """Write the binary format: JSON header line, then row-major little-endian
    float64 points followed by labels."""
    header = json.dumps({"n": ds.n, "d": ds.d, "label_kind": label_kind})
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(ds.points.astype("<f8").tobytes())
        fh.write(ds.labels.astype("<f8").tobytes())


def load_dataset(path: str) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise DataError(f"{path}: not a memnet dataset file")
        header_bytes = bytearray()
        while True:
            c = fh.read(1)
            if not c:
                raise DataError(f"{path}: truncated header")
            if c == b"\n":
                break
            header_bytes.extend(c)
        header = json.loads(header_bytes.decode("utf-8"))
        n, d = int(header["n"]), int(header["d"])
        pts = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d)
        lab = np.frombuffer(fh.read(8 * n), dtype="<f8")
        if lab.shape != (n,):
            raise DataError(f"{path}: truncated payload")
    return Dataset(pts.copy(), lab.copy())


def load_csv(path: str) -> Dataset:
    """CSV import: one row per point, last column is the label."""
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    if raw.shape[1] < 2:
        raise DataError("CSV needs at least one feature column plus a label")
    return Dataset(raw[:, :-1], raw[:, -1])
