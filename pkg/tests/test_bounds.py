import json
import math

import numpy as np
import pytest

from memnet.bounds import (WeightBoundReport, _normalized_correlation,
                           single_neuron_correlation_cap, verify_weight_bound)
from memnet.constructive import baum_relu_fit
from memnet.data import Dataset, rademacher_labels, sample_sphere
from memnet.errors import DataError
from memnet.network import TwoLayerNetwork


def _rademacher(n, d, seed=0):
    return rademacher_labels(sample_sphere(n, d, seed), seed + 1)


def test_baum_relu_clears_weight_floor():
    ds = _rademacher(200, 20)
    net = baum_relu_fit(ds)
    report = verify_weight_bound(ds, [("baum-relu", net)])
    assert report.bound == pytest.approx(math.sqrt(200) / 8.0)
    assert report.error_ratios["baum-relu"] <= 0.5
    assert report.measured_weights["baum-relu"] >= report.bound
    assert not report.falsified


def test_harmonic_clears_weight_floor():
    from memnet.harmonic import harmonic_fit

    ds = _rademacher(40, 80)
    res = harmonic_fit(ds, epsilon=0.4, seed=0)
    report = verify_weight_bound(ds, [("harmonic", res.network)])
    assert report.measured_weights["harmonic"] >= report.bound
    assert not report.falsified


def test_half_fitting_exemption():
    """A network with error ratio above 1/2 is reported but never flagged."""
    ds = _rademacher(50, 10)
    empty = TwoLayerNetwork((), "relu")
    report = verify_weight_bound(ds, [("empty", empty)])
    assert report.error_ratios["empty"] == pytest.approx(1.0)
    assert report.measured_weights["empty"] == 0.0
    assert not report.falsified


def test_requires_sign_labels():
    ds = sample_sphere(10, 4, 0)
    with pytest.raises(DataError):
        verify_weight_bound(ds, [])


def test_report_json():
    ds = _rademacher(20, 5)
    report = verify_weight_bound(ds, [("empty", TwoLayerNetwork((), "relu"))])
    blob = json.loads(report.to_json())
    assert blob["n"] == 20 and blob["falsifications"] == []


def test_correlation_cap_rademacher_ceiling():
    """Random restarts never push past 2 sqrt(n) by more than the seed spread."""
    caps = [single_neuron_correlation_cap(_rademacher(400, 40, s), 200, s)
            for s in range(5)]
    slack = 3.0 * float(np.std(caps))
    assert max(caps) <= 2.0 * math.sqrt(400) + slack


def test_correlation_cap_constant_labels_escape():
    """Constant labels are not Rademacher: w=0, b=-1 realizes correlation n."""
    ds = sample_sphere(60, 10, 0).with_labels(np.ones(60))
    val = _normalized_correlation(ds, np.zeros(10), -1.0,
                                  lambda t: np.maximum(t, 0.0))
    assert val == pytest.approx(60.0)


def test_correlation_cap_linear_neuron_floor():
    """The search should at least rival the explicit linear-direction neuron
    w proportional to sum_i y_i x_i, which scales like sqrt(n/2)."""
    ds = _rademacher(100, 25, 3)
    w = (ds.labels[:, None] * ds.points).sum(axis=0)
    floor = _normalized_correlation(ds, w, 0.0, lambda t: np.maximum(t, 0.0))
    assert floor >= math.sqrt(100.0 / 2.0) * 0.5
    cap = single_neuron_correlation_cap(ds, 500, 0)
    assert cap >= floor * 0.8


def test_correlation_scale_invariance():
    ds = _rademacher(40, 8, 1)
    rng = np.random.default_rng(0)
    w, b = rng.standard_normal(8), 0.7
    psi = lambda t: np.maximum(t, 0.0)
    base = _normalized_correlation(ds, w, b, psi)
    for c in (0.01, 3.0, 250.0):
        assert _normalized_correlation(ds, c * w, c * b, psi) == pytest.approx(
            base, abs=1e-10)


def test_correlation_cap_zero_weight_candidate():
    ds = _rademacher(10, 4)
    assert _normalized_correlation(ds, np.zeros(4), 0.0,
                                   lambda t: np.maximum(t, 0.0)) == 0.0
