import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from poisson_boundary.cells import CellStats, reduce_cells
from poisson_boundary.estimate import (DegenerateSampleError, confidence_interval, estimate,
                                       estimate_a_and_c, estimate_fcount, estimate_fhat,
                                       estimate_fsimplified, normal_quantile, write_estimate_csv,
                                       z_level)
from poisson_boundary.model import Constant, Partition, Sine
from poisson_boundary.simulate import ProcessSample, derive_replicate_seed, sample_process
from poisson_boundary.weights import Dirichlet, Indicator, Parzen


def stats_from(points, n=10, c=1.0, k=1):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return reduce_cells(ProcessSample(x=pts[:, :1], y=pts[:, 1], n=n, c=c, seed=0), Partition(k))


def stats_from_cells(counts, ymax, n=1000, c=1.0):
    counts, ymax = np.asarray(counts), np.asarray(ymax, dtype=float)
    k = counts.size
    corrected = np.where(counts > 0, (1 + 1 / np.maximum(counts, 1)) * ymax, 0.0)
    return CellStats(counts=counts, ymax=ymax, xi=n * c / k * corrected, corrected=corrected,
                     n=n, c=c, k=k)


HAND = [(0.2, 0.3), (0.5, 0.9), (0.7, 0.6)]


def test_indicator_hand_example():
    st_ = stats_from(HAND)
    assert estimate_fhat(st_, Indicator(), Partition(1), [0.4])[0] == pytest.approx(1.2, abs=1e-15)


def test_count_hand_example():
    st_ = stats_from(HAND)
    assert estimate_fcount(st_, Indicator(), Partition(1), [0.4])[0] == pytest.approx(0.3)


def test_empty_process():
    st_ = stats_from(np.zeros((0, 2)), k=4)
    part = Partition(4)
    for scheme in (Indicator(), Parzen(0.3)):
        assert estimate_fhat(st_, scheme, part, [0.5])[0] == 0.0
        assert estimate_fsimplified(st_, scheme, part, [0.5])[0] == 0.0
        assert estimate_fcount(st_, scheme, part, [0.5])[0] == 0.0
    assert estimate_a_and_c(st_).degenerate
    with pytest.raises(DegenerateSampleError):
        estimate(st_, Parzen(0.3), part, [0.5])
    with pytest.raises(DegenerateSampleError):
        confidence_interval(st_, Parzen(0.3), part, [0.5], 0.95)


def test_chat_definition():
    # 100 points, a_hat = 1 -> c_hat = 1
    counts = np.full(10, 10)
    ymax = np.full(10, 1 / 1.1)
    st_ = stats_from_cells(counts, ymax, n=100)
    ac = estimate_a_and_c(st_)
    assert ac.a_hat == pytest.approx(1.0, abs=1e-15)
    assert ac.c_hat == pytest.approx(1.0, abs=1e-15)


def test_z_level():
    assert z_level(0.95) == pytest.approx(1.959964, abs=1e-6)
    assert z_level(0.0) == 0.0
    assert normal_quantile(0.5) == 0.0
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            z_level(bad)


def test_gamma_zero_collapses_interval():
    s = sample_process(Sine(), 2000, 1.0, 4)
    part = Partition(40)
    st_ = reduce_cells(s, part)
    lo, hi = confidence_interval(st_, Parzen(0.2), part, [0.3, 0.6], 0.0)
    fhat = estimate_fhat(st_, Parzen(0.2), part, [0.3, 0.6])
    assert np.array_equal(lo, hi) and np.allclose(lo, fhat, atol=1e-14)


SCHEMES = [Indicator(), Parzen(0.1), Parzen(0.2, "epanechnikov", "midpoint"), Dirichlet(12)]


@given(st.integers(0, 2**32), st.sampled_from(SCHEMES))
def test_interval_midpoint_and_sample_identity(seed, scheme):
    part = Partition(50)
    st_ = reduce_cells(sample_process(Sine(), 1000, 1.0, seed), part)
    res = estimate(st_, scheme, part, [0.3, 0.7], gamma=0.9, c=None)
    assert np.allclose(0.5 * (res.ci_lo + res.ci_hi), res.fhat, atol=1e-12, rtol=0)
    assert np.all(res.ci_lo <= res.ci_hi)
    # N(S) = n c_hat a_hat
    assert st_.n * res.c_used * res.a_hat == pytest.approx(st_.total, rel=1e-13)


@given(arrays(np.int64, 20, elements=st.integers(0, 8)),
       arrays(float, 20, elements=st.floats(0.1, 3.0)), st.floats(0.1, 10.0))
def test_linearity_in_corrected_maxima(counts, ymax, scale):
    part = Partition(20)
    a = stats_from_cells(counts, ymax)
    b = stats_from_cells(counts, scale * ymax)
    xs = [0.1, 0.5, 0.93]
    for scheme in SCHEMES:
        fa = estimate_fhat(a, scheme, part, xs)
        fb = estimate_fhat(b, scheme, part, xs)
        assert np.allclose(fb, scale * fa, rtol=1e-12, atol=1e-12)


def test_count_variant_interval_recentred():
    part = Partition(50)
    st_ = reduce_cells(sample_process(Sine(), 3000, 1.0, 8), part)
    res = estimate(st_, Parzen(0.1), part, [0.4], variant="count", c=1.0)
    assert 0.5 * (res.ci_lo[0] + res.ci_hi[0]) == pytest.approx(res.fhat[0], abs=1e-12)
    with pytest.raises(ValueError):
        estimate(st_, Parzen(0.1), part, [0.4], variant="bogus")


def _flat_runs(n, k, reps, seed, scheme):
    part = Partition(k)
    out = []
    for r in range(reps):
        st_ = reduce_cells(sample_process(Constant(1.0), n, 1.0, derive_replicate_seed(seed, r)), part)
        out.append((estimate_fhat(st_, scheme, part, [0.5])[0],
                    estimate_fsimplified(st_, scheme, part, [0.5])[0],
                    estimate_fcount(st_, scheme, part, [0.5])[0],
                    estimate_a_and_c(st_).a_hat))
    return np.array(out)


def test_flat_boundary_monte_carlo_means():
    runs = _flat_runs(2000, 20, 2000, 21, Parzen(0.2))
    assert abs(runs[:, 0].mean() - 1) <= 0.01  # smoothed estimate
    assert abs(runs[:, 3].mean() - 1) <= 0.01  # a_hat
    assert abs(runs[:, 2].mean() - 1) <= 0.01  # count estimate


def test_midpoint_close_to_integrated():
    runs = _flat_runs(2000, 200, 300, 22, Parzen(0.2))
    assert abs(runs[:, 0].mean() - runs[:, 1].mean()) <= 0.02


def test_estimate_csv(tmp_path):
    part = Partition(25)
    st_ = reduce_cells(sample_process(Sine(), 1000, 1.0, 1), part)
    res = [estimate(st_, Parzen(0.2), part, [0.25, 0.75], variant=v)
           for v in ("smoothed", "simplified", "count")]
    path = tmp_path / "estimate.csv"
    write_estimate_csv(path, res)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,fhat,se_hat,ci_lo,ci_hi,variant"
    assert len(lines) == 7
    assert float(lines[1].split(",")[1]) == res[0].fhat[0]
