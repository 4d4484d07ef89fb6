import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poisson_boundary.model import Constant, Partition, Sine, profile_cells
from poisson_boundary.weights import (KERNELS, DegenerateWeightsError, Dirichlet, Indicator,
                                      Parzen, diagnose, dirichlet_kernel, kernel_norms,
                                      scheme_from_record, trig_basis, weight_matrix, weight_row,
                                      with_mode)

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def gl(fn, a, b):
    t = 0.5 * (b - a) * GL_NODES + 0.5 * (a + b)
    return 0.5 * (b - a) * float(np.sum(GL_WEIGHTS * fn(t)))


def quadrature_weights(kernel_fn, part, x, kinks=()):
    """k * int_{I_r} K(x, t) dt by 64-point Gauss-Legendre between kinks."""
    out = np.empty(part.k)
    for r in range(part.k):
        lo, hi = part.edges[r], part.edges[r + 1]
        cuts = np.unique(np.clip([lo, hi, *kinks], lo, hi))
        out[r] = part.k * sum(gl(kernel_fn, a, b) for a, b in zip(cuts[:-1], cuts[1:]))
    return out


# -- examples --------------------------------------------------------------------

def test_indicator_example():
    row = weight_row(Indicator(), Partition(10), 0.25)
    assert np.flatnonzero(row.kappa).tolist() == [2]
    assert row.kappa[2] == 10 and row.kappa_norm == 10
    assert row.w[2] == 1.0


@pytest.mark.parametrize("b", [0, 2, 8, 70])
@pytest.mark.parametrize("x", [0.0, 0.3, 0.5, 1.0])
def test_dirichlet_diagonal(b, x):
    assert dirichlet_kernel(x, x, b) == pytest.approx(1 + b, rel=1e-13)


@pytest.mark.parametrize("b", [1, 7, 71])
@pytest.mark.parametrize("x", [0.0, 0.3, 0.5])
def test_dirichlet_diagonal_odd(b, x):
    # the unpaired top cosine contributes 2 cos^2 instead of 1
    top = (b + 1) // 2
    expect = b + 2 * math.cos(2 * math.pi * top * x) ** 2
    assert dirichlet_kernel(x, x, b) == pytest.approx(expect, rel=1e-13)


@pytest.mark.parametrize("b", [1, 2, 5, 8, 13])
def test_dirichlet_kernel_matches_basis_sum(b):
    x, t = np.linspace(0, 1, 37), np.linspace(0, 1, 41)
    direct = trig_basis(x, b).T @ trig_basis(t, b)
    assert np.allclose(dirichlet_kernel(x[:, None], t[None, :], b), direct, atol=1e-11)


def test_parzen_mass_conservation():
    part = Partition(10)
    row = weight_row(Parzen(0.2, "triangular"), part, 0.5)
    assert np.sum(row.kappa) / part.k == pytest.approx(1.0, abs=1e-12)


def test_sigma_hat_disjoint_supports():
    ind = diagnose(Indicator(), Partition(10), Constant(1.0), profile_cells(Constant(1.0), Partition(10)),
                   1000, 1.0, [0.3, 0.7])
    assert ind.sigma_hat[0, 1] == 0.0
    part = Partition(100)
    rep = diagnose(Parzen(0.1), part, Constant(1.0), profile_cells(Constant(1.0), part), 5000, 1.0,
                   [0.25, 0.75])
    assert rep.sigma_hat[0, 1] == 0.0
    assert rep.Delta_n == 0 and rep.delta_n == 0


def test_diagnose_flags_and_degenerate_probe():
    part = Partition(250)
    spec = Sine()
    rep = diagnose(Parzen(0.05), part, spec, profile_cells(spec, part), 5000, 1.0, [0.3, 0.7])
    d = rep.to_dict()
    assert set(d) >= {"H.1", "H.2", "H.3", "H.4", "H.5", "H.6"}
    assert d["H.1"]["ok"] and d["H.3"]["ok"]
    # Dirichlet weights vanish where all basis cell-integrals cancel; b=0 never vanishes
    rep0 = diagnose(Dirichlet(0), Partition(10), spec, profile_cells(spec, Partition(10)), 100, 1.0,
                    [0.5])
    assert rep0.degenerate == []


def test_degenerate_weights_raise():
    # a narrow midpoint kernel can miss every cell center
    with pytest.raises(DegenerateWeightsError):
        weight_row(Parzen(0.1, mode="midpoint"), Partition(2), 0.5)


@pytest.mark.parametrize("kernel,l2sq", [("triangular", 2 / 3), ("epanechnikov", 3 / 5),
                                         ("biweight", 5 / 7)])
def test_kernel_profiles(kernel, l2sq):
    prof = KERNELS[kernel]
    assert gl(prof.pdf, -1, 0) + gl(prof.pdf, 0, 1) == pytest.approx(1.0, abs=1e-14)
    assert gl(lambda u: prof.pdf(u) ** 2, -1, 0) + gl(lambda u: prof.pdf(u) ** 2, 0, 1) == \
        pytest.approx(l2sq, abs=1e-14)
    assert prof.l2_squared == pytest.approx(l2sq, abs=1e-15)
    u = np.linspace(-1, 1, 11)
    for a, b in zip(u[:-1], u[1:]):
        assert prof.cdf(b) - prof.cdf(a) == pytest.approx(gl(prof.pdf, a, b), abs=1e-14)


def test_kernel_norms():
    part = Partition(200)
    assert kernel_norms(Dirichlet(8), part).l2 == pytest.approx(3.0)
    assert kernel_norms(Dirichlet(8), part).sup == 9.0
    h = 0.07
    assert kernel_norms(Parzen(h, "triangular"), part).l2 == pytest.approx(h**-0.5 * math.sqrt(2 / 3))
    assert kernel_norms(Parzen(h, "epanechnikov"), part).l2 ** 2 == pytest.approx(3 / (5 * h))
    # Dirichlet L1 against a brute-force fine-grid integral
    u = (np.arange(400_000) + 0.5) / 400_000
    for b in (7, 8, 70):
        brute = np.mean(np.abs(dirichlet_kernel(u, 0.0, b)))
        assert kernel_norms(Dirichlet(b), part).l1 == pytest.approx(brute, rel=1e-6)


# -- quadrature oracle for integrated weights -----------------------------------

@pytest.mark.parametrize("kernel", sorted(KERNELS))
@pytest.mark.parametrize("x", [0.03, 0.3, 0.5, 0.777, 0.99])
def test_parzen_integrated_vs_quadrature(kernel, x):
    part, h = Partition(40), 0.09
    prof = KERNELS[kernel]
    got = weight_row(Parzen(h, kernel), part, x).kappa
    ref = quadrature_weights(lambda t: prof.pdf((x - t) / h) / h, part, x, kinks=(x - h, x, x + h))
    assert np.max(np.abs(got - ref)) <= 1e-10


@pytest.mark.parametrize("b", [6, 9, 70])
@pytest.mark.parametrize("x", [0.3, 0.7, 0.0])
def test_dirichlet_integrated_vs_quadrature(b, x):
    part = Partition(60)
    got = weight_row(Dirichlet(b), part, x).kappa
    ref = quadrature_weights(lambda t: dirichlet_kernel(x, t, b), part, x)
    assert np.max(np.abs(got - ref)) <= 1e-10


def test_parzen_product_weights_2d():
    part = Partition(100, 2)
    x = np.array([0.41, 0.62])
    row = weight_row(Parzen(0.15), part, x).kappa
    f1 = weight_row(Parzen(0.15), Partition(10), x[0]).kappa
    f2 = weight_row(Parzen(0.15), Partition(10), x[1]).kappa
    assert np.allclose(row, np.outer(f1, f2).ravel(), atol=1e-12)
    assert np.sum(row) / part.k == pytest.approx(1.0, abs=1e-12)


# -- identities ------------------------------------------------------------------

SCHEMES = [Indicator(), Parzen(0.05), Parzen(0.1, "epanechnikov", "midpoint"),
           Parzen(0.2, "biweight"), Dirichlet(70), Dirichlet(11, "midpoint")]


@given(st.floats(0.01, 0.99), st.sampled_from(SCHEMES))
def test_unit_norm_weights(x, scheme):
    row = weight_row(scheme, Partition(250), x)
    assert np.sum(row.w**2) == pytest.approx(1.0, abs=1e-12)


def test_indicator_modes_identical():
    part = Partition(50)
    xs = np.linspace(0.01, 0.99, 17)
    a = weight_matrix(Indicator(), part, xs)
    b = weight_matrix(with_mode(Indicator(), "midpoint"), part, xs)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_scheme_record_round_trip(scheme):
    assert scheme_from_record(scheme.to_record()) == scheme


def test_unresolved_scheme_rejected():
    with pytest.raises(ValueError):
        weight_matrix(Parzen(None), Partition(10), [0.5])
    with pytest.raises(ValueError):
        Parzen(-0.1)
    with pytest.raises(ValueError):
        Parzen(0.1, "gaussian")


@pytest.mark.parametrize("kernel", sorted(KERNELS))
def test_parzen_max_weight(kernel):
    # max |w_r| is about K(0) / sqrt(k h ||K||_2^2); at h=0.1, k=200 that is 0.22-0.27
    h, k = 0.1, 200
    prof = KERNELS[kernel]
    row = weight_row(Parzen(h, kernel), Partition(k), 0.5)
    approx = prof.peak / math.sqrt(k * h * prof.l2_squared)
    assert np.max(np.abs(row.w)) == pytest.approx(approx, rel=0.03)
    # the 0.2 level is reached once k h is large enough
    row = weight_row(Parzen(0.2, kernel), Partition(250), 0.5)
    assert np.max(np.abs(row.w)) <= 0.2
