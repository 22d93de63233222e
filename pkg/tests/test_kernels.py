import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinflock.kernels import (
    ConfinementPotential, InteractionKernel, covering_constant, eval_kernel, inf_on_inner_ball, kernel_bound,
    mt_constant, mt_normalization_bound,
)

KINDS = [InteractionKernel("constant", k0=2.0), InteractionKernel("algebraic", k0=1.0, gamma=1.0),
         InteractionKernel("algebraic", k0=0.7, gamma=2.5), InteractionKernel("compact", k0=0.5, r=0.4, R=1.3)]


def test_constant_kernel_value():
    assert eval_kernel(InteractionKernel("constant", k0=1.0), 0.3, -7.0) == 1.0


def test_algebraic_kernel_at_unit_distance():
    assert eval_kernel(InteractionKernel("algebraic", k0=1.0, gamma=1.0), 0.0, 1.0) == 0.5


def test_compact_kernel_vanishes_outside_support():
    k = InteractionKernel("compact", k0=1.0, r=1.0, R=2.0)
    assert eval_kernel(k, 0.0, 3.0) == 0.0
    assert eval_kernel(k, 0.0, 2.0) == 0.0
    s = np.linspace(0, 1.0, 101)
    assert np.all(k.radial(s) > 0)


def test_vector_positions_use_euclidean_distance():
    k = InteractionKernel("algebraic", k0=1.0, gamma=1.0)
    assert eval_kernel(k, np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(1 / 26)


@pytest.mark.parametrize("kern,bound", [(InteractionKernel("constant", k0=2.0), 2.0),
                                        (InteractionKernel("algebraic", k0=1.0, gamma=1.0), 1.0),
                                        (InteractionKernel("compact", k0=0.5, r=0.5, R=1.0), 0.5)])
def test_kernel_bound_is_the_supremum(kern, bound):
    assert kernel_bound(kern) == bound
    s = np.linspace(0, 5, 5001)
    assert kern.radial(s).max() == pytest.approx(bound)


def test_symmetry_on_random_pairs_is_exact():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-4, 4, (2, 10_000))
    for k in KINDS:
        assert np.array_equal(eval_kernel(k, x, y), eval_kernel(k, y, x))


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.sampled_from(range(len(KINDS))))
def test_bounded_and_nonnegative(x, y, idx):
    k = KINDS[idx]
    val = float(eval_kernel(k, x, y))
    assert 0.0 <= val <= kernel_bound(k)


@pytest.mark.parametrize("kwargs", [dict(kind="nope"), dict(kind="compact", r=1.0, R=1.0),
                                    dict(kind="compact", r=0.0, R=1.0), dict(k0=-1.0),
                                    dict(kind="algebraic", gamma=-0.5)])
def test_invalid_kernels_are_rejected(kwargs):
    with pytest.raises(ValueError):
        InteractionKernel(**kwargs)


# -------------------------------------------------------- covering bound
def _cover_count_1d(R, r):
    # intervals of length r (radius r/2) needed to cover [-R, R]
    return math.ceil(2 * R / r)


def test_covering_constant_in_one_dimension():
    assert covering_constant(1) == 4.0
    # 4R/r integer: constant equals ceil(4R/r) at R = r
    assert covering_constant(1) * 1.0 == math.ceil(4 * 1.0 / 1.0)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_covering_constant_dominates_explicit_cover(dim):
    for ratio in np.linspace(1.0, 9.0, 33):
        cubes = math.ceil(2 * ratio * math.sqrt(dim)) ** dim  # side r/sqrt(d) with r = 1
        assert cubes <= covering_constant(dim) * ratio**dim + 1e-9
        if dim == 1:
            assert _cover_count_1d(ratio, 1.0) <= covering_constant(1) * ratio


def test_mt_constant_product_rule():
    assert mt_constant(1.0, 1.0, 1) == covering_constant(1)
    assert mt_constant(2.0, 2.0, 1) == 4 * covering_constant(1)
    with pytest.raises(ValueError):
        mt_constant(0.5, 1.0, 1)


def test_mt_bound_requires_compact_kernel():
    with pytest.raises(ValueError):
        mt_normalization_bound(InteractionKernel("algebraic"))
    k = InteractionKernel("compact", k0=1.0, r=0.5, R=1.0)
    expected = covering_constant(1) * (1.0 / inf_on_inner_ball(k)) * 2.0
    assert mt_normalization_bound(k) == pytest.approx(expected)


def _normalized_integral(kern, x, dx, rho, y):
    # independent midpoint quadrature: rho_tilde(x_i) = sum_k phi(x_i - x_k) rho_k dx
    rt = np.array([np.sum(kern.radial(np.abs(xi - x)) * rho) * dx for xi in x])
    w = np.zeros_like(rho)
    pos = rho > 0
    w[pos] = kern.radial(np.abs(x[pos] - y)) * rho[pos] / rt[pos]
    return float(w.sum() * dx)


@pytest.mark.parametrize("kern", [InteractionKernel("compact", k0=1.0, r=0.5, R=1.0),
                                  InteractionKernel("compact", k0=3.0, r=0.2, R=1.5)])
def test_mt_ratio_quadrature_below_bound(kern):
    rng = np.random.default_rng(11)
    n, L = 300, 5.0
    x = -L + (np.arange(n) + 0.5) * (2 * L / n)
    dx = 2 * L / n
    bound = mt_normalization_bound(kern)
    worst = 0.0
    for _ in range(50):
        edges = np.sort(rng.uniform(-L, L, rng.integers(2, 10)))
        levels = rng.exponential(1.0, edges.size + 1) * (rng.random(edges.size + 1) < 0.7)
        rho = levels[np.searchsorted(edges, x)]
        if not rho.any():
            rho[n // 2] = 1.0
        worst = max(worst, _normalized_integral(kern, x, dx, rho, rng.uniform(-L, L)))
    assert worst <= bound


# ------------------------------------------------------------- potential
def test_quadratic_potential_values():
    p = ConfinementPotential("quadratic", 2.0)
    assert p(3.0) == 9.0
    assert np.allclose(p(np.array([[1.0, 2.0]])), [5.0])
    assert p.confines()
    assert not ConfinementPotential("none").confines()
    assert ConfinementPotential("none")(5.0) == 0.0


@pytest.mark.parametrize("omega2", [0.5, 1.0, 3.0])
def test_gaussian_integrals_match_quadrature(omega2):
    p = ConfinementPotential("quadratic", omega2)
    x = np.linspace(-60, 60, 400_001)
    for scale in (1.0, 2.0):
        q = np.trapezoid(np.exp(-p(x) / scale), x)
        assert q == pytest.approx(p.integral_exp(scale), rel=1e-8)


def test_integral_exp_infinite_without_confinement():
    assert ConfinementPotential("none").integral_exp() == math.inf


def test_gradient_consistency_is_second_order():
    p = ConfinementPotential("quadratic", 1.7)
    x = np.linspace(-3, 3, 13)
    errs = []
    for h in (1e-2, 5e-3):
        fd = (p(x + h) - p(x - h)) / (2 * h)
        errs.append(np.max(np.abs(p.grad(x) - fd)))
    # quadratic is reproduced exactly by central differences
    assert max(errs) < 1e-10


def test_invalid_potential():
    with pytest.raises(ValueError):
        ConfinementPotential("quartic")
    with pytest.raises(ValueError):
        ConfinementPotential("quadratic", -1.0)
