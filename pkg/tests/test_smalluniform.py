import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from flmsup.fnspace import Grid
from flmsup.fpca import Eigensystem, FpcaFit, RegularizationScheme
from flmsup.smalluniform import (
    FractionalObjective,
    OptimizerConfig,
    _cartesian_jacobian,
    gradient,
    hessian,
    maximize,
    objective,
    small_uniform_statistic,
    to_cartesian,
)


def random_instance(rng, k=None, a_n=None):
    k = k or int(rng.integers(1, 11))
    theta = rng.normal(size=k)
    psi = rng.uniform(0.2, 3.0, size=k)
    return FractionalObjective(theta, psi, a_n if a_n is not None else rng.uniform(1e-3, 1.0))


def closed_form(obj):
    return float(np.sqrt(np.sum((obj.theta / obj.psi) ** 2)))


def disk_brute_force(obj, h=1e-3):
    """Max of L over a square lattice of spacing h clipped to the unit disk (k <= 2)."""
    if obj.k == 1:
        b = np.arange(-1.0, 1.0 + h / 2, h)
        return float(np.max(obj.theta[0] * b / (obj.psi[0] * np.abs(b) + obj.a_n)))
    xs = np.arange(-1.0, 1.0 + h / 2, h)
    best = -np.inf
    for x in xs:
        ys = xs[x * x + xs * xs <= 1.0]
        if ys.size == 0:
            continue
        num = obj.theta[0] * x + obj.theta[1] * ys
        den = np.sqrt((obj.psi[0] * x) ** 2 + (obj.psi[1] * ys) ** 2) + obj.a_n
        best = max(best, float(np.max(num / den)))
    return best


def synthetic_fit(theta, psi, a_n, n, sigma):
    # simple scheme with lam = psi^2 / f^2 and f = 1/lam gives psi_j = 1/sqrt(lam_j)
    lam = 1.0 / np.asarray(psi, dtype=float) ** 2
    grid = Grid.uniform(2)
    eig = Eigensystem.from_arrays(grid, lam, np.zeros((lam.size, 2)))
    scheme = RegularizationScheme("simple", float(lam.min()))
    return FpcaFit(n=n, k_hat=lam.size, rho_coords=np.asarray(theta, dtype=float),
                   fvals=1.0 / lam, eig=eig, scheme=scheme, a_n=a_n, sigma_eps=sigma,
                   sigma_estimated=False)


def test_objective_examples():
    obj = FractionalObjective([2.0], [1.0], 0.5)
    assert objective(obj, [0.0]) == 0.0
    assert objective(obj, [1.0]) == pytest.approx(4 / 3, rel=1e-15)
    assert gradient(obj, [1.0])[0] == pytest.approx(4 / 9, rel=1e-14)


def test_objective_odd(rng):
    obj = random_instance(rng, 5)
    b = rng.normal(size=5)
    assert objective(obj, -b) == -objective(obj, b)


def test_origin_errors():
    obj = FractionalObjective([1.0, 2.0], [1.0, 1.0], 0.1)
    with pytest.raises(ValueError, match="gradient undefined at origin"):
        gradient(obj, np.zeros(2))
    with pytest.raises(ValueError):
        hessian(obj, np.zeros(2))


@pytest.mark.parametrize("kw", [dict(theta=[1.0], psi=[0.0], a_n=0.1),
                                dict(theta=[1.0], psi=[1.0], a_n=0.0),
                                dict(theta=[1.0, 2.0], psi=[1.0], a_n=0.1),
                                dict(theta=[], psi=[], a_n=0.1)])
def test_objective_validation(kw):
    with pytest.raises(ValueError):
        FractionalObjective(**kw)


def test_gradient_finite_differences(rng):
    h = 1e-6
    for _ in range(100):
        obj = random_instance(rng)
        b = rng.normal(size=obj.k)
        b /= 1.2 * np.linalg.norm(b)
        fd = np.array([(objective(obj, b + h * e) - objective(obj, b - h * e)) / (2 * h)
                       for e in np.eye(obj.k)])
        g = gradient(obj, b)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-12)


def test_hessian_finite_differences(rng):
    h = 1e-5
    for _ in range(100):
        obj = random_instance(rng)
        b = rng.normal(size=obj.k)
        b /= 1.2 * np.linalg.norm(b)
        fd = np.column_stack([(gradient(obj, b + h * e) - gradient(obj, b - h * e)) / (2 * h)
                              for e in np.eye(obj.k)])
        H = hessian(obj, b)
        assert np.linalg.norm(H - fd) <= 1e-4 * max(np.linalg.norm(fd), 1e-12)
        assert np.max(np.abs(H - H.T)) <= 1e-9


def test_hessian_scalar_symbolic():
    b, th, ps, a = sp.symbols("b theta psi a", positive=True)
    L = th * b / (sp.sqrt(ps**2 * b**2) + a)
    d1, d2 = sp.diff(L, b), sp.diff(L, b, 2)
    for vals in [(2.0, 1.0, 0.5, 1.0), (-1.3, 0.7, 0.01, 0.4), (0.5, 2.5, 0.3, 0.05)]:
        t, p, an, x = vals
        obj = FractionalObjective([t], [p], an)
        # symbols are declared positive; theta sign enters linearly
        sub = {th: abs(t), ps: p, a: an, b: x}
        sgn = math.copysign(1.0, t)
        assert gradient(obj, [x])[0] == pytest.approx(sgn * float(d1.subs(sub)), rel=1e-12)
        assert hessian(obj, [x])[0, 0] == pytest.approx(sgn * float(d2.subs(sub)), rel=1e-10)


def test_gradient_radial_when_a_small(rng):
    obj = FractionalObjective([1.0, -2.0, 0.5], [1.0, 2.0, 0.5], 1e-14)
    u = obj.theta / obj.psi**2
    b = 0.5 * u / np.linalg.norm(u)
    g = gradient(obj, b)
    cos = abs(g @ b) / (np.linalg.norm(g) * np.linalg.norm(b))
    assert cos == pytest.approx(1.0, abs=1e-8) or np.linalg.norm(g) < 1e-10


def test_to_cartesian_examples():
    assert not np.any(to_cartesian(0.0, [0.3, 1.2]))
    np.testing.assert_allclose(to_cartesian(1.0, [np.pi / 2]), [0.0, 1.0], atol=1e-16)
    np.testing.assert_allclose(to_cartesian(0.5, [0.0, 0.0]), [0.5, 0.0, 0.0])


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.lists(st.floats(0, np.pi), min_size=0, max_size=8), st.floats(0, 2 * np.pi))
def test_to_cartesian_norm(r, inner, last):
    b = to_cartesian(r, inner + [last])
    assert abs(np.linalg.norm(b) - r) <= 1e-12


def test_cartesian_jacobian(rng):
    for k in (2, 3, 6):
        x = np.concatenate([[rng.uniform(0.2, 1)], rng.uniform(0.1, 3.0, size=k - 1)])
        J = _cartesian_jacobian(x[0], x[1:])
        h = 1e-6
        fd = np.column_stack([(to_cartesian(*(lambda y: (y[0], y[1:]))(x + h * e))
                               - to_cartesian(*(lambda y: (y[0], y[1:]))(x - h * e))) / (2 * h)
                              for e in np.eye(k)])
        np.testing.assert_allclose(J, fd, atol=1e-8)


def test_maximize_scalar_boundary():
    rep = maximize(FractionalObjective([2.0], [1.0], 0.5), rng=np.random.default_rng(0))
    assert rep.best_value == pytest.approx(4 / 3, rel=1e-10)
    assert rep.best_point[0] == pytest.approx(1.0)


def test_maximize_zero_theta():
    rep = maximize(FractionalObjective(np.zeros(3), np.ones(3), 0.1), rng=np.random.default_rng(0))
    assert rep.best_value == 0.0 and not np.any(rep.best_point)


@pytest.mark.parametrize("method", ["cartesian", "spherical"])
def test_maximize_closed_form(rng, method):
    cfg = OptimizerConfig(method=method)
    for _ in range(20 if method == "cartesian" else 8):
        obj = random_instance(rng, a_n=1e-12)
        rep = maximize(obj, cfg, rng)
        assert rep.best_value == pytest.approx(closed_form(obj), rel=1e-4)
        assert np.linalg.norm(rep.best_point) <= 1 + 1e-9


def test_maximize_brute_force(rng):
    for k in (1, 2, 2, 2):
        obj = random_instance(rng, k, a_n=rng.uniform(0.05, 0.5))
        rep = maximize(obj, rng=rng)
        brute = disk_brute_force(obj)
        assert rep.best_value >= brute - 1e-9
        assert rep.best_value == pytest.approx(brute, abs=1e-3)


def test_maximize_dominates_naive_direction(rng):
    for _ in range(20):
        obj = random_instance(rng)
        rep = maximize(obj, OptimizerConfig(starts=4), rng)
        u = obj.theta / np.linalg.norm(obj.theta)
        assert rep.best_value >= objective(obj, u) - 1e-12
        assert rep.starts == 4 and 0 <= rep.converged_starts <= 4


def test_radial_monotonicity(rng):
    obj = random_instance(rng, 4)
    for _ in range(20):
        u = rng.normal(size=4)
        u /= np.linalg.norm(u)
        if obj.theta @ u <= 0:
            u = -u
        vals = [objective(obj, r * u) for r in np.linspace(0.01, 1, 50)]
        assert np.all(np.diff(vals) > 0)


def test_permutation_invariance(rng):
    obj = random_instance(rng, 6, a_n=0.05)
    perm = rng.permutation(6)
    shuffled = FractionalObjective(obj.theta[perm], obj.psi[perm], obj.a_n)
    v1 = maximize(obj, rng=np.random.default_rng(1)).best_value
    v2 = maximize(shuffled, rng=np.random.default_rng(2)).best_value
    assert v1 == pytest.approx(v2, rel=1e-8)


def test_a_n_monotone_convergence(rng):
    base = random_instance(rng, 5)
    vals = [maximize(FractionalObjective(base.theta, base.psi, a), rng=np.random.default_rng(0)).best_value
            for a in (1e-2, 1e-4, 1e-8)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] == pytest.approx(closed_form(base), rel=1e-6)


def test_maximize_seed_reproducible(rng):
    obj = random_instance(rng, 7)
    r1 = maximize(obj, rng=np.random.default_rng(5))
    r2 = maximize(obj, rng=np.random.default_rng(5))
    assert r1.best_value == r2.best_value
    np.testing.assert_array_equal(r1.best_point, r2.best_point)


def test_statistic_synthetic_fit():
    fit = synthetic_fit([1.0, 0.5], [2.0, 1.0], 0.1, 100, 1.0)
    np.testing.assert_allclose(fit.psi, [2.0, 1.0])
    W, rep = small_uniform_statistic(fit, 1.0, rng=np.random.default_rng(0))
    brute = disk_brute_force(FractionalObjective([1.0, 0.5], [2.0, 1.0], 0.1))
    assert W == pytest.approx(10 * rep.best_value, rel=1e-15)
    assert rep.best_value == pytest.approx(brute, abs=1e-3)
    W2, _ = small_uniform_statistic(fit, 2.0, rng=np.random.default_rng(0))
    assert W2 == W / 2


def test_statistic_zero_and_errors():
    fit = synthetic_fit([0.0, 0.0], [2.0, 1.0], 0.1, 100, 1.0)
    assert small_uniform_statistic(fit, 1.0)[0] == 0.0
    with pytest.raises(ValueError):
        small_uniform_statistic(fit, 0.0)
    bad = synthetic_fit([1.0, 0.0], [2.0, 1.0], 0.1, 100, 0.0)
    with pytest.raises(ValueError, match="sigma"):
        small_uniform_statistic(bad, 1.0)
