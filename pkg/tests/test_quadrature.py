import math

import numpy as np
import pytest

from cusplab.atoms import AtomSpec
from cusplab.errors import EvaluationError, IntegrationFailureError
from cusplab.quadrature import (FOUR_PI, HatGrid, McSampler, SHIPPED_DEGREES,
                                combine_linear, envelope_cutoff,
                                integrate_hat, integrate_radial,
                                set_threads, sphere_integrate,
                                sphere_moment_matrix, spherical_rule)


@pytest.fixture(autouse=True)
def _single_thread():
    set_threads(None)
    yield
    set_threads(None)


def test_rule_weights_sum_to_sphere_area():
    for deg in SHIPPED_DEGREES:
        rule = spherical_rule(deg)
        assert abs(np.sum(rule.weights) - FOUR_PI) < 1e-12
        assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 1.0, atol=1e-14)


def test_rule_point_counts():
    assert [len(spherical_rule(d).nodes) for d in SHIPPED_DEGREES] == \
        [6, 26, 110, 302]


def test_moment_identities_all_rules():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    mat = rng.standard_normal((3, 3))
    sym = 0.5 * (mat + mat.T)
    anti = 0.5 * (mat - mat.T)
    for deg in SHIPPED_DEGREES:
        rule = spherical_rule(deg)
        dot = np.sum(rule.weights * (rule.nodes @ a) * (rule.nodes @ b))
        assert abs(dot - FOUR_PI / 3.0 * (a @ b)) < 1e-12
        assert abs(sphere_moment_matrix(sym, rule)
                   - FOUR_PI / 3.0 * np.trace(sym)) < 1e-12
        assert abs(sphere_moment_matrix(anti, rule)) < 1e-13
        moment = np.einsum("k,ki,kj->ij", rule.weights, rule.nodes, rule.nodes)
        assert np.max(np.abs(moment - FOUR_PI / 3.0 * np.eye(3))) < 1e-12


def test_rule_exactness_on_polynomials():
    # x^2 y^2 integrates to 4 pi / 15 over the unit sphere (degree 4).
    for deg in (7, 17, 29):
        rule = spherical_rule(deg)
        val = np.sum(rule.weights * rule.nodes[:, 0] ** 2
                     * rule.nodes[:, 1] ** 2)
        assert abs(val - FOUR_PI / 15.0) < 1e-12


def test_sphere_integrate_constant_and_error():
    rule = spherical_rule(7)
    est = sphere_integrate(lambda p: np.ones(len(p)), rule)
    assert abs(est.value - FOUR_PI) < 1e-12
    assert est.error < 1e-12


def test_sphere_integrate_rejects_nonfinite():
    rule = spherical_rule(3)

    def bad(p):
        v = np.ones(len(p))
        v[0] = np.inf
        return v

    with pytest.raises(EvaluationError):
        sphere_integrate(bad, rule)


def test_unknown_degree_rejected():
    with pytest.raises(ValueError):
        spherical_rule(11)


def test_radial_exponential():
    est = integrate_radial(lambda r: np.exp(-r), 50.0)
    assert abs(est.value - 1.0) < 1e-12
    assert est.error < 1e-10


def test_radial_polynomial_times_gaussian():
    est = integrate_radial(lambda r: r**2 * np.exp(-r**2), 10.0)
    assert abs(est.value - math.sqrt(math.pi) / 4.0) < 1e-12


def test_radial_failure_on_wild_integrand():
    with pytest.raises(IntegrationFailureError):
        integrate_radial(lambda r: np.sin(1e6 * r) / (1e-30 + r * 0.0 + 1e-9),
                         1.0, rel_tol=1e-300, abs_tol=1e-300, max_splits=5)


def test_envelope_cutoff():
    assert math.exp(-2.0 * envelope_cutoff(2.0)) < 1e-15
    with pytest.raises(ValueError):
        envelope_cutoff(0.0)


def test_combine_linear():
    a = sphere_integrate(lambda p: np.ones(len(p)), spherical_rule(7))
    out = combine_linear([(2.0, a), (-1.0, a)])
    assert abs(out.value - FOUR_PI) < 1e-12


def test_hat_point_for_single_electron():
    spec = AtomSpec(1, 1.0, -0.25)
    est = integrate_hat(lambda hat: np.full(hat.shape[0], 3.5), spec)
    assert est.value == 3.5 and est.error == 0.0


def test_hat_grid_marginal_gaussian():
    # integral over R^3 of exp(-|y|^2) = pi^(3/2); grid rate chosen loosely.
    spec = AtomSpec(2, 1.0, -1.0)
    grid = HatGrid(rate=1.0, n_panels=10, panel_order=16, sphere_degree=7)
    est = integrate_hat(lambda hat: np.exp(-np.sum(hat[:, 0, :] ** 2, axis=-1)),
                        spec, grid)
    assert abs(est.value - math.pi ** 1.5) < max(1e-6, 3 * est.error)


def test_hat_grid_center_shift_cancels_singularity():
    spec = AtomSpec(2, 1.0, -1.0)
    x = np.array([0.4, 0.0, 0.0])
    grid = HatGrid(rate=2.0, n_panels=10, panel_order=16, sphere_degree=7)

    def f(hat):
        d = np.linalg.norm(hat[:, 0, :] - x, axis=-1)
        return np.exp(-2.0 * np.linalg.norm(hat[:, 0, :], axis=-1)) / d

    est = integrate_hat(f, spec, grid, center=x)
    # Reference by direct radial integral around the shifted center.
    from cusplab.quadrature import integrate_radial

    def shell(r):
        rule = spherical_rule(29)
        pts = r[:, None, None] * rule.nodes[None] + x[None, None, :]
        vals = np.exp(-2.0 * np.linalg.norm(pts, axis=-1)) / r[:, None]
        return np.sum(rule.weights[None] * vals, axis=1) * r**2

    ref = integrate_radial(shell, 20.0).value
    assert abs(est.value - ref) < max(1e-4, 3 * est.error)


def test_mc_deterministic_and_thread_invariant():
    spec = AtomSpec(4, 1.0, -1.0)
    sampler = McSampler(seed=7, n_samples=100000, envelope_rate=1.0,
                        block_size=8192)

    def f(pts):
        return np.exp(-np.sum(np.linalg.norm(pts, axis=-1), axis=-1))

    a = integrate_hat(f, spec, sampler)
    b = integrate_hat(f, spec, sampler)
    assert a.value == b.value and a.error == b.error
    set_threads(4)
    c = integrate_hat(f, spec, sampler)
    assert c.value == a.value


def test_mc_converges_to_truth():
    # For three hat electrons: (int exp(-|y|) dy)^3 = (8 pi)^3.
    spec = AtomSpec(4, 1.0, -1.0)
    truth = (8.0 * math.pi) ** 3

    def f(pts):
        return np.exp(-np.sum(np.linalg.norm(pts, axis=-1), axis=-1))

    est = integrate_hat(f, spec, McSampler(3, 200000, envelope_rate=1.3))
    assert abs(est.value - truth) < 4.0 * est.error + 1e-6 * truth


def test_mc_single_sample_no_crash():
    spec = AtomSpec(3, 1.0, -1.0)
    est = integrate_hat(lambda p: np.ones(p.shape[0]), spec,
                        McSampler(0, 1, envelope_rate=1.0))
    assert np.isfinite(est.value)
    assert est.error > 0


def test_grid_requires_single_hat_electron():
    spec = AtomSpec(3, 1.0, -1.0)
    with pytest.raises(IntegrationFailureError):
        integrate_hat(lambda p: np.ones(p.shape[0]), spec,
                      HatGrid(rate=1.0))
