"""One-electron density, its spherical average, and radial derivatives at 0."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .atoms import AtomSpec
from .errors import ContractViolationError
from .extrapolate import richardson_derivative_at_zero
from .quadrature import (FOUR_PI, IntegralEstimate, combine_linear,
                         integrate_hat, integrate_radial, spherical_rule,
                         sphere_integrate, _partner_degree)
from .wavefunction import WavefunctionModel, assemble


def density_at(model: WavefunctionModel, spec: AtomSpec, x,
               scheme=None) -> IntegralEstimate:
    """rho(x): sum over electrons of the marginal of psi^2 at x."""
    x = np.asarray(x, dtype=float)
    parts = []
    for j in range(spec.n_electrons):
        def f(hat, j=j):
            return model.value(assemble(j, x, hat, spec.n_electrons)) ** 2
        parts.append((1.0, integrate_hat(f, spec, scheme)))
    return combine_linear(parts)


def rho_tilde(model: WavefunctionModel, spec: AtomSpec, r: float,
              rule=None, scheme=None) -> IntegralEstimate:
    """Spherical average of rho at radius r (integral over S^2, 4 pi included)."""
    if r < 0:
        raise ContractViolationError("radius must be nonnegative")
    if rule is None:
        rule = spherical_rule(17)
    if r == 0.0:
        at0 = density_at(model, spec, np.zeros(3), scheme)
        return IntegralEstimate(FOUR_PI * at0.value, FOUR_PI * at0.error,
                                at0.method, at0.n_evals, at0.warnings)
    return _sphere_average(lambda x: density_at(model, spec, x, scheme), r, rule)


def _sphere_average(point_estimate, r: float, rule) -> IntegralEstimate:
    """Sphere-integrate a pointwise IntegralEstimate-valued function at radius r."""
    partner = spherical_rule(_partner_degree(rule.degree))
    totals = []
    for rl in (rule, partner):
        ests = [point_estimate(r * omega) for omega in rl.nodes]
        value = float(np.sum(rl.weights * np.array([e.value for e in ests])))
        inner = float(np.sqrt(np.sum((rl.weights
                                      * np.array([e.error for e in ests])) ** 2)))
        n = int(np.sum([e.n_evals for e in ests]))
        warns = tuple(w for e in ests for w in e.warnings)
        totals.append((value, inner, n, warns))
    (value, inner, n1, w1), (check, _, n2, _) = totals
    return IntegralEstimate(value, abs(value - check) + inner, "tensor-grid",
                            n1 + n2, w1)


def rho_tilde_prime(model: WavefunctionModel, spec: AtomSpec, r: float,
                    h_tilde_fn, rule=None, scheme=None) -> float:
    """First radial derivative of the spherical average, via the integral
    representation (2/r^2) * int_0^r [-Z rho~(s) s + h~(s) s^2] ds."""
    if r <= 0:
        raise ContractViolationError("radius must be positive")
    z = spec.charge

    def integrand(s):
        s = np.atleast_1d(s)
        rho_vals = np.array([rho_tilde(model, spec, si, rule, scheme).value
                             for si in s])
        h_vals = np.asarray(h_tilde_fn(s), dtype=float)
        return -z * rho_vals * s + h_vals * s ** 2

    est = integrate_radial(integrand, r)
    return 2.0 / r**2 * est.value


def rho_tilde_second(model: WavefunctionModel, spec: AtomSpec, r: float,
                     h_tilde_fn, rule=None, scheme=None) -> float:
    """Second radial derivative of the spherical average via
    2 [h~(r) - int_0^1 (Z rho~'(r sigma) + 2 h~(r sigma)) sigma^2 d sigma];
    at r = 0 this reduces to (2/3)(h~(0) + Z^2 rho~(0))."""
    z = spec.charge
    if r == 0.0:
        h0 = float(np.asarray(h_tilde_fn(np.array([0.0])), dtype=float)[0])
        rho0 = rho_tilde(model, spec, 0.0, rule, scheme).value
        return (2.0 / 3.0) * (h0 + z**2 * rho0)

    def integrand(sigma):
        sigma = np.atleast_1d(sigma)
        prime = np.array([rho_tilde_prime(model, spec, r * si, h_tilde_fn,
                                          rule, scheme)
                          for si in sigma])
        h_vals = np.asarray(h_tilde_fn(r * sigma), dtype=float)
        return (z * prime + 2.0 * h_vals) * sigma ** 2

    est = integrate_radial(integrand, 1.0, rel_tol=1e-10)
    h_r = float(np.asarray(h_tilde_fn(np.array([r])), dtype=float)[0])
    return 2.0 * (h_r - est.value)


def rho_tilde_kth_at_zero(k: int, h_deriv_at_zero: float,
                          rho_prev_deriv_at_zero: float, charge: float) -> float:
    """(k+2)-th derivative of the spherical average at 0 from the recursion
    2/(k+3) * [(k+1) h~^(k)(0) - Z rho~^(k+1)(0)]."""
    if k < 0:
        raise ContractViolationError("recursion order k must be >= 0")
    return 2.0 / (k + 3) * ((k + 1) * h_deriv_at_zero
                            - charge * rho_prev_deriv_at_zero)


def rho_tilde_derivative_direct(model: WavefunctionModel, spec: AtomSpec,
                                order: int, r0: float = 0.1, levels: int = 6,
                                rule=None, scheme=None,
                                cache=None) -> tuple[float, float]:
    """Richardson-extrapolated one-sided derivative of rho~ at 0.

    Returns (value, error estimate); the error combines the extrapolation
    residual and the propagated quadrature errors of the samples.  An
    externally supplied ``cache`` dict lets callers share samples across
    derivative orders (the stencil radii only depend on r0 and levels).
    """
    if cache is None:
        cache = {}

    def f(radii):
        out = []
        for r in np.atleast_1d(radii):
            key = float(r)
            if key not in cache:
                cache[key] = rho_tilde(model, spec, key, rule, scheme)
            out.append(cache[key].value)
        return np.array(out)

    value, err = richardson_derivative_at_zero(f, order, r0=r0, levels=levels)
    quad_err = max((e.error for e in cache.values()), default=0.0)
    # Stencil weights scale like h^-order; propagate the worst sample error.
    h_min = r0 * 2.0 ** -(levels - 1) / 4.0
    err = err + 10.0 * quad_err / h_min**order
    return value, err


@dataclass(frozen=True)
class RadialSamples:
    """Spherical-average samples on an ascending radius grid."""

    radii: np.ndarray
    values: tuple  # IntegralEstimate per radius

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if len(r) != len(self.values):
            raise ContractViolationError("radii and values must align")
        if np.any(r < 0) or np.any(np.diff(r) <= 0):
            raise ContractViolationError("radii must be ascending and nonnegative")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r,value,error,method\n")
        for r, est in zip(self.radii, self.values):
            buf.write(f"{r!r},{est.value!r},{est.error!r},{est.method}\n")
        return buf.getvalue()


def sample_rho_tilde(model: WavefunctionModel, spec: AtomSpec, radii,
                     rule=None, scheme=None) -> RadialSamples:
    radii = np.asarray(radii, dtype=float)
    vals = tuple(rho_tilde(model, spec, r, rule, scheme) for r in radii)
    return RadialSamples(radii, vals)
