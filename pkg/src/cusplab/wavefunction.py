"""Explicit few-electron wavefunction models, gradients, and regularized factors.

All models follow the convention in which the kinetic operator is the plain
(un-halved) Laplacian, so hydrogenic orbitals carry the exponent
exp(-Z r / (2n)) and the levels are E_n = -Z^2/(4 n^2).

Evaluation is vectorized: coordinate arrays have shape (..., N, 3) and values
come back with the leading batch shape.  Models are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .atoms import AtomSpec
from .errors import (ContractViolationError, IntegrationFailureError,
                     SingularPointError, UnsupportedModelError)
from . import quadrature
from .quadrature import HatGrid, IntegralEstimate, McSampler, integrate_radial

FOUR_PI = 4.0 * math.pi


# ---------------------------------------------------------------------------
# Associated Laguerre polynomials and real solid harmonics (l <= 3)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def laguerre_coeffs(k: int, alpha: int) -> tuple:
    """Coefficients (ascending) of the associated Laguerre polynomial L_k^alpha."""
    return tuple((-1) ** i * math.comb(k + alpha, k - i) / math.factorial(i)
                 for i in range(k + 1))


def _polyval(coeffs, x):
    out = np.zeros_like(x)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def _polyder(coeffs):
    return tuple(i * c for i, c in enumerate(coeffs))[1:] or (0.0,)


# Real solid harmonics S_lm as monomial lists [(coef, (px, py, pz)), ...];
# on the unit sphere they integrate to 1 against the surface measure.
def _solid_harmonics():
    s = {}
    c = math.sqrt
    pi = math.pi
    s[(0, 0)] = [(0.5 * c(1 / pi), (0, 0, 0))]
    p = c(3 / (4 * pi))
    s[(1, 1)] = [(p, (1, 0, 0))]
    s[(1, -1)] = [(p, (0, 1, 0))]
    s[(1, 0)] = [(p, (0, 0, 1))]
    d0 = 0.25 * c(5 / pi)
    d1 = 0.5 * c(15 / pi)
    s[(2, 0)] = [(2 * d0, (0, 0, 2)), (-d0, (2, 0, 0)), (-d0, (0, 2, 0))]
    s[(2, 1)] = [(d1, (1, 0, 1))]
    s[(2, -1)] = [(d1, (0, 1, 1))]
    s[(2, 2)] = [(0.5 * d1, (2, 0, 0)), (-0.5 * d1, (0, 2, 0))]
    s[(2, -2)] = [(d1, (1, 1, 0))]
    f0 = 0.25 * c(7 / pi)
    f1 = 0.25 * c(21 / (2 * pi))
    f2 = 0.25 * c(105 / pi)
    f3 = 0.25 * c(35 / (2 * pi))
    s[(3, 0)] = [(2 * f0, (0, 0, 3)), (-3 * f0, (2, 0, 1)), (-3 * f0, (0, 2, 1))]
    s[(3, 1)] = [(4 * f1, (1, 0, 2)), (-f1, (3, 0, 0)), (-f1, (1, 2, 0))]
    s[(3, -1)] = [(4 * f1, (0, 1, 2)), (-f1, (2, 1, 0)), (-f1, (0, 3, 0))]
    s[(3, 2)] = [(f2, (2, 0, 1)), (-f2, (0, 2, 1))]
    s[(3, -2)] = [(2 * f2, (1, 1, 1))]
    s[(3, 3)] = [(f3, (3, 0, 0)), (-3 * f3, (1, 2, 0))]
    s[(3, -3)] = [(3 * f3, (2, 1, 0)), (-f3, (0, 3, 0))]
    return s


SOLID_HARMONICS = _solid_harmonics()


def eval_solid_harmonic(l: int, m: int, xyz: np.ndarray) -> np.ndarray:
    """Value of the real solid harmonic at points of shape (..., 3)."""
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    out = np.zeros(xyz.shape[:-1])
    for coef, (px, py, pz) in SOLID_HARMONICS[(l, m)]:
        out = out + coef * x**px * y**py * z**pz
    return out


def grad_solid_harmonic(l: int, m: int, xyz: np.ndarray) -> np.ndarray:
    """Gradient of the real solid harmonic at points of shape (..., 3)."""
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    out = np.zeros(xyz.shape[:-1] + (3,))
    for coef, (px, py, pz) in SOLID_HARMONICS[(l, m)]:
        if px:
            out[..., 0] += coef * px * x**(px - 1) * y**py * z**pz
        if py:
            out[..., 1] += coef * py * x**px * y**(py - 1) * z**pz
        if pz:
            out[..., 2] += coef * pz * x**px * y**py * z**(pz - 1)
    return out


def _radii(coords):
    return np.linalg.norm(coords, axis=-1)


# ---------------------------------------------------------------------------
# Model variants
# ---------------------------------------------------------------------------

class WavefunctionModel:
    """Common interface: psi, its gradient, and the regularized factors."""

    n_electrons: int
    charge: float
    norm_constant: float

    # -- per-variant internals (norm_constant excluded) --
    def _bare_value(self, coords: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _bare_gradient(self, coords: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _bare_norm_squared(self) -> float:
        raise NotImplementedError

    def value(self, coords: np.ndarray) -> np.ndarray:
        return self.norm_constant * self._bare_value(np.asarray(coords, dtype=float))

    def gradient(self, coords: np.ndarray) -> np.ndarray:
        return self.norm_constant * self._bare_gradient(np.asarray(coords, dtype=float))

    def scaled(self, factor: float) -> "WavefunctionModel":
        return replace(self, norm_constant=self.norm_constant * factor)

    def grad_phi_at_zero(self, j: int, hat: np.ndarray) -> np.ndarray:
        """Gradient of the regularized factor phi_j in the x slot at x = 0."""
        raise NotImplementedError

    def grad_hat_at_nucleus(self, j: int, hat: np.ndarray) -> np.ndarray:
        """Gradient of psi with respect to the hat coordinates at x_j = 0.

        ``hat`` has shape (..., N-1, 3); the result matches it.
        """
        raise NotImplementedError


def _check_dims(model: WavefunctionModel, coords: np.ndarray):
    if coords.shape[-2:] != (model.n_electrons, 3):
        raise ContractViolationError(
            f"configuration shape {coords.shape} does not match "
            f"an {model.n_electrons}-electron model")


@dataclass(frozen=True)
class Hydrogenic(WavefunctionModel):
    """One-electron eigenfunction of -Delta - Z/|x| with quantum numbers (n, l, m)."""

    n: int
    l: int
    m: int
    charge: float
    norm_constant: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ContractViolationError("principal quantum number must be >= 1")
        if self.n > 4 or self.l > 3:
            raise UnsupportedModelError("hydrogenic tables cover n <= 4, l <= 3")
        if not (0 <= self.l < self.n) or abs(self.m) > self.l:
            raise ContractViolationError("require 0 <= l < n and |m| <= l")

    @property
    def n_electrons(self) -> int:
        return 1

    @property
    def _scale(self) -> float:
        # Laguerre argument a*r with a = Z/n; orbital exponent a/2 = Z/(2n).
        return self.charge / self.n

    def _radial(self, r):
        """g(r) with psi = norm * g(r) * S_lm(x) (solid harmonic carries r^l)."""
        a = self._scale
        coeffs = laguerre_coeffs(self.n - self.l - 1, 2 * self.l + 1)
        return a**self.l * _polyval(coeffs, a * r) * np.exp(-0.5 * a * r)

    def _radial_prime(self, r):
        a = self._scale
        coeffs = laguerre_coeffs(self.n - self.l - 1, 2 * self.l + 1)
        dcoeffs = _polyder(coeffs)
        e = np.exp(-0.5 * a * r)
        return a**self.l * (a * _polyval(dcoeffs, a * r)
                            - 0.5 * a * _polyval(coeffs, a * r)) * e

    def _bare_value(self, coords):
        xyz = coords[..., 0, :]
        return self._radial(_radii(xyz)) * eval_solid_harmonic(self.l, self.m, xyz)

    def _bare_gradient(self, coords):
        xyz = coords[..., 0, :]
        r = _radii(xyz)
        if np.any(r == 0.0):
            raise SingularPointError("gradient requested at the nucleus")
        s = eval_solid_harmonic(self.l, self.m, xyz)
        gs = grad_solid_harmonic(self.l, self.m, xyz)
        grad = (self._radial_prime(r) / r)[..., None] * xyz * s[..., None] \
            + self._radial(r)[..., None] * gs
        return grad[..., None, :]

    def _bare_norm_squared(self):
        cutoff = quadrature.envelope_cutoff(self._scale)
        est = integrate_radial(
            lambda r: self._radial(r) ** 2 * r ** (2 * self.l + 2), cutoff)
        return est.value

    def hessian(self, x: np.ndarray) -> np.ndarray:
        """Second partials of psi at a single off-nucleus point (s-states)."""
        if self.l != 0:
            raise UnsupportedModelError("analytic hessian shipped for s-states only")
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        if r == 0.0:
            raise SingularPointError("hessian requested at the nucleus")
        c = self.norm_constant * SOLID_HARMONICS[(0, 0)][0][0]
        omega = x / r
        a = self._scale
        coeffs = laguerre_coeffs(self.n - 1, 1)
        d1 = _polyder(coeffs)
        d2 = _polyder(d1)
        e = math.exp(-0.5 * a * r)
        g1 = (a * _polyval(d1, np.array(a * r))
              - 0.5 * a * _polyval(coeffs, np.array(a * r))) * e
        g2 = (a * a * _polyval(d2, np.array(a * r))
              - a * a * _polyval(d1, np.array(a * r))
              + 0.25 * a * a * _polyval(coeffs, np.array(a * r))) * e
        proj = np.outer(omega, omega)
        return c * (float(g2) * proj + float(g1) * (np.eye(3) - proj) / r)

    def grad_phi_at_zero(self, j, hat):
        hat = np.asarray(hat, dtype=float)
        if self.l == 0:
            a = self._scale
            coeffs = laguerre_coeffs(self.n - 1, 1)
            # d/dr [g(r) exp(Z r / 2)] at 0; vanishes for every s-state.
            slope = a * _polyval(_polyder(coeffs), np.array(0.0)) \
                - 0.5 * a * _polyval(coeffs, np.array(0.0)) \
                + 0.5 * self.charge * _polyval(coeffs, np.array(0.0))
            if abs(slope) > 1e-12 * max(1.0, abs(self._radial(np.array(0.0)))):
                raise UnsupportedModelError("regularized factor has a cusp at 0")
            return np.zeros(3)
        if self.l == 1:
            g0 = float(self._radial(np.array(0.0)))
            grad_s = grad_solid_harmonic(self.l, self.m, np.zeros(3))
            return self.norm_constant * g0 * grad_s
        return np.zeros(3)

    def grad_hat_at_nucleus(self, j, hat):
        hat = np.asarray(hat, dtype=float)
        return np.zeros_like(hat)


@dataclass(frozen=True)
class SlaterOrbital:
    """s-type Slater orbital p(r) * exp(-exponent * r); coeffs ascending in r."""

    coeffs: tuple
    exponent: float

    def radial(self, r):
        return _polyval(self.coeffs, r) * np.exp(-self.exponent * r)

    def radial_prime(self, r):
        return (_polyval(_polyder(self.coeffs), r)
                - self.exponent * _polyval(self.coeffs, r)) * np.exp(-self.exponent * r)

    def norm_squared(self) -> float:
        cutoff = quadrature.envelope_cutoff(2.0 * self.exponent)
        est = integrate_radial(lambda r: self.radial(r) ** 2 * r ** 2, cutoff)
        return FOUR_PI * est.value


@dataclass(frozen=True)
class OrbitalProduct(WavefunctionModel):
    """Product of s-type Slater orbitals, one per electron (trial function)."""

    orbitals: tuple
    charge: float
    norm_constant: float = 1.0

    @property
    def n_electrons(self) -> int:
        return len(self.orbitals)

    def _bare_value(self, coords):
        r = _radii(coords)
        out = np.ones(coords.shape[:-2])
        for j, orb in enumerate(self.orbitals):
            out = out * orb.radial(r[..., j])
        return out

    def _bare_gradient(self, coords):
        r = _radii(coords)
        if np.any(r == 0.0):
            raise SingularPointError("gradient requested at the nucleus")
        vals = np.stack([orb.radial(r[..., j])
                         for j, orb in enumerate(self.orbitals)], axis=-1)
        primes = np.stack([orb.radial_prime(r[..., j])
                           for j, orb in enumerate(self.orbitals)], axis=-1)
        total = np.prod(vals, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(vals != 0.0, primes / vals, 0.0)
        grad = (total[..., None] * ratio)[..., None] * coords / r[..., None]
        return grad

    def _bare_norm_squared(self):
        out = 1.0
        for orb in self.orbitals:
            out *= orb.norm_squared()
        return out

    def grad_phi_at_zero(self, j, hat):
        hat = np.asarray(hat, dtype=float)
        orb = self.orbitals[j]
        p0 = _polyval(orb.coeffs, np.array(0.0))
        p1 = _polyval(_polyder(orb.coeffs), np.array(0.0))
        slope = p1 + (0.5 * self.charge - orb.exponent) * p0
        if abs(slope) > 1e-12 * max(1.0, abs(float(p0))):
            raise UnsupportedModelError(
                "orbital cusp exponent differs from Z/2; phi has no gradient at 0")
        return np.zeros(3)

    def grad_hat_at_nucleus(self, j, hat):
        hat = np.asarray(hat, dtype=float)
        others = [k for k in range(self.n_electrons) if k != j]
        r = _radii(hat)
        factor = float(self.orbitals[j].radial(np.array(0.0)))
        vals = np.stack([self.orbitals[k].radial(r[..., i])
                         for i, k in enumerate(others)], axis=-1)
        primes = np.stack([self.orbitals[k].radial_prime(r[..., i])
                           for i, k in enumerate(others)], axis=-1)
        total = np.prod(vals, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(vals != 0.0, primes / vals, 0.0)
        return self.norm_constant * factor \
            * (total[..., None] * ratio)[..., None] * hat / r[..., None]


@dataclass(frozen=True)
class HylleraasHelium(WavefunctionModel):
    """Two-electron trial function exp(-zeta(r1+r2)) * sum c s^i t^j u^k.

    Here s = r1 + r2, t = r1 - r2, u = |x1 - x2|.  ``terms`` is a tuple of
    (i, j, k, c).
    """

    zeta: float
    terms: tuple
    charge: float
    norm_constant: float = 1.0

    @property
    def n_electrons(self) -> int:
        return 2

    def _stu(self, coords):
        r1 = _radii(coords[..., 0, :])
        r2 = _radii(coords[..., 1, :])
        u = _radii(coords[..., 0, :] - coords[..., 1, :])
        return r1 + r2, r1 - r2, u

    def _poly(self, s, t, u):
        out = np.zeros_like(s)
        for i, j, k, c in self.terms:
            out = out + c * s**i * t**j * u**k
        return out

    def _poly_d(self, s, t, u, wrt):
        out = np.zeros_like(s)
        for i, j, k, c in self.terms:
            if wrt == "s" and i:
                out = out + c * i * s**(i - 1) * t**j * u**k
            elif wrt == "t" and j:
                out = out + c * j * s**i * t**(j - 1) * u**k
            elif wrt == "u" and k:
                out = out + c * k * s**i * t**j * u**(k - 1)
        return out

    def _bare_value(self, coords):
        s, t, u = self._stu(coords)
        return np.exp(-self.zeta * s) * self._poly(s, t, u)

    def _bare_gradient(self, coords):
        s, t, u = self._stu(coords)
        x1, x2 = coords[..., 0, :], coords[..., 1, :]
        r1 = _radii(x1)
        r2 = _radii(x2)
        if np.any(r1 == 0.0) or np.any(r2 == 0.0) or np.any(u == 0.0):
            raise SingularPointError("gradient requested on the singular set")
        e = np.exp(-self.zeta * s)
        p = self._poly(s, t, u)
        ps = self._poly_d(s, t, u, "s")
        pt = self._poly_d(s, t, u, "t")
        pu = self._poly_d(s, t, u, "u")
        dr1 = e * (ps + pt - self.zeta * p)
        dr2 = e * (ps - pt - self.zeta * p)
        du = e * pu
        uvec = (x1 - x2) / u[..., None]
        g1 = dr1[..., None] * x1 / r1[..., None] + du[..., None] * uvec
        g2 = dr2[..., None] * x2 / r2[..., None] - du[..., None] * uvec
        return np.stack([g1, g2], axis=-2)

    def _bare_norm_squared(self):
        # Interparticle coordinates: dx1 dx2 = pi^2 u (s^2 - t^2) ds dt du,
        # with u in [0, s] and t in [-u, u].
        cutoff = quadrature.envelope_cutoff(2.0 * self.zeta)
        xg, wg = np.polynomial.legendre.leggauss(24)

        def inner_t(s, u):
            t = xg * u[..., None]  # nodes in [-u, u]
            wt = wg * u[..., None]
            ss = np.broadcast_to(s[..., None], t.shape)
            uu = np.broadcast_to(u[..., None], t.shape)
            val = self._poly(ss, t, uu) ** 2 * (ss ** 2 - t ** 2)
            return np.sum(wt * val, axis=-1)

        def inner_u(s):
            u = 0.5 * s[:, None] * (xg + 1.0)  # nodes in [0, s]
            wu = 0.5 * s[:, None] * wg
            val = inner_t(np.broadcast_to(s[:, None], u.shape), u) * u
            return np.sum(wu * val, axis=-1)

        est = integrate_radial(
            lambda s: np.exp(-2.0 * self.zeta * s) * inner_u(np.atleast_1d(s)),
            cutoff)
        return math.pi ** 2 * est.value

    def grad_phi_at_zero(self, j, hat):
        hat = np.asarray(hat, dtype=float)
        r2 = _radii(hat[..., 0, :])
        s = r2
        t = (-1.0 if j == 0 else 1.0) * r2
        u = r2
        p = self._poly(s, t, u)
        ps = self._poly_d(s, t, u, "s")
        pt = self._poly_d(s, t, u, "t") * (1.0 if j == 0 else -1.0)
        radial_slope = (0.5 * self.charge - self.zeta) * p + ps + pt
        if np.any(np.abs(radial_slope) > 1e-10 * np.maximum(1.0, np.abs(p))):
            raise UnsupportedModelError(
                "Hylleraas factor has a nuclear cusp mismatch; no gradient at 0")
        pu = self._poly_d(s, t, u, "u")
        e = np.exp(-self.zeta * s)
        uhat = -hat[..., 0, :] / r2[..., None]
        return self.norm_constant * (e * pu)[..., None] * uhat

    def grad_hat_at_nucleus(self, j, hat):
        hat = np.asarray(hat, dtype=float)
        r2 = _radii(hat[..., 0, :])
        sign = -1.0 if j == 0 else 1.0
        s, t, u = r2, sign * r2, r2
        e = np.exp(-self.zeta * s)
        p = self._poly(s, t, u)
        ps = self._poly_d(s, t, u, "s")
        pt = self._poly_d(s, t, u, "t")
        pu = self._poly_d(s, t, u, "u")
        dr2 = e * (ps + sign * pt + pu - self.zeta * p)
        out = dr2[..., None] * hat[..., 0, :] / r2[..., None]
        return self.norm_constant * out[..., None, :]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def eval_psi(model: WavefunctionModel, coords) -> np.ndarray:
    """psi at one or many configurations of shape (..., N, 3)."""
    coords = np.asarray(coords, dtype=float)
    _check_dims(model, coords)
    return model.value(coords)


def eval_grad_psi(model: WavefunctionModel, coords) -> np.ndarray:
    """Analytic gradient of psi, shape (..., N, 3); off the singular set only."""
    coords = np.asarray(coords, dtype=float)
    _check_dims(model, coords)
    return model.gradient(coords)


def assemble(j: int, x, hat, n_electrons: int) -> np.ndarray:
    """Insert slot-j coordinates into hat coordinates, shape (..., N, 3)."""
    x = np.asarray(x, dtype=float)
    hat = np.asarray(hat, dtype=float)
    batch = np.broadcast_shapes(x.shape[:-1], hat.shape[:-2])
    out = np.empty(batch + (n_electrons, 3))
    out[..., j, :] = x
    others = [k for k in range(n_electrons) if k != j]
    for i, k in enumerate(others):
        out[..., k, :] = hat[..., i, :]
    return out


def eval_phi(model: WavefunctionModel, j: int, x, hat) -> np.ndarray:
    """Regularized factor exp(Z|x|/2) * psi(x, hat) in electron slot j."""
    x = np.asarray(x, dtype=float)
    coords = assemble(j, x, hat, model.n_electrons)
    r = np.linalg.norm(x, axis=-1)
    return np.exp(0.5 * model.charge * r) * model.value(coords)


def eval_grad_phi(model: WavefunctionModel, j: int, x, hat) -> np.ndarray:
    """Gradient of phi_j in the x slot; at x = 0 the analytic limit is used."""
    x = np.asarray(x, dtype=float)
    hat = np.asarray(hat, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.all(r == 0.0):
        return model.grad_phi_at_zero(j, hat)
    if np.any(r == 0.0):
        raise SingularPointError("mixed zero/nonzero batches are not supported")
    coords = assemble(j, x, hat, model.n_electrons)
    grad = model.gradient(coords)[..., j, :]
    psi = model.value(coords)
    scale = np.exp(0.5 * model.charge * r)
    return scale[..., None] * (grad + 0.5 * model.charge
                               * psi[..., None] * x / r[..., None])


def hydrogenic_energy(n: int, charge: float) -> float:
    """Level -Z^2/(4 n^2) of -Delta - Z/|x|."""
    if n < 1:
        raise ContractViolationError("principal quantum number must be >= 1")
    return -charge**2 / (4.0 * n**2)


def normalize(model: WavefunctionModel, sampler: McSampler | None = None) -> WavefunctionModel:
    """Rescale norm_constant so that the L2 norm over R^{3N} is 1."""
    try:
        bare = model._bare_norm_squared()
    except NotImplementedError:
        bare = None
    if bare is None:
        if sampler is None:
            raise IntegrationFailureError("model needs a sampler for normalization")
        est = quadrature.integrate_hat(
            lambda pts: model._bare_value(pts) ** 2,
            AtomSpec(model.n_electrons + 1, model.charge, 0.0), sampler)
        bare = est.value
    if not (bare > 0.0 and math.isfinite(bare)):
        raise IntegrationFailureError("norm integral did not converge")
    return replace(model, norm_constant=1.0 / math.sqrt(bare))
