"""Jastrow-type factors F2, F3, their cutoff versions, second-derivative
contraction identities, and the a priori cancellation diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atoms import AtomSpec
from .errors import SingularPointError, UnsupportedModelError
from .wavefunction import WavefunctionModel

#: prefactor of the pair-log factor
C0 = (2.0 - math.pi) / (12.0 * math.pi)

_SINGULAR_TOL = 1e-12


# ---------------------------------------------------------------------------
# Smooth cutoff profile: 1 on [0, 1], 0 on [2, inf), C-infinity throughout.
# ---------------------------------------------------------------------------

def _g(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > 0
    out[m] = np.exp(-1.0 / s[m])
    return out


def _g1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > 0
    out[m] = np.exp(-1.0 / s[m]) / s[m] ** 2
    return out


def _g2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > 0
    out[m] = np.exp(-1.0 / s[m]) * (1.0 / s[m] ** 4 - 2.0 / s[m] ** 3)
    return out


def chi(t):
    """Smooth transition: 1 for t <= 1, 0 for t >= 2."""
    t = np.abs(np.asarray(t, dtype=float))
    a, b = _g(2.0 - t), _g(t - 1.0)
    return a / (a + b)


def chi_prime(t):
    t = np.abs(np.asarray(t, dtype=float))
    a, b = _g(2.0 - t), _g(t - 1.0)
    da, db = -_g1(2.0 - t), _g1(t - 1.0)
    s = a + b
    return (da * b - a * db) / s**2


def chi_second(t):
    t = np.abs(np.asarray(t, dtype=float))
    a, b = _g(2.0 - t), _g(t - 1.0)
    da, db = -_g1(2.0 - t), _g1(t - 1.0)
    d2a, d2b = _g2(2.0 - t), _g2(t - 1.0)
    s = a + b
    c = a / s
    cp = (da * b - a * db) / s**2
    return (d2a - 2.0 * cp * (da + db) - c * (d2a + d2b)) / s


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

def _config(c):
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[1] != 3:
        raise ValueError("configuration must have shape (N, 3)")
    return c


def f2(c, charge: float, cutoff: bool = False) -> float:
    """Nuclear + pair linear terms, optionally with the radial cutoff."""
    c = _config(c)
    n = len(c)
    r = np.linalg.norm(c, axis=1)
    cut_n = chi(r) if cutoff else 1.0
    total = float(np.sum(-0.5 * charge * cut_n * r))
    for i in range(n):
        for j in range(i + 1, n):
            d = np.linalg.norm(c[i] - c[j])
            total += 0.25 * (chi(d) if cutoff else 1.0) * d
    return total


def f3(c, charge: float, cutoff: bool = False) -> float:
    """Pair-log terms; the joint-origin value is the (zero) limit."""
    c = _config(c)
    n = len(c)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            x, y = c[i], c[j]
            q = x @ x + y @ y
            if q == 0.0:
                continue
            w = chi(np.linalg.norm(x)) * chi(np.linalg.norm(y)) if cutoff else 1.0
            total += C0 * charge * w * (x @ y) * math.log(q)
    return float(total)


# ---------------------------------------------------------------------------
# Gradients and Hessians
# ---------------------------------------------------------------------------

def _radial_hess(y, up, upp):
    """Hessian of a radial function with given first/second radial derivatives."""
    r = np.linalg.norm(y)
    yh = y / r
    proj = np.outer(yh, yh)
    return upp * proj + up / r * (np.eye(3) - proj)


def f2_gradient(c, charge: float, cutoff: bool = False) -> np.ndarray:
    c = _config(c)
    n = len(c)
    grad = np.zeros((n, 3))
    for i in range(n):
        r = np.linalg.norm(c[i])
        if r < _SINGULAR_TOL:
            raise SingularPointError("gradient undefined at the nucleus")
        up = -0.5 * charge * ((chi_prime(r) * r + chi(r)) if cutoff else 1.0)
        grad[i] += up * c[i] / r
    for i in range(n):
        for j in range(i + 1, n):
            dvec = c[i] - c[j]
            d = np.linalg.norm(dvec)
            if d < _SINGULAR_TOL:
                raise SingularPointError("gradient undefined at a coincidence")
            up = 0.25 * ((chi_prime(d) * d + chi(d)) if cutoff else 1.0)
            grad[i] += up * dvec / d
            grad[j] -= up * dvec / d
    return grad


def f2_hessian(c, charge: float, cutoff: bool = False) -> np.ndarray:
    """(3N, 3N) matrix of second partials."""
    c = _config(c)
    n = len(c)
    h = np.zeros((n, 3, n, 3))
    for i in range(n):
        r = np.linalg.norm(c[i])
        if r < _SINGULAR_TOL:
            raise SingularPointError("second partials undefined at the nucleus")
        if cutoff:
            up = chi_prime(r) * r + chi(r)
            upp = chi_second(r) * r + 2.0 * chi_prime(r)
        else:
            up, upp = 1.0, 0.0
        h[i, :, i, :] += -0.5 * charge * _radial_hess(c[i], up, upp)
    for i in range(n):
        for j in range(i + 1, n):
            dvec = c[i] - c[j]
            d = np.linalg.norm(dvec)
            if d < _SINGULAR_TOL:
                raise SingularPointError("second partials undefined at a "
                                         "coincidence")
            if cutoff:
                up = chi_prime(d) * d + chi(d)
                upp = chi_second(d) * d + 2.0 * chi_prime(d)
            else:
                up, upp = 1.0, 0.0
            block = 0.25 * _radial_hess(dvec, up, upp)
            h[i, :, i, :] += block
            h[j, :, j, :] += block
            h[i, :, j, :] -= block
            h[j, :, i, :] -= block
    return h.reshape(3 * n, 3 * n)


def _f3_pair_blocks(x, y, charge: float, cutoff: bool):
    """Gradient pieces and Hessian blocks of one pair-log term."""
    rx, ry = np.linalg.norm(x), np.linalg.norm(y)
    q = rx**2 + ry**2
    if q < _SINGULAR_TOL**2:
        raise SingularPointError("pair-log second partials undefined at the "
                                 "joint origin")
    p = x @ y
    big_l = math.log(q)
    u = p * big_l
    u_x = y * big_l + 2.0 * p * x / q
    u_y = x * big_l + 2.0 * p * y / q
    u_xx = (2.0 / q) * (np.outer(y, x) + np.outer(x, y)) \
        + (2.0 * p / q) * np.eye(3) - (4.0 * p / q**2) * np.outer(x, x)
    u_yy = (2.0 / q) * (np.outer(x, y) + np.outer(y, x)) \
        + (2.0 * p / q) * np.eye(3) - (4.0 * p / q**2) * np.outer(y, y)
    u_xy = big_l * np.eye(3) + (2.0 / q) * (np.outer(x, x) + np.outer(y, y)) \
        - (4.0 * p / q**2) * np.outer(x, y)
    cc = C0 * charge
    if not cutoff:
        return (cc * u_x, cc * u_y, cc * u_xx, cc * u_xy, cc * u_yy)
    if rx < _SINGULAR_TOL or ry < _SINGULAR_TOL:
        raise SingularPointError("cutoff second partials undefined on the "
                                 "nuclear set")
    xh, yh = x / rx, y / ry
    a, ap, app = float(chi(rx)), float(chi_prime(rx)), float(chi_second(rx))
    b, bp, bpp = float(chi(ry)), float(chi_prime(ry)), float(chi_second(ry))
    gx = cc * b * (ap * xh * u + a * u_x)
    gy = cc * a * (bp * yh * u + b * u_y)
    hess_a = _radial_hess(x, ap, app)
    hess_b = _radial_hess(y, bp, bpp)
    h_xx = cc * b * (hess_a * u + ap * (np.outer(xh, u_x) + np.outer(u_x, xh))
                     + a * u_xx)
    h_yy = cc * a * (hess_b * u + bp * (np.outer(yh, u_y) + np.outer(u_y, yh))
                     + b * u_yy)
    h_xy = cc * (np.outer(ap * xh * u + a * u_x, bp * yh)
                 + b * (ap * np.outer(xh, u_y) + a * u_xy))
    return gx, gy, h_xx, h_xy, h_yy


def f3_gradient(c, charge: float, cutoff: bool = False) -> np.ndarray:
    c = _config(c)
    n = len(c)
    grad = np.zeros((n, 3))
    for i in range(n):
        for j in range(i + 1, n):
            gx, gy, *_ = _f3_pair_blocks(c[i], c[j], charge, cutoff)
            grad[i] += gx
            grad[j] += gy
    return grad


def f3_hessian(c, charge: float, cutoff: bool = False) -> np.ndarray:
    c = _config(c)
    n = len(c)
    h = np.zeros((n, 3, n, 3))
    for i in range(n):
        for j in range(i + 1, n):
            _, _, h_xx, h_xy, h_yy = _f3_pair_blocks(c[i], c[j], charge, cutoff)
            h[i, :, i, :] += h_xx
            h[j, :, j, :] += h_yy
            h[i, :, j, :] += h_xy
            h[j, :, i, :] += h_xy.T
    return h.reshape(3 * n, 3 * n)


@dataclass(frozen=True)
class JastrowParts:
    """Values of the plain and cutoff factors plus derivative access for the
    combined cutoff factor."""

    f2: float
    f3: float
    f2_cut: float
    f3_cut: float
    grad: np.ndarray  # (3N,) gradient of f2_cut + f3_cut
    hessian_entry: object  # ((i, k), (j, m)) -> second partial

    @property
    def f_cut(self):
        return self.f2_cut + self.f3_cut


def f_cut(c, charge: float) -> JastrowParts:
    c = _config(c)
    grad = (f2_gradient(c, charge, cutoff=True)
            + f3_gradient(c, charge, cutoff=True)).reshape(-1)
    hess = fcut_hessian(c, charge)

    def entry(ik, jm):
        i, k = ik
        j, m = jm
        return float(hess[3 * i + k, 3 * j + m])

    return JastrowParts(f2(c, charge), f3(c, charge),
                        f2(c, charge, cutoff=True), f3(c, charge, cutoff=True),
                        grad, entry)


def fcut_hessian(c, charge: float) -> np.ndarray:
    return f2_hessian(c, charge, cutoff=True) + f3_hessian(c, charge,
                                                           cutoff=True)


def second_partials_fcut(c, charge: float, ik, jm) -> float:
    """Single analytic second partial of the cutoff factor."""
    return f_cut(c, charge).hessian_entry(ik, jm)


# ---------------------------------------------------------------------------
# Contraction identities
# ---------------------------------------------------------------------------

def _psi_and_grad(model: WavefunctionModel, c):
    c = _config(c)
    psi = float(model.value(c[None])[0])
    grad = np.asarray(model.gradient(c[None]))[0]
    return psi, grad


def contracted_f2_identity(model: WavefunctionModel, c):
    """Both sides of the pair-term contraction of the F2 Hessian against
    2 (x1/|x1|) psi grad psi.  Algebraically equal at regular points."""
    c = _config(c)
    n = len(c)
    psi, grad = _psi_and_grad(model, c)
    x1 = c[0]
    r1 = np.linalg.norm(x1)
    if r1 < _SINGULAR_TOL:
        raise SingularPointError("contraction undefined at the nucleus")
    hess = f2_hessian(c, model.charge, cutoff=False)
    xh = x1 / r1
    lhs = 2.0 * psi * xh @ hess[:3] @ grad.reshape(-1)
    rhs = 0.0
    for i in range(1, n):
        dvec = x1 - c[i]
        d = np.linalg.norm(dvec)
        gdiff = grad[0] - grad[i]
        rhs += (xh @ gdiff) / d - (xh @ dvec / d**3) * (dvec @ gdiff)
    rhs *= 0.5 * psi
    return float(lhs), float(rhs)


def f3_log_contraction(model: WavefunctionModel, c):
    """Both sides of the contraction of the log-leading part of the cutoff
    pair-log Hessian.  The leading part keeps only ln(...) times the Hessian
    of the dot product, weighted by the cutoff factors."""
    c = _config(c)
    n = len(c)
    psi, grad = _psi_and_grad(model, c)
    x1 = c[0]
    r1 = np.linalg.norm(x1)
    if r1 < _SINGULAR_TOL:
        raise SingularPointError("contraction undefined at the nucleus")
    xh = x1 / r1
    z = model.charge
    # Leading Hessian: off-diagonal (i, j) blocks are chi chi ln(q) identity.
    lead = np.zeros((n, 3, n, 3))
    for i in range(n):
        for j in range(i + 1, n):
            q = c[i] @ c[i] + c[j] @ c[j]
            if q == 0.0:
                continue
            w = C0 * z * chi(np.linalg.norm(c[i])) * chi(np.linalg.norm(c[j])) \
                * math.log(q)
            lead[i, :, j, :] += w * np.eye(3)
            lead[j, :, i, :] += w * np.eye(3)
    lhs = 2.0 * psi * xh @ lead[0].reshape(3, -1) @ grad.reshape(-1)
    rhs = 0.0
    for i in range(1, n):
        q = x1 @ x1 + c[i] @ c[i]
        rhs += chi(r1) * chi(np.linalg.norm(c[i])) * math.log(q) \
            * (xh @ grad[i])
    rhs *= 2.0 * C0 * z * psi
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# A priori cancellation diagnostic
# ---------------------------------------------------------------------------

def _ball_samples(rng, center, radius, count):
    dim = center.size
    v = rng.standard_normal((count, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    u = rng.random(count) ** (1.0 / dim)
    return center.reshape(-1) + radius * u[:, None] * v


def apriori_samples(model: WavefunctionModel, spec: AtomSpec, x0, r_inner,
                    r_outer, sample_count: int, seed: int = 0) -> dict:
    """Sampled sups entering the a priori ratio.

    Returns sup |second partials of psi - psi * second partials of F_cut|
    over the inner ball, the raw sup |second partials of psi|, and
    sup |psi| over the outer ball.
    """
    if r_inner >= r_outer:
        raise ValueError("inner radius must be smaller than the outer one")
    if spec.n_electrons != 1 or not hasattr(model, "hessian"):
        raise UnsupportedModelError(
            "second partials of psi only available for one-electron models "
            "with an analytic Hessian")
    rng = np.random.default_rng(seed)
    x0 = np.asarray(x0, dtype=float).reshape(1, 3)
    inner = _ball_samples(rng, x0, r_inner, sample_count).reshape(-1, 1, 3)
    outer = _ball_samples(rng, x0, r_outer, sample_count).reshape(-1, 1, 3)
    sup_res = 0.0
    sup_raw = 0.0
    for pt in inner:
        r = np.linalg.norm(pt)
        if r < _SINGULAR_TOL:
            continue
        hpsi = model.hessian(pt[0])
        psi = float(model.value(pt[None].reshape(1, 1, 3))[0])
        hf = fcut_hessian(pt, spec.charge)
        sup_res = max(sup_res, float(np.max(np.abs(hpsi - psi * hf))))
        sup_raw = max(sup_raw, float(np.max(np.abs(hpsi))))
    sup_psi = float(np.max(np.abs(model.value(outer))))
    return {"sup_residual": sup_res, "sup_raw_second": sup_raw,
            "sup_psi": sup_psi,
            "ratio": sup_res / sup_psi if sup_psi > 0 else 0.0,
            "notice": None if sup_psi > 0 else "zero denominator"}


def apriori_residual(model: WavefunctionModel, spec: AtomSpec, x0, r_inner,
                     r_outer, sample_count: int, seed: int = 0) -> float:
    """Ratio of the sampled residual sup to the sampled sup of |psi|."""
    return apriori_samples(model, spec, x0, r_inner, r_outer, sample_count,
                           seed)["ratio"]


def phi3_smoothness_probe(model: WavefunctionModel, center, radii,
                          n_directions: int = 16, seed: int = 0):
    """Gradient difference quotients of psi exp(-(F2+F3)) across the center.

    Rows (radius, max quotient); bounded quotients indicate Lipschitz
    gradient behavior through the singular point.
    """
    center = _config(center)
    n = len(center)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, n, 3))
    dirs /= np.linalg.norm(dirs.reshape(n_directions, -1),
                           axis=1)[:, None, None]

    def grad_phi3(c):
        psi, grad = _psi_and_grad(model, c)
        z = model.charge
        gf = f2_gradient(c, z) + (f3_gradient(c, z) if n > 1 else 0.0)
        f_val = f2(c, z) + (f3(c, z) if n > 1 else 0.0)
        return math.exp(-f_val) * (grad - psi * gf)

    rows = []
    for r in np.atleast_1d(radii):
        best = 0.0
        for e in dirs:
            try:
                ga = grad_phi3(center + r * e)
                gb = grad_phi3(center - r * e)
            except SingularPointError:
                continue
            best = max(best, float(np.linalg.norm(ga - gb)) / (2.0 * r))
        rows.append((float(r), best))
    return rows
