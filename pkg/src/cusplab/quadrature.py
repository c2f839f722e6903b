"""Spherical, radial, and hat-space integration with error estimates.

Spherical integrals use Lebedev-style rules built from octahedral symmetry
orbits (degrees 3, 7, 17, 29).  Radial integrals use adaptive composite
Gauss-Legendre panels.  Marginal ("hat") integrals over the remaining
electrons use either a deterministic spherical-polar product grid (one hat
electron) or seeded importance-sampled Monte Carlo (two or more).

All deterministic accumulations go through ``numpy.sum`` (pairwise), and the
Monte-Carlo path uses counter-based Philox substreams per fixed-size block,
so results do not depend on how evaluations are scheduled.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .atoms import AtomSpec
from .errors import EvaluationError, IntegrationFailureError

FOUR_PI = 4.0 * math.pi

# Truncation radius factor: exp(-36.85) < 1e-16, so an exponential envelope
# is below double-precision relevance beyond this multiple of 1/rate.
ENVELOPE_LOG_CUTOFF = -math.log(1e-16)

_threads_override: int | None = None


def set_threads(n: int | None) -> None:
    """Set the worker count, overriding the CUSPLAB_THREADS env var."""
    global _threads_override
    _threads_override = n


def worker_count() -> int:
    if _threads_override is not None:
        return max(1, _threads_override)
    try:
        return max(1, int(os.environ.get("CUSPLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class IntegralEstimate:
    """A numerical integral value with an error estimate.

    ``error`` is a Monte-Carlo standard error or a nested-rule/grid
    difference for the deterministic methods; it is never negative.
    """

    value: float
    error: float
    method: str  # "tensor-grid" | "adaptive" | "monte-carlo"
    n_evals: int = 0
    warnings: tuple = ()

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error estimate must be nonnegative")


def combine_linear(terms) -> IntegralEstimate:
    """Sum of (coefficient, IntegralEstimate) pairs with propagated error."""
    terms = list(terms)
    value = float(np.sum([c * e.value for c, e in terms]))
    error = float(np.sqrt(np.sum([(c * e.error) ** 2 for c, e in terms])))
    n = int(np.sum([e.n_evals for _, e in terms]))
    warns = tuple(w for _, e in terms for w in e.warnings)
    method = terms[0][1].method if terms else "tensor-grid"
    return IntegralEstimate(value, error, method, n, warns)


# ---------------------------------------------------------------------------
# Spherical rules (octahedral-orbit Lebedev rules)
# ---------------------------------------------------------------------------

def _signs(vec):
    nz = [i for i, x in enumerate(vec) if x != 0.0]
    out = []
    for s in itertools.product((1.0, -1.0), repeat=len(nz)):
        p = list(vec)
        for i, sg in zip(nz, s):
            p[i] = sg * p[i]
        out.append(tuple(p))
    return out


def _orbit_points(code: int, a: float = 0.0, b: float = 0.0) -> np.ndarray:
    """Points of one octahedral symmetry orbit on the unit sphere."""
    if code == 0:  # (1,0,0) and permutations: 6 points
        base = {p for v in itertools.permutations((1.0, 0.0, 0.0)) for p in _signs(v)}
    elif code == 1:  # (a,a,0), a=1/sqrt(2): 12 points
        a = 1.0 / math.sqrt(2.0)
        base = {p for v in itertools.permutations((a, a, 0.0)) for p in _signs(v)}
    elif code == 2:  # (a,a,a), a=1/sqrt(3): 8 points
        a = 1.0 / math.sqrt(3.0)
        base = set(_signs((a, a, a)))
    elif code == 3:  # (a,a,b), b=sqrt(1-2a^2): 24 points
        c = math.sqrt(max(0.0, 1.0 - 2.0 * a * a))
        base = {p for v in set(itertools.permutations((a, a, c))) for p in _signs(v)}
    elif code == 4:  # (a,b,0), b=sqrt(1-a^2): 24 points
        c = math.sqrt(max(0.0, 1.0 - a * a))
        base = {p for v in set(itertools.permutations((a, c, 0.0))) for p in _signs(v)}
    elif code == 5:  # (a,b,c), c=sqrt(1-a^2-b^2): 48 points
        c = math.sqrt(max(0.0, 1.0 - a * a - b * b))
        base = {p for v in set(itertools.permutations((a, b, c))) for p in _signs(v)}
    else:
        raise ValueError(f"unknown orbit code {code}")
    pts = np.array(sorted(base))
    return pts


@dataclass(frozen=True)
class SphericalRule:
    """Quadrature nodes and weights on the unit sphere; weights sum to 4*pi."""

    degree: int
    nodes: np.ndarray
    weights: np.ndarray


# (code, a, b, weight) with weights normalized to sum 1; standard published
# Lebedev parameters for the 6-, 26-, 110- and 302-point rules.
_RULE_ORBITS = {
    3: [(0, 0.0, 0.0, 1.0 / 6.0)],
    7: [
        (0, 0.0, 0.0, 0.04761904761904762),
        (1, 0.0, 0.0, 0.03809523809523810),
        (2, 0.0, 0.0, 0.03214285714285714),
    ],
    17: [
        (0, 0.0, 0.0, 0.3828270494937162e-2),
        (2, 0.0, 0.0, 0.9793737512487512e-2),
        (3, 0.1851156353447362, 0.0, 0.8211737283191111e-2),
        (3, 0.6904210483822922, 0.0, 0.9942814891178103e-2),
        (3, 0.3956894730559419, 0.0, 0.9595471336070963e-2),
        (4, 0.4783690288121502, 0.0, 0.9694996361663028e-2),
    ],
    29: [
        (0, 0.0, 0.0, 0.8545911725128148e-3),
        (2, 0.0, 0.0, 0.3599119285025571e-2),
        (3, 0.3515640345570105, 0.0, 0.3449788424305883e-2),
        (3, 0.6566329410219612, 0.0, 0.3604822601419882e-2),
        (3, 0.4729054132581005, 0.0, 0.3576729661743367e-2),
        (3, 0.9618308522614784e-1, 0.0, 0.2352101413689164e-2),
        (3, 0.2219645236294178, 0.0, 0.3108953122413675e-2),
        (3, 0.7011766416089545, 0.0, 0.3650045807677255e-2),
        (4, 0.2644152887060663, 0.0, 0.2982344963171804e-2),
        (4, 0.5718955891878961, 0.0, 0.3600820932216460e-2),
        (5, 0.2510034751770465, 0.8000727494073952, 0.3571540554273387e-2),
        (5, 0.1233548532583327, 0.4127724083168531, 0.3392312205006170e-2),
    ],
}

SHIPPED_DEGREES = tuple(sorted(_RULE_ORBITS))


@lru_cache(maxsize=None)
def spherical_rule(degree: int) -> SphericalRule:
    """The shipped rule of the given polynomial degree (3, 7, 17 or 29)."""
    if degree not in _RULE_ORBITS:
        raise ValueError(f"no shipped spherical rule of degree {degree}; "
                         f"available: {SHIPPED_DEGREES}")
    nodes, weights = [], []
    for code, a, b, v in _RULE_ORBITS[degree]:
        pts = _orbit_points(code, a, b)
        nodes.append(pts)
        weights.append(np.full(len(pts), v * FOUR_PI))
    return SphericalRule(degree, np.vstack(nodes), np.concatenate(weights))


def _partner_degree(degree: int) -> int:
    """The next-higher shipped degree (next lower for the top rule)."""
    idx = SHIPPED_DEGREES.index(degree)
    return SHIPPED_DEGREES[idx + 1] if idx + 1 < len(SHIPPED_DEGREES) else SHIPPED_DEGREES[idx - 1]


def _apply_rule(f, rule: SphericalRule) -> float:
    vals = np.asarray(f(rule.nodes), dtype=float)
    if vals.shape != (len(rule.nodes),):
        raise EvaluationError(
            f"sphere integrand returned shape {vals.shape}, expected ({len(rule.nodes)},)")
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise EvaluationError(f"non-finite integrand value at sphere node {rule.nodes[i]}")
    return float(np.sum(rule.weights * vals))


def sphere_integrate(f, rule: SphericalRule) -> IntegralEstimate:
    """Integrate ``f`` over the unit sphere; error from a companion rule.

    ``f`` must accept an (K, 3) array of unit vectors and return (K,) values.
    """
    value = _apply_rule(f, rule)
    partner = spherical_rule(_partner_degree(rule.degree))
    check = _apply_rule(f, partner)
    return IntegralEstimate(value, abs(value - check), "tensor-grid",
                            len(rule.nodes) + len(partner.nodes))


def sphere_moment_matrix(a_matrix, rule: SphericalRule) -> float:
    """Quadrature of omega . (A omega) over the sphere ((4 pi / 3) Tr A exactly)."""
    a_matrix = np.asarray(a_matrix, dtype=float)
    vals = np.einsum("ki,ij,kj->k", rule.nodes, a_matrix, rule.nodes)
    return float(np.sum(rule.weights * vals))


# ---------------------------------------------------------------------------
# Radial quadrature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panel_value(f, a: float, b: float, order: int) -> float:
    x, w = _leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    vals = np.asarray(f(mid + half * x), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError(f"non-finite radial integrand on panel [{a}, {b}]")
    return float(half * np.sum(w * vals))


def integrate_radial(f, upper: float, rel_tol: float = 1e-12,
                     abs_tol: float = 1e-15, max_splits: int = 2000) -> IntegralEstimate:
    """Adaptive composite Gauss-Legendre integral of ``f`` over [0, upper].

    ``f`` must accept a 1-D array of radii and return values of the same
    shape.  Panels are bisected until the G12-vs-G24 difference is below
    tolerance; the error estimate is the sum of accepted differences.
    """
    if upper == 0.0:
        return IntegralEstimate(0.0, 0.0, "adaptive", 0)
    stack = [(0.0, float(upper))]
    total, err, n_evals, splits = 0.0, 0.0, 0, 0
    accepted = []
    while stack:
        a, b = stack.pop()
        coarse = _panel_value(f, a, b, 12)
        fine = _panel_value(f, a, b, 24)
        n_evals += 36
        diff = abs(fine - coarse)
        scale = max(abs(fine), abs(total), abs_tol / rel_tol)
        if diff <= max(abs_tol, rel_tol * scale) or (b - a) < 1e-14 * upper:
            accepted.append(fine)
            total += fine
            err += diff
        else:
            splits += 1
            if splits > max_splits:
                raise IntegrationFailureError(
                    f"radial panel refinement did not converge on [{a}, {b}]")
            m = 0.5 * (a + b)
            stack.append((a, m))
            stack.append((m, b))
    value = float(np.sum(np.asarray(accepted))) if accepted else 0.0
    return IntegralEstimate(value, err, "adaptive", n_evals)


def envelope_cutoff(rate: float) -> float:
    """Radius beyond which exp(-rate*r) is below 1e-16 of its peak."""
    if rate <= 0:
        raise ValueError("envelope rate must be positive")
    return ENVELOPE_LOG_CUTOFF / rate


# ---------------------------------------------------------------------------
# Hat-space (marginal) integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HatGrid:
    """Deterministic spherical-polar product grid for a single hat electron.

    ``rate`` is the assumed exponential decay rate of the integrand; the
    radial panels follow the quantiles of that envelope and are truncated
    where it drops below 1e-16 of its peak.
    """

    rate: float
    n_panels: int = 8
    panel_order: int = 16
    sphere_degree: int = 17

    def radial_nodes(self, extra_panels: int = 0):
        n = self.n_panels + extra_panels
        u = np.linspace(0.0, 1.0 - 1e-16, n + 1)
        edges = -np.log1p(-u) / self.rate
        x, w = _leggauss(self.panel_order)
        mids = 0.5 * (edges[1:] + edges[:-1])
        halves = 0.5 * (edges[1:] - edges[:-1])
        r = (mids[:, None] + halves[:, None] * x[None, :]).ravel()
        wr = (halves[:, None] * w[None, :]).ravel()
        return r, wr


@dataclass(frozen=True)
class McSampler:
    """Seeded importance sampler with an isotropic exponential envelope.

    The proposal density per hat electron is rate^3/(8 pi) * exp(-rate |y|).
    Identical seed and sample count give bit-identical estimates regardless
    of the worker count (per-block Philox substreams, fixed combine order).
    """

    seed: int
    n_samples: int
    envelope_rate: float
    block_size: int = 32768


def _grid_estimate(f, grid: HatGrid, center) -> tuple[float, int]:
    rule = spherical_rule(grid.sphere_degree)
    r, wr = grid.radial_nodes()
    pts = (r[:, None, None] * rule.nodes[None, :, :]).reshape(-1, 3)
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)[None, :]
    wts = (wr[:, None] * r[:, None] ** 2 * rule.weights[None, :]).ravel()
    vals = np.asarray(f(pts.reshape(-1, 1, 3)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("non-finite integrand value on hat grid")
    return float(np.sum(wts * vals)), len(wts)


def _refined(grid: HatGrid) -> HatGrid:
    deg = _partner_degree(grid.sphere_degree)
    deg = max(deg, grid.sphere_degree)  # top rule: refine radially only
    return HatGrid(grid.rate, grid.n_panels + 4, grid.panel_order, deg)


def _mc_block(f, sampler: McSampler, n_hat: int, block_index: int, n: int):
    bit_gen = np.random.Philox(key=sampler.seed)
    bit_gen.advance(block_index << 68)
    rng = np.random.Generator(bit_gen)
    rate = sampler.envelope_rate
    radii = rng.gamma(3.0, 1.0 / rate, size=(n, n_hat))
    dirs = rng.normal(size=(n, n_hat, 3))
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    pts = radii[:, :, None] * dirs
    # Defensive rejection of the measure-zero singular set.
    ok = np.all(radii > 1e-12, axis=1)
    if n_hat > 1:
        for i in range(n_hat):
            for j in range(i + 1, n_hat):
                ok &= np.linalg.norm(pts[:, i] - pts[:, j], axis=1) > 1e-12
    log_p = np.sum(np.log(rate ** 3 / (8.0 * math.pi)) - rate * radii, axis=1)
    vals = np.where(ok, np.asarray(f(pts), dtype=float), 0.0)
    w = vals * np.exp(-log_p)
    return w


def _mc_estimate(f, sampler: McSampler, n_hat: int):
    n_total = sampler.n_samples
    blocks = []
    start = 0
    idx = 0
    while start < n_total:
        n = min(sampler.block_size, n_total - start)
        blocks.append((idx, n))
        start += n
        idx += 1

    def run(block):
        return _mc_block(f, sampler, n_hat, block[0], block[1])

    if worker_count() > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=worker_count()) as ex:
            parts = list(ex.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    w = np.concatenate(parts) if parts else np.zeros(0)
    n = len(w)
    mean = float(np.sum(w) / n) if n else 0.0
    if n > 1:
        var = float(np.sum((w - mean) ** 2) / (n - 1))
        stderr = math.sqrt(var / n)
    else:
        stderr = abs(mean)
    warnings = ()
    scale = float(np.mean(np.abs(w))) if n else 0.0
    if scale > 0:
        n_large = int(np.sum(np.abs(w) > 1e3 * scale))
        if n_large > max(2, n // 1000):
            warnings = ("envelope-misfit",)
    return IntegralEstimate(mean, stderr, "monte-carlo", n, warnings)


def integrate_hat(f, spec: AtomSpec, scheme=None, center=None) -> IntegralEstimate:
    """Integrate ``f`` over the hat coordinates of one electron slot.

    ``f`` must accept an (M, N-1, 3) array and return (M,) values.  For a
    single electron the hat space is a point and the value is exact; for two
    electrons a deterministic spherical-polar grid (optionally centered at
    ``center``, which cancels a Coulomb singularity there) is used; for
    three or more, seeded Monte Carlo.
    """
    n_hat = spec.n_electrons - 1
    if n_hat == 0:
        v = float(np.asarray(f(np.zeros((1, 0, 3))), dtype=float)[0])
        return IntegralEstimate(v, 0.0, "tensor-grid", 1)
    if isinstance(scheme, McSampler):
        if center is not None:
            raise ValueError("center shifts apply to the grid scheme only")
        return _mc_estimate(f, scheme, n_hat)
    if scheme is None:
        scheme = HatGrid(rate=spec.charge)
    if n_hat > 1:
        raise IntegrationFailureError(
            "deterministic hat grids support a single hat electron; "
            "use an McSampler for N >= 3")
    coarse, n1 = _grid_estimate(f, scheme, center)
    fine, n2 = _grid_estimate(f, _refined(scheme), center)
    return IntegralEstimate(fine, abs(fine - coarse), "tensor-grid", n1 + n2)
