"""Genus-2 hyperelliptic curve y^2 = prod (lambda - lambda_j): sheet
tracking, a/b periods of the differentials lambda^m dlambda / y, the
period matrix, and the area of the flat conical metric |omega|^2.

The homology basis is built from loops around consecutive angle-sorted
branch-point pairs; its validity is gated a posteriori by the Riemann
relations (symmetric period matrix with positive definite imaginary
part), and everything consumed downstream is basis-independent.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BaseOnBranchPoint,
    ConsistencyFailure,
    DuplicateBranchPoints,
    IllConditionedA,
    NonConvergence,
    NotABranchPoint,
    PathTooCloseToBranchPoint,
)
from .numerics import QuadratureConfig, gauss_legendre, integrate_surface


@dataclass(frozen=True)
class Curve:
    """Hyperelliptic curve with a fixed square-root sheet convention.

    The reference branch y-hat(lambda) = prod_j sqrt(lambda - lambda_j)
    (principal square roots) defines sheet +1; the base point sits far
    above the branch locus where that product is continuation-friendly.
    """

    branch_points: np.ndarray
    base_point: complex
    base_sheet_value: complex

    @property
    def scale(self):
        bp = self.branch_points
        return float(np.abs(bp - bp.mean()).max()) or 1.0

    @property
    def min_gap(self):
        bp = self.branch_points
        d = np.abs(bp[:, None] - bp[None, :])
        return float(d[d > 0].min())

    def poly(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return np.prod(lam[..., None] - self.branch_points, axis=-1)

    def reference_y(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return np.prod(np.sqrt(lam[..., None] - self.branch_points), axis=-1)

    def y_at(self, lam, sheet=1):
        return sheet * self.reference_y(lam)


@dataclass(frozen=True)
class SurfacePoint:
    lam: complex
    sheet: int = 1
    branch_index: int | None = None

    @property
    def is_branch_point(self):
        return self.branch_index is not None


def make_curve(branch_points, base=None) -> Curve:
    bp = np.asarray([complex(b) for b in branch_points], dtype=complex)
    if bp.size != 6:
        raise DuplicateBranchPoints(f"need 6 branch points, got {bp.size}")
    d = np.abs(bp[:, None] - bp[None, :])
    np.fill_diagonal(d, np.inf)
    if d.min() < 1e-12 * max(1.0, float(np.abs(bp).max())):
        raise DuplicateBranchPoints("branch points are not pairwise distinct")
    center = complex(bp.mean())
    diameter = 2.0 * float(np.abs(bp - center).max())
    if base is None:
        base = center + 2j * diameter
    base = complex(base)
    if np.abs(bp - base).min() < 1e-10 * max(1.0, diameter):
        raise BaseOnBranchPoint(f"base point {base} is a branch point")
    y0 = complex(np.prod(np.sqrt(base - bp)))
    return Curve(branch_points=bp, base_point=base, base_sheet_value=y0)


def make_z5_curve(lambda1=0.0, r=1.0, base=None) -> Curve:
    """Curve with the order-5 symmetry lambda_k = lambda_1 + r^2 e^{2pi i(k-1)/5}."""
    lam1 = complex(lambda1)
    ks = np.arange(5)
    bp = np.concatenate([[lam1], lam1 + r ** 2 * np.exp(2j * np.pi * ks / 5)])
    return make_curve(bp, base=base)


def _step_y(curve, y, lam_from, lam_to):
    """One continuation step; |lam_to - lam_from| must be < half the
    distance to the branch locus so every log stays principal."""
    ratio = np.prod((lam_to - curve.branch_points) / (lam_from - curve.branch_points))
    y = y * cmath.sqrt(ratio)
    # snap to an exact square root to stop error accumulation
    exact = cmath.sqrt(complex(curve.poly(lam_to)))
    return exact if abs(y - exact) < abs(y + exact) else -exact


def continue_y(curve, path, y_start=None):
    """Analytic continuation of y along a polyline from the base point."""
    pts = [complex(p) for p in path]
    tol = 1e-8 * curve.scale
    y = curve.base_sheet_value if y_start is None else complex(y_start)
    if y_start is None and abs(pts[0] - curve.base_point) > tol:
        pts = [curve.base_point] + pts
    for a, b in zip(pts[:-1], pts[1:]):
        seg = b - a
        length = abs(seg)
        if length == 0:
            continue
        # segment-to-branch-point distance check
        t = np.clip(((curve.branch_points - a) / seg).real, 0.0, 1.0)
        if np.abs(a + t * seg - curve.branch_points).min() < tol:
            raise PathTooCloseToBranchPoint(
                f"segment {a} -> {b} passes within {tol} of a branch point")
        pos = a
        while pos != b:
            step_cap = 0.45 * float(np.abs(pos - curve.branch_points).min())
            remaining = b - pos
            nxt = b if abs(remaining) <= step_cap else pos + remaining * (step_cap / abs(remaining))
            y = _step_y(curve, y, pos, nxt)
            pos = nxt
    return y


# ---------------------------------------------------------------------------
# loop periods
# ---------------------------------------------------------------------------

def _angle_sorted(curve):
    bp = curve.branch_points
    center = bp.mean()
    order = np.argsort(np.angle(bp - center), kind="stable")
    return order


def loop_nodes(curve, i0, i1, panels=16):
    """Quadrature nodes along the segment between branch points (i0, i1)
    with the desingularizing substitution lambda = mid + halfgap*sin(theta).

    Returns (lams, w, y_plus): for any integrand G(lambda, y) the loop
    integral around the pair is sum(w * (G(lams, y_plus) - G(lams, -y_plus))),
    up to the loop's orientation sign.  y_plus is a continuous branch of y
    along the segment; w absorbs dlambda/dtheta and the panel weights.
    """
    e0, e1 = curve.branch_points[i0], curve.branch_points[i1]
    rest = np.delete(curve.branch_points, [i0, i1])
    mid, half = (e0 + e1) / 2.0, (e1 - e0) / 2.0
    xg, wg = gauss_legendre(10)
    edges = np.linspace(-np.pi / 2, np.pi / 2, panels + 1)
    thetas = np.concatenate(
        [(a + b) / 2 + (b - a) / 2 * xg for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate(
        [(b - a) / 2 * wg for a, b in zip(edges[:-1], edges[1:])])
    lams = mid + half * np.sin(thetas)
    # track the square-root product over the remaining four branch points
    g = cmath.sqrt(complex(np.prod(lams[0] - rest)))
    gs = np.empty(lams.size, dtype=complex)
    gs[0] = g
    for k in range(1, lams.size):
        a, b = lams[k - 1], lams[k]
        pos, val = a, g
        while pos != b:
            cap = 0.45 * float(np.abs(pos - rest).min())
            rem = b - pos
            nxt = b if abs(rem) <= cap else pos + rem * (cap / abs(rem))
            ratio = np.prod((nxt - rest) / (pos - rest))
            val = val * cmath.sqrt(ratio)
            exact = cmath.sqrt(complex(np.prod(nxt - rest)))
            val = exact if abs(val - exact) < abs(val + exact) else -exact
            pos = nxt
        g = val
        gs[k] = g
    y_plus = 1j * half * np.cos(thetas) * gs
    w = weights * half * np.cos(thetas)
    return lams, w, y_plus


def _loop_integrals(curve, i0, i1, powers, panels=16):
    """Loop integrals of lambda^m dlambda / y around the branch pair
    (i0, i1), for all m in powers, up to one global sign."""

    def sweep(n_panels):
        lams, w, yp = loop_nodes(curve, i0, i1, panels=n_panels)
        return {m: 2.0 * np.sum(w * lams ** m / yp) for m in powers}

    coarse = sweep(panels)
    for _ in range(3):
        fine = sweep(2 * panels)
        scale = max(abs(fine[m]) for m in powers) or 1.0
        if all(abs(fine[m] - coarse[m]) <= 1e-10 * scale for m in powers):
            return fine
        coarse, panels = fine, 2 * panels
    raise NonConvergence(f"loop period over pair ({i0}, {i1}) did not stabilize")


@dataclass(frozen=True)
class PeriodData:
    """Periods of omega_1 = dlambda/y, omega_2 = lambda dlambda/y.

    A[alpha, beta] and B[alpha, beta] hold the a_beta / b_beta periods of
    omega_alpha; Bmat = C B with C = A^{-1} is the period matrix; Pi[m, beta]
    holds the a_beta period of lambda^m dlambda / y for m = 0..4.
    """

    curve: Curve
    cone_point: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Bmat: np.ndarray
    Pi: np.ndarray
    area: float
    basis: str = "std"
    pairs: tuple = ()
    signs: tuple = ()
    bsign: int = 1

    @property
    def im_b_inverse(self):
        return np.linalg.inv(self.Bmat.imag)


_BASES = {
    # cycles as integer combinations of the consecutive-pair loops gamma_1..5
    "std": {"a": [(0,), (2,)], "b": [(1, 3), (3,)]},
    "alt": {"a": [(1,), (3,)], "b": [(2, 4), (4,)]},
}


def period_data(curve, cone_point, cfg: QuadratureConfig | None = None,
                basis="std", panels=16) -> PeriodData:
    if not 0 <= cone_point < 6:
        raise NotABranchPoint(f"cone point index {cone_point} out of range")
    cfg = cfg or QuadratureConfig()
    order = _angle_sorted(curve)
    pairs = [(order[i], order[(i + 1) % 6]) for i in range(6)]
    powers = list(range(5))
    loops = [_loop_integrals(curve, i0, i1, powers, panels=panels)
             for (i0, i1) in pairs[:5]]
    spec = _BASES[basis]

    def cycle_period(cycle_loops, signs, m):
        return sum(signs[i] * loops[i][m] for i in cycle_loops)

    chosen = None
    for code in range(16):
        signs = [1, 1 - 2 * ((code >> 0) & 1), 1 - 2 * ((code >> 1) & 1),
                 1 - 2 * ((code >> 2) & 1), 1]
        bsign = 1 - 2 * ((code >> 3) & 1)
        A = np.array([[cycle_period(c, signs, m) for c in spec["a"]]
                      for m in (0, 1)])
        B = bsign * np.array([[cycle_period(c, signs, m) for c in spec["b"]]
                              for m in (0, 1)])
        if np.linalg.cond(A) > 1e8:
            continue
        Bmat = np.linalg.solve(A, B)
        sym = np.abs(Bmat - Bmat.T).max()
        if sym > 1e-6 * max(1.0, np.abs(Bmat).max()):
            continue
        eig = np.linalg.eigvalsh((Bmat.imag + Bmat.imag.T) / 2)
        if eig.min() <= 0:
            continue
        chosen = (signs, bsign, A, B, Bmat)
        break
    if chosen is None:
        raise ConsistencyFailure(
            "no loop orientation yields a symmetric period matrix with "
            "positive definite imaginary part")
    signs, bsign, A, B, Bmat = chosen
    if np.linalg.cond(A) > 1e8:
        raise IllConditionedA(f"cond(A) = {np.linalg.cond(A):.3e}")
    C = np.linalg.inv(A)
    Pi = np.array([[cycle_period(c, signs, m) for c in spec["a"]]
                   for m in powers])

    lam_p = curve.branch_points[cone_point]
    weight = lambda lam: np.abs(lam - lam_p) ** 2 / np.abs(curve.poly(lam))
    area = integrate_surface(lambda lam, sheet: 1.0, weight, cfg,
                             branch_points=curve.branch_points)
    area = float(np.real(area))
    if area <= 0:
        raise ConsistencyFailure(f"nonpositive area {area}")
    return PeriodData(curve=curve, cone_point=cone_point, A=A, B=B, C=C,
                      Bmat=Bmat, Pi=Pi, area=area, basis=basis,
                      pairs=tuple(pairs[:5]), signs=tuple(signs), bsign=bsign)


def cycle_integral(pd: PeriodData, kind, idx, integrand, panels=24):
    """Integral of integrand(lams, y) dlambda over the a- or b-cycle idx.

    The cycle is the signed combination of pair loops fixed when the
    period data was built, so results are directly comparable with the
    stored A and B matrices.
    """
    loops = _BASES[pd.basis][kind][idx]
    orient = pd.bsign if kind == "b" else 1
    total = 0.0 + 0.0j
    for i in loops:
        i0, i1 = pd.pairs[i]
        lams, w, yp = loop_nodes(pd.curve, i0, i1, panels=panels)
        vals = integrand(lams, yp) - integrand(lams, -yp)
        total += orient * pd.signs[i] * np.sum(w * vals)
    return total


def normalized_differentials(pd: PeriodData):
    """Evaluator for v = C (omega_1, omega_2): returns v_alpha / dlambda.

    The result is an array of shape (..., 2); the sheet enters through y.
    """
    def v_over_dlam(lam, sheet=1):
        lam = np.asarray(lam, dtype=complex)
        y = pd.curve.y_at(lam, sheet)
        basis = np.stack([1.0 / y, lam / y], axis=-1)
        return basis @ pd.C.T
    return v_over_dlam


def singular_differential(curve, cone_point):
    """Evaluator for omega = (lambda - lambda_P) dlambda / y.

    omega has a double zero at P in the local parameter zeta^2 = lambda - lambda_P
    and is odd under the sheet involution.
    """
    if not 0 <= cone_point < 6:
        raise NotABranchPoint(f"cone point index {cone_point} out of range")
    lam_p = curve.branch_points[cone_point]

    def omega_over_dlam(lam, sheet=1):
        lam = np.asarray(lam, dtype=complex)
        return (lam - lam_p) / curve.y_at(lam, sheet)
    return omega_over_dlam


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def curve_to_json(curve, cone_point):
    return {
        "branch_points": [[b.real, b.imag] for b in curve.branch_points],
        "cone_point": int(cone_point),
    }


def curve_from_json(obj):
    """Accepts {"branch_points": ..., "cone_point": j} or {"z5": {...}}."""
    if "z5" in obj:
        z5 = obj["z5"]
        lam1 = complex(*z5.get("lambda1", [0.0, 0.0]))
        curve = make_z5_curve(lambda1=lam1, r=float(z5.get("r", 1.0)))
        return curve, int(obj.get("cone_point", 0))
    bp = [complex(re, im) for re, im in obj["branch_points"]]
    return make_curve(bp), int(obj["cone_point"])
