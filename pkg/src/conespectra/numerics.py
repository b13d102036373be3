"""Numeric substrate: truncated power series, adaptive path quadrature,
two-sheet surface quadrature with desingularizing patches, Schwarzian
derivative of a jet, and the gamma function.

Everything here is geometry-agnostic; the curve modules supply integrands
and weights.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DegenerateJet,
    NonConvergence,
    SingularityOnGrid,
)

_LEADING_TOL = 1e-13


# ---------------------------------------------------------------------------
# truncated power series
# ---------------------------------------------------------------------------

class TruncatedSeries:
    """Polynomial jet c0 + c1 t + ... + cN t^N with exact arithmetic
    through order N.

    Instances are immutable; all operations return new series.  Binary
    operations truncate to the smaller of the two orders.
    """

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs, order=None):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if order is None:
            order = c.size - 1
        if order + 1 < c.size:
            c = c[: order + 1]
        elif order + 1 > c.size:
            c = np.concatenate([c, np.zeros(order + 1 - c.size, dtype=complex)])
        self.coeffs = c
        self.coeffs.setflags(write=False)
        self.order = order

    @classmethod
    def identity(cls, order):
        c = np.zeros(order + 1, dtype=complex)
        c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order):
        c = np.zeros(order + 1, dtype=complex)
        c[0] = value
        return cls(c)

    def __repr__(self):
        return f"TruncatedSeries(order={self.order}, coeffs={self.coeffs!r})"

    def _common(self, other):
        n = min(self.order, other.order)
        return n, self.coeffs[: n + 1], other.coeffs[: n + 1]

    def __add__(self, other):
        if np.isscalar(other):
            c = self.coeffs.copy()
            c[0] += other
            return TruncatedSeries(c)
        n, a, b = self._common(other)
        return TruncatedSeries(a + b, n)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.coeffs)

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-other)
        n, a, b = self._common(other)
        return TruncatedSeries(a - b, n)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return TruncatedSeries(self.coeffs * other)
        n, a, b = self._common(other)
        # plain convolution; N <= 32 so no FFT needed
        out = np.convolve(a, b)[: n + 1]
        return TruncatedSeries(out, n)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def reciprocal(self):
        """Series 1/f; requires a leading coefficient away from zero."""
        if abs(self.coeffs[0]) < _LEADING_TOL:
            raise DegenerateJet(
                f"reciprocal of series with leading coefficient "
                f"{self.coeffs[0]!r}"
            )
        n = self.order
        a = self.coeffs
        out = np.zeros(n + 1, dtype=complex)
        out[0] = 1.0 / a[0]
        for k in range(1, n + 1):
            out[k] = -np.dot(a[1 : k + 1], out[k - 1 :: -1]) / a[0]
        return TruncatedSeries(out)

    def derivative(self):
        if self.order == 0:
            return TruncatedSeries([0.0])
        c = self.coeffs[1:] * np.arange(1, self.order + 1)
        return TruncatedSeries(c, self.order - 1)

    def integral(self):
        """Antiderivative vanishing at 0; order grows by one."""
        c = np.zeros(self.order + 2, dtype=complex)
        c[1:] = self.coeffs / np.arange(1, self.order + 2)
        return TruncatedSeries(c)

    def compose(self, inner):
        """self(inner(t)); inner must vanish at 0."""
        if abs(inner.coeffs[0]) > _LEADING_TOL:
            raise ValueError("composition requires inner(0) = 0")
        n = min(self.order, inner.order)
        g = TruncatedSeries(inner.coeffs[: n + 1], n)
        acc = TruncatedSeries.constant(self.coeffs[min(n, self.order)], n)
        for k in range(min(n, self.order) - 1, -1, -1):  # Horner in series
            acc = acc * g + self.coeffs[k]
        return acc

    def inverse(self):
        """Functional inverse g with self(g(t)) = t + O(t^{N+1}).

        Requires f(0) = 0 and f'(0) != 0.
        """
        if abs(self.coeffs[0]) > _LEADING_TOL:
            raise ValueError("functional inverse requires f(0) = 0")
        if abs(self.coeffs[1]) < _LEADING_TOL:
            raise DegenerateJet("functional inverse requires f'(0) != 0")
        n = self.order
        f = self.coeffs
        g = np.zeros(n + 1, dtype=complex)
        g[1] = 1.0 / f[1]
        # solve f(g(t)) = t order by order
        for m in range(2, n + 1):
            gm = TruncatedSeries(g[: m + 1], m)
            val = TruncatedSeries(f[: m + 1], m).compose(gm).coeffs[m]
            # with g[m] still zero, the t^m coefficient of f(g) misses f1*g[m]
            g[m] = -val / f[1]
        return TruncatedSeries(g)

    def unit_root(self, k, branch=0):
        """k-th root of a series with nonzero constant term.

        branch selects among the k roots of the constant term.
        """
        if abs(self.coeffs[0]) < _LEADING_TOL:
            raise DegenerateJet("unit_root requires a nonzero constant term")
        n = self.order
        r0 = self.coeffs[0] ** (1.0 / k) * cmath.exp(2j * cmath.pi * branch / k)
        r = TruncatedSeries.constant(r0, n)
        for _ in range(n + 2):  # Newton on r^k = self
            rk1 = TruncatedSeries.constant(1.0, n)
            for _ in range(k - 1):
                rk1 = rk1 * r
            r = r - (rk1 * r - self) / (k * rk1)
        return r

    def evaluate(self, t):
        """Horner evaluation; t may be a scalar or ndarray."""
        t = np.asarray(t, dtype=complex)
        acc = np.full(t.shape, self.coeffs[-1], dtype=complex)
        for c in self.coeffs[-2::-1]:
            acc = acc * t + c
        return acc if acc.ndim else complex(acc)

    def truncate(self, order):
        return TruncatedSeries(self.coeffs[: order + 1], min(order, self.order))

    def is_odd(self, tol=1e-10):
        even = self.coeffs[0::2]
        scale = max(np.abs(self.coeffs).max(), 1.0)
        return bool(np.all(np.abs(even) <= tol * scale))


class BivariateSeries:
    """Jet sum_{a,b<=N} h_ab t1^a t2^b, stored as an (N+1)x(N+1) matrix."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficient array must be square")
        self.coeffs = c
        self.coeffs.setflags(write=False)
        self.order = c.shape[0] - 1

    def evaluate(self, t1, t2):
        p1 = np.power.outer(np.asarray(t1, dtype=complex), np.arange(self.order + 1))
        p2 = np.power.outer(np.asarray(t2, dtype=complex), np.arange(self.order + 1))
        return np.einsum("...a,ab,...b->...", p1, self.coeffs, p2)

    def is_symmetric(self, tol=1e-8):
        scale = max(np.abs(self.coeffs).max(), 1.0)
        return bool(np.all(np.abs(self.coeffs - self.coeffs.T) <= tol * scale))

    def divide_by_diagonal_square(self):
        """Return H with (t1 - t2)^2 * H = self, as exact jets.

        Requires self to vanish to second order on the diagonal t1 = t2;
        the overdetermined coefficient recurrence is solved row by row and
        the residual is checked.
        """
        k = self.coeffs
        n = self.order
        h = np.zeros((n + 1, n + 1), dtype=complex)
        # k[a,b] = h[a-2,b] - 2 h[a-1,b-1] + h[a,b-2]
        # solve along anti-diagonals of h (total degree d), using the
        # equations with a >= 2 which are lower-triangular in that order
        # h[a,b] depends on entries with larger first index on the same
        # anti-diagonal, so sweep a downwards
        for d in range(0, 2 * n - 1):
            for a in range(min(n, d), max(0, d - n) - 1, -1):
                b = d - a
                if a + 2 > n or b > n:
                    continue
                prev = 0.0 + 0.0j
                if b - 1 >= 0:
                    prev += -2.0 * h[a + 1, b - 1]
                if b - 2 >= 0:
                    prev += h[a + 2, b - 2]
                h[a, b] = k[a + 2, b] - prev
        return BivariateSeries(h)


# ---------------------------------------------------------------------------
# Schwarzian derivative of a jet
# ---------------------------------------------------------------------------

def schwarzian(f: TruncatedSeries) -> TruncatedSeries:
    """{f, t} = f'''/f' - (3/2)(f''/f')^2, as a series of order N-3."""
    if f.order < 3:
        raise DegenerateJet("schwarzian needs a jet of order >= 3")
    d1 = f.derivative()
    if abs(d1.coeffs[0]) < _LEADING_TOL:
        raise DegenerateJet("schwarzian requires f'(0) != 0")
    d2 = d1.derivative()
    d3 = d2.derivative()
    ratio2 = d2 / d1.truncate(d2.order)
    out = d3 / d1.truncate(d3.order) - 1.5 * (ratio2 * ratio2)
    return out.truncate(f.order - 3)


# ---------------------------------------------------------------------------
# gamma
# ---------------------------------------------------------------------------

def gamma(x: float) -> float:
    """Gamma function for x > 0 (relative error well below 1e-12)."""
    if not x > 0:
        raise ValueError(f"gamma requires x > 0, got {x}")
    return math.gamma(x)


# ---------------------------------------------------------------------------
# path quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000
    # (radial points, angular points, truncation radius; None = auto)
    surface_grid: tuple = (24, 32, None)

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")

    def scaled(self, factor):
        return QuadratureConfig(
            self.rel_tol * factor,
            self.abs_tol * factor,
            self.max_subdivisions,
            self.surface_grid,
        )


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _segment_estimates(f, a, b):
    """Embedded 10/20-point Gauss estimates of int_a^b f dz."""
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    x10, w10 = gauss_legendre(10)
    x20, w20 = gauss_legendre(20)
    lo = half * np.sum(w10 * f(mid + half * x10))
    hi = half * np.sum(w20 * f(mid + half * x20))
    return hi, abs(hi - lo)


def integrate_segment(f, a, b, cfg: QuadratureConfig):
    """Adaptive bisection with embedded Gauss rules on one straight segment.

    f must accept an ndarray of complex points.  Returns (value, error).
    """
    stack = [(complex(a), complex(b))]
    total = 0.0 + 0.0j
    total_err = 0.0
    used = 0
    while stack:
        lo, hi = stack.pop()
        val, err = _segment_estimates(f, lo, hi)
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(val))
        mid = (lo + hi) / 2.0
        negligible = (abs(val) + err) <= cfg.abs_tol
        if err <= tol or negligible or mid == lo or mid == hi:
            total += val
            total_err += err
        else:
            used += 1
            if used > cfg.max_subdivisions:
                raise NonConvergence(
                    f"segment [{a}, {b}]: {cfg.max_subdivisions} subdivisions "
                    f"exhausted (last error {err:.3e})"
                )
            stack.append((lo, mid))
            stack.append((mid, hi))
    return total, total_err


def integrate_path(f, path, cfg: QuadratureConfig | None = None):
    """Adaptive integral of f along a polyline given by complex vertices."""
    cfg = cfg or QuadratureConfig()
    pts = [complex(p) for p in path]
    if len(pts) < 2:
        raise ValueError("path needs at least two vertices")
    total = 0.0 + 0.0j
    for a, b in zip(pts[:-1], pts[1:]):
        if a == b:
            continue
        val, _ = integrate_segment(f, a, b, cfg)
        total += val
    return total


def integrate_path_with_error(f, path, cfg: QuadratureConfig | None = None):
    cfg = cfg or QuadratureConfig()
    pts = [complex(p) for p in path]
    total, err = 0.0 + 0.0j, 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if a == b:
            continue
        v, e = integrate_segment(f, a, b, cfg)
        total += v
        err += e
    return total, err


# ---------------------------------------------------------------------------
# surface quadrature
# ---------------------------------------------------------------------------

def _smooth_step(t):
    """C^inf step: 0 for t<=0, 1 for t>=1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        h0 = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        h1 = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return h0 / (h0 + h1)


@dataclass
class SurfaceGrid:
    """Deterministic quadrature nodes for the two-sheet surface.

    Nodes cover the lambda-plane by a smooth partition of unity: one polar
    disk per branch point, one polar disk of radius R around the centroid
    carrying the complementary bump, and an inverted chart for |lambda| > R.
    Weights include the partition factor and the flat area element of the
    chart (not the conformal weight of the metric, which callers multiply in).
    Node order is fixed, so reductions are bit-reproducible.
    """

    branch_points: np.ndarray
    nodes: np.ndarray          # complex lambda values (one sheet's worth)
    weights: np.ndarray        # real, includes partition & chart Jacobian
    center: complex
    radius: float
    disk_radius: float

    @property
    def n_nodes(self):
        return self.nodes.size


def _polar_patch(center, r_lo, r_hi, n_rad, n_ang, breakpoints=None,
                 angle_shift=0.5):
    """Midpoint-in-angle x panelled-Gauss-in-radius polar grid.

    Returns (points, plain-area weights) for the annulus r_lo < r < r_hi.
    """
    edges = [r_lo, r_hi] if not breakpoints else sorted(
        {r_lo, r_hi, *[b for b in breakpoints if r_lo < b < r_hi]}
    )
    panels = max(1, n_rad // 8)
    xg, wg = gauss_legendre(8)
    rs, wr = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sub = np.linspace(lo, hi, panels + 1)
        for a, b in zip(sub[:-1], sub[1:]):
            rs.append((a + b) / 2 + (b - a) / 2 * xg)
            wr.append((b - a) / 2 * wg)
    r = np.concatenate(rs)
    wr = np.concatenate(wr)
    th = 2 * np.pi * (np.arange(n_ang) + angle_shift) / n_ang
    wth = 2 * np.pi / n_ang
    pts = center + np.multiply.outer(r, np.exp(1j * th))
    w = np.multiply.outer(r * wr, np.full(n_ang, wth))
    return pts.ravel(), w.ravel()


def build_surface_grid(branch_points, cfg: QuadratureConfig,
                       radial_breakpoints=None, stagger=0.0) -> SurfaceGrid:
    """stagger shifts every angular node by that fraction of a cell, so two
    grids with different stagger share no nodes (used for double surface
    integrals with weakly singular kernels)."""
    bp = np.asarray(branch_points, dtype=complex)
    shift = 0.5 + stagger
    n_rad, n_ang, radius = cfg.surface_grid
    center = complex(bp.mean())
    span = float(np.abs(bp - center).max())
    if radius is None:
        radius = span + 2.0
    if radius <= float(np.abs(bp).max()) + 1.0:
        raise ValueError("truncation radius must exceed max|branch point| + 1")
    gaps = [abs(a - b) for i, a in enumerate(bp) for b in bp[i + 1:]]
    disk_r = min(gaps) / 3.0

    all_pts, all_w = [], []

    def bump_at(pts, j):
        r = np.abs(pts - bp[j])
        # 1 inside disk_r/2, 0 outside disk_r
        return _smooth_step((disk_r - r) / (disk_r / 2.0))

    # branch-point disks
    for j in range(bp.size):
        pts, w = _polar_patch(bp[j], 0.0, disk_r, n_rad, n_ang,
                              angle_shift=shift)
        all_pts.append(pts)
        all_w.append(w * bump_at(pts, j))

    # main disk with complementary partition factor
    pts, w = _polar_patch(center, 0.0, radius, 2 * n_rad, 2 * n_ang,
                          breakpoints=radial_breakpoints, angle_shift=shift)
    comp = np.ones_like(w)
    for j in range(bp.size):
        comp = comp * (1.0 - bump_at(pts, j))
    all_pts.append(pts)
    all_w.append(w * comp)

    # exterior chart mu = 1/(lambda - center), area element |mu|^-4 dA_mu
    mpts, mw = _polar_patch(0.0, 0.0, 1.0 / radius, n_rad, n_ang,
                            angle_shift=shift)
    lam = center + 1.0 / mpts
    all_pts.append(lam)
    all_w.append(mw / np.abs(mpts) ** 4)

    nodes = np.concatenate(all_pts)
    weights = np.concatenate(all_w)
    dmin = np.abs(nodes[:, None] - bp[None, :]).min()
    if dmin < 1e-12 * max(1.0, span):
        raise SingularityOnGrid("a quadrature node coincides with a branch point")
    return SurfaceGrid(bp, nodes, weights, center, float(radius), disk_r)


def integrate_surface(f, weight, grid_or_cfg, branch_points=None,
                      radial_breakpoints=None):
    """Two-sheet surface integral of f(lambda, sheet) * weight(lambda).

    weight is the conformal density |omega/dlambda|^2 (sheet-independent);
    f may depend on the sheet.  Accepts a prebuilt SurfaceGrid or a
    QuadratureConfig plus branch points.
    """
    if isinstance(grid_or_cfg, SurfaceGrid):
        grid = grid_or_cfg
    else:
        if branch_points is None:
            raise ValueError("branch points required to build the grid")
        grid = build_surface_grid(branch_points, grid_or_cfg,
                                  radial_breakpoints=radial_breakpoints)
    lam, w = grid.nodes, grid.weights
    dens = weight(lam) if callable(weight) else weight
    total = 0.0 + 0.0j
    for sheet in (+1, -1):
        vals = np.asarray(f(lam, sheet), dtype=complex)
        total += np.sum(vals * dens * w)
    if abs(total.imag) < 1e-12 * max(1.0, abs(total.real)):
        return total.real
    return total
