"""Riemann-Liouville integrals on [0, 1], the functions h_n^a = I^a_{1-} e_n,
and the special functions used downstream (Gamma, Gauss 2F1)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ._quadrature import composite_rule, gauss_jacobi, gauss_legendre

DEFAULT_GRID_SIZE = 1024


# ---------------------------------------------------------------- special functions


def gamma_fn(x: float) -> float:
    """Gamma function for positive arguments."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise ValueError(f"gamma_fn needs x > 0, got {x}")
    return math.gamma(x)


def _rgamma(x: float) -> float:
    # 1/Gamma, zero at the poles
    if x <= 0 and float(x).is_integer():
        return 0.0
    return 1.0 / math.gamma(x)


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _series(a, b, c, z, max_terms=20000, tol=1e-17):
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    term = np.ones_like(z)
    for k in range(max_terms):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1.0))) * z
        total = total + term
        if np.all(np.abs(term) <= tol * np.maximum(np.abs(total), 1e-300)):
            return total
    raise ValueError("hypergeometric series did not converge")


def _hyp_unit(a, b, c, w, cut=0.75, one_minus_w=None):
    """2F1 on 0 <= w < 1: power series near 0, 1-w connection formula near 1.

    ``one_minus_w`` may carry 1 - w computed without cancellation.
    """
    w = np.asarray(w, dtype=float)
    om = 1.0 - w if one_minus_w is None else np.asarray(one_minus_w, dtype=float)
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        return _series(a, b, c, w)
    out = np.empty_like(w)
    near = w > cut
    if np.any(~near):
        out[~near] = _series(a, b, c, w[~near])
    if np.any(near):
        s = c - a - b
        x = om[near]
        if float(s).is_integer():
            # logarithmic case, the plain series still converges for w < 1
            out[near] = _series(a, b, c, w[near], max_terms=200000)
        else:
            g1 = math.gamma(c) * math.gamma(s) * _rgamma(c - a) * _rgamma(c - b)
            g2 = math.gamma(c) * math.gamma(-s) * _rgamma(a) * _rgamma(b)
            part = g1 * _series(a, b, 1.0 - s, x)
            if g2 != 0.0:
                part = part + g2 * x**s * _series(c - a, c - b, 1.0 + s, x)
            out[near] = part
    return out


def hyp2f1(a: float, b: float, c: float, z) -> np.ndarray:
    """Vectorised 2F1(a, b; c; z) for real z < 1."""
    if _is_nonpositive_int(c):
        raise ValueError("2F1 undefined: c is a non-positive integer")
    z = np.asarray(z, dtype=float)
    if np.any(z >= 1.0) or not np.all(np.isfinite(z)):
        raise ValueError("2F1 evaluated only for finite z < 1")
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        return _series(a, b, c, z)
    out = np.empty_like(z)
    small = np.abs(z) <= 0.5
    neg = z < -0.5
    pos = z > 0.5
    if np.any(small):
        out[small] = _series(a, b, c, z[small])
    if np.any(neg):
        zn = z[neg]
        # Pfaff: (-inf, -1/2) -> (1/3, 1)
        out[neg] = (1.0 - zn) ** (-a) * _hyp_unit(a, c - b, c, zn / (zn - 1.0), one_minus_w=1.0 / (1.0 - zn))
    if np.any(pos):
        out[pos] = _hyp_unit(a, b, c, z[pos])
    return out


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function for real z < 1."""
    return float(hyp2f1(a, b, c, np.array([float(z)]))[0])


def hyp2f1_direct_series(a: float, b: float, c: float, z: float, max_terms: int = 400000) -> float:
    """Plain power series, no transformation; valid for |z| <= 1.

    On the unit circle the series converges only algebraically. For z = -1 the
    terms alternate and the mean of two consecutive partial sums is returned,
    which cancels the leading oscillation.
    """
    if _is_nonpositive_int(c):
        raise ValueError("2F1 undefined: c is a non-positive integer")
    if abs(z) > 1.0:
        raise ValueError("direct series needs |z| <= 1")
    if z == 1.0 and c - a - b <= 0.0:
        raise ValueError("series diverges at z = 1 unless c - a - b > 0")
    k = np.arange(max_terms, dtype=float)
    ratios = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
    terms = np.concatenate(([1.0], np.cumprod(ratios)))
    partial = np.cumsum(terms)
    if z < 0:
        return float(0.5 * (partial[-1] + partial[-2]))
    return float(partial[-1])


# ---------------------------------------------------------------- orders


@dataclass(frozen=True)
class FracOrder:
    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValueError("fractional order must be finite")

    @property
    def hilbert_schmidt(self) -> bool:
        return self.alpha > 0.5


def _order(alpha) -> float:
    a = float(alpha.alpha if isinstance(alpha, FracOrder) else alpha)
    if not (0.0 <= a <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {a}")
    return a


def hs_norm(alpha) -> float:
    """c_a = ||I^a||_HS on L^2[0, 1]."""
    a = float(alpha.alpha if isinstance(alpha, FracOrder) else alpha)
    if not a > 0.5:
        raise ValueError(f"I^alpha is not Hilbert-Schmidt for alpha <= 1/2 (got {a})")
    return 1.0 / (2.0 * math.gamma(a)) * math.sqrt(1.0 / (a * (a - 0.5)))


# ---------------------------------------------------------------- grid functions


def uniform_grid(m: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    if m < 2:
        raise ValueError("grid needs at least two nodes")
    return np.linspace(0.0, 1.0, int(m))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on a grid of [0, 1] plus what is known about singular behaviour.

    ``singular_exponent`` is the power g in f(t) ~ t**g at t = 0 and
    ``right_exponent`` the power at t = 1, which also applies just left of
    every point in ``kinks``. When ``evaluator`` is set it gives exact values
    off the grid; otherwise a cubic spline through the grid values is used.
    """

    grid: np.ndarray
    values: np.ndarray
    singular_exponent: float | None = None
    right_exponent: float | None = None
    kinks: tuple[float, ...] = ()
    evaluator: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid must be one-dimensional with at least two nodes")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        if values.shape != grid.shape:
            raise ValueError("values and grid differ in length")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite at every node")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, fn, grid=None, **meta) -> "GridFunction":
        grid = uniform_grid() if grid is None else np.asarray(grid, dtype=float)

        def ev(x):
            return np.broadcast_to(np.asarray(fn(np.asarray(x, dtype=float)), dtype=float), np.shape(x)).copy()

        return cls(grid, ev(grid), evaluator=ev, **meta)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.evaluator is not None:
            return self.evaluator(x)
        return CubicSpline(self.grid, self.values)(x)

    def reflected(self) -> "GridFunction":
        """t -> f(1 - t); kinks are not carried over."""
        src = self

        def ev(x):
            return src(1.0 - np.asarray(x, dtype=float))

        return GridFunction(
            self.grid,
            ev(self.grid) if self.evaluator is not None else np.interp(1.0 - self.grid, self.grid, self.values),
            singular_exponent=self.right_exponent,
            right_exponent=self.singular_exponent,
            evaluator=ev,
        )

    def quadrature_rule(self, panels: int = 16, p: int = 16):
        """Nodes/weights resolving this function's kinks and endpoint powers."""
        edges = np.union1d(np.linspace(0.0, 1.0, panels + 1), np.asarray(self.kinks, dtype=float))
        edges = edges[(edges >= 0.0) & (edges <= 1.0)]
        grade = "both" if (self.singular_exponent is not None or self.right_exponent is not None) else "none"
        return composite_rule(edges, p=p, grade=grade)

    def to_csv(self) -> str:
        lines = ["node,value"] + [f"{t:.17g},{v:.17g}" for t, v in zip(self.grid, self.values)]
        return "\n".join(lines) + "\n"


def inner_product(f: GridFunction, g: GridFunction, panels: int = 16, p: int = 16) -> float:
    """L^2 inner product using a rule built from both functions' metadata."""
    kinks = tuple(sorted(set(f.kinks) | set(g.kinks)))
    left = None if f.singular_exponent is None and g.singular_exponent is None else 0.0
    right = None if f.right_exponent is None and g.right_exponent is None else 0.0
    probe = GridFunction(f.grid, np.zeros_like(f.grid), left, right, kinks)
    x, w = probe.quadrature_rule(panels, p)
    return float(np.sum(w * f(x) * g(x)))


# ---------------------------------------------------------------- fractional integrals


def _left_rl_values(f: GridFunction, alpha: float, x: np.ndarray, panels: int, p: int) -> np.ndarray:
    """(I^a_{0+} f)(x) with Gauss-Jacobi panels at both singular ends of [0, x]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0.0
    if not np.any(pos):
        return out
    X = x[pos][:, None]
    h = X / panels
    gl_x, gl_w = gauss_legendre(p)
    total = np.zeros(X.shape[0])

    # panel 0: weight t**g from f's left power
    g = f.singular_exponent or 0.0
    if g <= -1.0:
        raise ValueError("left singular exponent must exceed -1")
    u, w = gauss_jacobi(p, g, 0.0)
    t = h * u
    total += np.sum(h * w * (f(t) / u**g) * (X - t) ** (alpha - 1.0), axis=1)

    # interior panels: smooth integrand
    if panels > 2:
        starts = h * np.arange(1, panels - 1)
        t = (starts[:, :, None] + h[:, :, None] * gl_x).reshape(X.shape[0], -1)
        wt = np.broadcast_to(h[:, :, None] * gl_w, (X.shape[0], panels - 2, p)).reshape(X.shape[0], -1)
        total += np.sum(wt * f(t) * (X - t) ** (alpha - 1.0), axis=1)

    # last panel: kernel (x - t)**(a - 1); at x = 1 also f's right power
    rho = f.right_exponent
    at_one = (X[:, 0] >= 1.0 - 1e-15) & (rho is not None)
    v, wv = gauss_jacobi(p, alpha - 1.0, 0.0)
    t = X - h * v
    last = np.sum(h**alpha * wv * f(t), axis=1)
    if np.any(at_one):
        v2, w2 = gauss_jacobi(p, alpha - 1.0 + rho, 0.0)
        hh = h[at_one]
        t2 = 1.0 - hh * v2
        last[at_one] = np.sum(hh ** (alpha + rho) * w2 * f(t2) / v2**rho, axis=1)
    total += last

    out[pos] = total / math.gamma(alpha)
    return out


def frac_integral_left(f: GridFunction, alpha, panels: int = 8, p: int = 16) -> GridFunction:
    """I^a_{0+} f on f's grid, with an exact off-grid evaluator attached."""
    a = _order(alpha)
    if a == 0.0:
        return f

    def ev(x):
        x = np.asarray(x, dtype=float)
        return _left_rl_values(f, a, x.ravel(), panels, p).reshape(x.shape)

    left = (f.singular_exponent or 0.0) + a
    right = None if f.right_exponent is None else min(f.right_exponent + a, 1.0)
    return GridFunction(f.grid, ev(f.grid), singular_exponent=left, right_exponent=right, evaluator=ev)


def frac_integral_right(f: GridFunction, alpha, panels: int = 8, p: int = 16) -> GridFunction:
    """I^a_{1-} f, computed as the reflection of a left integral."""
    a = _order(alpha)
    if a == 0.0:
        return f
    mirrored = frac_integral_left(f.reflected(), a, panels, p)

    def ev(x):
        return mirrored(1.0 - np.asarray(x, dtype=float))

    return GridFunction(
        f.grid,
        ev(f.grid),
        singular_exponent=mirrored.right_exponent,
        right_exponent=mirrored.singular_exponent,
        evaluator=ev,
    )


# ---------------------------------------------------------------- bases


BASIS_KINDS = ("haar", "cosine")


@dataclass(frozen=True)
class BasisSpec:
    """Orthonormal basis of L^2[0, 1] truncated to its first ``n_max`` members.

    ``haar``: e_1 = 1 followed by the Haar wavelets in level order.
    ``cosine``: e_1 = 1, e_n = sqrt(2) cos((n - 1) pi t).
    """

    kind: str = "haar"
    n_max: int = 128

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; choose from {BASIS_KINDS}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError("n_max must be a positive integer")

    @property
    def backend(self):
        from ._bases import backend_for

        return backend_for(self.kind, int(self.n_max))


def _check_index(n: int, spec: BasisSpec) -> int:
    if int(n) != n or not 1 <= n <= spec.n_max:
        raise ValueError(f"basis index must lie in 1..{spec.n_max}, got {n}")
    return int(n)


def basis_e(n: int, spec: BasisSpec = BasisSpec(), grid=None) -> GridFunction:
    n = _check_index(n, spec)
    be = spec.backend
    grid = uniform_grid() if grid is None else grid

    def ev(x):
        x = np.asarray(x, dtype=float)
        return be.e(x.ravel(), [n - 1])[0].reshape(x.shape)

    return GridFunction(np.asarray(grid, dtype=float), ev(np.asarray(grid, dtype=float)), kinks=be.kinks, evaluator=ev)


@lru_cache(maxsize=4096)
def _basis_h_cached(n: int, alpha: float, spec: BasisSpec, m: int) -> GridFunction:
    be = spec.backend
    grid = uniform_grid(m)

    def ev(x):
        x = np.asarray(x, dtype=float)
        return be.h(alpha, x.ravel(), [n - 1])[0].reshape(x.shape)

    return GridFunction(grid, ev(grid), right_exponent=alpha, kinks=be.kinks, evaluator=ev)


def basis_h(n: int, alpha, spec: BasisSpec = BasisSpec(), grid_size: int = DEFAULT_GRID_SIZE) -> GridFunction:
    """h_n^a = I^a_{1-} e_n on the uniform working grid (cached)."""
    n = _check_index(n, spec)
    a = _order(alpha)
    if a == 0.0:
        return basis_e(n, spec, uniform_grid(grid_size))
    return _basis_h_cached(n, a, spec, int(grid_size))


def h_values(alpha: float, spec: BasisSpec, t) -> np.ndarray:
    """Matrix of h_n^a(t_i), shape (n_max, len(t))."""
    a = float(alpha)
    if not a > 0:
        raise ValueError("order must be positive")
    return spec.backend.h(a, np.asarray(t, dtype=float))


def h_interval_integrals(alpha: float, spec: BasisSpec, edges) -> np.ndarray:
    """int over [edges[j], edges[j+1]] of h_n^a, shape (n_max, len(edges) - 1)."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) < 0):
        raise ValueError("edges must be a nondecreasing partition")
    prim = spec.backend.h(float(alpha) + 1.0, edges)
    # the antiderivative of h^a is -h^(a+1)
    return prim[:, :-1] - prim[:, 1:]


def basis_rule(spec: BasisSpec, extra_edges=(), p: int = 16):
    """Quadrature rule aligned with the basis kinks, graded where h_n is singular."""
    edges = np.union1d(spec.backend.panel_edges, np.asarray(extra_edges, dtype=float))
    return composite_rule(edges, p=p, grade="right")


def basis_gram(spec: BasisSpec = BasisSpec()) -> np.ndarray:
    x, w = basis_rule(spec)
    E = spec.backend.e(x)
    return (E * w) @ E.T


def parseval_partial_sums(alpha: float, tau: float, spec: BasisSpec = BasisSpec()) -> np.ndarray:
    """Running sums of h_k^a(tau)**2 for k = 1..n_max."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    col = h_values(alpha, spec, np.array([tau]))[:, 0]
    return np.cumsum(col**2)
