"""Seeded samplers: compensated Poisson, interpolated Brownian motion, the
Donsker walk, the basis-series Brownian motion and fBm via the K_H kernel."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._quadrature import gauss_jacobi, gauss_legendre, singular_end_rule
from ._rng import make_rng
from .fractional import BasisSpec, hyp2f1, hyp2f1_direct_series, uniform_grid
from .hilbert import DEFAULT_BASIS, DEFAULT_N, EmbeddedVector, check_beta


# ---------------------------------------------------------------- path types


@dataclass(frozen=True, eq=False)
class StepPath:
    """t -> sum_{t_i <= t} size_i + drift * t."""

    jump_times: np.ndarray
    jump_sizes: np.ndarray
    drift: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.jump_times, dtype=float)
        s = np.broadcast_to(np.asarray(self.jump_sizes, dtype=float), t.shape).copy()
        if np.any(np.diff(t) < 0):
            raise ValueError("jump times must be sorted")
        if not np.all(np.isfinite(s)):
            raise ValueError("jump sizes must be finite")
        object.__setattr__(self, "jump_times", t)
        object.__setattr__(self, "jump_sizes", s)
        object.__setattr__(self, "drift", float(self.drift))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        csum = np.concatenate(([0.0], np.cumsum(self.jump_sizes)))
        return csum[np.searchsorted(self.jump_times, t, side="right")] + self.drift * t


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    m: int
    node_values: np.ndarray
    breakpoints: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.node_values, dtype=float)
        if self.m < 1 or v.shape != (self.m + 1,):
            raise ValueError("need m >= 1 intervals and m + 1 node values")
        if v[0] != 0.0:
            raise ValueError("node_values[0] must be 0")
        bp = np.arange(self.m + 1) / self.m if self.breakpoints is None else np.asarray(self.breakpoints, dtype=float)
        if bp.shape != v.shape or bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must partition [0, 1]")
        object.__setattr__(self, "node_values", v)
        object.__setattr__(self, "breakpoints", bp)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.node_values) / np.diff(self.breakpoints)

    def __call__(self, t) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.breakpoints, self.node_values)


@dataclass(frozen=True, eq=False)
class FbmPath:
    hurst: float
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values[0] != 0.0:
            raise ValueError("fBm path must start at 0")


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not lam > 0.0 or not math.isfinite(lam):
        raise ValueError(f"λ must be positive, got {lam}")
    return lam


def _check_m(m) -> int:
    if int(m) != m or m < 1:
        raise ValueError(f"m must be an integer >= 1, got {m}")
    return int(m)


def _check_hurst(hurst) -> float:
    H = float(hurst)
    if not 0.0 < H < 1.0:
        raise ValueError(f"H must lie in (0, 1), got {H}")
    return H


# ---------------------------------------------------------------- Poisson


def poisson_arrivals(lam: float, rng: np.random.Generator, size: int):
    """Arrival times of ``size`` Poisson paths by summing exponential gaps.

    Returns (times, owner) with times sorted within each path.
    """
    lam = _check_lambda(lam)
    width = int(lam + 10.0 * math.sqrt(lam) + 20)
    arr = np.cumsum(rng.exponential(1.0 / lam, (size, width)), axis=1)
    short = arr[:, -1] < 1.0
    while np.any(short):
        # rare: extend only the unfinished paths
        ext = np.full((size, width), np.inf)
        ext[short] = arr[short, -1:] + np.cumsum(rng.exponential(1.0 / lam, (int(short.sum()), width)), axis=1)
        arr = np.hstack((arr, ext))
        short = arr[:, -1] < 1.0
    full = arr
    mask = full < 1.0
    owner = np.nonzero(mask)[0]
    return full[mask], owner


def sample_poisson(lam, seed) -> StepPath:
    """Normalised compensated Poisson path lam^{-1/2} (N(t) - lam t)."""
    lam = _check_lambda(lam)
    times, _ = poisson_arrivals(lam, make_rng(seed), 1)
    return StepPath(times, np.full(times.size, lam**-0.5), -math.sqrt(lam))


# ---------------------------------------------------------------- walks


def sample_interp_bm(m, seed) -> PiecewiseLinearPath:
    """Brownian motion on j/m, linearly interpolated."""
    m = _check_m(m)
    inc = make_rng(seed).normal(0.0, math.sqrt(1.0 / m), m)
    return PiecewiseLinearPath(m, np.concatenate(([0.0], np.cumsum(inc))))


def rademacher(rng: np.random.Generator, shape) -> np.ndarray:
    return 2.0 * rng.integers(0, 2, size=shape) - 1.0


def sample_donsker(m, seed) -> PiecewiseLinearPath:
    """Scaled +-1 random walk, increments +-1/sqrt(m)."""
    m = _check_m(m)
    inc = rademacher(make_rng(seed), m) / math.sqrt(m)
    return PiecewiseLinearPath(m, np.concatenate(([0.0], np.cumsum(inc))))


# ---------------------------------------------------------------- basis series BM


def default_series_terms(n_max: int) -> int:
    return max(1024, int(n_max))


@lru_cache(maxsize=32)
def series_pairing(beta: float, n_max: int, n_terms: int, basis: str = DEFAULT_BASIS) -> np.ndarray:
    """<h_k^{1-beta}, e_n>, shape (n_max, n_terms): the embedding of int_0^. e_n."""
    out = BasisSpec(basis, n_max).backend.pairing_with_e(1.0 - beta, n_terms)
    out.setflags(write=False)
    return out


def series_covariance(beta, n_max: int = DEFAULT_N, n_terms: int | None = None, basis: str = DEFAULT_BASIS) -> np.ndarray:
    """Exact covariance of the embedding of the truncated series."""
    A = series_pairing(check_beta(beta), int(n_max), n_terms or default_series_terms(n_max), basis)
    return A @ A.T


def sample_bm_series(
    beta,
    n_max: int = DEFAULT_N,
    seed: int = 0,
    n_terms: int | None = None,
    grid_size: int = 1024,
    basis: str = DEFAULT_BASIS,
) -> tuple[PiecewiseLinearPath, EmbeddedVector]:
    """B = sum_n X_n int_0^. e_n truncated to ``n_terms`` terms.

    Returns the path on a uniform grid and the exact embedding of the
    truncated path (first ``n_max`` coordinates).
    """
    b = check_beta(beta)
    n_terms = n_terms or default_series_terms(n_max)
    X = make_rng(seed).standard_normal(n_terms)
    grid = uniform_grid(grid_size)
    path_vals = X @ BasisSpec(basis, n_terms).backend.e_antiderivative(grid)
    path_vals[0] = 0.0
    path = PiecewiseLinearPath(grid_size - 1, path_vals, grid)
    coeffs = series_pairing(b, int(n_max), n_terms, basis) @ X
    return path, EmbeddedVector(b, int(n_max), coeffs, basis)


# ---------------------------------------------------------------- fBm kernel


def _check_pairs(t, r):
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0) or np.any(r >= t) or np.any(t > 1.0):
        raise ValueError("kernel needs 0 < r < t <= 1")
    return np.broadcast_arrays(t, r)


def _kernel(t, r, gap, H):
    # gap = t - r, passed separately to keep it exact near the diagonal
    if H == 0.5:
        return np.ones(np.shape(t))
    z = -gap / r
    F = hyp2f1(0.5 - H, H - 0.5, H + 0.5, np.ravel(z)).reshape(np.shape(z))
    return gap ** (H - 0.5) / math.gamma(H + 0.5) * F


def kernel_KH(t, r, hurst) -> np.ndarray | float:
    """K_H(t, r) = (t - r)^{H-1/2} / Gamma(H+1/2) * 2F1(1/2-H, H-1/2; H+1/2; 1 - t/r)."""
    H = _check_hurst(hurst)
    scalar = np.ndim(t) == 0 and np.ndim(r) == 0
    t, r = _check_pairs(t, r)
    out = _kernel(t, r, t - r, H)
    return float(out) if scalar else out


def kernel_KH_direct(t: float, r: float, hurst) -> float:
    """Same kernel from the untransformed power series in 1 - t/r (needs r >= t/2)."""
    H = _check_hurst(hurst)
    _check_pairs(t, r)
    z = 1.0 - t / r
    if z < -1.0:
        raise ValueError("direct series needs r >= t/2")
    return (t - r) ** (H - 0.5) / math.gamma(H + 0.5) * hyp2f1_direct_series(0.5 - H, H - 0.5, H + 0.5, z)


def fbm_variance_oracle(hurst, t: float = 1.0) -> float:
    """int_0^t K_H(t, s)^2 ds by quadrature graded at both singular ends."""
    H = _check_hurst(hurst)
    if H == 0.5:
        return float(t)
    x0, w0 = singular_end_rule(0.0, 0.5 * t, "left", -2.0 * abs(H - 0.5))
    x1, w1, d1 = singular_end_rule(0.5 * t, t, "right", 2.0 * H - 1.0, with_distance=True)
    left = np.sum(w0 * _kernel(t, x0, t - x0, H) ** 2)
    right = np.sum(w1 * _kernel(t, x1, d1, H) ** 2)
    return float(left + right)


@lru_cache(maxsize=8)
def fbm_kernel_matrix(hurst: float, grid_key: tuple) -> np.ndarray:
    """Cell averages of K_H(t_i, .) over [t_j, t_{j+1}], shape (M, M - 1).

    B^H(t_i) = sum_j Kbar[i, j] (B(t_{j+1}) - B(t_j)) is the conditional
    expectation of the exact Volterra integral given the grid increments.
    Cells touching s = 0 or s = t_i use Gauss-Jacobi for the endpoint powers.
    """
    H = float(hurst)
    grid = np.asarray(grid_key, dtype=float)
    M = grid.size
    K = np.zeros((M, M - 1))
    if H == 0.5:
        K[np.tril_indices(M, -1, M - 1)] = 1.0
        K.setflags(write=False)
        return K
    p = 8
    lo_exp = -abs(H - 0.5)
    hi_exp = H - 0.5
    x, w = gauss_legendre(p)
    u0, w0 = gauss_jacobi(p, lo_exp, 0.0)
    u1, w1 = gauss_jacobi(p, 0.0, hi_exp)
    u01, w01 = gauss_jacobi(p, lo_exp, hi_exp)
    for i in range(1, M):
        t = grid[i]
        a, b = grid[:i], grid[1:i + 1]
        d = (b - a)[:, None]
        nodes = np.empty((i, p))
        wts = np.empty((i, p))
        nodes[:] = a[:, None] + d * x
        wts[:] = w
        if i == 1:
            nodes[0] = a[0] + d[0] * u01
            wts[0] = w01 / (u01**lo_exp * (1 - u01) ** hi_exp)
        else:
            nodes[0] = a[0] + d[0] * u0
            wts[0] = w0 / u0**lo_exp
            nodes[-1] = a[-1] + d[-1] * u1
            wts[-1] = w1 / (1 - u1) ** hi_exp
        vals = kernel_KH(np.full(nodes.size, t), nodes.ravel(), H).reshape(nodes.shape)
        K[i, :i] = np.sum(wts * vals, axis=1)
    K.setflags(write=False)
    return K


def sample_fbm(hurst, grid=None, seed: int = 0) -> FbmPath:
    """B^H on the grid from Gaussian increments of B."""
    H = _check_hurst(hurst)
    grid = uniform_grid() if grid is None else np.asarray(grid, dtype=float)
    dB = make_rng(seed).standard_normal(grid.size - 1) * np.sqrt(np.diff(grid))
    K = fbm_kernel_matrix(H, tuple(grid.tolist()))
    vals = K @ dB
    vals[0] = 0.0
    return FbmPath(H, grid, vals)


def fbm_discrete_variance(hurst, grid=None) -> np.ndarray:
    """Exact variance of the discretised B^H at each grid node."""
    H = _check_hurst(hurst)
    grid = uniform_grid() if grid is None else np.asarray(grid, dtype=float)
    K = fbm_kernel_matrix(H, tuple(grid.tolist()))
    return (K**2) @ np.diff(grid)
