"""Embedding of paths into l^2 by pairing against h_n^{1-beta}, the truncated
covariance S_beta, partial traces and trace norms."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._rng import make_rng
from ._quadrature import composite_rule
from .fractional import BasisSpec, GridFunction, h_interval_integrals, h_values, hs_norm

DEFAULT_N = 128
DEFAULT_BASIS = "haar"


def check_beta(beta) -> float:
    b = float(beta)
    if not (0.0 < b < 0.5):
        raise ValueError(f"β must lie in (0, 1/2), got {b}")
    return b


def _spec(n_max: int, basis: str) -> BasisSpec:
    return BasisSpec(basis, int(n_max))


# ---------------------------------------------------------------- containers


@dataclass(frozen=True, eq=False)
class EmbeddedVector:
    beta: float
    n_max: int
    coeffs: np.ndarray
    basis: str = DEFAULT_BASIS

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.n_max,):
            raise ValueError("coefficient count must equal n_max")
        if not np.all(np.isfinite(c)):
            raise ValueError("embedded coordinates must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def norm_sq(self) -> float:
        return float(self.coeffs @ self.coeffs)

    def to_csv(self) -> str:
        return "n,coeff\n" + "".join(f"{i + 1},{v:.17g}\n" for i, v in enumerate(self.coeffs))


@dataclass(frozen=True, eq=False)
class CovOperator:
    """Symmetric truncated operator on l^2."""

    beta: float
    n_max: int
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.n_max, self.n_max):
            raise ValueError("matrix must be n_max x n_max")
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        if np.abs(m - m.T).max(initial=0.0) > 1e-9 * scale:
            raise ValueError("operator matrix is not symmetric")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    def __sub__(self, other: "CovOperator") -> "CovOperator":
        if self.n_max != other.n_max:
            raise ValueError("truncation mismatch")
        return CovOperator(self.beta, self.n_max, self.matrix - other.matrix, f"{self.label}-{other.label}")

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def to_csv(self) -> str:
        n = self.n_max
        rows = [f"{i + 1},{j + 1},{self.matrix[i, j]:.17g}" for i in range(n) for j in range(n)]
        return "row,col,value\n" + "\n".join(rows) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"beta": self.beta, "n_max": self.n_max, "label": self.label, "matrix": self.matrix.tolist()}
        )


@dataclass(frozen=True, eq=False)
class HilbertSchmidtFamily:
    """H = sum_n g_n (x) x_n with g_n in L^2 (GridFunctions) or in l^d (rows of an array)."""

    beta: float
    n_max: int
    components: tuple | np.ndarray
    label: str = ""

    def __post_init__(self):
        if len(self.components) != self.n_max:
            raise ValueError("component count must equal n_max")


# ---------------------------------------------------------------- tensors and traces


def tensor(x, y) -> np.ndarray:
    """Matrix of x (x) y acting as z -> <x, z> y."""
    return np.outer(np.asarray(y, dtype=float), np.asarray(x, dtype=float))


def trace(matrix) -> float:
    return float(np.trace(np.asarray(matrix, dtype=float)))


def trace_norm(op: CovOperator | np.ndarray) -> float:
    """Sum of absolute eigenvalues of a symmetric matrix."""
    m = op.matrix if isinstance(op, CovOperator) else np.asarray(op, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("trace norm needs a square matrix")
    if np.abs(m - m.T).max(initial=0.0) > 1e-9 * max(1.0, np.abs(m).max(initial=0.0)):
        raise ValueError("trace norm implemented for symmetric matrices only")
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + m.T)))))


# ---------------------------------------------------------------- embeddings


@lru_cache(maxsize=128)
def _integrals_of_h(beta: float, n_max: int, basis: str) -> np.ndarray:
    # int_0^1 h_n
    return h_interval_integrals(1.0 - beta, _spec(n_max, basis), np.array([0.0, 1.0]))[:, 0]


@lru_cache(maxsize=128)
def interval_integrals(beta: float, m: int, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> np.ndarray:
    """C[n, j] = int over [j/m, (j+1)/m] of h_n^{1-beta}."""
    out = h_interval_integrals(1.0 - check_beta(beta), _spec(n_max, basis), np.arange(m + 1) / m)
    out.setflags(write=False)
    return out


def embed_jumps(times, sizes, owner, n_paths: int, drift, beta, n_max=DEFAULT_N, basis=DEFAULT_BASIS) -> np.ndarray:
    """Embed many step paths at once; ``owner[i]`` is the path of jump i."""
    b = check_beta(beta)
    times = np.asarray(times, dtype=float)
    if times.size and (times.min() < 0.0 or times.max() > 1.0):
        raise ValueError("jump times must lie in [0, 1]")
    sizes = np.broadcast_to(np.asarray(sizes, dtype=float), times.shape)
    H = h_values(1.0 - b, _spec(n_max, basis), times)
    out = np.zeros((n_paths, n_max))
    if times.size:
        np.add.at(out, np.asarray(owner, dtype=int), (H * sizes).T)
    out += np.outer(np.broadcast_to(np.asarray(drift, dtype=float), (n_paths,)), _integrals_of_h(b, n_max, basis))
    return out


def embed_step_path(path, beta, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> EmbeddedVector:
    """coeffs[n] = sum_i size_i h_n(t_i) + drift * int_0^1 h_n."""
    if not math.isfinite(path.drift):
        raise ValueError("drift must be finite")
    times = np.asarray(path.jump_times, dtype=float)
    row = embed_jumps(times, path.jump_sizes, np.zeros(times.size, dtype=int), 1, path.drift, beta, n_max, basis)[0]
    return EmbeddedVector(float(beta), int(n_max), row, basis)


def embed_piecewise_linear(path, beta, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> EmbeddedVector:
    """coeffs[n] = sum_j slope_j * int_{interval j} h_n."""
    b = check_beta(beta)
    edges = np.asarray(path.breakpoints, dtype=float)
    if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
        raise ValueError("breakpoints must partition [0, 1]")
    C = h_interval_integrals(1.0 - b, _spec(n_max, basis), edges)
    return EmbeddedVector(b, int(n_max), C @ path.slopes, basis)


# ---------------------------------------------------------------- covariance


@lru_cache(maxsize=64)
def _covariance(beta: float, n_max: int, basis: str) -> np.ndarray:
    G = _spec(n_max, basis).backend.gram(1.0 - beta)
    G.setflags(write=False)
    return G


def covariance_matrix(beta, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> CovOperator:
    """S_beta[n, k] = <h_n, h_k>.

    For the Haar basis this pairs step functions against the left integral of
    h_k in closed form; partial_trace of the H_1 family computes the same
    matrix independently by graded quadrature.
    """
    b = check_beta(beta)
    return CovOperator(b, int(n_max), _covariance(b, int(n_max), basis).copy(), "S")


def truncation_tail(beta, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> float:
    """c_{1-beta}^2 minus the truncated trace."""
    b = check_beta(beta)
    return hs_norm(1.0 - b) ** 2 - covariance_matrix(b, n_max, basis).trace


# ---------------------------------------------------------------- families


def family_h1(beta, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> HilbertSchmidtFamily:
    from .fractional import basis_h

    b = check_beta(beta)
    spec = _spec(n_max, basis)
    comps = tuple(basis_h(n, 1.0 - b, spec) for n in range(1, n_max + 1))
    return HilbertSchmidtFamily(b, int(n_max), comps, "H_1")


def family_interp(beta, m: int, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> HilbertSchmidtFamily:
    """Components g_n = m sum_j (int_{I_j} h_n) 1_{I_j}, piecewise constant in L^2."""
    b = check_beta(beta)
    C = interval_integrals(b, int(m), int(n_max), basis)
    edges = np.arange(m + 1) / m
    grid = np.linspace(0.0, 1.0, 1024)

    def make(row):
        def ev(x):
            x = np.asarray(x, dtype=float)
            j = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, m - 1)
            return m * row[j]

        return GridFunction(grid, ev(grid), kinks=tuple(edges[1:-1]), evaluator=ev)

    return HilbertSchmidtFamily(b, int(n_max), tuple(make(C[n]) for n in range(n_max)), "H_interp")


def family_donsker(beta, m: int, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> HilbertSchmidtFamily:
    """Components in l^m: entry j of component n is sqrt(m) int_{I_j} h_n.

    Column j is H(j), the image of the j-th Rademacher sign.
    """
    b = check_beta(beta)
    C = interval_integrals(b, int(m), int(n_max), basis)
    return HilbertSchmidtFamily(b, int(n_max), math.sqrt(m) * np.array(C), "H_donsker")


def donsker_columns(beta, m: int, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> np.ndarray:
    """H(j) for j = 1..m as columns, shape (n_max, m)."""
    return np.asarray(family_donsker(beta, m, n_max, basis).components)


def _function_rule(components: Sequence[GridFunction]):
    kinks = sorted(set().union(*(set(c.kinks) for c in components)))
    singular = any(c.singular_exponent is not None or c.right_exponent is not None for c in components)
    edges = np.union1d(np.linspace(0.0, 1.0, 17), np.asarray(kinks, dtype=float))
    return composite_rule(edges, p=16, grade="both" if singular else "none")


def partial_trace(family: HilbertSchmidtFamily) -> CovOperator:
    """Gram matrix <g_n, g_k>_X of the family's components."""
    comps = family.components
    if isinstance(comps, np.ndarray):
        V = np.asarray(comps, dtype=float)
        G = V @ V.T
    else:
        if not all(isinstance(c, GridFunction) for c in comps):
            raise ValueError("family mixes component representations")
        x, w = _function_rule(comps)
        V = np.vstack([c(x) for c in comps])
        G = (V * w) @ V.T
    return CovOperator(family.beta, family.n_max, 0.5 * (G + G.T), f"tr({family.label})")


def interp_partial_trace(beta, m: int, n_max: int = DEFAULT_N, basis: str = DEFAULT_BASIS) -> CovOperator:
    """m sum_j C[n, j] C[k, j] from the interval integrals directly."""
    C = np.asarray(interval_integrals(beta, int(m), int(n_max), basis))
    return CovOperator(float(beta), int(n_max), m * (C @ C.T), "tr(H_interp)")


# ---------------------------------------------------------------- Gaussian sampling


@lru_cache(maxsize=32)
def _sqrt_cov(beta: float, n_max: int, basis: str) -> np.ndarray:
    S = _covariance(beta, n_max, basis)
    vals, vecs = np.linalg.eigh(S)
    if vals.min() < -1e-10:
        raise np.linalg.LinAlgError("covariance has a negative eigenvalue")
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    root.setflags(write=False)
    return root


def gaussian_block(beta, n_max, rng: np.random.Generator, size: int, basis: str = DEFAULT_BASIS) -> np.ndarray:
    root = _sqrt_cov(check_beta(beta), int(n_max), basis)
    return rng.standard_normal((size, int(n_max))) @ root


def sample_gaussian(beta, n_max: int = DEFAULT_N, seed: int = 0, basis: str = DEFAULT_BASIS) -> EmbeddedVector:
    """One draw of N(0, S_beta) through the symmetric square root."""
    row = gaussian_block(beta, n_max, make_rng(seed), 1, basis)[0]
    return EmbeddedVector(float(beta), int(n_max), row, basis)
