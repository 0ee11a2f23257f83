"""Evaluation back ends for the orthonormal bases and their right RL integrals."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ._quadrature import gauss_jacobi, gauss_legendre


class HaarBackend:
    """Haar system written over the step functions u_g = 1_[0, g).

    With e_n = sum_i A[n, i] u_{g_i} on the dyadic knots g_i, every right
    integral is explicit: I^a_{1-} u_g (t) = (g - t)_+^a / Gamma(a + 1).
    """

    kind = "haar"

    def __init__(self, n_max: int):
        self.n_max = n_max
        self.level = max(0, math.ceil(math.log2(n_max)))
        size = 2**self.level
        self.knots = np.arange(size + 1) / size
        A = np.zeros((n_max, size + 1))
        A[0, size] = 1.0
        n = 1
        for j in range(self.level):
            step = size >> j
            scale = 2.0 ** (j / 2.0)
            for k in range(2**j):
                if n >= n_max:
                    break
                lo = k * step
                A[n, lo] -= scale
                A[n, lo + step // 2] += 2.0 * scale
                A[n, lo + step] -= scale
                n += 1
        self.atoms = A
        self.kinks = tuple(self.knots[1:-1])
        self.panel_edges = self.knots

    def _cols(self, idx):
        rows = self.atoms if idx is None else self.atoms[np.asarray(idx)]
        cols = np.flatnonzero(np.any(rows != 0.0, axis=0))
        return rows[:, cols], self.knots[cols]

    def e(self, t, idx=None) -> np.ndarray:
        rows, g = self._cols(idx)
        t = np.asarray(t, dtype=float)
        return rows @ (t[None, :] < g[:, None]).astype(float)

    def e_antiderivative(self, t) -> np.ndarray:
        """int_0^t e_n, shape (n_max, len(t)); the Schauder functions."""
        t = np.asarray(t, dtype=float)
        return self.atoms @ np.minimum(t[None, :], self.knots[:, None])

    def h(self, order: float, t, idx=None) -> np.ndarray:
        rows, g = self._cols(idx)
        t = np.asarray(t, dtype=float)
        gap = np.clip(g[:, None] - t[None, :], 0.0, None)
        return rows @ (gap**order) / math.gamma(order + 1.0)

    def gram(self, order: float) -> np.ndarray:
        """<h_n^a, h_k^a> in closed form via the step-function pairing."""
        return gram_from_steps(self.atoms, self.knots, order)

    def pairing_with_e(self, order: float, n_terms: int) -> np.ndarray:
        """<h_k^a, e_n> for k <= n_max, n <= n_terms."""
        other = backend_for("haar", n_terms)
        # <h_k, u_g> = int_0^g h_k = H_k(0) - H_k(g) with H_k = h_k^{a+1}
        prim = self.h(order + 1.0, other.knots)
        against_steps = prim[:, :1] - prim
        return against_steps @ other.atoms.T


def step_pairing(order: float, b, d) -> np.ndarray:
    """<I^a_{1-} u_b, I^a_{1-} u_d> = <u_b, I^a_{0+} I^a_{1-} u_d>.

    Pairing the step u_b against the left integral of h_d reduces to
    int_0^{min} (b - t)^a (d - t)^a dt / Gamma(a+1)^2, which equals
    hi^a lo^(a+1) 2F1(-a, 1; a + 2; lo/hi) / ((a + 1) Gamma(a+1)^2).
    """
    from .fractional import hyp2f1

    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    lo = np.minimum(b, d)
    hi = np.maximum(b, d)
    out = np.zeros(np.broadcast(lo, hi).shape)
    lo, hi = np.broadcast_to(lo, out.shape), np.broadcast_to(hi, out.shape)
    diag = (lo == hi) & (lo > 0)
    out[diag] = lo[diag] ** (2 * order + 1) / (2 * order + 1)
    off = (lo > 0) & (lo < hi)
    if np.any(off):
        w = lo[off] / hi[off]
        out[off] = hi[off] ** order * lo[off] ** (order + 1) / (order + 1) * hyp2f1(-order, 1.0, order + 2.0, w)
    return out / math.gamma(order + 1.0) ** 2


def gram_from_steps(atoms: np.ndarray, knots: np.ndarray, order: float) -> np.ndarray:
    M = step_pairing(order, knots[:, None], knots[None, :])
    G = atoms @ M @ atoms.T
    return 0.5 * (G + G.T)


class CosineBackend:
    """e_1 = 1, e_n = sqrt(2) cos((n-1) pi t).

    With L = 1 - t and w = (n-1) pi,
    I^a_{1-} e_n (t) = c_n / Gamma(a) [cos(w t) C(L) - sin(w t) S(L)],
    C(L) = int_0^L u^(a-1) cos(w u) du and S likewise. C and S are tabulated
    cumulatively on a uniform mesh and finished with one partial cell.
    """

    kind = "cosine"

    def __init__(self, n_max: int, cells: int | None = None, p: int = 16):
        self.n_max = n_max
        self.omega = np.pi * np.arange(n_max)
        self.scale = np.where(np.arange(n_max) == 0, 1.0, math.sqrt(2.0))
        self.cells = cells or max(256, 4 * n_max)
        self.p = p
        self.kinks = ()
        self.panel_edges = np.linspace(0.0, 1.0, max(16, n_max) + 1)
        self._tables: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def e(self, t, idx=None) -> np.ndarray:
        sel = slice(None) if idx is None else np.asarray(idx)
        t = np.asarray(t, dtype=float)
        return self.scale[sel, None] * np.cos(self.omega[sel, None] * t[None, :])

    def e_antiderivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w = np.where(self.omega == 0.0, 1.0, self.omega)[:, None]
        out = self.scale[:, None] * np.sin(self.omega[:, None] * t[None, :]) / w
        out[0] = t
        return out

    def _partial(self, order, lo, hi, omega, first):
        # int_lo^hi u^(order-1) [cos, sin](omega u) du, lo/hi arrays of shape (T,)
        if first:
            u, w = gauss_jacobi(self.p, order - 1.0, 0.0)
            nodes = hi[:, None] * u
            wts = hi[:, None] ** order * w
        else:
            x, w = gauss_legendre(self.p)
            width = (hi - lo)[:, None]
            nodes = lo[:, None] + width * x
            wts = width * w * nodes ** (order - 1.0)
        arg = omega[:, None, None] * nodes[None]
        return np.sum(wts * np.cos(arg), axis=2), np.sum(wts * np.sin(arg), axis=2)

    def _table(self, order):
        if order not in self._tables:
            K = self.cells
            edges = np.arange(K + 1) / K
            c0, s0 = self._partial(order, edges[:1], edges[1:2], self.omega, True)
            c1, s1 = self._partial(order, edges[1:-1], edges[2:], self.omega, False)
            C = np.concatenate((np.zeros((self.n_max, 1)), np.cumsum(np.hstack((c0, c1)), axis=1)), axis=1)
            S = np.concatenate((np.zeros((self.n_max, 1)), np.cumsum(np.hstack((s0, s1)), axis=1)), axis=1)
            self._tables[order] = (C, S)
        return self._tables[order]

    def h(self, order: float, t, idx=None, chunk: int = 4096) -> np.ndarray:
        sel = np.arange(self.n_max) if idx is None else np.asarray(idx)
        t = np.asarray(t, dtype=float)
        C, S = self._table(order)
        C, S = C[sel], S[sel]
        om = self.omega[sel]
        K = self.cells
        out = np.empty((len(sel), t.size))
        for s in range(0, t.size, chunk):
            tt = t[s : s + chunk]
            L = 1.0 - tt
            k = np.minimum(np.floor(L * K).astype(int), K - 1)
            lo = k / K
            cl, sl = C[:, k], S[:, k]
            first = k == 0
            pc = np.empty_like(cl)
            ps = np.empty_like(sl)
            if np.any(first):
                pc[:, first], ps[:, first] = self._partial(order, lo[first], L[first], om, True)
            if np.any(~first):
                pc[:, ~first], ps[:, ~first] = self._partial(order, lo[~first], L[~first], om, False)
            cc, ss = cl + pc, sl + ps
            arg = om[:, None] * tt[None, :]
            out[:, s : s + chunk] = (np.cos(arg) * cc - np.sin(arg) * ss) * self.scale[sel, None]
        out[:, t >= 1.0] = 0.0
        return out / math.gamma(order)

    def gram(self, order: float) -> np.ndarray:
        from ._quadrature import composite_rule

        x, w = composite_rule(self.panel_edges, p=self.p, grade="right")
        H = self.h(order, x)
        G = (H * w) @ H.T
        return 0.5 * (G + G.T)

    def pairing_with_e(self, order: float, n_terms: int) -> np.ndarray:
        from ._quadrature import composite_rule

        edges = np.linspace(0.0, 1.0, max(16, n_terms, self.n_max) + 1)
        x, w = composite_rule(edges, p=self.p, grade="right")
        H = self.h(order, x)
        E = backend_for("cosine", n_terms).e(x)
        return (H * w) @ E.T


@lru_cache(maxsize=32)
def backend_for(kind: str, n_max: int):
    if kind == "haar":
        return HaarBackend(n_max)
    if kind == "cosine":
        return CosineBackend(n_max)
    raise ValueError(f"unknown basis kind {kind!r}")
