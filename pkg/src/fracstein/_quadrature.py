"""Gauss rules on [0, 1] and composite rules with geometric grading."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi


@lru_cache(maxsize=64)
def gauss_legendre(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for the integral over [0, 1]."""
    x, w = leggauss(p)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def gauss_jacobi(p: int, left: float, right: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_0^1 u**left * (1-u)**right * f(u) du``."""
    if left <= -1.0 or right <= -1.0:
        raise ValueError("Jacobi exponents must exceed -1")
    # scipy uses weight (1-x)^alpha (1+x)^beta on [-1, 1]
    x, w = roots_jacobi(p, right, left)
    u = 0.5 * (x + 1.0)
    w = w * 2.0 ** (-(left + right + 1.0))
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def _graded_edges(lo: float, hi: float, side: str, ratio: float, levels: int) -> np.ndarray:
    width = hi - lo
    steps = ratio ** np.arange(1, levels + 1)
    if side == "right":
        inner = hi - width * steps
        return np.concatenate(([lo], inner, [hi]))
    if side == "left":
        inner = lo + width * steps[::-1]
        return np.concatenate(([lo], inner, [hi]))
    if side == "both":
        mid = 0.5 * (lo + hi)
        a = _graded_edges(lo, mid, "left", ratio, levels)
        b = _graded_edges(mid, hi, "right", ratio, levels)
        return np.concatenate((a, b[1:]))
    return np.array([lo, hi])


def composite_rule(
    edges,
    p: int = 16,
    grade: str | list[str] = "none",
    ratio: float = 0.25,
    levels: int = 16,
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on every panel, refined geometrically toward the chosen panel ends.

    ``grade`` is one of none/left/right/both, or one such label per panel.
    Refinement handles integrands like ``(b - t)**g`` with g > -1 sitting at a
    panel end.
    """
    edges = np.asarray(edges, dtype=float)
    npan = len(edges) - 1
    sides = [grade] * npan if isinstance(grade, str) else list(grade)
    if len(sides) != npan:
        raise ValueError("need one grading label per panel")
    x0, w0 = gauss_legendre(p)
    sub = []
    for lo, hi, side in zip(edges[:-1], edges[1:], sides):
        if hi <= lo:
            continue
        sub.append(_graded_edges(lo, hi, side, ratio, levels))
    cuts = np.concatenate([np.column_stack((e[:-1], e[1:])) for e in sub])
    a, b = cuts[:, 0:1], cuts[:, 1:2]
    nodes = (a + (b - a) * x0).ravel()
    weights = ((b - a) * w0).ravel()
    return nodes, weights


def singular_end_rule(
    lo: float,
    hi: float,
    side: str,
    exponent: float,
    p: int = 20,
    ratio: float = 0.25,
    levels: int = 12,
    with_distance: bool = False,
):
    """Rule on [lo, hi] for f ~ |s - end|**exponent at one end.

    Geometric panels approach the singular end; the innermost panel uses
    Gauss-Jacobi with the given exponent. With ``with_distance`` the exact
    distances to the singular end are returned as well, since recomputing
    them from the nodes loses digits next to the end.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    width = hi - lo
    x, w = gauss_legendre(p)
    u, wu = gauss_jacobi(p, exponent, 0.0)
    fr = ratio ** np.arange(levels + 1)  # distances from the singular end, outermost first
    a, b = fr[1:], fr[:-1]
    dist = (a[:, None] + (b - a)[:, None] * x).ravel()
    wts = ((b - a)[:, None] * w).ravel()
    inner = fr[-1]
    dist = np.concatenate((dist, inner * u))
    wts = np.concatenate((wts, inner * wu / u**exponent))
    nodes = lo + width * dist if side == "left" else hi - width * dist
    if with_distance:
        return nodes, width * wts, width * dist
    return nodes, width * wts
