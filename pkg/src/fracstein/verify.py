"""Deterministic characteristic-function gaps, cumulant oracles, Monte Carlo
covariance checks and log-log rate fits."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from ._rng import block_seeds, make_rng
from .fractional import BasisSpec, basis_rule, h_values
from .hilbert import (
    DEFAULT_BASIS,
    CovOperator,
    EmbeddedVector,
    check_beta,
    covariance_matrix,
    embed_jumps,
    gaussian_block,
    interp_partial_trace,
    interval_integrals,
)
from .processes import poisson_arrivals, rademacher, series_covariance, series_pairing, default_series_terms

MC_N = 16
BLOCK = 10_000
SE_TOL = 4.0


# ---------------------------------------------------------------- result types


@dataclass(frozen=True)
class RateSeries:
    params: tuple
    gaps: tuple
    fitted_slope: float
    slope_stderr: float
    intercept: float = 0.0

    def __post_init__(self):
        if len(self.params) < 4 or len(self.params) != len(self.gaps):
            raise ValueError("a rate fit needs at least 4 (param, gap) pairs")
        if any(not g > 0 for g in self.gaps):
            raise ValueError("gaps must be positive")

    def within(self, target: float, tol: float) -> bool:
        return abs(self.fitted_slope - target) <= tol

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.std_error < 0 or self.n_samples < 2:
            raise ValueError("invalid Monte Carlo estimate")

    def z_score(self, target: float) -> float:
        return (self.mean - target) / self.std_error if self.std_error > 0 else math.inf * (self.mean != target)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class CovarianceCheck:
    process: str
    empirical: np.ndarray
    analytic: np.ndarray
    std_error: np.ndarray
    n_samples: int
    seed: int
    params: dict = field(default_factory=dict)
    mean: np.ndarray | None = None

    @property
    def mean_z(self) -> float:
        if self.mean is None:
            return 0.0
        se = np.sqrt(np.clip(np.diag(self.empirical) - self.mean**2, 0.0, None) / self.n_samples)
        floor = 1e-9 * float(np.sqrt(np.abs(np.diag(self.analytic)).max()))
        return float(np.max(np.abs(self.mean) / np.maximum(se, floor)))

    @property
    def z(self) -> np.ndarray:
        # entries built from a single sign are deterministic; floor their SE at roundoff
        floor = 1e-9 * float(np.abs(self.analytic).max())
        return np.abs(self.empirical - self.analytic) / np.maximum(self.std_error, floor)

    @property
    def max_z(self) -> float:
        return float(self.z.max())

    @property
    def passed(self) -> bool:
        return self.max_z <= SE_TOL

    def to_dict(self) -> dict:
        return {
            "process": self.process,
            "params": self.params,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "max_abs_error": float(np.abs(self.empirical - self.analytic).max()),
            "max_z": self.max_z,
            "mean_max_z": self.mean_z,
            "tolerance_se": SE_TOL,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class CumulantCheck:
    estimate: MCEstimate
    oracle: float
    params: dict = field(default_factory=dict)
    tolerance_se: float = SE_TOL

    @property
    def z(self) -> float:
        return self.estimate.z_score(self.oracle)

    @property
    def passed(self) -> bool:
        return abs(self.z) <= self.tolerance_se

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.to_dict(),
            "oracle": self.oracle,
            "z": self.z,
            "passed": self.passed,
            "tolerance_se": self.tolerance_se,
            "params": self.params,
        }


# ---------------------------------------------------------------- rate fits


def rate_fit(params: Sequence[float], gaps: Sequence[float]) -> RateSeries:
    """Least-squares slope of log(gap) against log(param)."""
    params = tuple(float(p) for p in params)
    gaps = tuple(float(g) for g in gaps)
    if len(params) < 4 or len(params) != len(gaps):
        raise ValueError("a rate fit needs at least 4 (param, gap) pairs")
    if any(not g > 0 for g in gaps) or any(not p > 0 for p in params):
        raise ValueError("gaps and parameters must be positive")
    fit = stats.linregress(np.log(params), np.log(gaps))
    return RateSeries(params, gaps, float(fit.slope), float(fit.stderr), float(fit.intercept))


# ---------------------------------------------------------------- deterministic gaps


def _sin_minus_x(x: np.ndarray) -> np.ndarray:
    out = np.sin(x) - x
    small = np.abs(x) < 0.1
    xs = x[small]
    x2 = xs * xs
    # Horner form of -x^3/6 + x^5/120 - ... up to x^13
    out[small] = xs * x2 * (
        -1 / 6 + x2 * (1 / 120 + x2 * (-1 / 5040 + x2 * (1 / 362880 + x2 * (-1 / 39916800 + x2 / 6227020800))))
    )
    return out


def _abs_expm1(re: float, im: float) -> float:
    em = math.expm1(re)
    real = em * math.cos(im) - 2.0 * math.sin(0.5 * im) ** 2
    imag = (em + 1.0) * math.sin(im)
    return math.hypot(real, imag)


def default_direction(n_max: int) -> np.ndarray:
    v = 1.0 / np.arange(1, n_max + 1)
    return v / np.linalg.norm(v)


def _char_setup(beta, lam, theta, n_max, basis):
    b = check_beta(beta)
    lam = float(lam)
    if not lam > 0:
        raise ValueError(f"λ must be positive, got {lam}")
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    n_max = int(n_max or theta.size)
    if theta.size != n_max:
        raise ValueError("theta length must equal n_max")
    return b, lam, theta, n_max


def poisson_log_characteristic(beta, lam, theta, n_max: int | None = None, basis: str = DEFAULT_BASIS) -> complex:
    """lam int (e^{i s} - 1 - i s) with s = theta.H_1(tau) / sqrt(lam), on the basis-aligned graded rule."""
    b, lam, theta, n_max = _char_setup(beta, lam, theta, n_max, basis)
    spec = BasisSpec(basis, n_max)
    x, w = basis_rule(spec)
    s = (theta @ h_values(1.0 - b, spec, x)) / math.sqrt(lam)
    re = -2.0 * lam * float(np.sum(w * np.sin(0.5 * s) ** 2))
    im = lam * float(np.sum(w * _sin_minus_x(s)))
    return complex(re, im)


def char_gap_poisson(beta, lam, theta, n_max: int | None = None, basis: str = DEFAULT_BASIS) -> float:
    """|E exp(i theta.J N_lam) - exp(-theta.S theta / 2)|, no sampling.

    Both sides are explicit; the difference is formed as
    e^{-q/2} |expm1(L + q/2)| so that tiny gaps keep their digits.
    """
    b, lam, theta, n_max = _char_setup(beta, lam, theta, n_max, basis)
    if not np.any(theta):
        return 0.0
    L = poisson_log_characteristic(b, lam, theta, n_max, basis)
    q = float(theta @ covariance_matrix(b, n_max, basis).matrix @ theta)
    return math.exp(-0.5 * q) * _abs_expm1(L.real + 0.5 * q, L.imag)


def rate_poisson(beta, lambdas, theta=None, n_max: int = 32, basis: str = DEFAULT_BASIS) -> RateSeries:
    theta = default_direction(n_max) if theta is None else np.asarray(theta, dtype=float)
    gaps = [char_gap_poisson(beta, lam, theta, n_max, basis) for lam in lambdas]
    return rate_fit(lambdas, gaps)


def rate_interp(beta, ms, n_max: int = 128, basis: str = DEFAULT_BASIS) -> RateSeries:
    from .stein import bound_interp

    gaps = [2.0 * bound_interp(beta, m, n_max, basis).numeric_certificate for m in ms]
    return rate_fit(ms, gaps)


# ---------------------------------------------------------------- Monte Carlo engine


def run_blocks(block_fn: Callable, n_samples: int, seed: int, workers: int = 1, block: int = BLOCK) -> list:
    """Apply ``block_fn(rng, size)`` to consecutive blocks with spawned seeds.

    Block b always receives stream b and results come back in block order,
    so any reduction over them is independent of ``workers``.
    """
    n_samples = int(n_samples)
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    sizes = [block] * (n_samples // block) + ([n_samples % block] if n_samples % block else [])
    seeds = block_seeds(seed, len(sizes))
    jobs = list(zip(seeds, sizes))
    if workers <= 1:
        return [_call_block(block_fn, s, n) for s, n in jobs]
    with ProcessPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(_call_block, [block_fn] * len(jobs), *zip(*jobs)))


def _call_block(fn, seed_seq, size):
    return fn(make_rng(seed_seq), size)


def _moments(X: np.ndarray) -> tuple:
    X2 = X * X
    return (X.shape[0], X.sum(axis=0), X.T @ X, X2.T @ X2)


def _reduce(parts: list) -> tuple:
    n, s1, s2, s4 = parts[0]
    for p in parts[1:]:
        n, s1, s2, s4 = n + p[0], s1 + p[1], s2 + p[2], s4 + p[3]
    return n, s1, s2, s4


def _centred_covariance(n, s1, s2, s4):
    """Known-mean estimator s2/n; its SE is exactly sqrt(Var(x_i x_j) / n)."""
    cov = s2 / n
    var_prod = np.clip(s4 / n - cov**2, 0.0, None)
    return cov, np.sqrt(var_prod / n), s1 / n


# block generators: each returns embedded coordinates, shape (size, n_max)


def poisson_block(rng, size, *, lam, beta, n_max, basis=DEFAULT_BASIS):
    times, owner = poisson_arrivals(lam, rng, size)
    return embed_jumps(times, lam**-0.5, owner, size, -math.sqrt(lam), beta, n_max, basis)


def interp_block(rng, size, *, m, beta, n_max, basis=DEFAULT_BASIS):
    C = np.asarray(interval_integrals(beta, m, n_max, basis))
    slopes = m * rng.normal(0.0, math.sqrt(1.0 / m), (size, m))
    return slopes @ C.T


def donsker_block(rng, size, *, m, beta, n_max, basis=DEFAULT_BASIS):
    C = np.asarray(interval_integrals(beta, m, n_max, basis))
    slopes = math.sqrt(m) * rademacher(rng, (size, m))
    return slopes @ C.T


def series_block(rng, size, *, beta, n_max, n_terms, basis=DEFAULT_BASIS):
    A = series_pairing(beta, n_max, n_terms, basis)
    return rng.standard_normal((size, n_terms)) @ A.T


def gaussian_samples_block(rng, size, *, beta, n_max, basis=DEFAULT_BASIS):
    return gaussian_block(beta, n_max, rng, size, basis)


def _moment_block(gen, rng, size):
    return _moments(gen(rng, size))


PROCESSES = ("poisson", "interp", "donsker", "bm", "gaussian")


def process_setup(process: str, beta, n_max: int, m: int = 8, lam: float = 50.0, basis: str = DEFAULT_BASIS):
    """Block generator and analytic covariance for one process."""
    b = check_beta(beta)
    if process == "poisson":
        if not lam > 0:
            raise ValueError(f"λ must be positive, got {lam}")
        gen = partial(poisson_block, lam=float(lam), beta=b, n_max=n_max, basis=basis)
        return gen, covariance_matrix(b, n_max, basis).matrix
    if process in ("interp", "donsker"):
        if int(m) != m or m < 1:
            raise ValueError(f"m must be an integer >= 1, got {m}")
        fn = interp_block if process == "interp" else donsker_block
        gen = partial(fn, m=int(m), beta=b, n_max=n_max, basis=basis)
        return gen, interp_partial_trace(b, int(m), n_max, basis).matrix
    if process == "bm":
        K = default_series_terms(n_max)
        gen = partial(series_block, beta=b, n_max=n_max, n_terms=K, basis=basis)
        return gen, series_covariance(b, n_max, K, basis)
    if process == "gaussian":
        gen = partial(gaussian_samples_block, beta=b, n_max=n_max, basis=basis)
        return gen, covariance_matrix(b, n_max, basis).matrix
    raise ValueError(f"unknown process {process!r}; choose from {PROCESSES}")


def covariance_check(
    process: str,
    beta=0.25,
    n_max: int = MC_N,
    n_samples: int = 100_000,
    seed: int = 0,
    m: int = 8,
    lam: float = 50.0,
    workers: int = 1,
    basis: str = DEFAULT_BASIS,
) -> CovarianceCheck:
    """Empirical second moments of the (centred) embedded samples against the analytic Gram matrix."""
    gen, analytic = process_setup(process, beta, n_max, m, lam, basis)
    n, s1, s2, s4 = _reduce(run_blocks(partial(_moment_block, gen), n_samples, seed, workers))
    cov, se, mean = _centred_covariance(n, s1, s2, s4)
    params = {"beta": float(beta), "n_max": n_max}
    if process == "poisson":
        params["lambda"] = float(lam)
    if process in ("interp", "donsker"):
        params["m"] = int(m)
    return CovarianceCheck(process, cov, analytic, se, int(n), int(seed), params, mean)


def empirical_covariance(samples) -> CovOperator:
    """Unbiased sample covariance of embedded vectors (or an (S, N) array)."""
    if isinstance(samples, np.ndarray):
        X = np.asarray(samples, dtype=float)
        beta = float("nan")
    else:
        samples = list(samples)
        if len(samples) < 2:
            raise ValueError("need at least 2 samples")
        keys = {(s.beta, s.n_max) for s in samples}
        if len(keys) != 1:
            raise ValueError("samples differ in beta or truncation")
        beta = samples[0].beta
        X = np.vstack([s.coeffs for s in samples])
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need an (S, N) array with S >= 2")
    cov = np.cov(X, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
    return CovOperator(beta, X.shape[1], cov, "empirical")


# ---------------------------------------------------------------- cumulants


def third_cumulant_oracle(beta, lam, v, n_max: int | None = None, basis: str = DEFAULT_BASIS) -> float:
    """E[(v.J N_lam)^3] = lam^{-1/2} int (sum_n v_n h_n)^3."""
    b = check_beta(beta)
    lam = float(lam)
    if not lam > 0:
        raise ValueError(f"λ must be positive, got {lam}")
    v = np.asarray(v, dtype=float)
    n_max = int(n_max or v.size)
    spec = BasisSpec(basis, n_max)
    x, w = basis_rule(spec)
    g = v @ h_values(1.0 - b, spec, x)
    return float(np.sum(w * g**3)) / math.sqrt(lam)


def _projected_powers(gen, v, rng, size):
    y = gen(rng, size) @ v
    return np.array([y.size, y.sum(), (y**2).sum(), (y**3).sum(), (y**4).sum(), (y**6).sum(), (y**8).sum()])


def third_cumulant_poisson(
    beta=0.25,
    lam=50.0,
    v=None,
    n_max: int = MC_N,
    n_samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    basis: str = DEFAULT_BASIS,
) -> CumulantCheck:
    """Monte Carlo E[(v.x)^3] for the embedded Poisson path against the oracle."""
    v = default_direction(n_max) if v is None else np.asarray(v, dtype=float)
    if v.size != n_max or not math.isclose(float(np.linalg.norm(v)), 1.0, rel_tol=1e-9):
        raise ValueError("v must be a unit vector of length n_max")
    gen, _ = process_setup("poisson", beta, n_max, lam=lam, basis=basis)
    tot = sum(run_blocks(partial(_projected_powers, gen, v), n_samples, seed, workers))
    n = tot[0]
    m3 = tot[3] / n
    var = tot[5] / n - m3**2
    est = MCEstimate(float(m3), math.sqrt(max(var, 0.0) / n), int(n), int(seed))
    oracle = third_cumulant_oracle(beta, lam, v, n_max, basis)
    return CumulantCheck(est, oracle, {"beta": float(beta), "lambda": float(lam), "n_max": n_max})


def donsker_fourth_cumulant_oracle(beta, m: int, v, n_max: int = MC_N, basis: str = DEFAULT_BASIS) -> float:
    """-2 sum_j (v.H(j))^4 for the embedded walk (Rademacher fourth cumulant -2)."""
    from .hilbert import donsker_columns

    proj = np.asarray(v, dtype=float) @ donsker_columns(beta, m, n_max, basis)
    return float(-2.0 * np.sum(proj**4))


def fourth_cumulant_donsker(
    beta=0.25,
    m: int = 8,
    v=None,
    n_max: int = MC_N,
    n_samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    basis: str = DEFAULT_BASIS,
) -> CumulantCheck:
    """k4 = E y^4 - 3 (E y^2)^2 with a delta-method standard error."""
    v = default_direction(n_max) if v is None else np.asarray(v, dtype=float)
    gen, _ = process_setup("donsker", beta, n_max, m=m, basis=basis)
    tot = sum(run_blocks(partial(_projected_powers, gen, v), n_samples, seed, workers))
    n = tot[0]
    m2, m4, m6, m8 = tot[2] / n, tot[4] / n, tot[5] / n, tot[6] / n
    k4 = m4 - 3 * m2**2
    # gradient (1, -6 m2) applied to Cov(y^4, y^2)
    var = (m8 - m4**2) - 12 * m2 * (m6 - m4 * m2) + 36 * m2**2 * (m4 - m2**2)
    est = MCEstimate(float(k4), math.sqrt(max(var, 0.0) / n), int(n), int(seed))
    oracle = donsker_fourth_cumulant_oracle(beta, m, v, n_max, basis)
    return CumulantCheck(est, oracle, {"beta": float(beta), "m": int(m), "n_max": n_max}, tolerance_se=5.0)


def report_json(obj: dict) -> str:
    from .stein import SCHEMA_VERSION

    return json.dumps(dict(obj, schema_version=SCHEMA_VERSION), indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))
