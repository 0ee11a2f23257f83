import math

import numpy as np
import pytest

from fracstein._rng import make_rng
from fracstein.fractional import BasisSpec, uniform_grid
from fracstein.hilbert import covariance_matrix
from fracstein.processes import (
    FbmPath,
    PiecewiseLinearPath,
    StepPath,
    fbm_discrete_variance,
    fbm_kernel_matrix,
    fbm_variance_oracle,
    kernel_KH,
    kernel_KH_direct,
    poisson_arrivals,
    sample_bm_series,
    sample_donsker,
    sample_fbm,
    sample_interp_bm,
    sample_poisson,
    series_covariance,
)
from fracstein.verify import donsker_block

import frozen


def within_se(samples, target, k=4.0):
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - target) <= k * se


# ---------------------------------------------------------------- path types


def test_step_path_invariants_and_values():
    with pytest.raises(ValueError):
        StepPath(np.array([0.5, 0.2]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        StepPath(np.array([0.5]), np.array([np.nan]))
    p = StepPath(np.array([0.2, 0.6]), np.array([1.0, -2.0]), drift=0.5)
    assert np.allclose(p(np.array([0.0, 0.2, 0.5, 0.6, 1.0])), [0.0, 1.1, 1.25, -0.7, -0.5])


def test_piecewise_linear_invariants():
    with pytest.raises(ValueError):
        PiecewiseLinearPath(2, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        PiecewiseLinearPath(2, np.zeros(4))
    with pytest.raises(ValueError):
        PiecewiseLinearPath(2, np.zeros(3), np.array([0.0, 0.7, 0.6]))
    p = PiecewiseLinearPath(2, np.array([0.0, 1.0, 0.0]))
    assert np.allclose(p.slopes, [2.0, -2.0]) and p(np.array([0.25]))[0] == 0.5


def test_fbm_path_starts_at_zero():
    with pytest.raises(ValueError):
        FbmPath(0.7, uniform_grid(3), np.array([0.1, 0.0, 0.0]))


# ---------------------------------------------------------------- Poisson


def test_poisson_normalisation_and_reproducibility():
    p = sample_poisson(50.0, seed=3)
    assert np.all(p.jump_sizes == 50.0**-0.5) and p.drift == -math.sqrt(50.0)
    assert np.all((p.jump_times >= 0) & (p.jump_times < 1)) and np.all(np.diff(p.jump_times) >= 0)
    q = sample_poisson(50.0, seed=3)
    assert np.array_equal(p.jump_times, q.jump_times)


@pytest.mark.parametrize("lam", [0.0, -1.0, float("inf")])
def test_poisson_rejects_bad_intensity(lam):
    with pytest.raises(ValueError, match="λ must be positive"):
        sample_poisson(lam, seed=0)


@pytest.mark.parametrize("lam", [0.5, 50.0])
def test_poisson_mean_count(lam):
    _, owner = poisson_arrivals(lam, make_rng(1), 10_000)
    counts = np.bincount(owner, minlength=10_000)
    assert within_se(counts, lam)


def test_poisson_extension_loop_keeps_paths_separate():
    # tiny intensity forces the rare extension branch for some rows
    times, owner = poisson_arrivals(0.01, make_rng(2), 50_000)
    assert np.all(times < 1.0)
    assert np.all(np.diff(owner) >= 0)


# ---------------------------------------------------------------- walks


def test_interp_bm_endpoint_variance():
    ends = np.array([sample_interp_bm(8, s).node_values[-1] for s in range(10_000)])
    assert within_se(ends**2, 1.0)


def test_interp_bm_single_interval():
    p = sample_interp_bm(1, 4)
    assert p.node_values.shape == (2,) and p.slopes.shape == (1,)


def test_walk_rejects_bad_m():
    for fn in (sample_interp_bm, sample_donsker):
        with pytest.raises(ValueError):
            fn(0, 1)
        with pytest.raises(ValueError):
            fn(2.5, 1)


def test_donsker_increments_and_variance():
    p = sample_donsker(16, 3)
    assert p.node_values.size == 17 and p.node_values[0] == 0.0
    assert np.allclose(np.abs(np.diff(p.node_values)), 0.25)
    ends = np.array([sample_donsker(8, s).node_values[-1] for s in range(10_000)])
    assert within_se(ends**2, 1.0)


def test_donsker_coefficients_have_zero_third_moment():
    X = donsker_block(make_rng(9), 100_000, m=8, beta=0.25, n_max=8)
    for n in range(8):
        assert within_se(X[:, n] ** 3, 0.0)


# ---------------------------------------------------------------- series Brownian motion


@pytest.mark.parametrize("kind", ["haar", "cosine"])
def test_series_covariance_approaches_min(kind):
    be = BasisSpec(kind, 256).backend
    t = np.array([0.1, 0.3, 0.5, 0.8, 1.0])
    E = be.e_antiderivative(t)
    cov = E.T @ E
    assert np.max(np.abs(cov - np.minimum.outer(t, t))) < 5e-3
    var_end = np.cumsum(E[:, -1] ** 2)
    assert np.all(np.diff(var_end) >= -1e-15) and var_end[-1] == pytest.approx(1.0, abs=1e-12)


def test_series_bm_monte_carlo_covariance():
    idx = np.array([102, 307, 511, 818])
    rows = np.array([sample_bm_series(0.25, 4, seed=s, n_terms=256)[0].node_values[idx] for s in range(4000)])
    t = uniform_grid()[idx]
    for i in range(len(idx)):
        for j in range(i, len(idx)):
            prod = rows[:, i] * rows[:, j]
            # truncation at 256 terms moves the target by at most ~1e-3
            assert abs(prod.mean() - min(t[i], t[j])) <= 4 * prod.std() / math.sqrt(prod.size) + 2e-3


def test_series_embedding_covariance_matches_gaussian_target():
    S = covariance_matrix(0.25, 16).matrix
    assert np.max(np.abs(series_covariance(0.25, 16) - S)) < 1e-5


def test_series_bm_outputs_consistent():
    path, emb = sample_bm_series(0.25, 8, seed=1)
    assert path.node_values[0] == 0.0 and emb.n_max == 8
    path2, emb2 = sample_bm_series(0.25, 8, seed=1)
    assert np.array_equal(emb.coeffs, emb2.coeffs)


# ---------------------------------------------------------------- K_H kernel


def test_kernel_half_is_one():
    t, r = np.meshgrid(np.linspace(0.05, 1, 20), np.linspace(0.01, 1, 20), indexing="ij")
    mask = r < t
    assert np.all(kernel_KH(t[mask], r[mask], 0.5) == 1.0)


def test_kernel_two_routes_and_mpmath():
    fast = kernel_KH(1.0, 0.5, 0.75)
    direct = kernel_KH_direct(1.0, 0.5, 0.75)
    assert abs(fast - direct) < 1e-8
    assert fast == pytest.approx(frozen.KH_1_HALF_3_4, rel=1e-13)


@pytest.mark.parametrize("H", [0.2, 0.4, 0.65, 0.9])
def test_kernel_two_routes_across_hurst(H):
    for r in (0.5, 0.6, 0.9, 0.999):
        assert kernel_KH(1.0, r, H) == pytest.approx(kernel_KH_direct(1.0, r, H), rel=1e-9)


def test_kernel_vanishes_on_diagonal_for_h_above_half():
    gaps = np.array([1e-2, 1e-4, 1e-6])
    k = kernel_KH(1.0, 1.0 - gaps, 0.75)
    ratio = k / gaps**0.25
    assert np.all(np.diff(k) < 0)
    assert np.allclose(ratio, 1 / math.gamma(1.25), rtol=1e-2)


@pytest.mark.parametrize("t,r", [(0.5, 0.5), (0.5, 0.7), (0.5, 0.0), (1.5, 0.3)])
def test_kernel_domain(t, r):
    with pytest.raises(ValueError, match="0 < r < t <= 1"):
        kernel_KH(t, r, 0.75)


def test_hurst_domain():
    with pytest.raises(ValueError):
        kernel_KH(1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        sample_fbm(0.0, seed=1)


# ---------------------------------------------------------------- fBm


@pytest.mark.parametrize("H", [0.25, 0.75])
def test_fbm_variance_oracle(H):
    assert fbm_variance_oracle(H) == pytest.approx(frozen.FBM_VARIANCE[H], rel=1e-10)
    closed = math.gamma(2 - 2 * H) * math.cos(math.pi * H) / (math.pi * H * (1 - 2 * H))
    assert fbm_variance_oracle(H) == pytest.approx(closed, rel=1e-10)


@pytest.mark.parametrize("H", [0.3, 0.75])
def test_fbm_self_similarity_of_oracle(H):
    vals = [fbm_variance_oracle(H, t) / t ** (2 * H) for t in (0.25, 0.5, 1.0)]
    assert np.allclose(vals, vals[-1], rtol=1e-10)


@pytest.mark.parametrize("H", [0.25, 0.75])
def test_discrete_fbm_variance_close_to_oracle(H):
    var = fbm_discrete_variance(H)
    assert var[-1] == pytest.approx(fbm_variance_oracle(H), rel=1e-2)
    assert var[-1] <= fbm_variance_oracle(H)


def test_fbm_half_is_brownian():
    grid = uniform_grid(65)
    K = fbm_kernel_matrix(0.5, tuple(grid.tolist()))
    X = make_rng(4).standard_normal((40_000, 64)) @ (K * np.sqrt(np.diff(grid))).T
    for i, j in [(16, 16), (16, 48), (64, 64), (32, 64)]:
        prod = X[:, i] * X[:, j]
        assert within_se(prod, min(grid[i], grid[j]))


def test_fbm_monte_carlo_self_similarity():
    H = 0.75
    grid = uniform_grid(129)
    K = fbm_kernel_matrix(H, tuple(grid.tolist()))
    X = make_rng(6).standard_normal((40_000, 128)) @ (K * np.sqrt(np.diff(grid))).T
    exact = (K**2) @ np.diff(grid)
    for i in (32, 64, 128):
        assert within_se(X[:, i] ** 2, exact[i])
        assert exact[i] / grid[i] ** (2 * H) == pytest.approx(fbm_variance_oracle(H), rel=3e-2)


def test_sample_fbm_reproducible_and_anchored():
    a = sample_fbm(0.7, uniform_grid(33), seed=2)
    b = sample_fbm(0.7, uniform_grid(33), seed=2)
    assert a.values[0] == 0.0 and np.array_equal(a.values, b.values)
