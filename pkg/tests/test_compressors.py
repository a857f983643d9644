import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greedylore.comm import LAMBDA_VEC, CommLedger
from greedylore.compressors import (
    CompressorKind,
    CompressorState,
    RankError,
    approx_top_r,
    compress,
    contraction_ratio,
    draw_sketch_vectors,
    exact_top_r_select,
    lazy_svd_update,
    local_lambdas,
    random_lowrank_projector,
    row_energies,
    sparsify,
    top_indices,
)
from greedylore.linalg import Projector, frobenius_norm_sq, is_orthonormal, svd_full


def brute_force_best(u, g, r):
    """Subset of r columns minimizing the residual, smallest index tuple on ties."""
    best, best_err = None, math.inf
    for subset in itertools.combinations(range(u.shape[1]), r):
        p = u[:, subset]
        err = frobenius_norm_sq(g - p @ (p.T @ g))
        if err < best_err - 1e-12:
            best, best_err = subset, err
    return best, best_err


class TestLazySvd:
    def test_period_start_and_hold(self):
        st_ = CompressorState(m=2, rank=1, period=3)
        p0 = lazy_svd_update(st_, np.diag([2.0, 1.0]), 0)
        np.testing.assert_array_equal(p0.basis, [[1.0], [0.0]])
        for t in (1, 2):
            assert lazy_svd_update(st_, np.diag([1.0, 9.0]), t) is p0
        p3 = lazy_svd_update(st_, np.diag([1.0, 2.0]), 3)
        np.testing.assert_allclose(p3.basis, [[0.0], [1.0]], atol=1e-15)

    def test_rank_error(self):
        with pytest.raises(RankError, match="rank exceeds row dimension"):
            CompressorState(m=2, rank=3, period=2)


class TestExactTopR:
    def test_dominant_row(self):
        p = exact_top_r_select(np.eye(2), np.diag([3.0, 1.0]), 1)
        assert p.column_indices == (0,)

    def test_full_rank_exact(self):
        g = np.random.default_rng(0).standard_normal((4, 5))
        u = svd_full(np.random.default_rng(1).standard_normal((4, 4))).u
        p = exact_top_r_select(u, g, 4)
        assert p.column_indices == (0, 1, 2, 3)
        np.testing.assert_allclose(compress(p, g), g, atol=1e-12)

    def test_tie_rows_2_5_5(self):
        g = np.array([[2.0, 0.0], [0.0, 5.0], [5.0, 0.0]])
        p = exact_top_r_select(np.eye(3), g, 2)
        assert p.column_indices == (1, 2)
        assert brute_force_best(np.eye(3), g, 2)[0] == (1, 2)

    def test_tie_break_smaller_index(self):
        assert top_indices(np.array([1.0, 2.0, 2.0, 2.0]), 2) == [1, 2]
        assert top_indices(np.zeros(4), 3) == [0, 1, 2]

    def test_rank_error(self):
        with pytest.raises(RankError):
            exact_top_r_select(np.eye(2), np.eye(2), 3)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 6), st.integers(1, 6), st.integers(0, 2**31), st.data())
    def test_matches_brute_force(self, m, n, seed, data):
        r = data.draw(st.integers(1, m))
        rng = np.random.default_rng(seed)
        u = svd_full(rng.standard_normal((m, m))).u
        g = rng.standard_normal((m, n))
        p = exact_top_r_select(u, g, r)
        _, best_err = brute_force_best(u, g, r)
        err = frobenius_norm_sq(g - compress(p, g))
        assert err <= best_err + 1e-10
        assert err <= (1 - r / m) * frobenius_norm_sq(g) + 1e-12


class TestApproxTopR:
    def test_zero_row_never_selected(self):
        rng = np.random.default_rng(0)
        for c in (1.0, -3.0, 1e-3):
            for _ in range(50):
                assert approx_top_r([np.diag([c, 0.0])], np.eye(2), 1, rng).column_indices == (0,)

    def test_cancellation_falls_to_tie_break(self):
        g = np.random.default_rng(1).standard_normal((4, 3))
        p = approx_top_r([g, -g], np.eye(4), 2, np.random.default_rng(2))
        assert p.column_indices == (0, 1)

    def test_selection_frequency_matches_two_gaussian_oracle(self):
        # P(|3a| > |b|) for a, b ~ N(0, 1) equals (2/pi) arctan 3
        exact = 2 / math.pi * math.atan(3.0)
        rng = np.random.default_rng(12345)
        trials = 10_000
        hits = sum(approx_top_r([np.diag([3.0, 1.0])], np.eye(2), 1, rng).column_indices == (0,) for _ in range(trials))
        freq = hits / trials
        se = math.sqrt(exact * (1 - exact) / trials)
        assert abs(freq - exact) <= 3 * se
        assert freq > 0.75

    def test_ledger_records_lambda_vector(self):
        led = CommLedger()
        gs = {1: np.ones((3, 5)), 2: np.zeros((3, 5))}
        approx_top_r(gs, np.eye(3), 1, np.random.default_rng(0), led, step=9)
        assert led.events == [(9, LAMBDA_VEC, 3)]

    def test_shared_stream_gives_identical_choice(self):
        gs = [np.random.default_rng(i).standard_normal((6, 4)) for i in range(3)]
        u = svd_full(sum(gs)).u
        a = approx_top_r(gs, u, 2, np.random.default_rng(99))
        b = approx_top_r(list(reversed(gs)), u, 2, np.random.default_rng(99))
        assert a.column_indices == b.column_indices

    def test_errors(self):
        with pytest.raises(ValueError):
            approx_top_r([], np.eye(2), 1, np.random.default_rng(0))
        with pytest.raises(RankError):
            approx_top_r([np.eye(2)], np.eye(2), 3, np.random.default_rng(0))

    def test_local_lambdas_definition(self):
        rng = np.random.default_rng(3)
        u = svd_full(rng.standard_normal((4, 4))).u
        g = rng.standard_normal((4, 6))
        sketch = draw_sketch_vectors(rng, 4, 6)
        lam = local_lambdas(g, u, sketch)
        for j in range(4):
            assert lam[j] == pytest.approx(u[:, j] @ g @ sketch[j], rel=1e-12)
        batch = np.stack([sketch, 2 * sketch])
        np.testing.assert_allclose(local_lambdas(g, u, batch), [lam, 2 * lam], rtol=1e-12)

    def test_unbiased_small(self):
        rng = np.random.default_rng(4)
        u = svd_full(rng.standard_normal((3, 3))).u
        locals_ = [rng.standard_normal((3, 4)) for _ in range(2)]
        g = (locals_[0] + locals_[1]) / 2
        sketch = rng.standard_normal((40_000, 3, 4))
        lam = sum(local_lambdas(gi, u, sketch) for gi in locals_) / 2
        est = lam**2
        se = est.std(axis=0, ddof=1) / math.sqrt(len(est))
        assert np.all(np.abs(est.mean(axis=0) - row_energies(u, g)) <= 3 * se)


class TestCompress:
    def test_examples(self):
        e1 = Projector(np.array([[1.0], [0.0]]))
        np.testing.assert_array_equal(compress(e1, [[0.0, 0.0], [0.0, 1.0]]), np.zeros((2, 2)))
        L = 2.0
        np.testing.assert_array_equal(compress(e1, np.diag([L, L / 2])), np.diag([L, 0.0]))
        g = np.random.default_rng(0).standard_normal((3, 3))
        np.testing.assert_allclose(compress(Projector.identity(3), g), g)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            compress(Projector.identity(2), np.ones((3, 3)))


class TestRandomLowrank:
    def test_full_rank_and_determinism(self):
        p = random_lowrank_projector(4, 4, np.random.default_rng(1))
        assert is_orthonormal(p.basis)
        g = np.random.default_rng(2).standard_normal((4, 6))
        np.testing.assert_allclose(compress(p, g), g, atol=1e-12)
        q = random_lowrank_projector(4, 4, np.random.default_rng(1))
        assert p.basis.tobytes() == q.basis.tobytes()

    def test_rank_error(self):
        with pytest.raises(RankError):
            random_lowrank_projector(2, 3, np.random.default_rng(0))

    def test_expected_projection_is_scaled_identity(self):
        m, r, draws = 4, 2, 100_000
        rng = np.random.default_rng(2024)
        acc = np.zeros((m, m))
        for _ in range(draws):
            b = random_lowrank_projector(m, r, rng).basis
            acc += b @ b.T
        np.testing.assert_allclose(acc / draws, (r / m) * np.eye(m), atol=0.01)


class TestSparsify:
    def test_top_k(self):
        g = np.array([[1.0, -5.0], [2.0, 0.0]])
        np.testing.assert_array_equal(sparsify("top_k", g, 1), [[0.0, -5.0], [0.0, 0.0]])
        np.testing.assert_array_equal(sparsify("top_k", g, 4), g)
        # equal magnitudes: row-major earlier entries win
        np.testing.assert_array_equal(sparsify("top_k", np.ones((2, 2)), 2), [[1.0, 1.0], [0.0, 0.0]])

    def test_range(self):
        with pytest.raises(ValueError):
            sparsify("top_k", np.ones((2, 2)), 0)
        with pytest.raises(ValueError):
            sparsify("top_k", np.ones((2, 2)), 5)
        with pytest.raises(ValueError):
            sparsify("rand_k", np.ones((2, 2)), 2)

    def test_rand_k_unbiased(self):
        g = np.random.default_rng(5).standard_normal((3, 4))
        rng = np.random.default_rng(6)
        draws = 100_000
        acc = np.zeros_like(g)
        for _ in range(draws):
            out = sparsify("rand_k", g, 3, rng)
            acc += out
        assert np.count_nonzero(out) == 3
        np.testing.assert_allclose(acc / draws, g, atol=0.02 * np.abs(g).max())


class TestContractionRatio:
    def test_examples(self):
        g = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert contraction_ratio(g, g) == 0.0
        assert contraction_ratio(g, np.zeros_like(g)) == 1.0
        with pytest.raises(ZeroDivisionError, match="undefined ratio"):
            contraction_ratio(np.zeros((2, 2)), g)

    def test_lazy_basis_misses_energy(self):
        p = Projector.from_columns(svd_full(np.diag([2.0, 1.0])).u, [0])
        g = np.diag([0.0, 1.0])
        assert contraction_ratio(g, compress(p, g)) == 1.0


class TestKind:
    def test_validation(self):
        CompressorKind("greedylore", rank=2)
        CompressorKind("none")
        with pytest.raises(NotImplementedError):
            CompressorKind("powersgd", rank=1)
        with pytest.raises(ValueError):
            CompressorKind("top_k", k=0)
        with pytest.raises(ValueError):
            CompressorKind("greedylore", rank=0)
        with pytest.raises(ValueError):
            CompressorKind("qsgd")
