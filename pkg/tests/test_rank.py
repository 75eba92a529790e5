import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from charrank.errors import ConfigError, NumericInputError
from charrank.jacobian import ParameterPoint, assemble
from charrank.model import ProblemSpec
from charrank.rank import DEFAULT_PRIME, TolerancePolicy, finite_field_rank, jacobian_rank_mod_p, numeric_rank
from corpus import CORPUS, spec_id
from oracles import paper_jacobian_diag, paper_jacobian_three, rational_rank


class TestNumericRank:
    def test_zero_matrix(self):
        assert numeric_rank(np.zeros((4, 6))).rank == 0

    def test_empty(self):
        assert numeric_rank(np.zeros((0, 3))).rank == 0

    def test_paper_diag_example(self):
        res = numeric_rank(paper_jacobian_diag(1, 2, 3, 4))
        assert res.rank == 4
        assert res.backend == "svd"
        assert len(res.diagnostics["singular_values"]) == 4

    def test_gaussian_square_full_rank(self):
        rng = np.random.default_rng(50)
        assert numeric_rank(rng.standard_normal((50, 50))).rank == 50
        ints = rng.integers(-100, 101, size=(50, 50))
        assert numeric_rank(ints).rank == finite_field_rank(ints).rank == 50

    def test_low_rank_product(self):
        rng = np.random.default_rng(51)
        M = rng.standard_normal((30, 5)) @ rng.standard_normal((5, 40))
        assert numeric_rank(M).rank == 5

    def test_nonfinite_rejected(self):
        M = np.eye(3)
        M[1, 1] = np.nan
        with pytest.raises(NumericInputError):
            numeric_rank(M)
        M[1, 1] = np.inf
        with pytest.raises(NumericInputError):
            numeric_rank(M)

    def test_tolerance_modes(self):
        M = np.diag([1.0, 1e-3, 1e-9])
        assert numeric_rank(M, TolerancePolicy("absolute", 1e-6)).rank == 2
        assert numeric_rank(M, TolerancePolicy("relative", 1e-2)).rank == 1
        assert numeric_rank(M).rank == 3
        with pytest.raises(ConfigError):
            TolerancePolicy("relative", 0.0)
        with pytest.raises(ConfigError):
            TolerancePolicy("spectral")

    @pytest.mark.parametrize("jac", [paper_jacobian_diag, paper_jacobian_three])
    @pytest.mark.parametrize("point", [(1, 2, 3, 4), (2, -3, 5, 7), (1, 1, 2, 3)])
    def test_spectral_gap_at_integer_points(self, jac, point):
        s = numeric_rank(jac(*point)).diagnostics["singular_values"]
        assert s[3] > 0
        if len(s) > 4:
            assert s[3] / max(s[4], 1e-300) >= 1e6


class TestFiniteFieldRank:
    @pytest.mark.parametrize("k", [1, 5, 17])
    def test_identity(self, k):
        assert finite_field_rank(np.eye(k, dtype=np.int64), 101).rank == k

    def test_paper_three_cell_example(self):
        M = paper_jacobian_three(1, 2, 3, 4).astype(np.int64)
        assert finite_field_rank(M).rank == 4

    def test_random_residue_matrix_against_rational_oracle(self):
        rng = np.random.default_rng(2030)
        M = rng.integers(0, DEFAULT_PRIME, size=(20, 30))
        assert finite_field_rank(M).rank == rational_rank(M.tolist()) == 20

    @pytest.mark.parametrize("k", [0, 3, 11])
    def test_low_rank_integer_matrix(self, k):
        rng = np.random.default_rng(k)
        M = rng.integers(-4, 5, size=(20, k)) @ rng.integers(-4, 5, size=(k, 30)) if k else np.zeros((20, 30), dtype=np.int64)
        assert finite_field_rank(M).rank == rational_rank(M.tolist())

    def test_rank_over_small_field_can_drop(self):
        M = np.array([[1, 1], [1, 3]])
        assert finite_field_rank(M, 3).rank == 2
        assert finite_field_rank(M, 2).rank == 1

    def test_non_prime_rejected(self):
        with pytest.raises(ConfigError):
            finite_field_rank(np.eye(2, dtype=np.int64), 2**31)
        with pytest.raises(ConfigError):
            finite_field_rank(np.eye(2, dtype=np.int64), 1)

    def test_float_input_rejected(self):
        with pytest.raises(ConfigError):
            finite_field_rank(np.eye(3), 7)

    def test_large_prime_object_path(self):
        p = 2**61 - 1
        rng = np.random.default_rng(7)
        M = rng.integers(-3, 4, size=(6, 3)) @ rng.integers(-3, 4, size=(3, 8))
        res = finite_field_rank(M, p)
        assert res.rank == rational_rank(M.tolist())
        assert res.diagnostics["prime"] == p

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.int64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.integers(-5, 5)))
    def test_matches_rational_rank_small_entries(self, M):
        # every minor is bounded by Hadamard's inequality well below 2**31 - 1
        assert finite_field_rank(M).rank == rational_rank(M.tolist())

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.int64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 10)))
    def test_bounds(self, M):
        r = finite_field_rank(M, 11).rank
        assert 0 <= r <= min(M.shape)


class TestJacobianRankModP:
    def test_paper_diag(self):
        spec = ProblemSpec.matrix_completion(2, 2, 1, [(0, 0), (1, 1)])
        res = jacobian_rank_mod_p(spec, seed=3)
        assert res.rank == 4
        assert res.diagnostics == {"prime": DEFAULT_PRIME, "seed": 3}

    def test_cpd_rank_one(self):
        assert jacobian_rank_mod_p(ProblemSpec.cpd(2, 2, 2, 1), seed=4).rank == 4

    @pytest.mark.parametrize("n1,n2,r", [(2, 2, 1), (3, 5, 2), (4, 4, 4)])
    def test_empty_mask_full_row_rank(self, n1, n2, r):
        spec = ProblemSpec.matrix_completion(n1, n2, r, [])
        assert jacobian_rank_mod_p(spec, seed=5).rank == n1 * n2

    def test_non_prime(self):
        with pytest.raises(ConfigError):
            jacobian_rank_mod_p(ProblemSpec.cpd(2, 2, 2, 1), seed=1, p=100)


@pytest.mark.parametrize("spec", CORPUS, ids=spec_id)
def test_column_permutation_invariance(spec):
    rng = np.random.default_rng(99)
    ints = rng.integers(0, DEFAULT_PRIME, size=spec.param_dim)
    J_mod = assemble(ParameterPoint(spec, ints, DEFAULT_PRIME)).data
    J_real = assemble(ParameterPoint(spec, rng.standard_normal(spec.param_dim))).data
    base_mod = finite_field_rank(J_mod).rank
    base_real = numeric_rank(J_real).rank
    assert base_mod == base_real
    for _ in range(20):
        perm = rng.permutation(spec.param_dim)
        assert finite_field_rank(J_mod[:, perm]).rank == base_mod
        assert numeric_rank(J_real[:, perm]).rank == base_real
