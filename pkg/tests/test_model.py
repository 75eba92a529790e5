import json

import pytest
from hypothesis import given, strategies as st

from charrank.errors import InvalidSpecError, MaskParseError, UnsupportedVariantError
from charrank.model import (
    ObservationPattern,
    ProblemSpec,
    Variant,
    cpd_tangent_dim,
    dimension_summary,
    manifold_dim,
    necessary_sample_bound,
)

DIAG = [(0, 0), (1, 1)]
THREE = [(0, 0), (0, 1), (1, 0)]


class TestManifoldDim:
    @pytest.mark.parametrize("n1,n2,r,expected", [(2, 2, 1, 3), (10, 10, 3, 51), (4, 7, 2, 18)])
    def test_values(self, n1, n2, r, expected):
        assert manifold_dim(n1, n2, r) == expected

    @pytest.mark.parametrize("n", [1, 2, 5, 9])
    def test_full_rank_is_whole_space(self, n):
        assert manifold_dim(n, n, n) == n * n

    def test_rank_above_min_extent(self):
        with pytest.raises(InvalidSpecError):
            manifold_dim(2, 5, 3)

    @given(st.integers(1, 30), st.integers(1, 30), st.data())
    def test_symmetric_and_increasing(self, n1, n2, data):
        r = data.draw(st.integers(1, min(n1, n2)))
        assert manifold_dim(n1, n2, r) == manifold_dim(n2, n1, r)
        if r < min(n1, n2):
            assert manifold_dim(n1, n2, r + 1) > manifold_dim(n1, n2, r)


class TestCpdTangentDim:
    @pytest.mark.parametrize("args,expected", [((2, 2, 2, 1), 4), ((3, 4, 5, 2), 20)])
    def test_values(self, args, expected):
        assert cpd_tangent_dim(*args) == expected

    @pytest.mark.parametrize("n", range(2, 11))
    def test_cubic_rank_one(self, n):
        assert cpd_tangent_dim(n, n, n, 1) == 3 * n - 2

    def test_nonpositive(self):
        with pytest.raises(InvalidSpecError):
            cpd_tangent_dim(2, 0, 2, 1)


class TestObservationPattern:
    def test_canonical_order_and_dedup_check(self):
        pat = ObservationPattern.from_indices((2, 2), [(1, 1), (0, 0)])
        assert pat.indices == ((0, 0), (1, 1))
        assert pat.m == 2
        with pytest.raises(InvalidSpecError):
            ObservationPattern.from_indices((2, 2), [(0, 0), (0, 0)])

    @pytest.mark.parametrize("bad", [[(2, 0)], [(0, -1)], [(0, 0, 0)]])
    def test_invalid_tuples(self, bad):
        with pytest.raises(InvalidSpecError):
            ObservationPattern.from_indices((2, 2), bad)

    def test_complement_is_lexicographic(self):
        pat = ObservationPattern.from_indices((2, 2), DIAG)
        assert pat.unobserved() == [(0, 1), (1, 0)]
        assert pat.unobserved_linear().tolist() == [1, 2]

    def test_tensor_linearization(self):
        pat = ObservationPattern.from_indices((2, 3, 4), [(1, 2, 3), (0, 1, 2)])
        assert pat.linear_indices().tolist() == [(0 * 3 + 1) * 4 + 2, (1 * 3 + 2) * 4 + 3]
        assert ObservationPattern.from_linear((2, 3, 4), [23, 6]) == pat

    def test_degenerate_patterns(self):
        assert ObservationPattern.empty((3, 3)).m == 0
        assert ObservationPattern.full((2, 2, 2)).m == 8

    def test_parse_text(self):
        pat = ObservationPattern.parse_text("0 0\n1 1\n", (2, 2))
        assert pat.indices == ((0, 0), (1, 1))
        pat = ObservationPattern.parse_text("# comment\n0 0 0\n", (2, 2, 2))
        assert pat.indices == ((0, 0, 0),)
        pat = ObservationPattern.parse_text("\n  1 0   # trailing\n\n", (2, 2))
        assert pat.indices == ((1, 0),)

    @pytest.mark.parametrize("text,line,fragment", [
        ("2 0\n", 1, "out of range"),
        ("0 0\n0 1 1\n", 2, "arity"),
        ("0 0\n# c\n0 0\n", 3, "duplicate"),
        ("0 x\n", 1, "non-integer"),
    ])
    def test_parse_errors_carry_line(self, text, line, fragment):
        with pytest.raises(MaskParseError) as info:
            ObservationPattern.parse_text(text, (2, 2))
        assert info.value.line == line
        assert fragment in str(info.value)

    @given(st.sets(st.tuples(st.integers(0, 3), st.integers(0, 4), st.integers(0, 2)), max_size=60))
    def test_text_round_trip(self, cells):
        pat = ObservationPattern.from_indices((4, 5, 3), cells)
        assert ObservationPattern.parse_text(pat.to_text(), (4, 5, 3)) == pat


class TestProblemSpec:
    def test_param_dims(self):
        mc = ProblemSpec.matrix_completion(2, 2, 1, DIAG)
        assert (mc.ambient_dim, mc.param_dim) == (4, 6)
        assert ProblemSpec.cpd(3, 4, 5, 2).param_dim == 24
        tc = ProblemSpec.tensor_completion(2, 2, 2, 1, [(0, 0, 0)])
        assert tc.param_dim == 6 + 7
        assert [b for b, _ in tc.blocks()] == ["A", "B", "C", "X"]

    def test_invariants(self):
        with pytest.raises(InvalidSpecError):
            ProblemSpec.matrix_completion(2, 2, 3, DIAG)
        with pytest.raises(InvalidSpecError):
            ProblemSpec(Variant.MATRIX_COMPLETION, (2, 2), 1, ObservationPattern.empty((2, 3)))
        with pytest.raises(InvalidSpecError):
            ProblemSpec(Variant.TENSOR_COMPLETION, (2, 2, 2), 1, None)
        with pytest.raises(InvalidSpecError):
            ProblemSpec.cpd(2, 2, 2, 0)

    def test_cpd_rank_may_exceed_extents(self):
        assert ProblemSpec.cpd(2, 2, 2, 3).rank == 3

    @pytest.mark.parametrize("spec", [
        ProblemSpec.matrix_completion(3, 4, 2, [(0, 1), (2, 3)]),
        ProblemSpec.cpd(2, 3, 4, 2),
        ProblemSpec.tensor_completion(2, 2, 3, 1, [(1, 1, 2)]),
    ])
    def test_serialization_round_trip(self, spec):
        again = ProblemSpec.from_json(spec.to_json())
        assert again == spec
        assert dimension_summary(again) == dimension_summary(spec)

    def test_from_dict_with_mask_path(self, tmp_path):
        (tmp_path / "m.mask").write_text("0 0\n1 1\n")
        doc = {"variant": "MatrixCompletion", "dims": [2, 2], "rank": 1, "mask_path": "m.mask"}
        spec = ProblemSpec.from_dict(json.loads(json.dumps(doc)), base_dir=tmp_path)
        assert spec.pattern.indices == ((0, 0), (1, 1))


class TestDimensionSummary:
    def test_paper_examples(self):
        s = dimension_summary(ProblemSpec.matrix_completion(2, 2, 1, DIAG))
        assert (s.tangent_dim, s.complement_dim, s.wellposed_target) == (3, 2, 5)
        s = dimension_summary(ProblemSpec.matrix_completion(2, 2, 1, THREE))
        assert (s.tangent_dim, s.complement_dim, s.wellposed_target) == (3, 1, 4)

    def test_cpd(self):
        s = dimension_summary(ProblemSpec.cpd(2, 2, 2, 1))
        assert (s.tangent_dim, s.complement_dim, s.wellposed_target) == (4, 0, 4)

    def test_tensor_completion(self):
        s = dimension_summary(ProblemSpec.tensor_completion(3, 3, 3, 1, [(0, 0, 0)]))
        assert s.wellposed_target == 7 + 26


class TestNecessarySampleBound:
    def test_values(self):
        assert necessary_sample_bound(ProblemSpec.matrix_completion(10, 10, 3, [])) == 51
        assert necessary_sample_bound(ProblemSpec.matrix_completion(2, 2, 1, [])) == 3
        for n in range(2, 8):
            assert necessary_sample_bound(ProblemSpec.tensor_completion(n, n, n, 1, [])) == 3 * n - 2

    def test_cpd_unsupported(self):
        with pytest.raises(UnsupportedVariantError):
            necessary_sample_bound(ProblemSpec.cpd(2, 2, 2, 1))

    @given(st.integers(1, 5), st.integers(1, 5), st.data())
    def test_bound_equivalence(self, n1, n2, data):
        r = data.draw(st.integers(1, min(n1, n2)))
        cells = data.draw(st.sets(st.tuples(st.integers(0, n1 - 1), st.integers(0, n2 - 1))))
        spec = ProblemSpec.matrix_completion(n1, n2, r, cells)
        s = dimension_summary(spec)
        assert (s.wellposed_target <= s.ambient_dim) == (spec.m >= necessary_sample_bound(spec))

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.data())
    def test_bound_equivalence_tensor(self, n1, n2, n3, r, data):
        cells = data.draw(st.sets(st.tuples(st.integers(0, n1 - 1), st.integers(0, n2 - 1), st.integers(0, n3 - 1))))
        spec = ProblemSpec.tensor_completion(n1, n2, n3, r, cells)
        s = dimension_summary(spec)
        assert (s.wellposed_target <= s.ambient_dim) == (spec.m >= necessary_sample_bound(spec))
