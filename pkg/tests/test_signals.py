import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlakit.signals import (
    Signal,
    correlation,
    disambiguate,
    min_lossless_thresholds,
    normalize_unit,
    read_signal_csv,
    smooth3,
    write_signal_csv,
)

finite_floats = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


class TestSignal:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Signal([])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Signal([0.0, float("nan")])

    def test_coords(self):
        s = Signal([1, 2, 3], start=0)
        assert s.end == 2
        assert list(s.coords) == [0, 1, 2]


class TestNormalize:
    def test_affine_endpoints(self):
        assert list(normalize_unit([5, 10]).values) == [0.0, 1.0]

    def test_constant_maps_to_zero(self):
        assert list(normalize_unit([3, 3, 3]).values) == [0.0, 0.0, 0.0]

    def test_already_normalized(self):
        out = normalize_unit([0, 0.25, 1]).values
        assert np.allclose(out, [0, 0.25, 1])


class TestDisambiguate:
    def test_noop_when_ends_at_min(self):
        s = disambiguate([0, 1, 0])
        assert list(s.values) == [0, 1, 0]
        assert s.start == 1

    def test_prepend(self):
        s = disambiguate([1, 0])
        assert list(s.values) == [0, 1, 0]
        assert s.start == 0

    def test_append(self):
        s = disambiguate([0.2, 0.5])
        assert list(s.values) == [0.2, 0.5, 0.2]
        assert s.start == 1

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.uniform(size=rng.integers(1, 30))
            once = disambiguate(v)
            twice = disambiguate(once)
            assert once == twice


class TestSmooth3:
    def test_constant_fixed_point(self):
        out = smooth3([2.5, 2.5, 2.5]).values
        assert np.allclose(out, 2.5)

    def test_interior_weights(self):
        out = smooth3([0, 4, 0]).values
        assert out[1] == pytest.approx(2.0)

    def test_length_one_unchanged(self):
        assert list(smooth3([7.0]).values) == [7.0]

    def test_range_preserved(self):
        rng = np.random.default_rng(1)
        v = rng.uniform(-3, 5, size=50)
        out = smooth3(v).values
        assert out.min() >= v.min() - 1e-12
        assert out.max() <= v.max() + 1e-12


class TestCorrelation:
    def test_self_correlation_all_methods(self):
        x = [0.3, 1.2, -0.5, 2.0]
        for m in ("pearson", "spearman", "kendall"):
            assert correlation(x, x, m) == pytest.approx(1.0)

    def test_kendall_reversal(self):
        assert correlation([1, 2, 3], [3, 2, 1], "kendall") == pytest.approx(-1.0)

    def test_pearson_exact_linear(self):
        assert correlation([1, 2, 3], [2, 4, 6], "pearson") == pytest.approx(1.0)

    def test_kendall_strictly_increasing(self):
        assert correlation([1, 5, 9, 10], [0, 2, 3, 8], "kendall") == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            correlation([1, 2], [1, 2, 3])

    def test_pearson_constant_conventions(self):
        assert correlation([2, 2, 2], [2, 2, 2], "pearson") == 1.0
        assert correlation([2, 2, 2], [1, 1, 1], "pearson") == 0.0
        assert correlation([2, 2, 2], [1, 2, 3], "pearson") == 0.0

    @given(
        st.lists(finite_floats, min_size=2, max_size=30),
        st.data(),
    )
    def test_symmetry_and_bounds(self, xs, data):
        ys = data.draw(
            st.lists(finite_floats, min_size=len(xs), max_size=len(xs))
        )
        for m in ("pearson", "spearman", "kendall"):
            a = correlation(xs, ys, m)
            b = correlation(ys, xs, m)
            assert a == pytest.approx(b, abs=1e-12)
            assert -1 - 1e-12 <= a <= 1 + 1e-12


class TestMinLosslessThresholds:
    def test_gcd_reduction(self):
        assert min_lossless_thresholds([0, 0.5, 1], 0.25) == 2

    def test_clamped_to_two(self):
        assert min_lossless_thresholds([0, 1], 0.5) == 2

    def test_constant_clamps(self):
        assert min_lossless_thresholds([0.4, 0.4, 0.4], 0.1) == 2

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            min_lossless_thresholds([0, 1], 0.0)

    def test_invariant_under_duplicate_append(self):
        v = [0, 0.25, 0.75, 0.5]
        k1 = min_lossless_thresholds(v, 0.25)
        k2 = min_lossless_thresholds(v + [0.5], 0.25)
        assert k1 == k2

    def test_zigzag_counts_total_variation(self):
        # four unit jumps at eps 1 -> sum 4, gcd 1
        assert min_lossless_thresholds([0, 1, 0, 1, 0], 1.0) == 4


class TestCsv:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "s.csv"
        write_signal_csv(p, [0.1, 0.5, 0.25])
        s = read_signal_csv(p)
        assert np.allclose(s.values, [0.1, 0.5, 0.25])

    def test_rejects_non_finite(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("value\n1.0\ninf\n")
        with pytest.raises(ValueError):
            read_signal_csv(p)

    def test_optional_header(self, tmp_path):
        p = tmp_path / "no_header.csv"
        p.write_text("1.0\n2.0\n")
        assert list(read_signal_csv(p).values) == [1.0, 2.0]
