import numpy as np
import pytest

from micropred.features import (
    FeatureSet,
    FeatureVector,
    aggregate,
    aggregate_sets,
    append_composition,
    apply_standardizer,
    fit_standardizer,
    invert_standardizer,
    sam_patch_pool,
)


class TestFeatureVector:
    def test_basic(self):
        v = FeatureVector("s1", [1.0, 2.0], "e")
        assert len(v) == 2
        assert v.values.dtype == np.float64

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            FeatureVector("s1", [1.0, np.nan], "e")

    def test_rejects_empty_and_2d(self):
        with pytest.raises(ValueError):
            FeatureVector("s1", [], "e")
        with pytest.raises(ValueError):
            FeatureVector("s1", [[1.0]], "e")


class TestFeatureSet:
    def test_subset_reorders(self, rng):
        fset = FeatureSet(["a", "b", "c"], rng.standard_normal((3, 4)), "e")
        sub = fset.subset(["c", "a"])
        assert sub.ids == ("c", "a")
        assert (sub.matrix[0] == fset.matrix[2]).all()
        assert (sub.matrix[1] == fset.matrix[0]).all()

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            FeatureSet(["a", "a"], np.zeros((2, 2)), "e")

    def test_matrix_read_only(self):
        fset = FeatureSet(["a"], [[1.0, 2.0]], "e")
        with pytest.raises(ValueError):
            fset.matrix[0, 0] = 9.0

    def test_from_vectors_rejects_mixed_extractors(self):
        vecs = [FeatureVector("a", [1.0], "e1"),
                FeatureVector("b", [2.0], "e2")]
        with pytest.raises(ValueError):
            FeatureSet.from_vectors(vecs)


class TestAggregate:
    def test_concat_order_and_suffix(self):
        secs = [FeatureVector("s", [1.0, 2.0], "tp"),
                FeatureVector("s", [3.0], "tp"),
                FeatureVector("s", [4.0, 5.0], "tp")]
        out = aggregate(secs, "concat")
        np.testing.assert_array_equal(out.values, [1, 2, 3, 4, 5])
        assert out.extractor_id == "tp/concat"
        assert out.sample_id == "s"

    def test_mean_elementwise(self):
        secs = [FeatureVector("s", [1.0, 4.0], "tp"),
                FeatureVector("s", [3.0, 0.0], "tp")]
        out = aggregate(secs, "mean")
        np.testing.assert_array_equal(out.values, [2.0, 2.0])
        assert out.extractor_id == "tp/mean"

    def test_mean_rejects_length_mismatch(self):
        secs = [FeatureVector("s", [1.0, 4.0], "tp"),
                FeatureVector("s", [3.0], "tp")]
        with pytest.raises(ValueError):
            aggregate(secs, "mean")

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            aggregate([FeatureVector("s", [1.0], "tp")], "max")

    def test_concat_length_is_sum(self, rng):
        for _ in range(100):
            lengths = rng.integers(1, 6, size=int(rng.integers(1, 5)))
            secs = [FeatureVector("s", rng.standard_normal(int(n)), "tp")
                    for n in lengths]
            assert len(aggregate(secs, "concat")) == int(lengths.sum())

    def test_aggregate_sets_aligns_ids(self, rng):
        ids = ["a", "b", "c"]
        s1 = FeatureSet(ids, rng.standard_normal((3, 2)), "tp")
        # second set in a different id order; alignment must be by id
        s2 = FeatureSet(["c", "a", "b"], rng.standard_normal((3, 2)), "tp")
        out = aggregate_sets([s1, s2], "concat")
        assert out.ids == ("a", "b", "c")
        np.testing.assert_array_equal(
            out.vector("b").values,
            np.concatenate([s1.vector("b").values, s2.vector("b").values]))


class TestComposition:
    def test_append_at_tail(self):
        v = FeatureVector("s", [9.0, 8.0], "tp/concat")
        comp = np.arange(22, dtype=float)
        out = append_composition(v, comp)
        assert len(out) == 24
        np.testing.assert_array_equal(out.values[:2], [9.0, 8.0])
        np.testing.assert_array_equal(out.values[2:], comp)
        assert out.extractor_id == "tp/concat+comp"

    def test_arity_enforced(self):
        v = FeatureVector("s", [9.0], "tp")
        with pytest.raises(ValueError, match="composition arity"):
            append_composition(v, np.arange(5, dtype=float))


class TestStandardizer:
    def test_population_statistics(self):
        # hand oracle: column [1, 3] -> mean 2, population std 1
        fset = FeatureSet(["a", "b"], [[1.0, 10.0], [3.0, 10.0]], "e")
        s = fit_standardizer(fset)
        np.testing.assert_array_equal(s.means, [2.0, 10.0])
        np.testing.assert_array_equal(s.stds, [1.0, 0.0])

    def test_transform_and_zero_variance_dims(self):
        fset = FeatureSet(["a", "b"], [[1.0, 10.0], [3.0, 10.0]], "e")
        s = fit_standardizer(fset)
        out = apply_standardizer(s, fset)
        np.testing.assert_array_equal(out.matrix[:, 0], [-1.0, 1.0])
        # constant dimension maps to 0, not inf/nan
        np.testing.assert_array_equal(out.matrix[:, 1], [0.0, 0.0])
        assert out.extractor_id.endswith("/std")

    def test_round_trip_on_varying_dims(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 8))
            d = int(rng.integers(1, 6))
            fset = FeatureSet([f"s{i}" for i in range(n)],
                              rng.standard_normal((n, d)) * 3 + 1, "e")
            s = fit_standardizer(fset)
            back = invert_standardizer(s, apply_standardizer(s, fset))
            np.testing.assert_allclose(back.matrix, fset.matrix,
                                       rtol=0, atol=1e-12)

    def test_standardized_moments(self, rng):
        fset = FeatureSet([f"s{i}" for i in range(20)],
                          rng.standard_normal((20, 4)) * 5 + 7, "e")
        out = apply_standardizer(fit_standardizer(fset), fset)
        np.testing.assert_allclose(out.matrix.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(out.matrix.std(axis=0), 1, atol=1e-12)

    def test_needs_two_samples(self):
        fset = FeatureSet(["a"], [[1.0]], "e")
        with pytest.raises(ValueError):
            fit_standardizer(fset)


class TestSamPatchPool:
    def test_mean_over_patches(self, rng):
        tokens = rng.standard_normal((12, 5))
        np.testing.assert_allclose(sam_patch_pool(tokens),
                                   tokens.mean(axis=0), atol=1e-15)

    def test_rejects_1d(self):
        with pytest.raises(ValueError):
            sam_patch_pool(np.ones(5))
