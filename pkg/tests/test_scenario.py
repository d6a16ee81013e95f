import numpy as np
import pytest

from udalab.scenario import (Dataset, LabelSets, ScenarioConfig, balanced_batches,
                             build_scenario, jaccard_index, xi_from_fractions)


def default_config(**overrides):
    cfg = ScenarioConfig()
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


class TestLabelSets:
    def test_from_counts_layout(self):
        ls = LabelSets.from_counts(2, 1, 1)
        assert ls.source_classes == (0, 1, 2)
        assert ls.target_classes == (0, 1, 3)
        assert ls.common == (0, 1)
        assert ls.source_private == (2,)
        assert ls.target_private == (3,)

    def test_derived_sets_disjoint(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            universe = rng.permutation(20)
            src = set(universe[:rng.integers(1, 15)].tolist())
            tgt = set(universe[5:5 + rng.integers(1, 15)].tolist())
            ls = LabelSets.from_sets(sorted(src), sorted(tgt))
            c, sp, tp = set(ls.common), set(ls.source_private), set(ls.target_private)
            assert c & sp == set() and c & tp == set() and sp & tp == set()
            assert c | sp == src and c | tp == tgt


class TestJaccard:
    def test_office_style_split(self):
        ls = LabelSets.from_counts(10, 10, 11)  # |Cs|=20, |Ct|=21, |C|=10
        assert jaccard_index(ls) == pytest.approx(10 / 31, abs=1e-15)
        assert jaccard_index(ls) == pytest.approx(0.3226, abs=0.0001)

    def test_identical_sets(self):
        ls = LabelSets.from_counts(5, 0, 0)
        assert jaccard_index(ls) == 1.0

    def test_disjoint_sets(self):
        ls = LabelSets.from_counts(0, 3, 4)
        assert jaccard_index(ls) == 0.0

    def test_empty_sets_raise(self):
        with pytest.raises(ValueError):
            jaccard_index(LabelSets.from_sets([], []))


class TestXiFromFractions:
    def test_full_overlap(self):
        assert xi_from_fractions(1.0, 1.0) == 1.0

    def test_office_style_value(self):
        xi = xi_from_fractions(0.5, 10 / 21)
        assert xi == pytest.approx(0.3226, abs=0.0001)
        assert xi == jaccard_index(LabelSets.from_counts(10, 10, 11))

    def test_zero_alpha(self):
        assert xi_from_fractions(0.0, 0.5) == 0.0

    def test_both_zero_raise(self):
        with pytest.raises(ValueError):
            xi_from_fractions(0.0, 0.0)

    def test_out_of_range_raise(self):
        with pytest.raises(ValueError):
            xi_from_fractions(1.5, 0.5)

    def test_agrees_exactly_with_set_definition(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            c = int(rng.integers(1, 20))  # alpha = beta = 0 is outside the domain
            sp = int(rng.integers(0, 20))
            tp = int(rng.integers(0, 20))
            ls = LabelSets.from_counts(c, sp, tp)
            ns, nt = c + sp, c + tp
            assert xi_from_fractions(c / ns, c / nt) == jaccard_index(ls)

    def test_variant_form_disagrees_on_office_split(self):
        # the alternative algebraic form lands near 0.241 instead of 0.3226
        variant = xi_from_fractions(0.5, 10 / 21, form="variant")
        assert variant == pytest.approx(0.241, abs=0.001)
        assert abs(variant - xi_from_fractions(0.5, 10 / 21)) > 0.05


class TestBuildScenario:
    def test_label_layout(self):
        src, tgt, ls = build_scenario(default_config(
            num_common=2, num_source_private=1, num_target_private=1))
        assert sorted(set(src.labels.tolist())) == [0, 1, 2]
        assert sorted(set(tgt.labels.tolist())) == [0, 1, 3]
        assert ls.common == (0, 1)

    def test_identical_seed_identical_data(self):
        a_src, a_tgt, _ = build_scenario(default_config(seed=7))
        b_src, b_tgt, _ = build_scenario(default_config(seed=7))
        assert np.array_equal(a_src.features, b_src.features)
        assert np.array_equal(a_tgt.features, b_tgt.features)
        assert np.array_equal(a_src.labels, b_src.labels)

    def test_different_seed_different_data(self):
        a_src, _, _ = build_scenario(default_config(seed=1))
        b_src, _, _ = build_scenario(default_config(seed=2))
        assert not np.array_equal(a_src.features, b_src.features)

    def test_zero_shift_zero_noise_collapses_to_means(self):
        cfg = default_config(rotation_deg=0.0, noise_scale=0.0)
        src, tgt, ls = build_scenario(cfg)
        for c in ls.common:
            s_mean = src.features[src.labels == c][0]
            t_mean = tgt.features[tgt.labels == c][0]
            assert np.allclose(s_mean, t_mean, atol=1e-12)

    def test_class_balance(self):
        src, tgt, _ = build_scenario(default_config(samples_per_class=17))
        assert set(src.class_counts().values()) == {17}
        assert set(tgt.class_counts().values()) == {17}

    def test_no_label_leaks_between_domains(self):
        src, tgt, ls = build_scenario(default_config())
        assert not set(src.labels.tolist()) & set(ls.target_private)
        assert not set(tgt.labels.tolist()) & set(ls.source_private)

    def test_zero_classes_raise(self):
        with pytest.raises(ValueError):
            build_scenario(default_config(num_common=0, num_source_private=0,
                                          num_target_private=0))

    def test_translation_length_checked(self):
        with pytest.raises(ValueError):
            build_scenario(default_config(translation=(1.0,)))

    def test_higher_feature_dim(self):
        src, _, _ = build_scenario(default_config(
            feature_dim=5, translation=(0.0,) * 5))
        assert src.features.shape[1] == 5


class TestBalancedBatches:
    def _dataset(self, classes=3, per_class=10):
        ls = LabelSets.from_counts(classes, 0, 0)
        labels = np.repeat(np.arange(classes), per_class)
        feats = np.zeros((classes * per_class, 2))
        return Dataset(feats, labels, "source", ls)

    def test_exact_division(self):
        ds = self._dataset(3, 10)
        for batch in balanced_batches(ds, 6, np.random.default_rng(0)):
            counts = np.bincount(ds.labels[batch], minlength=3)
            assert np.all(counts == 2)

    def test_uneven_batch_counts_differ_by_at_most_one(self):
        ds = self._dataset(3, 7)
        for batch in balanced_batches(ds, 7, np.random.default_rng(1)):
            counts = np.bincount(ds.labels[batch], minlength=3)
            assert counts.max() - counts.min() <= 1
            assert sorted(counts.tolist(), reverse=True) in ([3, 2, 2], [1, 1, 1])

    def test_epoch_covers_every_sample_once(self):
        ds = self._dataset(4, 9)
        seen = np.concatenate(list(balanced_batches(ds, 5, np.random.default_rng(2))))
        assert sorted(seen.tolist()) == list(range(len(ds)))

    def test_deterministic_given_seed(self):
        ds = self._dataset(3, 8)
        a = list(balanced_batches(ds, 6, np.random.default_rng(3)))
        b = list(balanced_batches(ds, 6, np.random.default_rng(3)))
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_batch_smaller_than_class_count_raises(self):
        ds = self._dataset(5, 4)
        with pytest.raises(ValueError):
            next(balanced_batches(ds, 3, np.random.default_rng(4)))

    def test_zero_batch_raises(self):
        ds = self._dataset(2, 4)
        with pytest.raises(ValueError):
            next(balanced_batches(ds, 0, np.random.default_rng(5)))

    def test_infinite_stream_restarts_epochs(self):
        ds = self._dataset(2, 4)
        stream = balanced_batches(ds, 4, np.random.default_rng(6), epochs=None)
        batches = [next(stream) for _ in range(6)]
        assert len(batches) == 6
