import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hyperaug import splits
from hyperaug.errors import ConfigError, DataError, InsufficientClassError
from hyperaug.hsio import LabelMap, compact_labels

# Class histogram of the Pavia University ground truth (42776 labeled
# pixels in a 610x340 scene); only the counts matter to the split logic.
PAVIA_COUNTS = [6631, 18649, 2099, 3064, 1345, 5029, 1330, 3682, 947]


def labelmap_from_counts(counts, height, width):
    flat = np.zeros(height * width, dtype=np.uint16)
    start = 0
    for class_id, n in enumerate(counts, start=1):
        flat[start : start + n] = class_id
        start += n
    assert start <= flat.size
    return LabelMap(labels=flat.reshape(height, width))


def two_band_map(h=10, w=100, majority=900):
    # first `majority` pixels class 1, the rest class 2 (fully labeled)
    flat = np.full(h * w, 2, dtype=np.uint16)
    flat[:majority] = 1
    return LabelMap(labels=flat.reshape(h, w))


def random_labelmap(seed, h, w, classes=3, labeled_frac=0.7):
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, classes + 1, size=(h, w))
    raw[rng.random((h, w)) > labeled_frac] = 0
    compacted, _ = compact_labels(raw)
    return LabelMap(labels=compacted)


def coord_set(records):
    return {(r, c) for r, c, _ in records}


class TestSplitSet:
    def test_duplicate_coordinate_rejected(self):
        with pytest.raises(DataError):
            splits.SplitSet(train=[(0, 0, 1)], val=[(0, 0, 1)], test=[])

    def test_counts_and_histogram(self):
        s = splits.SplitSet(
            train=[(0, 0, 1), (0, 1, 1), (0, 2, 2)], val=[(1, 0, 2)], test=[]
        )
        assert s.counts() == (3, 1, 0)
        assert s.per_class_counts("train") == {1: 2, 2: 1}


class TestBalanced:
    def test_pavia_histogram_sizes(self):
        labels = labelmap_from_counts(PAVIA_COUNTS, 610, 340)
        s = splits.split_balanced(labels, train_total=2025, val_total=225, seed=3)
        assert s.counts() == (2025, 225, 40526)
        assert set(s.per_class_counts("train").values()) == {225}
        assert set(s.per_class_counts("val").values()) == {25}

    def test_small_quota_arithmetic(self):
        labels = labelmap_from_counts([10, 10], 2, 10)
        s = splits.split_balanced(labels, train_total=4, val_total=0, seed=0)
        assert s.per_class_counts("train") == {1: 2, 2: 2}

    def test_remainder_goes_to_largest_class(self):
        labels = labelmap_from_counts([10, 20, 5], 5, 7)
        s = splits.split_balanced(labels, train_total=7, val_total=0, seed=0)
        assert s.per_class_counts("train") == {1: 2, 2: 3, 3: 2}

    def test_remainder_tie_broken_by_class_id(self):
        labels = labelmap_from_counts([10, 10, 10], 3, 10)
        s = splits.split_balanced(labels, train_total=7, val_total=0, seed=0)
        assert s.per_class_counts("train") == {1: 3, 2: 2, 3: 2}

    def test_insufficient_class(self):
        labels = labelmap_from_counts([10, 3], 1, 13)
        with pytest.raises(InsufficientClassError) as exc:
            splits.split_balanced(labels, train_total=8, val_total=2, seed=0)
        assert exc.value.class_id == 2
        assert exc.value.needed == 5
        assert exc.value.available == 3

    def test_determinism(self):
        labels = random_labelmap(1, 20, 20)
        a = splits.split_balanced(labels, 12, 3, seed=5)
        b = splits.split_balanced(labels, 12, 3, seed=5)
        assert a == b
        c = splits.split_balanced(labels, 12, 3, seed=6)
        assert coord_set(a.train) != coord_set(c.train)

    def test_scenario_tag(self):
        labels = two_band_map()
        assert splits.split_balanced(labels, 4, 2, seed=0).scenario == "B"

    def test_bad_totals(self):
        with pytest.raises(ConfigError):
            splits.split_balanced(two_band_map(), 0, 0, seed=0)

    @given(
        st.integers(0, 2**31 - 1),
        st.integers(4, 16),
        st.integers(4, 16),
        st.integers(0, 2**31 - 1),
    )
    @settings(max_examples=60)
    def test_disjoint_labeled_and_near_equal(self, map_seed, h, w, seed):
        labels = random_labelmap(map_seed, h, w)
        hist = labels.class_histogram()
        assume(hist)
        n_labeled = sum(hist.values())
        train_total = max(1, n_labeled // 3)
        val_total = n_labeled // 6
        try:
            s = splits.split_balanced(labels, train_total, val_total, seed)
        except InsufficientClassError:
            assume(False)
        tr, va, te = coord_set(s.train), coord_set(s.val), coord_set(s.test)
        assert not (tr & va) and not (tr & te) and not (va & te)
        assert len(tr | va | te) == n_labeled
        for r, c, label in s.train + s.val + s.test:
            assert labels.labels[r, c] == label and label > 0
        per_class = s.per_class_counts("train")
        assert max(per_class.values()) - min(per_class.values()) <= 1
        assert s.counts()[0] == train_total
        assert s.counts()[1] == val_total


class TestImbalanced:
    def test_proportions_track_prior(self):
        # 90/10 prevalence: the mean class-1 share of a 100-pixel train
        # draw over many seeds should sit within 3 pixels of 90.
        labels = two_band_map()
        counts = []
        for seed in range(1000):
            s = splits.split_imbalanced(labels, 100, 0, seed)
            counts.append(s.per_class_counts("train").get(1, 0))
        assert abs(np.mean(counts) - 90.0) <= 3.0

    def test_single_class_matches_balanced_sizes(self):
        labels = labelmap_from_counts([30], 3, 10)
        ib = splits.split_imbalanced(labels, 10, 2, seed=4)
        b = splits.split_balanced(labels, 10, 2, seed=4)
        assert ib.counts() == b.counts()
        assert {l for _, _, l in ib.train} == {1}

    def test_all_pixels_consumed_warns(self):
        labels = labelmap_from_counts([6, 4], 1, 10)
        with pytest.warns(UserWarning, match="test is empty"):
            s = splits.split_imbalanced(labels, 10, 0, seed=0)
        assert s.counts() == (10, 0, 0)

    def test_pool_exceeding_labels_rejected(self):
        labels = labelmap_from_counts([6, 4], 1, 10)
        with pytest.raises(DataError):
            splits.split_imbalanced(labels, 10, 1, seed=0)

    @given(st.integers(0, 2**31 - 1), st.integers(0, 2**31 - 1))
    @settings(max_examples=40)
    def test_disjoint_and_exhaustive(self, map_seed, seed):
        labels = random_labelmap(map_seed, 12, 12)
        n = sum(labels.class_histogram().values())
        assume(n >= 4)
        s = splits.split_imbalanced(labels, n // 2, n // 4, seed)
        tr, va, te = coord_set(s.train), coord_set(s.val), coord_set(s.test)
        assert not (tr & va) and not (tr & te) and not (va & te)
        assert len(tr | va | te) == n


def checkerboard_map(h=20, w=20):
    # both classes appear in every tile of any coarse grid
    rows, cols = np.indices((h, w))
    return LabelMap(labels=((rows + cols) % 2 + 1).astype(np.uint16))


def tile_ids(records, labels, patch_rows, patch_cols):
    h, w = labels.height, labels.width
    return {
        (r * patch_rows // h) * patch_cols + (c * patch_cols // w)
        for r, c, _ in records
    }


class TestPatched:
    def test_2x2_half_grid(self):
        labels = checkerboard_map()
        s = splits.split_patched(labels, 2, 2, 0.5, 0.0, seed=1)
        train_tiles = tile_ids(s.train, labels, 2, 2)
        test_tiles = tile_ids(s.test, labels, 2, 2)
        assert len(train_tiles) == 2 and len(test_tiles) == 2
        assert not (train_tiles & test_tiles)

    def test_1x1_grid_degenerates_to_all_train(self):
        labels = two_band_map(h=4, w=5, majority=10)
        with pytest.warns(UserWarning, match="test is empty"):
            s = splits.split_patched(labels, 1, 1, 0.5, 0.0, seed=0)
        assert s.counts() == (20, 0, 0)

    def test_val_comes_from_training_tiles(self):
        labels = checkerboard_map()
        s = splits.split_patched(labels, 2, 2, 0.5, 0.25, seed=2)
        pool = len(s.train) + len(s.val)
        assert s.counts()[1] == round(0.25 * pool)
        train_tiles = tile_ids(s.train, labels, 2, 2)
        assert tile_ids(s.val, labels, 2, 2) <= train_tiles

    def test_missing_class_warns(self):
        # class 1 fills the left tile, class 2 the right one, so a 50%
        # 1x2 grid always leaves one class out of train
        flat = np.array([[1] * 10 + [2] * 10] * 4, dtype=np.uint16)
        labels = LabelMap(labels=flat)
        with pytest.warns(UserWarning, match="no pixels in any training tile"):
            splits.split_patched(labels, 1, 2, 0.5, 0.0, seed=0)

    def test_bad_grid(self):
        with pytest.raises(ConfigError):
            splits.split_patched(two_band_map(), 0, 2, 0.5, 0.0, seed=0)

    @given(
        st.integers(0, 2**31 - 1),
        st.integers(4, 30),
        st.integers(4, 30),
        st.integers(1, 5),
        st.integers(1, 5),
        st.floats(0.1, 0.9),
        st.integers(0, 2**31 - 1),
    )
    @settings(max_examples=60)
    def test_tile_purity(self, map_seed, h, w, pr, pc, frac, seed):
        labels = random_labelmap(map_seed, h, w)
        assume(labels.class_histogram())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = splits.split_patched(labels, pr, pc, frac, 0.1, seed)
        train_tiles = tile_ids(s.train + s.val, labels, pr, pc)
        test_tiles = tile_ids(s.test, labels, pr, pc)
        assert not (train_tiles & test_tiles)
        tr, va, te = coord_set(s.train), coord_set(s.val), coord_set(s.test)
        assert not (tr & va) and not (tr & te) and not (va & te)


class TestMonteCarlo:
    def test_single_run_equals_direct_call(self):
        labels = two_band_map()
        fn = lambda seed: splits.split_balanced(labels, 10, 2, seed)
        assert splits.monte_carlo(fn, 1, base_seed=9) == [fn(9)]

    def test_seed_sequence_and_folds(self):
        labels = two_band_map()
        fn = lambda seed: splits.split_balanced(labels, 10, 2, seed)
        runs = splits.monte_carlo(fn, 25, base_seed=100)
        assert [s.seed for s in runs] == list(range(100, 125))
        assert [s.fold for s in runs] == list(range(25))
        assert len({frozenset(coord_set(s.train)) for s in runs}) > 1

    def test_repeatable(self):
        labels = two_band_map()
        fn = lambda seed: splits.split_imbalanced(labels, 10, 2, seed)
        assert splits.monte_carlo(fn, 5, 7) == splits.monte_carlo(fn, 5, 7)

    def test_zero_runs_rejected(self):
        with pytest.raises(ConfigError):
            splits.monte_carlo(lambda s: None, 0, 0)
