import numpy as np
import pytest

from collabtrack.imagery import GrayFrame, state_for_box, state_to_box
from collabtrack.metrics import Box, overlap
from collabtrack.sampling import (
    PositiveReservoir,
    harvest_offline,
    negative_states,
    positive_states,
    sample_negatives,
    sample_positives,
)


@pytest.fixture
def frame():
    rng = np.random.default_rng(0)
    return GrayFrame(160, 120, rng.random((120, 160)))


@pytest.fixture
def state():
    return state_for_box((60.0, 40.0, 32.0, 32.0))


class TestPositives:
    def test_count_one_is_exact_warp(self, frame, state):
        from collabtrack.imagery import warp_patch

        patches = sample_positives(frame, state, 32, 32, 1, np.random.default_rng(1))
        assert len(patches) == 1
        np.testing.assert_array_equal(patches[0], warp_patch(frame, state, 32, 32))

    def test_five_patches_shape(self, frame, state):
        patches = sample_positives(frame, state, 32, 32, 5, np.random.default_rng(2))
        assert len(patches) == 5
        assert all(p.shape == (1024,) for p in patches)

    def test_jittered_boxes_overlap_strongly(self, state):
        rng = np.random.default_rng(3)
        base = Box(*state_to_box(state, 32, 32))
        for s in positive_states(state, 50, rng)[1:]:
            assert overlap(Box(*state_to_box(s, 32, 32)), base) > 0.7

    def test_deterministic(self, frame, state):
        a = sample_positives(frame, state, 32, 32, 8, np.random.default_rng(4))
        b = sample_positives(frame, state, 32, 32, 8, np.random.default_rng(4))
        np.testing.assert_array_equal(np.array(a), np.array(b))


class TestNegatives:
    def test_count(self, frame, state):
        patches = sample_negatives(frame, state, 32, 32, 100, np.random.default_rng(5))
        assert len(patches) == 100

    def test_low_overlap_with_target(self, frame, state):
        rng = np.random.default_rng(6)
        target = Box(*state_to_box(state, 32, 32))
        for s in negative_states(frame, state, 32, 32, 200, rng):
            assert overlap(Box(*state_to_box(s, 32, 32)), target) < 0.3

    def test_centers_stay_inside_frame(self, frame, state):
        rng = np.random.default_rng(7)
        for s in negative_states(frame, state, 32, 32, 200, rng):
            assert 0.0 <= s.cx <= frame.width - 1
            assert 0.0 <= s.cy <= frame.height - 1

    def test_deterministic(self, frame, state):
        a = sample_negatives(frame, state, 32, 32, 30, np.random.default_rng(8))
        b = sample_negatives(frame, state, 32, 32, 30, np.random.default_rng(8))
        np.testing.assert_array_equal(np.array(a), np.array(b))

    def test_tiny_frame_best_effort(self):
        rng = np.random.default_rng(9)
        tiny = GrayFrame(32, 32, np.zeros((32, 32)))
        st = state_for_box((0.0, 0.0, 32.0, 32.0))
        patches = sample_negatives(tiny, st, 32, 32, 10, rng)
        assert len(patches) == 10


class TestReservoir:
    def test_push_grows_until_capacity(self):
        res = PositiveReservoir()
        res.push([np.full(1024, i) for i in range(5)])
        assert len(res) == 5

    def test_fifo_eviction(self):
        res = PositiveReservoir()
        for j in range(10):
            res.push([np.full(1024, 5 * j + i) for i in range(5)])
        assert len(res) == 50
        res.push([np.full(1024, 100 + i) for i in range(5)])
        assert len(res) == 50
        values = [p[0] for p in res.patches]
        assert values[0] == 5.0  # the first five (0..4) were evicted
        assert values[-5:] == [100, 101, 102, 103, 104]

    def test_order_preserved(self):
        res = PositiveReservoir(capacity=4)
        res.push([np.full(8, v) for v in (1, 2, 3)])
        res.push([np.full(8, v) for v in (4, 5)])
        assert [p[0] for p in res.patches] == [2, 3, 4, 5]


class TestHarvest:
    def make_sequence(self, rng, n_frames=10):
        frames = [GrayFrame(96, 72, rng.random((72, 96))) for _ in range(n_frames)]
        boxes = [Box(20.0 + i, 16.0 + i, 32.0, 24.0) for i in range(n_frames)]
        return frames, boxes

    def test_balanced_counts(self):
        rng = np.random.default_rng(10)
        frames, boxes = self.make_sequence(rng)
        harvest = harvest_offline([(frames, boxes)], rng, per_frame_pos=5, per_frame_neg=5)
        labels = [h.label for h in harvest]
        assert len(harvest) == 100
        assert sum(labels) == 50

    def test_negative_constraint_replay(self):
        rng = np.random.default_rng(11)
        frames, boxes = self.make_sequence(rng)
        harvest = harvest_offline([(frames, boxes)], rng, 2, 2)
        # replay just the negative-state draws with a fresh generator
        rng2 = np.random.default_rng(11)
        for index, (frame, box) in enumerate(zip(frames, boxes)):
            st = state_for_box((box.x, box.y, box.w, box.h))
            positive_states(st, 2, rng2)
            for s in negative_states(frame, st, box.w, box.h, 2, rng2):
                cand = Box(*state_to_box(s, box.w, box.h))
                assert overlap(cand, box) < 0.3

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        frames, boxes = self.make_sequence(rng)
        a = harvest_offline([(frames, boxes)], np.random.default_rng(13), 3, 3)
        b = harvest_offline([(frames, boxes)], np.random.default_rng(13), 3, 3)
        assert len(a) == len(b)
        for pa, pb in zip(a, b):
            assert pa.label == pb.label and pa.frame_index == pb.frame_index
            np.testing.assert_array_equal(pa.patch, pb.patch)

    def test_mismatched_lengths_rejected(self):
        rng = np.random.default_rng(14)
        frames, boxes = self.make_sequence(rng)
        with pytest.raises(ValueError):
            harvest_offline([(frames, boxes[:-1])], rng)

    def test_patch_values_in_range(self):
        rng = np.random.default_rng(15)
        frames, boxes = self.make_sequence(rng, n_frames=3)
        for item in harvest_offline([(frames, boxes)], rng, 3, 3):
            assert item.patch.shape == (1024,)
            assert item.patch.min() >= 0.0 and item.patch.max() <= 1.0
