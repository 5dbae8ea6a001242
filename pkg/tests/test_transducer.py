"""Transducer lattice search: hand cases, skipping, timeout, properties."""

import numpy as np
import pytest

from streamkws import (
    PH,
    DecodeConfig,
    KeywordSpec,
    PosteriorBundle,
    TransducerSearch,
    decode_transducer_stream,
    random_bundle,
    raw_transducer_scores,
)
from streamkws.errors import DurationMissing, FrameShapeMismatch

from conftest import uniform_bundle


def one_hot_duration(num_frames, bins, index):
    dur = np.zeros((num_frames, bins))
    dur[:, index] = 1.0
    return dur


class TestHandCase:
    """Single-frame, single-token lattice worked out by hand."""

    def test_raw_score(self, hand_bundle, single_token_keyword):
        raw = raw_transducer_scores(hand_bundle, single_token_keyword, DecodeConfig())
        assert raw == [pytest.approx(0.72, rel=1e-6)]

    def test_normalized_output_equals_raw_at_length_one(
        self, hand_bundle, single_token_keyword
    ):
        stream = decode_transducer_stream(hand_bundle, single_token_keyword, DecodeConfig())
        assert stream.frames == [pytest.approx(0.72, rel=1e-6)]

    def test_bonus_is_applied_before_the_root(self, hand_bundle, single_token_keyword):
        stream = decode_transducer_stream(
            hand_bundle, single_token_keyword, DecodeConfig(bonus=1.2))
        assert stream.frames == [pytest.approx(0.864, rel=1e-6)]

    def test_bonus_output_clamped_to_one(self, hand_bundle, single_token_keyword):
        stream = decode_transducer_stream(
            hand_bundle, single_token_keyword, DecodeConfig(bonus=5.0))
        assert stream.frames == [1.0]


def test_zero_token_probability_kills_every_frame():
    kw = KeywordSpec("kw", (1,), 0, 0)
    trans = np.zeros((5, 2, 2))
    trans[:, :, 0] = 1.0  # all mass on blank, the keyword token never appears
    bundle = PosteriorBundle("z", trans, ctc_matrix=np.tile([1.0, 0.0], (5, 1)))
    stream = decode_transducer_stream(bundle, kw, DecodeConfig())
    assert stream.frames == [0.0] * 5


class TestDurationSkipping:
    def test_one_hot_duration_three_emits_two_placeholders(self):
        bundle, kw = random_bundle(3, max_frames=6)
        bundle.duration_matrix = one_hot_duration(
            bundle.num_frames, 4, 3).astype(np.float32)
        stream = decode_transducer_stream(
            bundle, kw, DecodeConfig(transducer_mode="tdt"))
        expected = [f % 3 == 0 for f in range(bundle.num_frames)]
        got = [f is not PH for f in stream.frames]
        assert got == expected
        # the numeric rendering of a skipped frame is 0
        vals = stream.values()
        for frame, val in zip(stream.frames, vals):
            if frame is PH:
                assert val == 0.0

    def test_rnnt_mode_never_emits_placeholders(self):
        for seed in range(10):
            bundle, kw = random_bundle(seed)
            stream = decode_transducer_stream(bundle, kw, DecodeConfig())
            assert not stream.has_placeholders()

    def test_all_mass_on_one_equals_frame_synchronous(self):
        bundle, kw = random_bundle(11)
        bundle.duration_matrix = one_hot_duration(
            bundle.num_frames, 2, 1).astype(np.float32)
        rnnt = decode_transducer_stream(bundle, kw, DecodeConfig(transducer_mode="rnnt"))
        tdt = decode_transducer_stream(bundle, kw, DecodeConfig(transducer_mode="tdt"))
        assert rnnt.frames == tdt.frames

    def test_max_duration_one_equals_frame_synchronous_for_any_mass(self):
        # over {0, 1} the argmax clamps to 1 whatever the distribution says
        rng = np.random.default_rng(8)
        for seed in range(10):
            bundle, kw = random_bundle(seed)
            bundle.duration_matrix = rng.dirichlet(
                np.ones(2), size=bundle.num_frames).astype(np.float32)
            rnnt = decode_transducer_stream(
                bundle, kw, DecodeConfig(transducer_mode="rnnt"))
            tdt = decode_transducer_stream(
                bundle, kw, DecodeConfig(transducer_mode="tdt", tdt_max_duration=1))
            assert rnnt.frames == tdt.frames

    def test_duration_zero_argmax_still_advances(self):
        bundle, kw = random_bundle(5, max_frames=4)
        bundle.duration_matrix = one_hot_duration(
            bundle.num_frames, 3, 0).astype(np.float32)
        stream = decode_transducer_stream(
            bundle, kw, DecodeConfig(transducer_mode="tdt"))
        assert len(stream) == bundle.num_frames
        assert not stream.has_placeholders()

    def test_missing_duration_raises(self):
        bundle, kw = random_bundle(7, with_duration=False)
        with pytest.raises(DurationMissing):
            decode_transducer_stream(bundle, kw, DecodeConfig(transducer_mode="tdt"))

    def test_advance_tracks_the_committed_duration(self):
        kw = KeywordSpec("kw", (1,), 0, 0)
        search = TransducerSearch(kw, DecodeConfig(transducer_mode="tdt"))
        rows = [[0.5, 0.5], [0.5, 0.5]]
        search.step(rows, duration_row=[0.0, 0.1, 0.0, 0.9])
        assert search.last_advance == 3
        search.step(rows)  # mid-skip frame
        assert search.last_advance == 1
        assert not search.last_processed


def test_timeout_zeroes_long_paths():
    # token only available at frame 0, blanks strong afterwards: the best
    # path must start at frame 0 and its span grows with t
    kw = KeywordSpec("kw", (1,), 0, 0)
    trans = np.zeros((6, 2, 2))
    trans[:, :, 0] = 0.999
    trans[:, :, 1] = 0.001
    trans[0, 0] = [0.05, 0.95]
    bundle = PosteriorBundle("t", trans, ctc_matrix=np.tile([0.9, 0.1], (6, 1)))
    stream = decode_transducer_stream(bundle, kw, DecodeConfig(timeout=3))
    assert all(s > 0 for s in stream.frames[:3])
    assert stream.frames[3:] == [0.0, 0.0, 0.0]
    # the raw path score is reported regardless of the timeout
    raw = raw_transducer_scores(bundle, kw, DecodeConfig(timeout=3))
    assert all(r > 0 for r in raw)


def test_outputs_stay_in_unit_interval():
    for seed in range(25):
        bundle, kw = random_bundle(seed)
        stream = decode_transducer_stream(bundle, kw, DecodeConfig(bonus=3.0))
        assert all(0.0 <= s <= 1.0 for s in stream.values())


def test_streaming_causality_prefix_equality():
    bundle, kw = random_bundle(23, max_frames=8)
    full = decode_transducer_stream(bundle, kw, DecodeConfig()).frames
    for t in range(1, bundle.num_frames + 1):
        prefix_bundle = PosteriorBundle(
            "p", bundle.transducer_tensor[:t], bundle.ctc_matrix[:t],
            bundle.duration_matrix[:t], bundle.tdt,
            bundle.ctc_blank_id, bundle.transducer_blank_id,
            bundle.frame_hop_seconds)
        assert decode_transducer_stream(prefix_bundle, kw, DecodeConfig()).frames \
            == full[:t]


def test_restart_scores_match_clipped_utterance():
    """Blank-dominated padding before a strong keyword leaves its scores intact."""
    kw = KeywordSpec("kw", (1, 2), 0, 0)
    rng = np.random.default_rng(4)
    body = rng.dirichlet((1, 8, 8), size=(6, 3))
    body[2, 0] = [0.02, 0.96, 0.02]   # y1 strong at frame 2
    body[3, 1] = [0.02, 0.02, 0.96]   # y2 strong at frame 3
    pad = np.zeros((5, 3, 3))
    pad[:, :, 0] = 0.98
    pad[:, :, 1:] = 0.01
    def mk(tensor):
        t = tensor.shape[0]
        return PosteriorBundle("r", tensor, ctc_matrix=np.tile([0.98, 0.01, 0.01], (t, 1)))
    clipped = decode_transducer_stream(mk(body), kw, DecodeConfig()).frames
    padded = decode_transducer_stream(
        mk(np.concatenate([pad, body])), kw, DecodeConfig()).frames
    assert padded[5:] == pytest.approx(clipped, rel=1e-12)


def test_frame_shape_mismatch():
    kw = KeywordSpec("kw", (1,), 0, 0)
    search = TransducerSearch(kw, DecodeConfig())
    with pytest.raises(FrameShapeMismatch):
        search.step([[0.5, 0.5]])  # one lattice row instead of two


def test_uniform_bundle_matches_between_step_and_batch():
    bundle = uniform_bundle(5, 3, 4)
    kw = KeywordSpec("kw", (1, 2), 0, 0)
    batch = decode_transducer_stream(bundle, kw, DecodeConfig()).frames
    search = TransducerSearch(kw, DecodeConfig())
    rows = bundle.transducer_tensor.tolist()
    stepped = [search.step(rows[t]) for t in range(5)]
    assert batch == stepped
