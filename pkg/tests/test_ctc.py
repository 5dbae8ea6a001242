"""CTC topology, gate behavior, skipping consistency, and hand cases."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamkws import (
    PH,
    CtcSearch,
    CtcTopology,
    DecodeConfig,
    KeywordSpec,
    PosteriorBundle,
    decode_ctc_stream,
    psd_gate,
    random_bundle,
    raw_ctc_scores,
    skipped_ratio,
)
from streamkws.errors import FrameShapeMismatch, MissingTensorForConfig


def psd_config(threshold):
    return DecodeConfig(ctc_mode="psd", psd_threshold=threshold)


class TestPsdGate:
    def test_high_blank_skips(self):
        assert psd_gate([0.0005, 0.9995], threshold=0.9993, blank=1)

    def test_threshold_one_keeps_everything_below_one(self):
        assert not psd_gate([0.0001, 0.9999], threshold=1.0, blank=1)

    def test_boundary_is_inclusive(self):
        assert psd_gate([0.5, 0.5], threshold=0.5, blank=1)


class TestTopology:
    def test_blank_interleaving(self):
        topo = CtcTopology(KeywordSpec("kw", (3, 5), 0, 0))
        assert topo.labels == [0, 3, 0, 5, 0]

    def test_skip_forbidden_between_identical_tokens(self):
        topo = CtcTopology(KeywordSpec("kw", (3, 3, 5), 0, 0))
        assert topo.skip_ok[3] is False  # second "3" cannot bypass the blank
        assert topo.skip_ok[5] is True   # "5" after "3" can


class TestHandCase:
    def test_single_frame_single_token(self, hand_bundle, single_token_keyword):
        raw = raw_ctc_scores(hand_bundle, single_token_keyword, DecodeConfig())
        assert raw == [pytest.approx(0.9, rel=1e-6)]
        stream = decode_ctc_stream(hand_bundle, single_token_keyword, DecodeConfig())
        assert stream.frames == [pytest.approx(0.9, rel=1e-6)]

    def test_repeated_token_needs_a_separating_blank(self):
        # two frames cannot hold "a a": the collapse rule inserts a blank
        kw = KeywordSpec("rep", (1, 1), 0, 0)
        bundle = PosteriorBundle(
            "rep", np.full((2, 3, 2), 0.5), ctc_matrix=np.tile([0.2, 0.8], (2, 1)))
        assert raw_ctc_scores(bundle, kw, DecodeConfig()) == [0.0, 0.0]
        # three frames fit token-blank-token
        bundle3 = PosteriorBundle(
            "rep3", np.full((3, 3, 2), 0.5), ctc_matrix=np.tile([0.2, 0.8], (3, 1)))
        raw3 = raw_ctc_scores(bundle3, kw, DecodeConfig())
        assert raw3[2] == pytest.approx(0.8 * 0.2 * 0.8, rel=1e-6)


class TestSkipping:
    def test_everything_gated_when_blank_saturates(self):
        bundle, kw = random_bundle(2)
        ctc = np.zeros_like(bundle.ctc_matrix)
        ctc[:, kw.ctc_blank_id] = 0.9999
        other = [v for v in range(bundle.vocab_size) if v != kw.ctc_blank_id]
        ctc[:, other[0]] = 0.0001
        bundle.ctc_matrix = ctc
        stream = decode_ctc_stream(bundle, kw, psd_config(0.999))
        assert stream.values() == [0.0] * bundle.num_frames
        assert stream.has_placeholders()
        assert all(f is PH for f in stream.frames)

    def test_fsd_never_emits_placeholders(self):
        for seed in range(10):
            bundle, kw = random_bundle(seed)
            assert not decode_ctc_stream(bundle, kw, DecodeConfig()).has_placeholders()

    def test_gate_at_one_equals_frame_synchronous(self):
        for seed in range(10):
            bundle, kw = random_bundle(seed)
            fsd = decode_ctc_stream(bundle, kw, DecodeConfig()).frames
            psd = decode_ctc_stream(bundle, kw, psd_config(1.0)).frames
            assert fsd == psd

    def test_skipping_consistent_with_frame_deletion(self):
        """Skipped output restricted to kept frames equals decoding the
        bundle with those frames physically removed."""
        checked = 0
        for seed in range(40):
            bundle, kw = random_bundle(seed)
            gate = 0.5
            psd = decode_ctc_stream(bundle, kw, psd_config(gate)).frames
            keep = [
                t for t in range(bundle.num_frames)
                if bundle.ctc_matrix[t, kw.ctc_blank_id] < gate
            ]
            if not keep:
                continue
            deleted = PosteriorBundle(
                "del", bundle.transducer_tensor[keep], bundle.ctc_matrix[keep],
                bundle.duration_matrix[keep], bundle.tdt,
                bundle.ctc_blank_id, bundle.transducer_blank_id,
                bundle.frame_hop_seconds)
            fsd = decode_ctc_stream(deleted, kw, DecodeConfig()).frames
            kept_out = [psd[t] for t in keep]
            assert kept_out == pytest.approx(fsd, rel=1e-12)
            checked += 1
        assert checked >= 20


class TestSkippedRatio:
    def test_threshold_one_skips_nothing(self):
        bundle, kw = random_bundle(9)
        assert skipped_ratio(bundle, 1.0, kw.ctc_blank_id) == 0.0

    def test_vanishing_threshold_skips_everything(self):
        bundle, kw = random_bundle(9)
        assert skipped_ratio(bundle, 1e-12, kw.ctc_blank_id) == 1.0

    def test_constructed_half_split(self):
        kw = KeywordSpec("kw", (1,), 0, 0)
        ctc = np.tile([0.9999, 0.0001], (4, 1))
        ctc[2:] = [0.5, 0.5]
        bundle = PosteriorBundle("half", np.full((4, 2, 2), 0.5), ctc_matrix=ctc)
        assert skipped_ratio(bundle, 0.999, 0) == 0.5

    @given(st.integers(min_value=0, max_value=200))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_threshold(self, seed):
        bundle, kw = random_bundle(seed)
        grid = np.linspace(0.05, 1.0, 12)
        ratios = [skipped_ratio(bundle, g, kw.ctc_blank_id) for g in grid]
        assert all(a >= b for a, b in zip(ratios, ratios[1:]))

    def test_requires_ctc_matrix(self):
        bundle, kw = random_bundle(1)
        bundle.ctc_matrix = None
        with pytest.raises(MissingTensorForConfig):
            skipped_ratio(bundle, 0.5, kw.ctc_blank_id)


def test_decreasing_gate_never_unskips():
    bundle, kw = random_bundle(31)
    previous = -1.0
    for gate in (1.0, 0.9999, 0.999, 0.99):
        ratio = skipped_ratio(bundle, gate, kw.ctc_blank_id)
        assert ratio >= previous
        previous = ratio


def test_streaming_causality_prefix_equality():
    bundle, kw = random_bundle(13, max_frames=8)
    full = decode_ctc_stream(bundle, kw, psd_config(0.6)).frames
    for t in range(1, bundle.num_frames + 1):
        prefix = PosteriorBundle(
            "p", bundle.transducer_tensor[:t], bundle.ctc_matrix[:t],
            bundle.duration_matrix[:t], bundle.tdt,
            bundle.ctc_blank_id, bundle.transducer_blank_id,
            bundle.frame_hop_seconds)
        assert decode_ctc_stream(prefix, kw, psd_config(0.6)).frames == full[:t]


def test_timeout_uses_real_frame_span_not_kept_frames():
    # keyword visible at frame 0, then a long gated stretch: the kept-frame
    # count stays small but the wall-clock span crosses the timeout
    kw = KeywordSpec("kw", (1,), 0, 0)
    ctc = np.tile([0.9995, 0.0005], (8, 1))
    ctc[0] = [0.1, 0.9]
    ctc[7] = [0.7, 0.3]  # kept, but a fresh start here scores worse
    bundle = PosteriorBundle("span", np.full((8, 2, 2), 0.5), ctc_matrix=ctc)
    relaxed = decode_ctc_stream(bundle, kw, psd_config(0.999)).frames
    tight = decode_ctc_stream(
        bundle, kw, DecodeConfig(ctc_mode="psd", psd_threshold=0.999, timeout=4)
    ).frames
    assert relaxed[7] > 0.0
    assert tight[7] == 0.0  # path spans 8 real frames > timeout 4


def test_frame_shape_mismatch():
    search = CtcSearch(KeywordSpec("kw", (2,), 0, 0), DecodeConfig())
    with pytest.raises(FrameShapeMismatch):
        search.step([0.5, 0.5])  # vocabulary too small for token id 2
