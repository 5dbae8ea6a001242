"""Bundle validation and the KPF / JSON codecs."""

import json

import numpy as np
import pytest

from streamkws import (
    PosteriorBundle,
    load_bundle,
    random_bundle,
    save_bundle,
    validate_bundle,
)
from streamkws.errors import (
    InvalidProbability,
    MagicMismatch,
    MissingDurationForTDT,
    NonStochasticRow,
    TruncatedTensor,
)


def small_bundle(tdt=False):
    rng = np.random.default_rng(17)
    trans = rng.dirichlet(np.ones(3), size=(4, 2))
    ctc = rng.dirichlet(np.ones(3), size=4)
    duration = rng.dirichlet(np.ones(3), size=4) if tdt else None
    return PosteriorBundle(
        utterance_id="small",
        transducer_tensor=trans,
        ctc_matrix=ctc,
        duration_matrix=duration,
        tdt=tdt,
        frame_hop_seconds=0.03,
    )


class TestRoundTrip:
    def test_dims_survive(self, tmp_path):
        path = tmp_path / "b.kpf"
        save_bundle(small_bundle(), path)
        loaded = load_bundle(path)
        assert loaded.num_frames == 4
        assert loaded.keyword_rows == 2
        assert loaded.vocab_size == 3

    @pytest.mark.parametrize("tdt", [False, True])
    def test_bitwise_identity(self, tmp_path, tdt):
        bundle = small_bundle(tdt=tdt)
        path = tmp_path / "b.kpf"
        save_bundle(bundle, path)
        assert load_bundle(path).tensors_equal(bundle)

    def test_two_saves_identical_bytes(self, tmp_path):
        bundle = small_bundle(tdt=True)
        save_bundle(bundle, tmp_path / "a.kpf")
        save_bundle(bundle, tmp_path / "b.kpf")
        assert (tmp_path / "a.kpf").read_bytes() == (tmp_path / "b.kpf").read_bytes()

    def test_random_bundles_round_trip(self, tmp_path):
        for seed in range(20):
            bundle, _ = random_bundle(seed)
            path = tmp_path / f"{seed}.kpf"
            save_bundle(bundle, path)
            assert load_bundle(path).tensors_equal(bundle)

    def test_utterance_id_from_stem(self, tmp_path):
        path = tmp_path / "my-utt.kpf"
        save_bundle(small_bundle(), path)
        assert load_bundle(path).utterance_id == "my-utt"


class TestLoadErrors:
    def test_magic_mismatch(self, tmp_path):
        path = tmp_path / "junk.kpf"
        path.write_bytes(b"\x00\x01garbage that is neither KPF nor JSON")
        with pytest.raises(MagicMismatch):
            load_bundle(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "b.kpf"
        save_bundle(small_bundle(), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(TruncatedTensor):
            load_bundle(path)

    def test_non_stochastic_row(self, tmp_path):
        bundle = small_bundle()
        path = tmp_path / "b.kpf"
        save_bundle(bundle, path)
        raw = bytearray(path.read_bytes())
        # bump the first float of the transducer payload so its row sums to ~1.2
        header_end = 4 + 9 * 4
        first = np.frombuffer(raw[header_end:header_end + 4], dtype="<f4")[0]
        raw[header_end:header_end + 4] = np.float32(first + 0.2).tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(NonStochasticRow) as err:
            load_bundle(path)
        assert err.value.index == (0, 0)
        assert err.value.row_sum == pytest.approx(1.2, abs=1e-5)

    def test_tdt_flag_without_duration(self, tmp_path):
        path = tmp_path / "b.kpf"
        save_bundle(small_bundle(), path)
        raw = bytearray(path.read_bytes())
        flags_offset = 4 + 5 * 4
        raw[flags_offset] |= 8  # set the TDT bit without a stored duration matrix
        path.write_bytes(bytes(raw))
        with pytest.raises(MissingDurationForTDT):
            load_bundle(path)


class TestJsonFixture:
    def test_hand_written_fixture(self, tmp_path):
        doc = {
            "utterance_id": "fixture",
            "transducer": [[[0.1, 0.9], [0.8, 0.2]]],
            "ctc": [[0.5, 0.5]],
            "frame_hop_seconds": 0.03,
        }
        path = tmp_path / "fixture.json"
        path.write_text(json.dumps(doc))
        bundle = load_bundle(path)
        assert bundle.utterance_id == "fixture"
        assert bundle.num_frames == 1
        assert bundle.ctc_matrix is not None

    def test_fixture_tdt_without_duration(self, tmp_path):
        doc = {"transducer": [[[1.0, 0.0], [1.0, 0.0]]], "tdt": True}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(MissingDurationForTDT):
            load_bundle(path)


class TestValidate:
    def test_clean_bundle(self):
        assert validate_bundle(small_bundle(tdt=True)) == []

    def test_negative_probability_named(self):
        bundle = small_bundle()
        arr = bundle.transducer_tensor.copy()
        arr[2, 0, 0] += arr[2, 0, 1] + 0.1  # keep the row sum clean
        arr[2, 0, 1] = -0.1
        bundle.transducer_tensor = arr
        violations = validate_bundle(bundle)
        assert len(violations) == 1
        assert violations[0].tensor == "transducer_tensor"
        assert violations[0].index == (2, 0, 1)
        assert violations[0].observed == pytest.approx(-0.1)

    def test_row_sum_violation_cites_tolerance(self):
        bundle = small_bundle()
        arr = bundle.ctc_matrix.copy()
        arr[1] = arr[1] * 0.95
        bundle.ctc_matrix = arr
        violations = validate_bundle(bundle)
        assert len(violations) == 1
        assert "0.0001" in violations[0].message
        assert violations[0].observed == pytest.approx(0.95, abs=1e-4)

    def test_every_single_cell_corruption_is_caught(self):
        clean = small_bundle()
        for t in range(clean.num_frames):
            for v in range(clean.vocab_size):
                bundle = small_bundle()
                arr = bundle.ctc_matrix.copy()
                arr[t, v] = 1.5
                bundle.ctc_matrix = arr
                assert validate_bundle(bundle), f"corruption at ({t},{v}) missed"

    def test_nan_rejected_before_write(self, tmp_path):
        bundle = small_bundle()
        arr = bundle.transducer_tensor.copy()
        arr[0, 0, 0] = np.nan
        bundle.transducer_tensor = arr
        path = tmp_path / "nan.kpf"
        with pytest.raises(InvalidProbability):
            save_bundle(bundle, path)
        assert not path.exists()

    def test_duration_without_tdt_flag(self):
        bundle = small_bundle(tdt=True)
        bundle.tdt = False
        violations = validate_bundle(bundle)
        assert any("duration matrix present" in v.message for v in violations)


def test_unwritable_target_raises_io_failure(tmp_path):
    from streamkws.errors import IoFailure
    with pytest.raises(IoFailure):
        save_bundle(small_bundle(), tmp_path)  # a directory, not a file
