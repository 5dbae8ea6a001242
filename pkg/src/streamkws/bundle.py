"""Posterior bundles: validation plus the KPF v1 / JSON fixture codecs.

A bundle carries one utterance's precomputed posteriors: the Transducer
decoding lattice (T x (U+1) x V), an optional per-frame duration
distribution (T x (D_max+1)) for duration-predicting models, and an
optional CTC posterior matrix (T x V). Tensors are stored as float32 in
files and in memory; decoders convert to log domain internally.

KPF v1 binary layout (little-endian):

    magic "KPF1" | u32 version=1 | u32 T | u32 U_plus_1 | u32 V
    | u32 D (duration bins, 0 if absent) | u32 flags | u32 ctc_blank_id
    | u32 transducer_blank_id | f32 frame_hop_seconds
    | float32 payload, row-major: transducer, duration, ctc (flagged only)

Flag bits: 0 transducer tensor present, 1 duration matrix present,
2 CTC matrix present, 3 duration-skipping (TDT) bundle.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BundleError,
    InvalidProbability,
    IoFailure,
    MagicMismatch,
    MissingDurationForTDT,
    NonStochasticRow,
    TruncatedTensor,
)

KPF_MAGIC = b"KPF1"
KPF_VERSION = 1
ROW_SUM_TOLERANCE = 1e-4

_FLAG_TRANSDUCER = 1
_FLAG_DURATION = 2
_FLAG_CTC = 4
_FLAG_TDT = 8

_HEADER = struct.Struct("<IIIIIIIIf")  # after the 4-byte magic


def _as_f32(name: str, value, shape_hint: int) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(value, dtype=np.float32))
    if arr.ndim != shape_hint:
        raise ValueError(f"{name} must be {shape_hint}-dimensional, got shape {arr.shape}")
    return arr


@dataclass(eq=False)
class PosteriorBundle:
    """One utterance's posterior tensors plus decoding metadata."""

    utterance_id: str
    transducer_tensor: np.ndarray
    ctc_matrix: np.ndarray | None = None
    duration_matrix: np.ndarray | None = None
    tdt: bool = False
    ctc_blank_id: int = 0
    transducer_blank_id: int = 0
    frame_hop_seconds: float = 0.03

    def __post_init__(self):
        self.transducer_tensor = _as_f32("transducer_tensor", self.transducer_tensor, 3)
        if self.ctc_matrix is not None:
            self.ctc_matrix = _as_f32("ctc_matrix", self.ctc_matrix, 2)
            if self.ctc_matrix.shape != (self.num_frames, self.vocab_size):
                raise ValueError(
                    f"ctc_matrix shape {self.ctc_matrix.shape} does not match "
                    f"(T={self.num_frames}, V={self.vocab_size})"
                )
        if self.duration_matrix is not None:
            self.duration_matrix = _as_f32("duration_matrix", self.duration_matrix, 2)
            if self.duration_matrix.shape[0] != self.num_frames:
                raise ValueError("duration_matrix frame count does not match tensor")
        if self.frame_hop_seconds <= 0:
            raise ValueError("frame_hop_seconds must be positive")

    @property
    def num_frames(self) -> int:
        return self.transducer_tensor.shape[0]

    @property
    def keyword_rows(self) -> int:
        return self.transducer_tensor.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.transducer_tensor.shape[2]

    @property
    def duration_bins(self) -> int:
        return 0 if self.duration_matrix is None else self.duration_matrix.shape[1]

    def tensors_equal(self, other: "PosteriorBundle") -> bool:
        """Bitwise equality of all stored tensors and metadata."""
        def eq(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and a.tobytes() == b.tobytes()

        return (
            eq(self.transducer_tensor, other.transducer_tensor)
            and eq(self.ctc_matrix, other.ctc_matrix)
            and eq(self.duration_matrix, other.duration_matrix)
            and self.tdt == other.tdt
            and self.ctc_blank_id == other.ctc_blank_id
            and self.transducer_blank_id == other.transducer_blank_id
            and np.float32(self.frame_hop_seconds) == np.float32(other.frame_hop_seconds)
        )


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_bundle."""

    tensor: str
    index: tuple
    observed: float
    message: str

    def __str__(self) -> str:
        return self.message


def _check_tensor(name: str, arr: np.ndarray, violations: list) -> None:
    bad = ~((arr >= 0.0) & (arr <= 1.0))  # catches NaN as well
    if bad.any():
        for idx in zip(*np.nonzero(bad)):
            value = float(arr[idx])
            violations.append(Violation(
                tensor=name,
                index=tuple(int(i) for i in idx),
                observed=value,
                message=f"{name} value at {tuple(int(i) for i in idx)} is "
                        f"{value!r}, outside [0, 1]",
            ))
    sums = arr.sum(axis=-1, dtype=np.float64)
    off = np.abs(sums - 1.0) > ROW_SUM_TOLERANCE
    if off.any():
        for idx in zip(*np.nonzero(off)):
            value = float(sums[idx])
            violations.append(Violation(
                tensor=name,
                index=tuple(int(i) for i in idx),
                observed=value,
                message=f"{name} row {tuple(int(i) for i in idx)} sums to "
                        f"{value!r}, outside 1 +/- {ROW_SUM_TOLERANCE}",
            ))


def validate_bundle(bundle: PosteriorBundle) -> list:
    """Check every bundle invariant; returns [] when the bundle is clean.

    Each violation names the tensor, the offending index, and the
    observed value. Violations are data, not errors; callers that need
    hard failures should raise on a non-empty result.
    """
    violations: list = []
    if bundle.keyword_rows < 2:
        violations.append(Violation(
            tensor="transducer_tensor", index=(), observed=bundle.keyword_rows,
            message=f"lattice needs at least 2 rows, got {bundle.keyword_rows}",
        ))
    if bundle.tdt and bundle.duration_matrix is None:
        violations.append(Violation(
            tensor="duration_matrix", index=(), observed=float("nan"),
            message="bundle flagged for duration skipping but has no duration matrix",
        ))
    if not bundle.tdt and bundle.duration_matrix is not None:
        violations.append(Violation(
            tensor="duration_matrix", index=(), observed=float("nan"),
            message="duration matrix present but bundle is not flagged for duration skipping",
        ))
    _check_tensor("transducer_tensor", bundle.transducer_tensor, violations)
    if bundle.duration_matrix is not None:
        _check_tensor("duration_matrix", bundle.duration_matrix, violations)
    if bundle.ctc_matrix is not None:
        _check_tensor("ctc_matrix", bundle.ctc_matrix, violations)
    return violations


def _raise_first(violations: list) -> None:
    if not violations:
        return
    v = violations[0]
    if "sums to" in v.message:
        raise NonStochasticRow(v.tensor, v.index, v.observed, ROW_SUM_TOLERANCE)
    if "has no duration matrix" in v.message:
        raise MissingDurationForTDT(v.message)
    if "outside [0, 1]" in v.message:
        raise InvalidProbability(v.tensor, v.index, v.observed)
    raise BundleError(v.message)


def save_bundle(bundle: PosteriorBundle, path) -> None:
    """Write a validated bundle as KPF v1; identical bundles yield identical bytes."""
    _raise_first(validate_bundle(bundle))
    flags = _FLAG_TRANSDUCER
    if bundle.duration_matrix is not None:
        flags |= _FLAG_DURATION
    if bundle.ctc_matrix is not None:
        flags |= _FLAG_CTC
    if bundle.tdt:
        flags |= _FLAG_TDT
    header = _HEADER.pack(
        KPF_VERSION,
        bundle.num_frames,
        bundle.keyword_rows,
        bundle.vocab_size,
        bundle.duration_bins,
        flags,
        bundle.ctc_blank_id,
        bundle.transducer_blank_id,
        bundle.frame_hop_seconds,
    )
    chunks = [KPF_MAGIC, header, bundle.transducer_tensor.tobytes()]
    if bundle.duration_matrix is not None:
        chunks.append(bundle.duration_matrix.tobytes())
    if bundle.ctc_matrix is not None:
        chunks.append(bundle.ctc_matrix.tobytes())
    try:
        with open(path, "wb") as fh:
            for chunk in chunks:
                fh.write(chunk)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _load_kpf(raw: bytes, utterance_id: str) -> PosteriorBundle:
    if len(raw) < 4 + _HEADER.size:
        raise TruncatedTensor(f"file holds {len(raw)} bytes, header needs {4 + _HEADER.size}")
    (version, t, rows, vocab, dur_bins, flags,
     ctc_blank, trans_blank, hop) = _HEADER.unpack_from(raw, 4)
    if version != KPF_VERSION:
        raise MagicMismatch(f"unsupported KPF version {version}")
    if not flags & _FLAG_TRANSDUCER:
        raise BundleError("file does not declare a transducer tensor")
    if flags & _FLAG_TDT and not flags & _FLAG_DURATION:
        raise MissingDurationForTDT("TDT flag set but no duration matrix stored")

    sizes = [t * rows * vocab]
    if flags & _FLAG_DURATION:
        sizes.append(t * dur_bins)
    if flags & _FLAG_CTC:
        sizes.append(t * vocab)
    expected = 4 + _HEADER.size + 4 * sum(sizes)
    if len(raw) != expected:
        raise TruncatedTensor(f"payload is {len(raw)} bytes, header declares {expected}")

    offset = 4 + _HEADER.size
    def take(count, shape):
        nonlocal offset
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += 4 * count
        return arr.copy()

    transducer = take(t * rows * vocab, (t, rows, vocab))
    duration = take(t * dur_bins, (t, dur_bins)) if flags & _FLAG_DURATION else None
    ctc = take(t * vocab, (t, vocab)) if flags & _FLAG_CTC else None
    return PosteriorBundle(
        utterance_id=utterance_id,
        transducer_tensor=transducer,
        ctc_matrix=ctc,
        duration_matrix=duration,
        tdt=bool(flags & _FLAG_TDT),
        ctc_blank_id=ctc_blank,
        transducer_blank_id=trans_blank,
        frame_hop_seconds=float(hop),
    )


def _load_json(raw: bytes, utterance_id: str) -> PosteriorBundle:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MagicMismatch(f"neither KPF magic nor parseable JSON: {exc}") from exc
    if doc.get("tdt") and doc.get("duration") is None:
        raise MissingDurationForTDT("fixture flagged tdt but has no duration array")
    try:
        return PosteriorBundle(
            utterance_id=doc.get("utterance_id", utterance_id),
            transducer_tensor=doc["transducer"],
            ctc_matrix=doc.get("ctc"),
            duration_matrix=doc.get("duration"),
            tdt=bool(doc.get("tdt", False)),
            ctc_blank_id=int(doc.get("ctc_blank_id", 0)),
            transducer_blank_id=int(doc.get("transducer_blank_id", 0)),
            frame_hop_seconds=float(doc.get("frame_hop_seconds", 0.03)),
        )
    except (KeyError, ValueError) as exc:
        raise TruncatedTensor(f"malformed JSON fixture: {exc}") from exc


def load_bundle(path) -> PosteriorBundle:
    """Load and fully validate a KPF v1 file or a JSON fixture.

    The utterance id is taken from the file stem (JSON fixtures may
    override it with an ``utterance_id`` field).
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == KPF_MAGIC:
        bundle = _load_kpf(raw, path.stem)
    else:
        bundle = _load_json(raw, path.stem)
    _raise_first(validate_bundle(bundle))
    return bundle
