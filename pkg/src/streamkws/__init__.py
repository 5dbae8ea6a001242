"""Streaming keyword-spotting decoder over precomputed posterior tensors.

Consumes CTC / Transducer posterior bundles, runs keyword-specific
frame-synchronous or frame-asynchronous streaming Viterbi on each
branch, fuses the per-frame confidences, and turns the fused streams
into detection events and recall/false-alarm metrics.
"""

__version__ = "0.1.0"

from .bench import BenchConfig, BenchReport, bench, standard_rows
from .bundle import (
    PosteriorBundle,
    Violation,
    load_bundle,
    save_bundle,
    validate_bundle,
)
from .ctc import (
    CtcSearch,
    CtcTopology,
    decode_ctc_stream,
    psd_gate,
    raw_ctc_scores,
    skipped_ratio,
)
from .detection import (
    DetectionEvent,
    GroundTruth,
    SweepPoint,
    SweepReport,
    evaluate_at_threshold,
    extract_events,
    macro_average,
    read_truth_file,
    recall_at_far,
    render_sweep_report,
    sweep,
    write_truth_file,
)
from .estimator import KeywordSpotter
from .fusion import FusionState, fuse_step, fuse_streams
from .joint import (
    FrameCounters,
    JointDecodeSession,
    decode_joint,
    decode_joint_with_counters,
    open_session,
    push_frame,
)
from .oracles import brute_force_ctc, brute_force_transducer
from .synth import (
    CorpusSpec,
    Plant,
    SynthSpec,
    corpus_specs,
    generate_utterance,
    random_bundle,
    standard_benchmark_corpus,
)
from .transducer import TransducerSearch, decode_transducer_stream, raw_transducer_scores
from .types import (
    CDC_LAST,
    CDC_ZERO,
    CTC_DOM,
    CTC_MODES,
    EQUIVALENCE_DOM,
    FSD,
    FUSION_STRATEGIES,
    PH,
    PSD,
    RNNT,
    TDT,
    TRANSDUCER_DOM,
    TRANSDUCER_MODES,
    DecodeConfig,
    KeywordSpec,
    ScoreStream,
)
from . import errors

__all__ = [
    "BenchConfig", "BenchReport", "bench", "standard_rows",
    "PosteriorBundle", "Violation", "load_bundle", "save_bundle", "validate_bundle",
    "CtcSearch", "CtcTopology", "decode_ctc_stream", "psd_gate",
    "raw_ctc_scores", "skipped_ratio",
    "DetectionEvent", "GroundTruth", "SweepPoint", "SweepReport",
    "evaluate_at_threshold", "extract_events", "macro_average",
    "read_truth_file", "recall_at_far", "render_sweep_report", "sweep",
    "write_truth_file",
    "KeywordSpotter",
    "FusionState", "fuse_step", "fuse_streams",
    "FrameCounters", "JointDecodeSession", "decode_joint",
    "decode_joint_with_counters", "open_session", "push_frame",
    "brute_force_ctc", "brute_force_transducer",
    "CorpusSpec", "Plant", "SynthSpec", "corpus_specs", "generate_utterance",
    "random_bundle", "standard_benchmark_corpus",
    "TransducerSearch", "decode_transducer_stream", "raw_transducer_scores",
    "CDC_LAST", "CDC_ZERO", "CTC_DOM", "CTC_MODES", "EQUIVALENCE_DOM", "FSD",
    "FUSION_STRATEGIES", "PH", "PSD", "RNNT", "TDT", "TRANSDUCER_DOM",
    "TRANSDUCER_MODES", "DecodeConfig", "KeywordSpec", "ScoreStream",
    "errors",
]
