"""Joint two-branch streaming decode: step both searches, substitute, fuse.

A session drives one TransducerSearch and one CtcSearch in lockstep,
one frame per push. A branch output that is skipped or exactly 0 is
substituted with PH before fusion: a processed frame scoring 0 carries
no keyword evidence and is treated the same as a frame the branch never
looked at. Memory is constant in the stream length, and the batch
decoder is literally the push loop, so batch and incremental decoding
agree bit for bit.
"""

from dataclasses import dataclass

from .bundle import PosteriorBundle
from .ctc import CtcSearch
from .errors import MissingTensorForConfig
from .fusion import FusionState, fuse_step
from .transducer import TransducerSearch
from .types import PH, TDT, DecodeConfig, KeywordSpec, ScoreStream


@dataclass(frozen=True)
class FrameCounters:
    """Per-branch work accounting for one decode."""

    frames: int
    transducer_updates: int
    ctc_updates: int

    @property
    def transducer_skipped(self) -> int:
        return self.frames - self.transducer_updates

    @property
    def ctc_skipped(self) -> int:
        return self.frames - self.ctc_updates


class JointDecodeSession:
    """Streaming state for one (utterance, keyword, config) decode.

    Sequential within a session; sessions share nothing, so utterances,
    keywords, and configs can be decoded in parallel with one session each.
    """

    def __init__(self, keyword: KeywordSpec, cfg: DecodeConfig):
        cfg.validate()
        self.keyword = keyword
        self.cfg = cfg
        self.transducer = TransducerSearch(keyword, cfg)
        self.ctc = CtcSearch(keyword, cfg)
        self.fusion = FusionState(cfg.cdc_window)
        self._strategy = cfg.fusion

    @property
    def cursor(self) -> int:
        return self.transducer.cursor

    @property
    def counters(self) -> FrameCounters:
        return FrameCounters(
            frames=self.cursor,
            transducer_updates=self.transducer.updates,
            ctc_updates=self.ctc.updates,
        )

    def push_frame(self, trans_frame, ctc_frame, duration_row=None) -> float:
        """Advance both branches one frame and return the fused confidence."""
        s_t = self.transducer.step(trans_frame, duration_row)
        s_c = self.ctc.step(ctc_frame)
        if s_t == 0.0:
            s_t = PH
        if s_c == 0.0:
            s_c = PH
        return fuse_step(self._strategy, s_t, s_c, self.fusion)


def open_session(keyword: KeywordSpec, cfg: DecodeConfig) -> JointDecodeSession:
    """Create a fresh session at frame 0; validates the configuration."""
    return JointDecodeSession(keyword, cfg)


def push_frame(
    session: JointDecodeSession, trans_frame, ctc_frame, duration_row=None
) -> float:
    return session.push_frame(trans_frame, ctc_frame, duration_row)


def decode_joint(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> ScoreStream:
    """Decode one utterance through both branches and the fusion layer.

    Returns a placeholder-free stream of fused confidences, identical to
    pushing the bundle's frames one at a time through a session.
    """
    stream, _ = decode_joint_with_counters(bundle, keyword, cfg)
    return stream


def decode_joint_with_counters(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> tuple[ScoreStream, FrameCounters]:
    """decode_joint plus the per-branch frame-accounting counters."""
    if bundle.ctc_matrix is None:
        raise MissingTensorForConfig("joint decode needs a CTC matrix")
    if cfg.transducer_mode == TDT and bundle.duration_matrix is None:
        raise MissingTensorForConfig(
            "duration-skipping decode needs a duration matrix"
        )
    keyword.check_vocab(bundle.vocab_size)
    session = open_session(keyword, cfg)
    trans_rows = bundle.transducer_tensor.tolist()
    ctc_rows = bundle.ctc_matrix.tolist()
    if cfg.transducer_mode == TDT:
        durations = bundle.duration_matrix.tolist()
    else:
        durations = [None] * bundle.num_frames
    push = session.push_frame
    frames = [
        push(trans_rows[t], ctc_rows[t], durations[t])
        for t in range(bundle.num_frames)
    ]
    stream = ScoreStream(utterance_id=bundle.utterance_id, frames=frames)
    return stream, session.counters
