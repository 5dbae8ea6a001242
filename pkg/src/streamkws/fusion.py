"""Score fusion: merge the Transducer and CTC confidence streams.

Five strategies are supported. The single-frame strategies resolve
placeholders by domination (ctc-dom, transducer-dom) or averaging
(equivalence-dom); a frame both branches skipped is a null frame and
scores 0 under every strategy. The consistency strategies (cdc-zero,
cdc-last) first resolve placeholders (to 0, or to the branch's most
recent resolved value), push the resolved pair into per-branch sliding
windows, and weight the CTC contribution by the cosine similarity w of
the two windows:

    fused = (s_trans + w * s_ctc) / (1 + w)

w is defined as 0 whenever either window has zero norm and is clamped
to [0, 1]; the fused formula is undefined at w = -1, and negative
similarity means the branches disagree, so the CTC contribution is
dropped. Windows include the current frame and simply hold fewer
entries during warm-up.

The dot product and squared norms are maintained as sliding sums (the
cosine is needed every frame, and recomputing 20-element windows per
frame dominates decoding cost); zero-norm detection uses exact nonzero
counts, so drift in the running sums can never fabricate similarity out
of an all-zero window.
"""

from collections import deque
from math import sqrt

from .errors import LengthMismatch
from .types import (
    CDC_LAST,
    CDC_ZERO,
    CTC_DOM,
    EQUIVALENCE_DOM,
    PH,
    TRANSDUCER_DOM,
    DecodeConfig,
    ScoreStream,
)


class FusionState:
    """Sliding windows and last-seen values for one stream pair.

    Drive a state with a single strategy and in strict frame order; the
    windows hold the strategy's resolved values, so mixing strategies on
    one state is undefined.
    """

    __slots__ = ("window", "history_trans", "history_ctc", "last_trans",
                 "last_ctc", "_dot", "_norm_t", "_norm_c", "_nonzero_t",
                 "_nonzero_c")

    def __init__(self, window: int = 20):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.history_trans = deque(maxlen=window)
        self.history_ctc = deque(maxlen=window)
        self.last_trans = 0.0
        self.last_ctc = 0.0
        self._dot = 0.0
        self._norm_t = 0.0
        self._norm_c = 0.0
        self._nonzero_t = 0
        self._nonzero_c = 0

    def push(self, r_trans: float, r_ctc: float) -> None:
        """Slide both windows one frame, keeping the cosine sums current."""
        ht = self.history_trans
        hc = self.history_ctc
        if len(ht) == self.window:
            e_t = ht[0]
            e_c = hc[0]
            self._dot -= e_t * e_c
            self._norm_t -= e_t * e_t
            self._norm_c -= e_c * e_c
            if e_t != 0.0:
                self._nonzero_t -= 1
            if e_c != 0.0:
                self._nonzero_c -= 1
        ht.append(r_trans)
        hc.append(r_ctc)
        self._dot += r_trans * r_ctc
        self._norm_t += r_trans * r_trans
        self._norm_c += r_ctc * r_ctc
        if r_trans != 0.0:
            self._nonzero_t += 1
        if r_ctc != 0.0:
            self._nonzero_c += 1

    def cosine(self) -> float:
        """Similarity of the two windows: 0 for a zero-norm window,
        clamped to [0, 1]."""
        if self._nonzero_t == 0 or self._nonzero_c == 0:
            return 0.0
        nt = self._norm_t
        nc = self._norm_c
        # sliding subtraction may leave a tiny negative residue
        denom = sqrt(nt if nt > 0.0 else 0.0) * sqrt(nc if nc > 0.0 else 0.0)
        if denom <= 0.0:
            return 0.0
        w = self._dot / denom
        if w < 0.0:
            return 0.0
        if w > 1.0:
            return 1.0
        return w


def fuse_step(strategy: str, s_trans, s_ctc, state: FusionState) -> float:
    """Fuse one frame's branch outputs (scores or PH) into a confidence."""
    t_ph = s_trans is PH
    c_ph = s_ctc is PH

    if not t_ph:
        state.last_trans = s_trans
    if not c_ph:
        state.last_ctc = s_ctc

    if strategy == CDC_LAST:
        r_trans = state.last_trans if t_ph else s_trans
        r_ctc = state.last_ctc if c_ph else s_ctc
    elif strategy == CDC_ZERO:
        r_trans = 0.0 if t_ph else s_trans
        r_ctc = 0.0 if c_ph else s_ctc
    elif strategy == CTC_DOM:
        if not c_ph:
            return s_ctc
        return 0.0 if t_ph else s_trans
    elif strategy == TRANSDUCER_DOM:
        if not t_ph:
            return s_trans
        return 0.0 if c_ph else s_ctc
    elif strategy == EQUIVALENCE_DOM:
        if t_ph and c_ph:
            return 0.0
        if t_ph:
            return s_ctc
        if c_ph:
            return s_trans
        return (s_trans + s_ctc) / 2.0
    else:
        raise ValueError(f"unknown fusion strategy {strategy!r}")

    state.push(r_trans, r_ctc)
    if t_ph and c_ph:
        return 0.0  # null frame: neither branch saw evidence
    w = state.cosine()
    return (r_trans + w * r_ctc) / (1.0 + w)


def fuse_streams(
    trans: ScoreStream, ctc: ScoreStream, cfg: DecodeConfig
) -> ScoreStream:
    """Fuse two aligned streams into a placeholder-free confidence stream.

    A branch output of exactly 0 carries no keyword evidence and is
    treated as a placeholder before fusing, exactly as the joint decoder
    does frame by frame.
    """
    if len(trans) != len(ctc):
        raise LengthMismatch(
            f"stream lengths differ: {len(trans)} vs {len(ctc)}"
        )
    state = FusionState(cfg.cdc_window)
    strategy = cfg.fusion
    fused = []
    for s_t, s_c in zip(trans.frames, ctc.frames):
        if s_t == 0.0:
            s_t = PH
        if s_c == 0.0:
            s_c = PH
        fused.append(fuse_step(strategy, s_t, s_c, state))
    return ScoreStream(utterance_id=trans.utterance_id, frames=fused)
