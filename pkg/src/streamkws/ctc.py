"""Keyword-specific streaming CTC Viterbi with optional blank-gated skipping.

The keyword y_1..y_U is unrolled into the standard 2U+1 state chain
[blank, y_1, blank, y_2, ..., blank, y_U, blank]. Transitions are
self-loop, advance-by-one, and the skip that bypasses a blank between
two consecutive tokens; the skip is forbidden when those tokens are
identical (the collapse rule requires a separating blank). The two
entry states (leading blank and y_1) are re-seeded with probability 1 at
every processed frame, so a keyword may start anywhere; since path
scores never exceed 1, the fresh start is exactly the max over all
start frames. The per-frame confidence is the better of the two
terminal states (y_U, trailing blank), bonus-scaled and normalized by
the number of consumed frames.

Phone-synchronous mode skips any frame whose blank probability reaches
the gate threshold; skipped frames emit PH, leave all state untouched,
and are excluded from the normalization length but still counted in the
wall-clock span checked against the timeout.
"""

from math import exp, inf, log

import numpy as np

from .bundle import PosteriorBundle
from .errors import FrameShapeMismatch, MissingTensorForConfig
from .types import PH, PSD, DecodeConfig, KeywordSpec, ScoreStream


def _ln(p: float) -> float:
    return log(p) if p > 0.0 else -inf


class CtcTopology:
    """Blank-interleaved state chain for one keyword."""

    def __init__(self, keyword: KeywordSpec):
        self.tokens = list(keyword.tokens)
        self.blank = keyword.ctc_blank_id
        self.n_states = 2 * len(self.tokens) + 1
        # labels[s] is the emitted token id of state s
        self.labels = []
        for s in range(self.n_states):
            self.labels.append(self.blank if s % 2 == 0 else self.tokens[s // 2])
        # skip into token state s bypasses a blank; legal only between
        # distinct consecutive tokens
        self.skip_ok = [
            s % 2 == 1 and s >= 3 and self.tokens[s // 2] != self.tokens[s // 2 - 1]
            for s in range(self.n_states)
        ]


def psd_gate(frame_posterior, threshold: float, blank: int) -> bool:
    """True when the frame should be skipped: p(blank) >= threshold."""
    return frame_posterior[blank] >= threshold


class CtcSearch:
    """Stateful frame-by-frame CTC keyword decoder.

    Mirrors TransducerSearch's surface: step() per frame, one search per
    stream, sequential within a stream. The attributes
    ``last_raw_score``, ``last_path_len``, ``last_processed``,
    ``updates`` and ``skips`` support inspection and frame accounting.
    """

    def __init__(self, keyword: KeywordSpec, cfg: DecodeConfig):
        cfg.validate()
        self.keyword = keyword
        self.cfg = cfg
        self.topology = CtcTopology(keyword)
        self.blank = keyword.ctc_blank_id
        self._psd = cfg.ctc_mode == PSD
        self._gate = cfg.psd_threshold if self._psd else None
        self._log_bonus = log(cfg.bonus)
        self._timeout = cfg.timeout
        self._min_vocab = max(self.blank, max(keyword.tokens)) + 1

        n = self.topology.n_states
        self._alpha = [-inf] * n
        self._kept = [0] * n
        self._start = [0] * n
        self._t = 0

        self.last_raw_score = 0.0
        self.last_path_len = 0
        self.last_processed = False
        self.updates = 0
        self.skips = 0

    @property
    def cursor(self) -> int:
        return self._t

    def step(self, frame_posterior):
        """Consume one V-dim posterior row; returns a confidence or PH."""
        t = self._t
        self._t = t + 1
        if len(frame_posterior) < self._min_vocab:
            raise FrameShapeMismatch(
                f"posterior row of length {len(frame_posterior)} cannot "
                f"cover token ids up to {self._min_vocab - 1}"
            )

        if self._psd and frame_posterior[self.blank] >= self._gate:
            self.skips += 1
            self.last_raw_score = 0.0
            self.last_path_len = 0
            self.last_processed = False
            return PH

        topo = self.topology
        alpha = self._alpha
        kept = self._kept
        start = self._start
        n = topo.n_states
        new_alpha = [0.0] * n
        new_kept = [0] * n
        new_start = [0] * n

        log_pb = _ln(frame_posterior[self.blank])
        for s in range(n):
            # candidate predecessors in tie-break order: fresh entry,
            # then the transition advancing the chain the most
            if s <= 1:
                best, b_kept, b_start = 0.0, 0, t
                if s == 1 and alpha[0] > best:
                    best, b_kept, b_start = alpha[0], kept[0], start[0]
                if alpha[s] > best:
                    best, b_kept, b_start = alpha[s], kept[s], start[s]
            else:
                if topo.skip_ok[s]:
                    best, b_kept, b_start = alpha[s - 2], kept[s - 2], start[s - 2]
                    if alpha[s - 1] > best:
                        best, b_kept, b_start = alpha[s - 1], kept[s - 1], start[s - 1]
                else:
                    best, b_kept, b_start = alpha[s - 1], kept[s - 1], start[s - 1]
                if alpha[s] > best:
                    best, b_kept, b_start = alpha[s], kept[s], start[s]
            emit = log_pb if s % 2 == 0 else _ln(frame_posterior[topo.labels[s]])
            new_alpha[s] = best + emit
            new_kept[s] = b_kept + 1
            new_start[s] = b_start

        self._alpha = new_alpha
        self._kept = new_kept
        self._start = new_start
        self.updates += 1

        # terminal = last token or trailing blank; ties to the blank,
        # which sits further along the chain
        term = n - 1 if new_alpha[n - 1] >= new_alpha[n - 2] else n - 2
        log_raw = new_alpha[term]
        ell = new_kept[term]
        span = t - new_start[term] + 1
        self.last_raw_score = exp(log_raw)
        self.last_path_len = ell
        self.last_processed = True

        if span > self._timeout:
            return 0.0
        score = exp((self._log_bonus + log_raw) / ell)
        if score > 1.0:
            return 1.0
        if score < 0.0:
            return 0.0
        return score


def decode_ctc_stream(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> ScoreStream:
    """Decode a full utterance; PH marks gate-skipped frames (PSD only)."""
    if bundle.ctc_matrix is None:
        raise MissingTensorForConfig("bundle has no CTC matrix")
    keyword.check_vocab(bundle.vocab_size)
    search = CtcSearch(keyword, cfg)
    rows = bundle.ctc_matrix.tolist()
    frames = [search.step(row) for row in rows]
    return ScoreStream(utterance_id=bundle.utterance_id, frames=frames)


def raw_ctc_scores(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> list[float]:
    """Pre-normalization best-alignment scores per frame (0.0 when skipped)."""
    if bundle.ctc_matrix is None:
        raise MissingTensorForConfig("bundle has no CTC matrix")
    keyword.check_vocab(bundle.vocab_size)
    search = CtcSearch(keyword, cfg)
    raw = []
    for row in bundle.ctc_matrix.tolist():
        search.step(row)
        raw.append(search.last_raw_score)
    return raw


def skipped_ratio(bundle: PosteriorBundle, threshold: float, blank: int) -> float:
    """Fraction of frames the blank gate would skip at this threshold."""
    if bundle.ctc_matrix is None:
        raise MissingTensorForConfig("bundle has no CTC matrix")
    blanks = bundle.ctc_matrix[:, blank]
    return float(np.count_nonzero(blanks >= threshold)) / bundle.num_frames
