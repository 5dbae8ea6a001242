"""Keyword-specific streaming Viterbi over the Transducer decoding lattice.

The lattice has rows u = 0..U; node (t, u) holds the best score of any
path that has emitted the first u keyword tokens by frame t. Row 0 is
re-seeded to probability 1 at every processed frame so a keyword may
start anywhere in the stream. A vertical arc emits the next keyword
token within the current frame; a horizontal arc emits blank at the
previous processed frame and advances time. The frame confidence is the
completed-path score times the blank probability at (t, U), bonus-scaled
and geometric-mean normalized by the number of frames the path spans.

In duration-skipping mode ("tdt") the per-frame duration distribution's
argmax decides how many frames to jump; jumped frames emit PH and leave
the lattice untouched. Accumulation is done in log domain: products of
probabilities along paths near the timeout length underflow linear
float64.
"""

from math import exp, inf, log

from .bundle import PosteriorBundle
from .errors import DurationMissing, FrameShapeMismatch
from .types import PH, TDT, DecodeConfig, KeywordSpec, ScoreStream


def _ln(p: float) -> float:
    return log(p) if p > 0.0 else -inf


def _argmax_smallest(row) -> int:
    best = row[0]
    arg = 0
    for i in range(1, len(row)):
        if row[i] > best:
            best = row[i]
            arg = i
    return arg


class TransducerSearch:
    """Stateful frame-by-frame decoder for one (utterance, keyword) pair.

    Strictly sequential: feed frames in order via step(); run one search
    per stream and never share it mid-decode (independent searches may
    run in parallel freely). After each call the attributes
    ``last_raw_score`` (pre-bonus linear path score), ``last_path_len``
    (frames spanned by the best path), ``last_processed`` and
    ``last_advance`` (the duration the frame committed to, always 1 in
    frame-synchronous mode) describe the frame just consumed.
    ``updates`` counts lattice updates actually performed.
    """

    def __init__(self, keyword: KeywordSpec, cfg: DecodeConfig):
        cfg.validate()
        self.keyword = keyword
        self.cfg = cfg
        self.tokens = list(keyword.tokens)
        self.blank = keyword.transducer_blank_id
        self.rows = len(keyword) + 1
        self._tdt = cfg.transducer_mode == TDT
        self._log_bonus = log(cfg.bonus)
        self._timeout = cfg.timeout
        self._min_vocab = max(self.blank, max(keyword.tokens)) + 1

        # delta / blank column / span of the last processed frame; the
        # virtual frame before the stream has delta 1 and blank 0, so no
        # path can enter from before frame 0.
        self._log_delta = [0.0] * self.rows
        self._log_phi = [-inf] * self.rows
        self._span = [0] * self.rows
        self._last_t = -1
        self._pending_skip = 0
        self._t = 0

        self.last_raw_score = 0.0
        self.last_path_len = 0
        self.last_processed = False
        self.last_advance = 1
        self.updates = 0

    @property
    def cursor(self) -> int:
        return self._t

    def step(self, frame_rows, duration_row=None):
        """Consume one frame; returns a confidence in [0, 1] or PH.

        Args:
            frame_rows: (U+1) x V linear probabilities for this frame.
            duration_row: duration distribution over {0..D_max}; required
                for every processed frame in duration-skipping mode.
        """
        t = self._t
        self._t = t + 1

        if self._pending_skip > 0:
            self._pending_skip -= 1
            self.last_raw_score = 0.0
            self.last_path_len = 0
            self.last_processed = False
            self.last_advance = 1
            return PH

        if len(frame_rows) != self.rows or len(frame_rows[-1]) < self._min_vocab:
            raise FrameShapeMismatch(
                f"expected {self.rows} lattice rows covering token ids up to "
                f"{self._min_vocab - 1}"
            )
        if self._tdt and duration_row is None:
            raise DurationMissing(f"duration distribution missing at frame {t}")

        gap = t - self._last_t
        delta = self._log_delta
        phi = self._log_phi
        span = self._span
        new_delta = [0.0] * self.rows
        new_span = [1] * self.rows
        for u in range(1, self.rows):
            vert = new_delta[u - 1] + _ln(frame_rows[u - 1][self.tokens[u - 1]])
            horiz = delta[u] + phi[u]
            if vert >= horiz:  # ties go to the token arc
                new_delta[u] = vert
                new_span[u] = new_span[u - 1]
            else:
                new_delta[u] = horiz
                new_span[u] = span[u] + gap

        blank = self.blank
        self._log_phi = [_ln(row[blank]) for row in frame_rows]
        self._log_delta = new_delta
        self._span = new_span
        self._last_t = t
        self.updates += 1

        log_raw = new_delta[-1] + self._log_phi[-1]
        ell = new_span[-1]
        self.last_raw_score = exp(log_raw)
        self.last_path_len = ell
        self.last_processed = True

        if self._tdt:
            d = _argmax_smallest(duration_row)
            if d < 1:
                d = 1
            self._pending_skip = d - 1
            self.last_advance = d
        else:
            self.last_advance = 1

        if ell > self._timeout:
            return 0.0
        score = exp((self._log_bonus + log_raw) / ell)
        if score > 1.0:
            return 1.0
        if score < 0.0:
            return 0.0
        return score


def _frame_inputs(bundle: PosteriorBundle, cfg: DecodeConfig):
    rows = bundle.transducer_tensor.tolist()
    if cfg.transducer_mode == TDT:
        if bundle.duration_matrix is None:
            raise DurationMissing("duration-skipping decode needs a duration matrix")
        durations = bundle.duration_matrix.tolist()
    else:
        durations = [None] * bundle.num_frames
    return rows, durations


def decode_transducer_stream(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> ScoreStream:
    """Decode a full utterance; equivalent to stepping frame-by-frame.

    The result has one entry per frame: a confidence, or PH at frames
    the duration predictor skipped. Frame-synchronous ("rnnt") mode
    never emits PH.
    """
    keyword.check_vocab(bundle.vocab_size)
    search = TransducerSearch(keyword, cfg)
    rows, durations = _frame_inputs(bundle, cfg)
    frames = [search.step(rows[t], durations[t]) for t in range(bundle.num_frames)]
    return ScoreStream(utterance_id=bundle.utterance_id, frames=frames)


def raw_transducer_scores(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> list[float]:
    """Pre-normalization best-path scores per frame (0.0 at skipped frames).

    Diagnostic view used by the enumeration oracles: the linear-domain
    path product delta(t, U) * phi(t, U) before bonus, timeout, and
    length normalization are applied.
    """
    keyword.check_vocab(bundle.vocab_size)
    search = TransducerSearch(keyword, cfg)
    rows, durations = _frame_inputs(bundle, cfg)
    raw = []
    for t in range(bundle.num_frames):
        search.step(rows[t], durations[t])
        raw.append(search.last_raw_score)
    return raw
