"""Brute-force decoding oracles: exhaustive path enumeration at toy scale.

Both oracles share nothing with the streaming decoders: they walk every
legal path explicitly, multiplying linear-domain probabilities, and
report the per-frame maximum of the raw (pre-normalization) score. They
exist purely to check the dynamic programs and are bounded to tiny
instances because enumeration is exponential.
"""

from .bundle import PosteriorBundle
from .errors import InstanceTooLarge, MissingTensorForConfig
from .types import PSD, TDT, DecodeConfig, KeywordSpec

MAX_FRAMES = 10
MAX_TOKENS = 4


def _guard(bundle: PosteriorBundle, keyword: KeywordSpec) -> None:
    if bundle.num_frames > MAX_FRAMES or len(keyword) > MAX_TOKENS:
        raise InstanceTooLarge(
            f"enumeration bound is T<={MAX_FRAMES}, U<={MAX_TOKENS}; "
            f"got T={bundle.num_frames}, U={len(keyword)}"
        )


def _greedy_skip_pattern(duration_rows, num_frames: int) -> list:
    """Frames a duration-argmax decoder visits (ties to the shortest)."""
    visited = []
    t = 0
    while t < num_frames:
        visited.append(t)
        row = duration_rows[t]
        best, d = row[0], 0
        for i in range(1, len(row)):
            if row[i] > best:
                best, d = row[i], i
        t += max(d, 1)
    return visited


def brute_force_transducer(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> list:
    """Per-frame max over all explicit lattice paths, times the final blank.

    A path starts on row 0 at any visited frame, takes U token arcs
    (each consuming the token probability of its row at the current
    frame) and any number of blank arcs (consuming the blank probability
    of its row at the departing frame), and ends with the blank
    probability of row U at the scored frame. Frames a duration-skipping
    decoder jumps over score 0.
    """
    _guard(bundle, keyword)
    keyword.check_vocab(bundle.vocab_size)
    T = bundle.num_frames
    U = len(keyword)
    tokens = keyword.tokens
    blank = keyword.transducer_blank_id
    probs = bundle.transducer_tensor.astype(float).tolist()

    if cfg.transducer_mode == TDT:
        if bundle.duration_matrix is None:
            raise MissingTensorForConfig("duration matrix needed for TDT oracle")
        visited = _greedy_skip_pattern(bundle.duration_matrix.tolist(), T)
    else:
        visited = list(range(T))

    best = [0.0] * T

    def walk(k: int, row: int, product: float) -> None:
        t = visited[k]
        frame = probs[t]
        if row == U:
            score = product * frame[U][blank]
            if score > best[t]:
                best[t] = score
        else:
            walk(k, row + 1, product * frame[row][tokens[row]])
        if k + 1 < len(visited):
            walk(k + 1, row, product * frame[row][blank])

    for k0 in range(len(visited)):
        walk(k0, 0, 1.0)
    return best


def brute_force_ctc(
    bundle: PosteriorBundle, keyword: KeywordSpec, cfg: DecodeConfig
) -> list:
    """Per-frame max over all label sequences that collapse to the keyword.

    Enumerates every alignment over every window of kept frames: walk
    the blank-interleaved label chain one frame at a time (stay, step,
    or hop over a blank between distinct tokens) and record the running
    product whenever the walk sits on the last token or the trailing
    blank. In gate-skipping mode, frames whose blank probability reaches
    the threshold are dropped from every window and score 0.
    """
    _guard(bundle, keyword)
    keyword.check_vocab(bundle.vocab_size)
    if bundle.ctc_matrix is None:
        raise MissingTensorForConfig("CTC matrix needed for the CTC oracle")
    T = bundle.num_frames
    U = len(keyword)
    tokens = keyword.tokens
    blank = keyword.ctc_blank_id
    probs = bundle.ctc_matrix.astype(float).tolist()

    if cfg.ctc_mode == PSD:
        gate = cfg.psd_threshold
        kept = [t for t in range(T) if probs[t][blank] < gate]
    else:
        kept = list(range(T))

    n_states = 2 * U + 1
    labels = [blank if s % 2 == 0 else tokens[s // 2] for s in range(n_states)]
    terminal = (n_states - 2, n_states - 1)
    best = [0.0] * T

    def walk(k: int, state: int, product: float) -> None:
        t = kept[k]
        if state in terminal and product > best[t]:
            best[t] = product
        emitted = (state + 1) // 2
        frames_left = len(kept) - 1 - k
        if frames_left < U - emitted:
            return  # cannot finish the keyword in the remaining frames
        if frames_left == 0:
            return
        frame = probs[kept[k + 1]]
        walk(k + 1, state, product * frame[labels[state]])
        if state + 1 < n_states:
            walk(k + 1, state + 1, product * frame[labels[state + 1]])
        if (state % 2 == 1 and state + 2 < n_states
                and tokens[state // 2] != tokens[state // 2 + 1]):
            walk(k + 1, state + 2, product * frame[labels[state + 2]])

    for k0 in range(len(kept)):
        frame = probs[kept[k0]]
        walk(k0, 0, frame[blank])
        walk(k0, 1, frame[tokens[0]])
    return best
