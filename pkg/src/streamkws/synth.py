"""Synthetic posterior generation with planted keywords.

Stands in for trained-model outputs at desk scale. Outside planted
regions every row is blank-dominated (CTC blank mass never drops below
``blank_floor``, mimicking peaky CTC silence); inside a plant each
keyword token holds ``peak_prob`` of the mass for ``dwell`` consecutive
frames, on the CTC row and on the lattice row that is waiting for that
token. Duration rows point at the dwell length inside plants (capped at
the duration head's maximum) and at 2 in idle stretches, so
duration-skipping decoders have something to skip. A single
blank-heavy separator frame is inserted between repeated consecutive
tokens, weak enough that the blank gate keeps it.

Inside a plant the lattice rows that are not waiting for the current
token get a sharper blank (a quarter of the idle leak), mimicking a
model that is confident while the keyword is being spoken; with token
peaks above the idle blank floor this keeps each branch's score maximum
inside the planted region instead of letting the length-normalized
score drift up through the quiet tail.

``noise_temperature`` mixes every row with Dirichlet noise and degrades
token peaks; 0 means fully deterministic rows. Generation is
reproducible bit for bit from the seed.
"""

from dataclasses import dataclass

import numpy as np

from .bundle import PosteriorBundle
from .detection import GroundTruth
from .errors import OverlappingPlants
from .types import KeywordSpec

_SEPARATOR_BLANK = 0.9
_IDLE_DURATION = 2


@dataclass(frozen=True)
class Plant:
    """One keyword occurrence: first frame (0-based) and frames per token."""

    start: int
    dwell: int = 3


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic utterance."""

    num_frames: int
    keyword: KeywordSpec
    plants: tuple = ()
    peak_prob: float = 0.98
    blank_floor: float = 0.999
    noise_temperature: float = 0.0
    seed: int = 0
    vocab_size: int | None = None
    tdt_max_duration: int = 4
    frame_hop_seconds: float = 0.03
    utterance_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "plants", tuple(self.plants))
        if not 0.0 < self.peak_prob < 1.0:
            raise ValueError("peak_prob must lie in (0, 1)")
        if not 0.0 < self.blank_floor < 1.0:
            raise ValueError("blank_floor must lie in (0, 1)")
        if self.noise_temperature < 0.0:
            raise ValueError("noise_temperature must be >= 0")
        if not self.utterance_id:
            object.__setattr__(self, "utterance_id", f"synth-{self.seed:08d}")

    @property
    def effective_vocab(self) -> int:
        kw = self.keyword
        needed = max(*kw.tokens, kw.ctc_blank_id, kw.transducer_blank_id) + 1
        if self.vocab_size is None:
            return needed
        if self.vocab_size < needed:
            raise ValueError(
                f"vocab_size {self.vocab_size} cannot hold token ids up to {needed - 1}"
            )
        return self.vocab_size


def plant_region_length(keyword: KeywordSpec, dwell: int) -> int:
    """Frames one plant occupies: dwells plus repeat separators."""
    tokens = keyword.tokens
    separators = sum(1 for a, b in zip(tokens, tokens[1:]) if a == b)
    return len(tokens) * dwell + separators


def _plant_layout(spec: SynthSpec):
    """Per-frame plant annotation arrays; raises on overlap or overflow."""
    T = spec.num_frames
    token_at = np.full(T, -1, dtype=np.int64)   # token id emitted at frame
    row_at = np.full(T, -1, dtype=np.int64)     # lattice row waiting for it
    separator = np.zeros(T, dtype=bool)
    duration_target = np.full(T, min(_IDLE_DURATION, spec.tdt_max_duration),
                              dtype=np.int64)

    occupied = []
    for plant in spec.plants:
        if plant.dwell < 1:
            raise ValueError("plant dwell must be >= 1")
        length = plant_region_length(spec.keyword, plant.dwell)
        end = plant.start + length
        if plant.start < 0 or end > T:
            raise ValueError(
                f"plant [{plant.start}, {end}) falls outside the {T}-frame utterance"
            )
        occupied.append((plant.start, end))

    occupied.sort()
    for (_, prev_end), (nxt_start, _) in zip(occupied, occupied[1:]):
        if nxt_start < prev_end:
            raise OverlappingPlants(
                f"planted regions overlap at frame {nxt_start}"
            )

    dwell_cap = spec.tdt_max_duration
    for plant in spec.plants:
        pos = plant.start
        prev_token = None
        for row, token in enumerate(spec.keyword.tokens):
            if prev_token == token:
                separator[pos] = True
                duration_target[pos] = 1
                pos += 1
            token_at[pos:pos + plant.dwell] = token
            row_at[pos:pos + plant.dwell] = row
            duration_target[pos:pos + plant.dwell] = min(plant.dwell, dwell_cap)
            pos += plant.dwell
            prev_token = token
    return token_at, row_at, separator, duration_target


def _noise_weights(rng, lam: float, shape) -> np.ndarray:
    """Row weights summing to 1: uniform at lam=0, Dirichlet-blended above."""
    vocab = shape[-1]
    uniform = np.full(shape, 1.0 / vocab)
    if lam == 0.0:
        return uniform
    rows = int(np.prod(shape[:-1]))
    noise = rng.dirichlet(np.ones(vocab), size=rows).reshape(shape)
    return (1.0 - lam) * uniform + lam * noise


def _blank_dominated(weights: np.ndarray, blank: int, floor: float) -> np.ndarray:
    out = (1.0 - floor) * weights
    out[..., blank] += floor
    return out


def _apply_token_peaks(matrix, weights, token_ids, frame_sel, peaks):
    """Overwrite selected rows with a peaked-token distribution."""
    w = weights[frame_sel].copy()
    np.put_along_axis(w, token_ids[:, None], 0.0, axis=-1)
    w /= w.sum(axis=-1, keepdims=True)
    residual = 1.0 - peaks
    rows = residual[:, None] * w
    np.put_along_axis(rows, token_ids[:, None], peaks[:, None], axis=-1)
    matrix[frame_sel] = rows


def generate_utterance(spec: SynthSpec):
    """Build one (PosteriorBundle, GroundTruth) pair from a spec."""
    rng = np.random.default_rng(spec.seed)
    T = spec.num_frames
    V = spec.effective_vocab
    kw = spec.keyword
    lam = spec.noise_temperature / (1.0 + spec.noise_temperature)

    token_at, row_at, separator, duration_target = _plant_layout(spec)
    token_frames = np.nonzero(token_at >= 0)[0]
    tokens_here = token_at[token_frames]

    def peak_draws(count):
        if lam == 0.0:
            return np.full(count, spec.peak_prob)
        return spec.peak_prob * (1.0 - lam * rng.uniform(size=count))

    # CTC matrix: blank-dominated everywhere, then separators and peaks
    w_ctc = _noise_weights(rng, lam, (T, V))
    ctc = _blank_dominated(w_ctc, kw.ctc_blank_id, spec.blank_floor)
    if separator.any():
        sep_rows = (1.0 - _SEPARATOR_BLANK) * w_ctc[separator]
        sep_rows[:, kw.ctc_blank_id] += _SEPARATOR_BLANK
        ctc[separator] = sep_rows
    if len(token_frames):
        _apply_token_peaks(ctc, w_ctc, tokens_here, token_frames,
                           peak_draws(len(token_frames)))

    # Transducer lattice: every row blank-dominated except the row that
    # is waiting for the frame's planted token; rows inside the plant
    # carry a sharper blank than idle audio
    rows = len(kw) + 1
    w_trans = _noise_weights(rng, lam, (T, rows, V))
    trans = _blank_dominated(w_trans, kw.transducer_blank_id, spec.blank_floor)
    in_plant = (token_at >= 0) | separator
    if in_plant.any():
        sharp_floor = 1.0 - (1.0 - spec.blank_floor) / 4.0
        trans[in_plant] = _blank_dominated(
            w_trans[in_plant], kw.transducer_blank_id, sharp_floor)
    if len(token_frames):
        flat_trans = trans.reshape(T * rows, V)
        flat_w = w_trans.reshape(T * rows, V)
        flat_sel = token_frames * rows + row_at[token_frames]
        _apply_token_peaks(flat_trans, flat_w, tokens_here, flat_sel,
                           peak_draws(len(token_frames)))

    # Duration rows: point at the dwell inside plants, at 2 when idle
    bins = spec.tdt_max_duration + 1
    duration = np.zeros((T, bins))
    duration[np.arange(T), duration_target] = 1.0
    if lam > 0.0:
        duration = (1.0 - lam) * duration + lam * rng.dirichlet(
            np.ones(bins), size=T
        )

    bundle = PosteriorBundle(
        utterance_id=spec.utterance_id,
        transducer_tensor=trans,
        ctc_matrix=ctc,
        duration_matrix=duration,
        tdt=True,
        ctc_blank_id=kw.ctc_blank_id,
        transducer_blank_id=kw.transducer_blank_id,
        frame_hop_seconds=spec.frame_hop_seconds,
    )
    truth = GroundTruth(
        utterance_id=spec.utterance_id,
        present_keywords=frozenset({kw.keyword_id} if spec.plants else set()),
        duration_seconds=T * spec.frame_hop_seconds,
    )
    return bundle, truth


def random_bundle(
    seed: int,
    max_frames: int = 8,
    max_tokens: int = 3,
    max_vocab: int = 5,
    with_duration: bool = True,
):
    """Small fully-random bundle + keyword for oracle and property suites.

    Every distribution is an independent flat Dirichlet draw, so the
    posteriors carry no keyword structure at all; keyword tokens may
    repeat, exercising the CTC separating-blank rule.
    """
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, max_frames + 1))
    V = int(rng.integers(2, max_vocab + 1))
    blank = int(rng.integers(0, V))
    U = int(rng.integers(1, max_tokens + 1))
    non_blank = [v for v in range(V) if v != blank]
    tokens = tuple(int(t) for t in rng.choice(non_blank, size=U, replace=True))
    keyword = KeywordSpec(
        keyword_id=f"kw{seed}",
        tokens=tokens,
        ctc_blank_id=blank,
        transducer_blank_id=blank,
    )

    trans = rng.dirichlet(np.ones(V), size=(T, U + 1))
    ctc = rng.dirichlet(np.ones(V), size=T)
    duration = None
    if with_duration:
        bins = int(rng.integers(2, 6))
        duration = rng.dirichlet(np.ones(bins), size=T)
    bundle = PosteriorBundle(
        utterance_id=f"rand-{seed:08d}",
        transducer_tensor=trans,
        ctc_matrix=ctc,
        duration_matrix=duration,
        tdt=with_duration,
        ctc_blank_id=blank,
        transducer_blank_id=blank,
        frame_hop_seconds=0.03,
    )
    return bundle, keyword


@dataclass(frozen=True)
class CorpusSpec:
    """Recipe for a whole synthetic corpus (CLI `generate`, benchmarks)."""

    keyword: KeywordSpec
    num_utterances: int = 20
    num_frames: int = 300
    positive_fraction: float = 0.5
    dwell: int = 3
    peak_prob: float = 0.98
    blank_floor: float = 0.999
    noise_temperature: float = 0.0
    vocab_size: int | None = None
    tdt_max_duration: int = 4
    frame_hop_seconds: float = 0.03
    seed: int = 0
    id_prefix: str = "utt"


def corpus_specs(corpus: CorpusSpec) -> list:
    """Expand a corpus recipe into per-utterance SynthSpecs.

    The first ``round(N * positive_fraction)`` utterances carry one
    plant at a seed-determined position; the rest are negatives.
    """
    region = plant_region_length(corpus.keyword, corpus.dwell)
    if region + 2 > corpus.num_frames:
        raise ValueError(
            f"{corpus.num_frames} frames cannot hold a {region}-frame plant"
        )
    n_pos = round(corpus.num_utterances * corpus.positive_fraction)
    specs = []
    for i in range(corpus.num_utterances):
        rng = np.random.default_rng([corpus.seed, i])
        plants = ()
        if i < n_pos:
            start = int(rng.integers(1, corpus.num_frames - region))
            plants = (Plant(start=start, dwell=corpus.dwell),)
        specs.append(SynthSpec(
            num_frames=corpus.num_frames,
            keyword=corpus.keyword,
            plants=plants,
            peak_prob=corpus.peak_prob,
            blank_floor=corpus.blank_floor,
            noise_temperature=corpus.noise_temperature,
            seed=corpus.seed * 1_000_003 + i,
            vocab_size=corpus.vocab_size,
            tdt_max_duration=corpus.tdt_max_duration,
            frame_hop_seconds=corpus.frame_hop_seconds,
            utterance_id=f"{corpus.id_prefix}{i:05d}",
        ))
    return specs


def standard_benchmark_corpus(
    num_utterances: int = 1000, num_frames: int = 1000, seed: int = 7
):
    """The throughput-benchmark corpus: long utterances, mostly silence.

    Idle frames are gate-skippable (blank mass above the default gate)
    and carry duration 2, so both skipping mechanisms have work to
    elide; plants use a seven-token keyword to keep the lattice and
    topology updates from being dwarfed by per-frame overhead.
    """
    keyword = KeywordSpec(
        keyword_id="bench-word",
        tokens=(1, 4, 2, 7, 3, 6, 5),
        ctc_blank_id=0,
        transducer_blank_id=0,
    )
    corpus = CorpusSpec(
        keyword=keyword,
        num_utterances=num_utterances,
        num_frames=num_frames,
        positive_fraction=0.4,
        dwell=3,
        peak_prob=0.97,
        blank_floor=0.9995,
        noise_temperature=0.0,
        vocab_size=12,
        tdt_max_duration=4,
        frame_hop_seconds=0.03,
        seed=seed,
        id_prefix="bench",
    )
    pairs = [generate_utterance(s) for s in corpus_specs(corpus)]
    bundles = [b for b, _ in pairs]
    truths = [t for _, t in pairs]
    return bundles, truths, keyword
