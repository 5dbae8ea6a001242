"""Core domain types: keyword specs, decode configuration, score streams.

Frame indices are 0-based everywhere in code; user-facing artifacts
(event files, stream files) are written 1-based, matching the usual
frame-counting convention of the surrounding tooling.
"""

from dataclasses import dataclass, field
from typing import Union

from .errors import InconsistentConfig

RNNT = "rnnt"
TDT = "tdt"
FSD = "fsd"
PSD = "psd"

CTC_DOM = "ctc-dom"
TRANSDUCER_DOM = "transducer-dom"
EQUIVALENCE_DOM = "equivalence-dom"
CDC_ZERO = "cdc-zero"
CDC_LAST = "cdc-last"

FUSION_STRATEGIES = (CTC_DOM, TRANSDUCER_DOM, EQUIVALENCE_DOM, CDC_ZERO, CDC_LAST)
TRANSDUCER_MODES = (RNNT, TDT)
CTC_MODES = (FSD, PSD)


class _Placeholder:
    """Singleton marking a frame a branch skipped (no opinion, not a zero)."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "PH"


PH = _Placeholder()

#: A frame entry is either a confidence in [0, 1] or the placeholder PH.
Frame = Union[float, _Placeholder]


@dataclass(frozen=True)
class KeywordSpec:
    """A keyword as a token-id sequence plus the blank ids of each branch."""

    keyword_id: str
    tokens: tuple[int, ...]
    ctc_blank_id: int
    transducer_blank_id: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if len(self.tokens) < 1:
            raise ValueError("keyword must contain at least one token")
        if self.ctc_blank_id in self.tokens:
            raise ValueError("CTC blank id collides with a keyword token")
        if self.transducer_blank_id in self.tokens:
            raise ValueError("Transducer blank id collides with a keyword token")

    def __len__(self) -> int:
        return len(self.tokens)

    def check_vocab(self, vocab_size: int) -> None:
        ids = (*self.tokens, self.ctc_blank_id, self.transducer_blank_id)
        bad = [i for i in ids if not 0 <= i < vocab_size]
        if bad:
            raise ValueError(f"token ids {bad} outside vocabulary of size {vocab_size}")


@dataclass(frozen=True)
class DecodeConfig:
    """Knobs shared by both branch decoders and the fusion layer.

    Attributes:
        bonus: activation-sharpening multiplier applied to the raw path
            score before length normalization.
        timeout: maximum number of frames a keyword path may span; longer
            paths score 0.
        psd_threshold: blank-probability gate for CTC frame skipping; a
            frame is skipped when p(blank) >= psd_threshold. Only
            consulted when ``ctc_mode == "psd"``.
        tdt_max_duration: largest duration the duration head may predict.
        transducer_mode: "rnnt" (process every frame) or "tdt"
            (duration-driven frame skipping).
        ctc_mode: "fsd" (process every frame) or "psd" (blank-gated).
        fusion: one of FUSION_STRATEGIES.
        cdc_window: sliding-window length for the consistency weight.
    """

    bonus: float = 1.0
    timeout: int = 200
    psd_threshold: float | None = 0.9993
    tdt_max_duration: int = 4
    transducer_mode: str = RNNT
    ctc_mode: str = FSD
    fusion: str = CDC_LAST
    cdc_window: int = 20

    def validate(self) -> None:
        """Raise InconsistentConfig on contradictory or out-of-range fields."""
        if self.bonus <= 0:
            raise InconsistentConfig(f"bonus must be positive, got {self.bonus}")
        if self.timeout < 1:
            raise InconsistentConfig(f"timeout must be >= 1, got {self.timeout}")
        if self.transducer_mode not in TRANSDUCER_MODES:
            raise InconsistentConfig(f"unknown transducer mode {self.transducer_mode!r}")
        if self.ctc_mode not in CTC_MODES:
            raise InconsistentConfig(f"unknown CTC mode {self.ctc_mode!r}")
        if self.fusion not in FUSION_STRATEGIES:
            raise InconsistentConfig(f"unknown fusion strategy {self.fusion!r}")
        if self.ctc_mode == PSD:
            if self.psd_threshold is None:
                raise InconsistentConfig("PSD mode requires psd_threshold")
            if not 0.0 < self.psd_threshold <= 1.0:
                raise InconsistentConfig(
                    f"psd_threshold must lie in (0, 1], got {self.psd_threshold}"
                )
        if self.tdt_max_duration < 1:
            raise InconsistentConfig(
                f"tdt_max_duration must be >= 1, got {self.tdt_max_duration}"
            )
        if self.cdc_window < 1:
            raise InconsistentConfig(f"cdc_window must be >= 1, got {self.cdc_window}")


@dataclass
class ScoreStream:
    """Per-frame keyword confidences; entries are floats in [0, 1] or PH."""

    utterance_id: str
    frames: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def has_placeholders(self) -> bool:
        return any(f is PH for f in self.frames)

    def values(self, fill: float = 0.0) -> list[float]:
        """Numeric view with placeholders rendered as ``fill``."""
        return [fill if f is PH else f for f in self.frames]

    def peak(self) -> float:
        """Highest resolved confidence; 0 for an empty or all-PH stream."""
        vals = self.values()
        return max(vals) if vals else 0.0
