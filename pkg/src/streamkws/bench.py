"""Decoding throughput benchmark: frames per second and relative speed-up.

Times pure decoding over an in-memory corpus, one configuration at a
time, pinned to a single worker so the numbers are stable. Posterior
handling is excluded from the clock: each bundle's tensors are unpacked
into the decoders' frame-row form before the timer starts, and only the
per-frame stepping (and fusion, for joint rows) is measured. The first
row is the baseline; every row reports wall time, frames per second,
speed-up against the baseline, and the per-branch frame-accounting
counters that explain where the speed-up comes from.
"""

import time
from dataclasses import dataclass

from .ctc import CtcSearch
from .errors import EmptyCorpus, MissingTensorForConfig
from .joint import open_session
from .transducer import TransducerSearch
from .types import (
    CDC_LAST,
    FSD,
    PSD,
    RNNT,
    TDT,
    DecodeConfig,
    KeywordSpec,
)

JOINT = "joint"
TRANSDUCER_ONLY = "transducer"
CTC_ONLY = "ctc"


@dataclass(frozen=True)
class BenchConfig:
    """One benchmark row: a label, a decode config, and which branches run."""

    label: str
    cfg: DecodeConfig
    branch: str = JOINT


@dataclass
class BenchRow:
    label: str
    wall_seconds: float
    frames: int
    frames_per_second: float
    speedup: float
    transducer_updates: int
    ctc_updates: int


@dataclass
class BenchReport:
    baseline: str
    rows: list

    def row(self, label: str) -> BenchRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def render(self) -> str:
        lines = [
            f"baseline: {self.baseline}",
            "label\twall_s\tframes/s\tspeedup\ttransducer_updates\tctc_updates",
        ]
        for r in self.rows:
            lines.append(
                f"{r.label}\t{r.wall_seconds:.3f}\t{r.frames_per_second:.0f}"
                f"\t{r.speedup:.2f}x\t{r.transducer_updates}\t{r.ctc_updates}"
            )
        return "\n".join(lines) + "\n"


def standard_rows(fusion: str = CDC_LAST) -> list:
    """The five stock comparison rows; the frame-synchronous joint decode
    comes first and serves as the baseline."""
    return [
        BenchConfig("MFS", DecodeConfig(transducer_mode=RNNT, ctc_mode=FSD,
                                        fusion=fusion), JOINT),
        BenchConfig("CTC-PSD", DecodeConfig(ctc_mode=PSD, fusion=fusion), CTC_ONLY),
        BenchConfig("RNN-T", DecodeConfig(transducer_mode=RNNT, ctc_mode=FSD,
                                          fusion=fusion), TRANSDUCER_ONLY),
        BenchConfig("TDT", DecodeConfig(transducer_mode=TDT, ctc_mode=FSD,
                                        fusion=fusion), TRANSDUCER_ONLY),
        BenchConfig("MFA", DecodeConfig(transducer_mode=TDT, ctc_mode=PSD,
                                        fusion=fusion), JOINT),
    ]


def _prepare(bundle, cfg, branch):
    """Unpack the tensors a row needs into plain frame rows (untimed)."""
    trans = ctc = durations = None
    if branch in (JOINT, TRANSDUCER_ONLY):
        trans = bundle.transducer_tensor.tolist()
        if cfg.transducer_mode == TDT:
            if bundle.duration_matrix is None:
                raise MissingTensorForConfig(
                    f"{bundle.utterance_id}: duration-skipping row needs a "
                    f"duration matrix"
                )
            durations = bundle.duration_matrix.tolist()
    if branch in (JOINT, CTC_ONLY):
        if bundle.ctc_matrix is None:
            raise MissingTensorForConfig(
                f"{bundle.utterance_id}: CTC row needs a CTC matrix"
            )
        ctc = bundle.ctc_matrix.tolist()
    return trans, ctc, durations


def _run_joint(keyword, cfg, inputs):
    trans, ctc, durations = inputs
    session = open_session(keyword, cfg)
    push = session.push_frame
    if durations is None:
        for t in range(len(trans)):
            push(trans[t], ctc[t])
    else:
        for t in range(len(trans)):
            push(trans[t], ctc[t], durations[t])
    return session.transducer.updates, session.ctc.updates


def _run_transducer(keyword, cfg, inputs):
    trans, _, durations = inputs
    search = TransducerSearch(keyword, cfg)
    step = search.step
    if durations is None:
        for rows in trans:
            step(rows)
    else:
        for t in range(len(trans)):
            step(trans[t], durations[t])
    return search.updates, 0


def _run_ctc(keyword, cfg, inputs):
    _, ctc, _ = inputs
    search = CtcSearch(keyword, cfg)
    step = search.step
    for row in ctc:
        step(row)
    return 0, search.updates


_RUNNERS = {JOINT: _run_joint, TRANSDUCER_ONLY: _run_transducer, CTC_ONLY: _run_ctc}


def bench(
    corpus: list,
    keyword: KeywordSpec,
    configs: list,
    repetitions: int = 1,
) -> BenchReport:
    """Time every config over the corpus; speed-ups are against configs[0].

    Each config gets a short warm-up slice (not timed) and then
    ``repetitions`` full timed passes; the fastest pass is reported.
    """
    if not corpus:
        raise EmptyCorpus("benchmark corpus is empty")
    if not configs:
        raise ValueError("no benchmark configs given")
    total_frames = sum(b.num_frames for b in corpus)
    warm = corpus[: max(1, len(corpus) // 50)]

    rows = []
    for bc in configs:
        runner = _RUNNERS[bc.branch]
        for bundle in warm:
            runner(keyword, bc.cfg, _prepare(bundle, bc.cfg, bc.branch))
        trans_updates = ctc_updates = 0
        walls = []
        for rep in range(max(1, repetitions)):
            trans_updates = ctc_updates = 0
            wall = 0.0
            for bundle in corpus:
                inputs = _prepare(bundle, bc.cfg, bc.branch)
                start = time.perf_counter()
                tu, cu = runner(keyword, bc.cfg, inputs)
                wall += time.perf_counter() - start
                trans_updates += tu
                ctc_updates += cu
            walls.append(wall)
        wall = min(walls)
        rows.append(BenchRow(
            label=bc.label,
            wall_seconds=wall,
            frames=total_frames,
            frames_per_second=total_frames / wall if wall > 0 else float("inf"),
            speedup=1.0,
            transducer_updates=trans_updates,
            ctc_updates=ctc_updates,
        ))

    base_wall = rows[0].wall_seconds
    for r in rows:
        r.speedup = base_wall / r.wall_seconds if r.wall_seconds > 0 else float("inf")
    return BenchReport(baseline=rows[0].label, rows=rows)
