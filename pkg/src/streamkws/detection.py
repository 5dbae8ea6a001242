"""Detection events and metric sweeps over per-utterance peak scores.

The matching protocol is utterance-level: a keyword counts as recalled
when any of its events fires in an utterance that truly contains it,
and an event for an absent keyword is a false alarm. Each keyword's
false-alarm rate divides by the hours of audio that do not contain that
keyword; multi-keyword corpora report the unweighted (macro) average
across keywords. The per-utterance score of a (keyword, utterance) pair
is the peak of the fused stream.

Event trigger frames in DetectionEvent and in files are 1-based;
trigger times mark the start of the trigger frame.
"""

from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, EmptyMap
from .types import ScoreStream


@dataclass(frozen=True)
class DetectionEvent:
    """A threshold crossing of a fused stream."""

    keyword_id: str
    utterance_id: str
    trigger_frame: int  # 1-based
    trigger_time: float  # seconds, start of the trigger frame
    peak_score: float


@dataclass(frozen=True)
class GroundTruth:
    """What one utterance actually contains."""

    utterance_id: str
    present_keywords: frozenset = frozenset()
    duration_seconds: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "present_keywords", frozenset(self.present_keywords)
        )
        if self.duration_seconds <= 0:
            raise ValueError("utterance duration must be positive")


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    recall: float
    far_per_hour: float


@dataclass
class SweepReport:
    """Threshold sweep; ``points`` is the macro curve across keywords."""

    points: list
    per_keyword: dict = field(default_factory=dict)
    positives: int = 0

    def __iter__(self):
        return iter(self.points)


def extract_events(
    stream: ScoreStream,
    threshold: float,
    refractory: int,
    keyword_id: str,
    frame_hop: float,
) -> list:
    """Threshold a placeholder-free stream into detection events.

    An event fires at the first frame whose score reaches ``threshold``;
    the following ``refractory`` frames are suppressed, and the event's
    peak is the stream maximum over the trigger frame plus its
    refractory window.
    """
    if stream.has_placeholders():
        raise ValueError("stream holds placeholders; fuse the branches first")
    events = []
    frames = stream.frames
    n = len(frames)
    i = 0
    while i < n:
        score = frames[i]
        if score >= threshold:
            window_end = min(n, i + refractory + 1)
            peak = max(frames[i:window_end])
            events.append(DetectionEvent(
                keyword_id=keyword_id,
                utterance_id=stream.utterance_id,
                trigger_frame=i + 1,
                trigger_time=i * frame_hop,
                peak_score=peak,
            ))
            i += refractory + 1
        else:
            i += 1
    return events


def _keyword_curve(keyword, scores, truth, thresholds):
    """(recall, far) per threshold for one keyword."""
    pos_peaks = []
    neg_peaks = []
    neg_hours = 0.0
    for uid, gt in truth.items():
        peak = scores.get((uid, keyword), 0.0)
        if keyword in gt.present_keywords:
            pos_peaks.append(peak)
        else:
            neg_peaks.append(peak)
            neg_hours += gt.duration_seconds / 3600.0
    points = []
    for th in thresholds:
        hits = sum(1 for p in pos_peaks if p >= th)
        recall = hits / len(pos_peaks) if pos_peaks else 0.0
        fa = sum(1 for p in neg_peaks if p >= th)
        if fa == 0:
            far = 0.0
        elif neg_hours > 0:
            far = fa / neg_hours
        else:
            far = float("inf")
        points.append(SweepPoint(threshold=th, recall=recall, far_per_hour=far))
    return points, len(pos_peaks)


def sweep(scores: dict, truth) -> SweepReport:
    """Sweep every observed peak score as a candidate threshold.

    Args:
        scores: map (utterance_id, keyword_id) -> peak score in [0, 1].
        truth: GroundTruth records (iterable or map keyed by utterance id);
            these define the corpus, and unscored pairs count as peak 0.

    Raises:
        EmptyCorpus: no truth, no keywords, or no positive utterances.
        ValueError: a scored utterance has no ground truth.
    """
    if not isinstance(truth, dict):
        truth = {gt.utterance_id: gt for gt in truth}
    if not truth:
        raise EmptyCorpus("no ground-truth records")
    for uid, _ in scores:
        if uid not in truth:
            raise ValueError(f"no ground truth for scored utterance {uid!r}")
    keywords = sorted({kw for _, kw in scores})
    if not keywords:
        raise EmptyCorpus("no scored keywords")

    thresholds = sorted({peak for peak in scores.values()})
    per_keyword = {}
    total_pos = 0
    for kw in keywords:
        per_keyword[kw], pos = _keyword_curve(kw, scores, truth, thresholds)
        total_pos += pos
    if total_pos == 0:
        raise EmptyCorpus("corpus contains no positive utterances")

    n = len(keywords)
    macro = [
        SweepPoint(
            threshold=th,
            recall=sum(per_keyword[k][i].recall for k in keywords) / n,
            far_per_hour=sum(per_keyword[k][i].far_per_hour for k in keywords) / n,
        )
        for i, th in enumerate(thresholds)
    ]
    return SweepReport(points=macro, per_keyword=per_keyword, positives=total_pos)


def evaluate_at_threshold(scores: dict, truth, threshold: float):
    """(macro recall, macro FAR/h) at one fixed operating threshold."""
    if not isinstance(truth, dict):
        truth = {gt.utterance_id: gt for gt in truth}
    keywords = sorted({kw for _, kw in scores})
    if not truth or not keywords:
        raise EmptyCorpus("nothing to evaluate")
    recalls = []
    fars = []
    for kw in keywords:
        points, _ = _keyword_curve(kw, scores, truth, [threshold])
        recalls.append(points[0].recall)
        fars.append(points[0].far_per_hour)
    return sum(recalls) / len(recalls), sum(fars) / len(fars)


def recall_at_far(report: SweepReport, far_target: float) -> float:
    """Best recall among thresholds whose FAR stays within the target.

    Recall and FAR both fall as the threshold rises, so this is the
    recall at the smallest admissible threshold. A target of 0 gives the
    zero-false-alarm accuracy. When even the strictest threshold fires
    false alarms, the only admissible operating point rejects everything
    and the recall is 0.
    """
    feasible = [p for p in report.points if p.far_per_hour <= far_target]
    if not feasible:
        return 0.0
    best = min(feasible, key=lambda p: p.threshold)
    return best.recall


def macro_average(per_keyword: dict) -> float:
    """Unweighted mean of a per-keyword metric."""
    if not per_keyword:
        raise EmptyMap("cannot average an empty keyword map")
    return sum(per_keyword.values()) / len(per_keyword)


# --- truth-file round trip ----------------------------------------------------

def parse_truth_line(line: str) -> GroundTruth:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise ValueError(
            f"truth record needs 3 tab-separated fields, got {len(parts)}: {line!r}"
        )
    uid, duration, kws = parts
    present = frozenset(k for k in kws.split(",") if k)
    return GroundTruth(
        utterance_id=uid,
        present_keywords=present,
        duration_seconds=float(duration),
    )


def format_truth_line(gt: GroundTruth) -> str:
    kws = ",".join(sorted(gt.present_keywords))
    return f"{gt.utterance_id}\t{gt.duration_seconds!r}\t{kws}"


def read_truth_file(path) -> dict:
    """Parse a truth file into a map keyed by utterance id."""
    truth = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        gt = parse_truth_line(line)
        truth[gt.utterance_id] = gt
    return truth


def write_truth_file(truth, path) -> None:
    records = truth.values() if isinstance(truth, dict) else truth
    lines = [format_truth_line(gt) for gt in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_sweep_report(report: SweepReport, far_targets=()) -> str:
    """One line per sweep point plus recall@FAR summaries, ready to write."""
    lines = ["threshold\trecall\tfar_per_hour"]
    for p in report.points:
        lines.append(f"{p.threshold:.6f}\t{p.recall:.6f}\t{p.far_per_hour:.6f}")
    for target in far_targets:
        r = recall_at_far(report, target)
        lines.append(f"recall@far={target:g}\t{r:.6f}")
        lines.append(f"miss@far={target:g}\t{1.0 - r:.6f}")
    if len(report.per_keyword) > 1:
        for target in far_targets:
            per_kw = {
                kw: recall_at_far(SweepReport(points=pts), target)
                for kw, pts in report.per_keyword.items()
            }
            lines.append(f"macro_recall@far={target:g}\t{macro_average(per_kw):.6f}")
    return "\n".join(lines) + "\n"
