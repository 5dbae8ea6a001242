"""Command-line surface: generate | decode | evaluate | bench | verify.

Exit codes: 0 on success, 1 on input or configuration errors, 2 when
oracle verification finds a mismatch. All text outputs are UTF-8 with
LF line endings; stream files hold `frame_index<TAB>score` (1-based
frames) and event files hold
`keyword_id<TAB>trigger_frame<TAB>trigger_time_s<TAB>peak_score`.
"""

import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .bench import bench, standard_rows
from .bundle import load_bundle, save_bundle
from .ctc import raw_ctc_scores
from .detection import (
    extract_events,
    parse_truth_line,
    read_truth_file,
    recall_at_far,
    render_sweep_report,
    sweep,
    write_truth_file,
)
from .errors import StreamKwsError
from .joint import decode_joint
from .oracles import brute_force_ctc, brute_force_transducer
from .synth import (
    CorpusSpec,
    corpus_specs,
    generate_utterance,
    random_bundle,
    standard_benchmark_corpus,
)
from .transducer import raw_transducer_scores
from .types import (
    CDC_LAST,
    FSD,
    FUSION_STRATEGIES,
    PSD,
    RNNT,
    TRANSDUCER_MODES,
    DecodeConfig,
    KeywordSpec,
)

DEFAULT_FAR_TARGETS = (0.02, 0.05, 0.5, 1.0)


class VerificationFailure(click.ClickException):
    exit_code = 2


def _fail(message: str) -> click.ClickException:
    return click.ClickException(message)


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise _fail(f"{what} {path} does not exist")
    return p


def _keyword_from_json(path) -> KeywordSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return KeywordSpec(
            keyword_id=doc["keyword_id"],
            tokens=tuple(doc["tokens"]),
            ctc_blank_id=int(doc["ctc_blank_id"]),
            transducer_blank_id=int(doc["transducer_blank_id"]),
        )
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise _fail(f"bad keyword file {path}: {exc}")


def _config_options(fn):
    opts = [
        click.option("--bonus", type=float, default=1.0, show_default=True,
                     help="Activation-sharpening multiplier."),
        click.option("--timeout", type=int, default=200, show_default=True,
                     help="Longest admissible path span in frames."),
        click.option("--mode", "transducer_mode",
                     type=click.Choice(TRANSDUCER_MODES), default=RNNT,
                     show_default=True, help="Transducer branch mode."),
        click.option("--psd/--fsd", "use_psd", default=False, show_default=True,
                     help="Gate CTC frames on blank probability."),
        click.option("--lambda-phi", type=float, default=0.9993, show_default=True,
                     help="Blank-probability gate for --psd."),
        click.option("--max-duration", "tdt_max_duration", type=int, default=4,
                     show_default=True, help="Duration head upper bound."),
        click.option("--fusion", type=click.Choice(FUSION_STRATEGIES),
                     default=CDC_LAST, show_default=True),
        click.option("--cdc-window", type=int, default=20, show_default=True,
                     help="Consistency-weight window length."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(bonus, timeout, transducer_mode, use_psd, lambda_phi,
                  tdt_max_duration, fusion, cdc_window) -> DecodeConfig:
    cfg = DecodeConfig(
        bonus=bonus,
        timeout=timeout,
        psd_threshold=lambda_phi,
        tdt_max_duration=tdt_max_duration,
        transducer_mode=transducer_mode,
        ctc_mode=PSD if use_psd else FSD,
        fusion=fusion,
        cdc_window=cdc_window,
    )
    try:
        cfg.validate()
    except StreamKwsError as exc:
        raise _fail(str(exc))
    return cfg


def _echo_config(cfg: DecodeConfig) -> None:
    click.echo(
        "# config:"
        f" mode={cfg.transducer_mode} ctc={cfg.ctc_mode}"
        f" lambda_phi={cfg.psd_threshold} fusion={cfg.fusion}"
        f" bonus={cfg.bonus} timeout={cfg.timeout}"
        f" max_duration={cfg.tdt_max_duration} cdc_window={cfg.cdc_window}"
    )


@click.group()
@click.version_option(version=__version__, prog_name="streamkws")
def main():
    """Streaming keyword-spotting decoder over precomputed posteriors."""


@main.command()
@click.option("--spec", "spec_path", required=True,
              type=click.Path(dir_okay=False), help="Corpus recipe (JSON).")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
def generate(spec_path, out_dir):
    """Write a deterministic synthetic corpus: KPF bundles + truth + manifest."""
    _require_file(spec_path, "corpus spec")
    try:
        doc = json.loads(Path(spec_path).read_text(encoding="utf-8"))
        kw_doc = doc.pop("keyword")
        keyword = KeywordSpec(
            keyword_id=kw_doc["keyword_id"],
            tokens=tuple(kw_doc["tokens"]),
            ctc_blank_id=int(kw_doc["ctc_blank_id"]),
            transducer_blank_id=int(kw_doc["transducer_blank_id"]),
        )
        corpus = CorpusSpec(keyword=keyword, **doc)
        specs = corpus_specs(corpus)
    except (KeyError, TypeError, ValueError, StreamKwsError) as exc:
        raise _fail(f"invalid corpus spec: {exc}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truths = []
    manifest_lines = []
    for spec in specs:
        try:
            bundle, truth = generate_utterance(spec)
        except StreamKwsError as exc:
            raise _fail(f"generation failed for {spec.utterance_id}: {exc}")
        path = out / f"{spec.utterance_id}.kpf"
        save_bundle(bundle, path)
        truths.append(truth)
        kws = ",".join(sorted(truth.present_keywords))
        manifest_lines.append(
            f"{path}\t{truth.utterance_id}\t{truth.duration_seconds!r}\t{kws}"
        )
    write_truth_file(truths, out / "truth.tsv")
    (out / "manifest.tsv").write_text(
        "\n".join(manifest_lines) + "\n", encoding="utf-8"
    )
    click.echo(f"wrote {len(specs)} bundles to {out}")


def _read_manifest(path):
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        bundle_path, truth_record = line.split("\t", 1)
        entries.append((bundle_path, parse_truth_line(truth_record)))
    return entries


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--keyword", "keyword_paths", required=True, multiple=True,
              type=click.Path(dir_okay=False),
              help="Keyword spec (JSON); repeatable.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--event-threshold", type=float, default=0.5, show_default=True)
@click.option("--refractory", type=int, default=60, show_default=True,
              help="Frames suppressed after each detection event.")
@click.option("--workers", type=int, default=1, show_default=True)
@_config_options
def decode(manifest_path, keyword_paths, out_dir, event_threshold, refractory,
           workers, **cfg_kwargs):
    """Decode a corpus: one stream file and one event file per pair."""
    cfg = _build_config(**cfg_kwargs)
    _echo_config(cfg)
    _require_file(manifest_path, "manifest")
    keywords = [_keyword_from_json(_require_file(p, "keyword file"))
                for p in keyword_paths]
    try:
        entries = _read_manifest(manifest_path)
    except (OSError, ValueError) as exc:
        raise _fail(f"bad manifest {manifest_path}: {exc}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def decode_one(entry):
        bundle_path, truth = entry
        try:
            bundle = load_bundle(bundle_path)
        except (OSError, StreamKwsError) as exc:
            raise _fail(f"cannot load bundle {bundle_path}: {exc}")
        for keyword in keywords:
            try:
                stream = decode_joint(bundle, keyword, cfg)
            except StreamKwsError as exc:
                raise _fail(f"decode failed on {bundle_path}: {exc}")
            stem = f"{truth.utterance_id}__{keyword.keyword_id}"
            lines = [f"{i + 1}\t{score!r}"
                     for i, score in enumerate(stream.frames)]
            (out / f"{stem}.stream.tsv").write_text(
                "\n".join(lines) + "\n", encoding="utf-8")
            events = extract_events(stream, event_threshold, refractory,
                                    keyword.keyword_id,
                                    bundle.frame_hop_seconds)
            ev_lines = [
                f"{e.keyword_id}\t{e.trigger_frame}\t{e.trigger_time!r}"
                f"\t{e.peak_score!r}"
                for e in events
            ]
            (out / f"{stem}.events.tsv").write_text(
                "\n".join(ev_lines) + ("\n" if ev_lines else ""),
                encoding="utf-8")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(decode_one, entries))
    else:
        for entry in entries:
            decode_one(entry)
    click.echo(f"decoded {len(entries)} utterances x {len(keywords)} keywords")


@main.command()
@click.option("--scores-dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--truth", "truth_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--far", "far_targets", type=float, multiple=True,
              help=f"FAR targets (events/hour); default {DEFAULT_FAR_TARGETS}.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Also write the report here.")
def evaluate(scores_dir, truth_path, far_targets, out_path):
    """Sweep decoded streams against ground truth and report recall@FAR."""
    far_targets = tuple(far_targets) if far_targets else DEFAULT_FAR_TARGETS
    _require_file(truth_path, "truth file")
    if not Path(scores_dir).is_dir():
        raise _fail(f"scores directory {scores_dir} does not exist")
    truth = read_truth_file(truth_path)
    if not truth:
        raise _fail(f"truth file {truth_path} is empty")

    scores = {}
    stream_files = sorted(Path(scores_dir).glob("*.stream.tsv"))
    if not stream_files:
        raise _fail(f"no *.stream.tsv files under {scores_dir}")
    for path in stream_files:
        stem = path.name[: -len(".stream.tsv")]
        uid, _, kwid = stem.rpartition("__")
        if not uid:
            raise _fail(f"cannot split {path.name} into utterance__keyword")
        if uid not in truth:
            raise _fail(f"scored utterance {uid} missing from truth file")
        peaks = [float(line.split("\t")[1])
                 for line in path.read_text(encoding="utf-8").splitlines()
                 if line.strip()]
        scores[(uid, kwid)] = max(peaks) if peaks else 0.0

    try:
        report = sweep(scores, truth)
    except (StreamKwsError, ValueError) as exc:
        raise _fail(str(exc))
    text = render_sweep_report(report, far_targets=(0.0, *far_targets))
    click.echo(text, nl=False)
    click.echo(f"accuracy@far=0\t{recall_at_far(report, 0.0):.6f}")
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")


@main.command(name="bench")
@click.option("--manifest", "manifest_path",
              type=click.Path(dir_okay=False),
              help="Benchmark this corpus instead of the standard one.")
@click.option("--keyword", "keyword_path",
              type=click.Path(dir_okay=False),
              help="Keyword spec (required with --manifest).")
@click.option("--utterances", type=int, default=1000, show_default=True)
@click.option("--frames", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--repetitions", type=int, default=1, show_default=True)
def bench_cmd(manifest_path, keyword_path, utterances, frames, seed, repetitions):
    """Throughput comparison of the stock decoding configurations."""
    if manifest_path:
        if not keyword_path:
            raise _fail("--manifest needs --keyword")
        _require_file(manifest_path, "manifest")
        keyword = _keyword_from_json(_require_file(keyword_path, "keyword file"))
        try:
            corpus = [load_bundle(p) for p, _ in _read_manifest(manifest_path)]
        except (OSError, StreamKwsError, ValueError) as exc:
            raise _fail(f"cannot load benchmark corpus: {exc}")
    else:
        click.echo(
            f"generating standard corpus ({utterances} utterances x {frames} frames)")
        corpus, _, keyword = standard_benchmark_corpus(utterances, frames, seed)
    try:
        report = bench(corpus, keyword, standard_rows(), repetitions=repetitions)
    except StreamKwsError as exc:
        raise _fail(str(exc))
    click.echo(report.render(), nl=False)


@main.command()
@click.option("--instances", type=int, default=1000, show_default=True)
@click.option("--max-frames", type=int, default=8, show_default=True)
@click.option("--max-tokens", type=int, default=3, show_default=True)
@click.option("--max-vocab", type=int, default=5, show_default=True)
@click.option("--seed-base", type=int, default=0, show_default=True)
@click.option("--seed", "replay_seed", type=int, default=None,
              help="Replay a single reported seed instead of a range.")
def verify(instances, max_frames, max_tokens, max_vocab, seed_base, replay_seed):
    """Check both streaming decoders against brute-force enumeration."""
    if replay_seed is not None:
        seeds = [replay_seed]
    else:
        seeds = range(seed_base, seed_base + instances)
    rnnt_cfg = DecodeConfig(transducer_mode=RNNT, ctc_mode=FSD)
    started = time.perf_counter()
    checked = 0
    for seed in seeds:
        bundle, keyword = random_bundle(
            seed, max_frames=max_frames, max_tokens=max_tokens,
            max_vocab=max_vocab)
        dp_t = raw_transducer_scores(bundle, keyword, rnnt_cfg)
        bf_t = brute_force_transducer(bundle, keyword, rnnt_cfg)
        dp_c = raw_ctc_scores(bundle, keyword, rnnt_cfg)
        bf_c = brute_force_ctc(bundle, keyword, rnnt_cfg)
        for name, dp, bf in (("transducer", dp_t, bf_t), ("ctc", dp_c, bf_c)):
            for t, (a, b) in enumerate(zip(dp, bf)):
                if not math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-300):
                    raise VerificationFailure(
                        f"{name} mismatch at seed {seed}, frame {t}: "
                        f"decoder {a!r} vs oracle {b!r}"
                    )
        checked += 1
    elapsed = time.perf_counter() - started
    click.echo(
        f"verified {checked} instances against both oracles in {elapsed:.1f}s")


if __name__ == "__main__":
    sys.exit(main())
