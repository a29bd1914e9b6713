"""Command-line entry point: one binary, one subcommand per pipeline stage.

Every subcommand is a thin adapter over a module operation: it loads
inputs from the configured paths, calls the operation, writes artifacts
under the work directory, and prints a short summary. Logs go to stderr;
data goes to files or stdout. Reruns with identical config and seeds
produce byte-identical artifacts; wall-clock timestamps are confined to
the run_meta.json sidecar.

Exit codes: 0 ok, 1 runtime error, 2 usage/config error, 3 data-format
error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

from . import annotator as annot
from . import calibration as calib
from . import dataset as ds
from . import embeddings as emb
from . import evaluation as ev
from . import fusion
from . import keywords as kw
from . import labeling as lab
from .config import PipelineConfig
from .corpus import load_calendar, load_corpus, load_labels, save_corpus, save_labels
from .errors import ConfigError, EmptyMatchedSetError, FormatError, SeasonalAdsError

logger = logging.getLogger("seasonal_ads")

SUBCOMMANDS = (
    "mine-keywords",
    "export-labels",
    "import-labels",
    "annotate",
    "build-dataset",
    "train",
    "eval",
    "robustness",
    "sweep",
    "calibrate",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seasonal-ads",
        description="Seasonal ad detection pipeline",
    )
    parser.add_argument("--config", "-c", help="path to the pipeline config JSON")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override any config field (repeatable); values parse as JSON",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("command", choices=SUBCOMMANDS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    started = dt.datetime.now(dt.timezone.utc)
    try:
        cfg = PipelineConfig.load(args.config, args.overrides)
        handler = _HANDLERS[args.command]
        handler(cfg)
        _write_meta(cfg, args.command, started)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return 3
    except (SeasonalAdsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _write_meta(cfg: PipelineConfig, command: str, started: dt.datetime) -> None:
    meta = {
        "command": command,
        "started_at": started.isoformat(),
        "finished_at": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    (cfg.work_dir() / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def _load_label_files(cfg: PipelineConfig, key: str = "paths.labels"):
    value = cfg.require(key)
    paths = value if isinstance(value, list) else [value]
    labels = []
    for path in paths:
        if not Path(path).exists():
            raise ConfigError(f"label file does not exist: {path}")
        labels.extend(load_labels(path))
    return labels


def _mining_params(cfg: PipelineConfig) -> kw.MiningParams:
    stopword_path = cfg.get("paths.stopwords")
    stopwords = kw.load_stopwords(stopword_path) if stopword_path else kw.default_stopwords()
    return kw.MiningParams(
        alpha=float(cfg.get("mining.alpha")),
        min_docs=int(cfg.get("mining.min_docs")),
        max_keywords=int(cfg.get("mining.max_keywords")),
        ranking=cfg.get("mining.ranking"),
        stopwords=stopwords,
    )


def cmd_mine_keywords(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    event_id = cfg.require("mining.event")
    if event_id not in calendar:
        raise ConfigError(f"mining.event {event_id!r} not in the calendar")
    event = calendar[event_id]
    matched = kw.match_corpus(corpus, event)
    if not matched:
        raise EmptyMatchedSetError(f"no ads matched the primary keywords of {event_id!r}")
    stats = kw.mine_secondary(corpus, matched, _mining_params(cfg), event.primary_keywords)
    out = cfg.work_dir() / "keywords.jsonl"
    kw.save_keyword_report(stats, out)
    print(f"matched {len(matched)} ads for {event_id}; wrote {len(stats)} candidates to {out}")
    for s in stats[:10]:
        print(f"  {s.token:24s} lift={s.lift:8.3f} event={s.count_event} bg={s.count_background}")
    if cfg.get("paths.gold_labels"):
        gold = load_labels(cfg.require_path("paths.gold_labels"))
        report = kw.estimate_quality(matched, gold, event_id)
        coverage = (
            f"{report.coverage_estimate:.3f}" if report.coverage_estimate is not None else "n/a"
        )
        print(
            f"primary precision={report.precision_estimate:.3f} "
            f"coverage={coverage} (vs {len(gold)} gold labels)"
        )


def cmd_export_labels(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    template_path = cfg.get("paths.template")
    template = (
        Path(template_path).read_text(encoding="utf-8")
        if template_path
        else lab.DEFAULT_TASK_TEMPLATE
    )
    tasks = lab.export_tasks(corpus, calendar, template)
    out = cfg.work_dir() / "tasks.jsonl"
    lab.save_tasks(tasks, out)
    print(f"exported {len(tasks)} annotation tasks to {out}")


def cmd_import_labels(cfg: PipelineConfig) -> None:
    tasks = lab.load_tasks(cfg.require_path("paths.tasks"))
    responses = lab.load_responses(cfg.require_path("paths.responses"))
    aggregated = lab.aggregate_majority(responses, tasks)
    out = cfg.work_dir() / "aggregated.jsonl"
    with open(out, "w", encoding="utf-8") as fh:
        for label in aggregated:
            fh.write(json.dumps(label.to_json(), sort_keys=True) + "\n")
    accepted = sum(1 for l in aggregated if l.status == "accepted")
    tied = len(aggregated) - accepted
    print(f"aggregated {len(responses)} responses into {len(aggregated)} labels "
          f"({accepted} accepted, {tied} tied); wrote {out}")
    if cfg.get("paths.gold_labels") and cfg.get("mining.event"):
        gold = load_labels(cfg.require_path("paths.gold_labels"))
        precision, recall, f1 = lab.score_against_gold(aggregated, gold, cfg.get("mining.event"))
        print(f"vs gold: precision={precision:.3f} recall={recall:.3f} f1={f1:.3f}")


def cmd_annotate(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    event_id = cfg.require("annotator.event")
    if event_id not in calendar:
        raise ConfigError(f"annotator.event {event_id!r} not in the calendar")
    endpoint = cfg.require("annotator.endpoint")
    client = annot.HttpInferenceClient(endpoint, timeout=float(cfg.get("annotator.timeout")))
    policy = annot.RetryPolicy(
        max_retries=int(cfg.get("annotator.max_retries")),
        backoff_base=float(cfg.get("annotator.backoff_base")),
        timeout=float(cfg.get("annotator.timeout")),
        max_in_flight=int(cfg.get("annotator.max_in_flight")),
    )
    template_path = cfg.get("paths.template")
    template = (
        annot.PromptTemplate.from_json(json.loads(Path(template_path).read_text("utf-8")))
        if template_path
        else annot.PromptTemplate()
    )
    outcome = annot.annotate_batch(corpus, calendar[event_id], client, policy, template)
    out = cfg.work_dir() / "mlm_labels.jsonl"
    save_labels(outcome.labels, out)
    skipped_path = cfg.work_dir() / "mlm_skipped.jsonl"
    with open(skipped_path, "w", encoding="utf-8") as fh:
        for skip in outcome.skipped:
            fh.write(json.dumps({"ad_id": skip.ad_id, "reason": skip.reason}) + "\n")
    print(
        f"annotated {len(outcome.labels)} ads ({len(outcome.skipped)} skipped) "
        f"for {event_id}; wrote {out}"
    )


def cmd_build_dataset(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    labels = _load_label_files(cfg)
    known_ids = {ad.id for ad in corpus}
    orphans = sorted({l.ad_id for l in labels} - known_ids)
    if orphans:
        shown = ", ".join(orphans[:5]) + ("..." if len(orphans) > 5 else "")
        raise FormatError(f"{len(orphans)} label(s) reference ads missing from the corpus: {shown}")
    config = ds.BuildConfig(
        seed=int(cfg.get("build.seed")),
        test_fraction=float(cfg.get("build.test_fraction")),
        target_positive_ratio=float(cfg.get("build.target_positive_ratio")),
        upsample_minority=bool(cfg.get("build.upsample_minority")),
        volume_cap=cfg.get("build.volume_cap"),
        target_event=cfg.get("build.target_event"),
    )
    build = ds.build_dataset(labels, calendar, config)
    work = cfg.work_dir()
    manifest_path = Path(cfg.get("paths.manifest") or work / "manifest.jsonl")
    ds.save_manifest(build, manifest_path)
    used_ids = build.train.ad_ids() | build.test.ad_ids()
    removed = ds.derive_removed_corpus(corpus, calendar, used_ids)
    removed_path = work / "corpus_keywords_removed.jsonl"
    save_corpus(removed, removed_path)
    if build.insufficient_negatives:
        logger.warning("not enough negatives to hit the target positive ratio; kept all")
    print(
        f"built splits: train={len(build.train)} test={len(build.test)} "
        f"(seed {build.seed}); wrote {manifest_path} and {removed_path}"
    )


def _manifest(cfg: PipelineConfig) -> ds.DatasetBuild:
    path = cfg.get("paths.manifest") or cfg.work_dir() / "manifest.jsonl"
    if not Path(path).exists():
        raise ConfigError(f"manifest not found at {path}; run build-dataset first")
    return ds.load_manifest(path)


def _variant_texts(corpus, calendar, variant) -> dict[str, str] | None:
    if variant == ds.WITH_KEYWORDS:
        return None
    removed = ds.derive_removed_corpus(corpus, calendar)
    return {ad.id: ad.content_text for ad in removed}


def _variant_store(cfg, variant, corpus, calendar, ad_ids) -> emb.EmbeddingStore:
    """Assemble the embedding store for one text variant (plus shared images)."""
    store = emb.EmbeddingStore()
    text_key = "embeddings.text" if variant == ds.WITH_KEYWORDS else "embeddings.text_keywords_removed"
    if cfg.get(text_key) is None:
        raise ConfigError(f"config key {text_key!r} is required for this subcommand")
    _load_embedding_source(cfg, store, text_key, "text", variant, corpus, calendar, ad_ids)
    if cfg.get("embeddings.image") is not None:
        _load_embedding_source(cfg, store, "embeddings.image", "image", variant, corpus, calendar, ad_ids)
    return store


def _load_embedding_source(cfg, store, key, modality, variant, corpus, calendar, ad_ids) -> None:
    source = cfg.get(key) or {}
    file_path = source.get("file")
    provider_url = source.get("provider")
    if file_path:
        if not Path(file_path).exists():
            raise ConfigError(f"embedding file does not exist: {file_path}")
        emb.read_into_store(store, file_path)
        return
    if not provider_url:
        raise ConfigError(f"{key} needs either a file or a provider")
    cache = source.get("cache")
    if cache and Path(cache).exists():
        emb.read_into_store(store, cache)
    provider = emb.HttpEmbeddingProvider(provider_url, model_id=source.get("model_id", "remote"))
    ads = [ad for ad in corpus if ad.id in ad_ids]
    texts = _variant_texts(corpus, calendar, variant) if modality == "text" else None
    report = emb.fetch(ads, modality, provider, store, texts=texts)
    logger.info(
        "%s/%s: %d cached, %d fetched, %d missing content",
        modality, variant, report.cached, report.fetched, len(report.missing_content),
    )
    if cache:
        emb.save_store(store, modality, cache)


def _classes_for(build: ds.DatasetBuild) -> list[str]:
    seen = {event_id for _, event_id in build.train.examples + build.test.examples}
    return sorted(seen)


def cmd_train(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    build = _manifest(cfg)
    variant = cfg.get("train.variant")
    train_split = build.train.with_variant(variant)
    classes = _classes_for(build)
    store = _variant_store(cfg, variant, corpus, calendar, build.train.ad_ids() | build.test.ad_ids())
    config = _train_config(cfg)
    X, y = fusion.assemble_features(train_split.examples, store, classes)
    model, report = fusion.train(
        X, y, len(classes), config,
        embed_model_id=store.model_id("text") or "",
        classes=tuple(classes),
    )
    work = cfg.work_dir()
    model_path = Path(cfg.get("paths.model") or work / "model.bin")
    fusion.save_model(model, model_path)
    report_path = work / "train_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"trained on {len(train_split)} examples ({variant}); "
        f"final train accuracy {report.final_train_accuracy:.4f}; wrote {model_path}"
    )


def _train_config(cfg: PipelineConfig) -> fusion.TrainConfig:
    return fusion.TrainConfig(
        learning_rate=float(cfg.get("train.learning_rate")),
        batch_size=int(cfg.get("train.batch_size")),
        epochs=int(cfg.get("train.epochs")),
        seed=int(cfg.get("train.seed")),
        l2=float(cfg.get("train.l2")),
        hidden_sizes=tuple(cfg.get("train.hidden_sizes")),
    )


def _load_model(cfg: PipelineConfig) -> fusion.MlpModel:
    path = cfg.get("paths.model") or cfg.work_dir() / "model.bin"
    if not Path(path).exists():
        raise ConfigError(f"model not found at {path}; run train first")
    return fusion.load_model(path)


def cmd_eval(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    build = _manifest(cfg)
    model = _load_model(cfg)
    classes = list(model.classes) or _classes_for(build)
    variant = cfg.get("eval.variant")
    test_split = build.test.with_variant(variant)
    store = _variant_store(cfg, variant, corpus, calendar, build.test.ad_ids())
    report = ev.evaluate_model(
        model, test_split, store, classes, zero_modality=cfg.get("eval.zero_modality")
    )
    out = cfg.work_dir() / "eval_report.json"
    ev.save_report(report, out)
    print(report.table())
    print(f"wrote {out}")


def cmd_robustness(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    build = _manifest(cfg)
    model = _load_model(cfg)
    classes = list(model.classes) or _classes_for(build)
    ids = build.test.ad_ids()
    splits = {v: build.test.with_variant(v) for v in ds.VARIANTS}
    stores = {v: _variant_store(cfg, v, corpus, calendar, ids) for v in ds.VARIANTS}
    report = ev.robustness_compare(model, splits, stores, classes)
    out = cfg.work_dir() / "robustness_report.json"
    ev.save_report(report, out)
    print(
        f"macro-F1 with_keywords={report.with_keywords.macro_f1:.4f} "
        f"keywords_removed={report.keywords_removed.macro_f1:.4f} "
        f"gap={report.f1_gap:+.4f}"
    )
    print(f"wrote {out}")


def cmd_sweep(cfg: PipelineConfig) -> None:
    corpus = load_corpus(cfg.require_path("paths.corpus"))
    calendar = load_calendar(cfg.require_path("paths.calendar"))
    build = _manifest(cfg)
    volumes = [int(v) for v in cfg.require("sweep.volumes")]
    variant = cfg.get("train.variant")
    classes = _classes_for(build)
    store = _variant_store(cfg, variant, corpus, calendar, build.train.ad_ids() | build.test.ad_ids())
    results = ev.volume_sweep(
        build.train.with_variant(variant),
        build.test.with_variant(variant),
        store,
        classes,
        volumes,
        _train_config(cfg),
    )
    work = cfg.work_dir()
    ev.save_sweep_series(results, work / "sweep.csv")
    with open(work / "sweep.json", "w", encoding="utf-8") as fh:
        json.dump(
            [{"n": n, "report": r.to_json()} for n, r in results], fh, indent=2, sort_keys=True
        )
        fh.write("\n")
    for n, report in results:
        print(f"n={n:7d} macro-F1={report.macro_f1:.4f}")
    print(f"wrote {work / 'sweep.csv'} and {work / 'sweep.json'}")


def cmd_calibrate(cfg: PipelineConfig) -> None:
    stream = calib.load_stream(cfg.require_path("paths.stream"))
    windows = calib.window_ratios(
        stream, dt.timedelta(hours=float(cfg.get("calibration.window_hours")))
    )
    smoothed = calib.smooth(windows, int(cfg.get("calibration.smooth_k")))
    episodes = calib.detect_episodes(
        smoothed, float(cfg.get("calibration.delta")), int(cfg.get("calibration.min_run"))
    )
    years = [int(y) for y in cfg.get("calibration.years") or []]
    if not years:
        years = sorted({w.start.year for w in windows} | {w.end.year for w in windows})
    if cfg.get("paths.calendar"):
        calendar = load_calendar(cfg.require_path("paths.calendar"))
        episodes = calib.overlay_calendar(episodes, windows, calendar, years)
    work = cfg.work_dir()
    calib.save_calibration_report(
        windows, smoothed, episodes, work / "calibration_report.json", work / "calibration_series.csv"
    )
    defined = [s for s in smoothed if s is not None]
    print(
        f"{len(windows)} windows, {len(defined)} with defined smoothed ratio; "
        f"{len(episodes)} episode(s)"
    )
    for ep in episodes:
        events = ",".join(ep.overlapping_events) or "-"
        print(
            f"  {ep.direction}-calibration windows {ep.start_window}..{ep.end_window} "
            f"extreme={ep.extreme_ratio:.3f} events={events}"
        )
    print(f"wrote {work / 'calibration_report.json'}")


_HANDLERS = {
    "mine-keywords": cmd_mine_keywords,
    "export-labels": cmd_export_labels,
    "import-labels": cmd_import_labels,
    "annotate": cmd_annotate,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "robustness": cmd_robustness,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
}


if __name__ == "__main__":
    sys.exit(main())
