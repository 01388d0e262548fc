"""``pathrag`` command line: inspect each stage or run full experiments.

Exit status: 0 when every item succeeded, 1 on partial failure, 2 on a
configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .arch_open import (generate_dataset, load_captions, qa_to_sample_dict,
                        split_dataset, write_jsonl)
from .config import fingerprint, load_config, make_gateway, pipeline_config
from .errors import ConfigError, DatasetError, LengthMismatch, PathRagError
from .evaluation import (BootstrapSummary, aggregate, load_dataset,
                         paired_bootstrap, recall, render_report)
from .graph import build_nuclei_graph, graph_stats
from .imaging import load_image
from .nuclei import classify_nuclei, detect_nuclei
from .patching import count_nuclei_in_patch, random_patches, rank_patches, tile_patches
from .pipeline import Pipeline, dump_trace
from .stain import normalize_stains

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("pathrag")


def _emit(obj, out=None):
    text = json.dumps(obj, sort_keys=True, ensure_ascii=False)
    print(text, file=out or sys.stdout)


def _prepare(image, pcfg):
    """Stain-normalize when enabled (falling back to raw pixels) and detect nuclei."""
    work = image
    if pcfg.normalization_enabled:
        try:
            work = normalize_stains(image, pcfg.stain_reference, pcfg.od_threshold,
                                    pcfg.alpha_percentile)
        except PathRagError as exc:
            log.info("normalization skipped: %s", exc)
    return detect_nuclei(work, pcfg.detection)


def cmd_classify(args, cfg) -> int:
    pcfg = pipeline_config(cfg)
    failures = 0
    for path in args.images:
        try:
            image = load_image(path)
        except PathRagError as exc:
            failures += 1
            row = {"image": path, "error": f"{type(exc).__name__}: {exc}"}
        else:
            cls = classify_nuclei(_prepare(image, pcfg), pcfg.detection.pathology_threshold)
            row = {"image": path, "label": cls.label.value, "nuclei_count": cls.nuclei_count}
        if args.format == "table":
            detail = row.get("error") or f"{row['label']}\t{row['nuclei_count']}"
            print(f"{path}\t{detail}")
        else:
            row["config_fingerprint"] = pcfg.config_fingerprint
            _emit(row)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_patches(args, cfg) -> int:
    pcfg = pipeline_config(cfg)
    image = load_image(args.image)
    found = _prepare(image, pcfg)
    patches = tile_patches(image.width, image.height)
    if args.mode == "random":
        chosen = {p.index: r for r, p in enumerate(random_patches(patches, args.top_k, pcfg.seed))}
    else:
        chosen = {rp.patch.index: rp.rank for rp in rank_patches(patches, found, args.top_k)}
    rows = [
        {"index": p.index, "x": p.x, "y": p.y, "w": p.width, "h": p.height,
         "nuclei_count": count_nuclei_in_patch(p, found), "rank": chosen.get(p.index)}
        for p in patches
    ]
    _emit({"image": args.image, "width": image.width, "height": image.height,
           "mode": args.mode, "top_k": args.top_k, "patches": rows,
           "config_fingerprint": pcfg.config_fingerprint})
    return EXIT_OK


def cmd_graph(args, cfg) -> int:
    pcfg = pipeline_config(cfg)
    image = load_image(args.image)
    graph = build_nuclei_graph(_prepare(image, pcfg), pcfg.graph_k, pcfg.graph_max_distance)
    _emit({"image": args.image, "graph": graph.to_dict(),
           "stats": graph_stats(graph).to_dict(),
           "config_fingerprint": pcfg.config_fingerprint})
    return EXIT_OK


def cmd_run(args, cfg) -> int:
    pcfg = pipeline_config(cfg)
    gateway = make_gateway(cfg)
    samples = load_dataset(args.dataset, args.group)
    pipeline = Pipeline(pcfg, gateway)
    records = pipeline.run_dataset(samples, workers=int(cfg["run"]["workers"]))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rec in records:
            out.write(dump_trace(rec) + "\n")
    finally:
        if args.out:
            out.close()
    failed = sum(1 for r in records if r.get("error"))
    log.info("%d traces, %d failed; backend calls %s, cache hits %s", len(records), failed,
             dict(gateway.backend_calls), dict(gateway.cache_hits))
    return EXIT_PARTIAL if failed else EXIT_OK


def _read_traces(path) -> dict[str, dict]:
    traces = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed trace JSON") from exc
            traces[str(rec.get("sample_id"))] = rec
    return traces


def _score(samples, traces, path):
    ids = [s.id for s in samples]
    if set(ids) != set(traces):
        missing = sorted(set(ids) - set(traces))[:5]
        extra = sorted(set(traces) - set(ids))[:5]
        raise LengthMismatch(f"{path}: trace ids do not match dataset "
                             f"(missing {missing}, unexpected {extra})")
    recalls, labels, failures = [], [], 0
    for s in samples:
        rec = traces[s.id]
        if rec.get("error"):
            failures += 1
            prediction = ""
        else:
            prediction = rec.get("final_answer") or ""
        recalls.append(recall(prediction, s.gold_answer))
        if s.he_label is not None:
            labels.append(s.he_label)
        else:
            label = (rec.get("image_class") or {}).get("label")
            labels.append(label == "HePathology")
    return recalls, labels, failures


def cmd_eval(args, cfg) -> int:
    samples = load_dataset(args.dataset, args.group)
    traces = _read_traces(args.traces)
    recalls, labels, failures = _score(samples, traces, args.traces)
    method = args.method
    if method is None:
        variants = sorted({str(t.get("variant", "")) for t in traces.values()})
        method = "/".join(v for v in variants if v) or Path(args.traces).stem
    fps = sorted({t.get("config_fingerprint", "") for t in traces.values()} - {""})
    report = aggregate(samples, recalls, labels, method=method,
                       config_fingerprint=",".join(fps) or fingerprint(cfg))
    if args.bootstrap_against:
        other, _, other_failures = _score(samples, _read_traces(args.bootstrap_against),
                                          args.bootstrap_against)
        failures += other_failures
        res = paired_bootstrap([100.0 * r for r in recalls], [100.0 * r for r in other],
                               iterations=args.iterations, confidence=args.confidence,
                               seed=args.seed)
        report.bootstrap.append(BootstrapSummary(
            Path(args.bootstrap_against).stem, res.mean_diff, res.ci_low, res.ci_high,
            args.iterations, args.confidence, args.seed))
    text = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_gen_arch(args, cfg) -> int:
    gateway = make_gateway(cfg)
    captions = load_captions(args.captions)
    pairs, failures = generate_dataset(captions, gateway, max_retries=args.max_retries,
                                       workers=int(cfg["run"]["workers"]))
    train, test = split_dataset(pairs, args.train_fraction, args.split_seed)
    by_id = {c.id: c for c in captions}
    out = Path(args.out)
    write_jsonl(out / "qa.jsonl", (qa_to_sample_dict(p, by_id[p.caption_id]) for p in pairs))
    write_jsonl(out / "train.jsonl", (qa_to_sample_dict(p, by_id[p.caption_id]) for p in train))
    write_jsonl(out / "test.jsonl", (qa_to_sample_dict(p, by_id[p.caption_id]) for p in test))
    write_jsonl(out / "failures.jsonl", (f.to_dict() for f in failures))
    manifest = {
        "config_fingerprint": fingerprint(cfg),
        "captions": len(captions),
        "pairs": len(pairs),
        "failures": len(failures),
        "train_pairs": len(train),
        "test_pairs": len(test),
        "train_captions": len({p.caption_id for p in train}),
        "test_captions": len({p.caption_id for p in test}),
        "split_seed": args.split_seed,
        "backend_calls": sum(gateway.backend_calls.values()),
        "cache_hits": sum(gateway.cache_hits.values()),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                                       encoding="utf-8")
    return EXIT_PARTIAL if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathrag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="H&E gate per image")
    p.add_argument("images", nargs="+")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("patches", help="3x3 tiling with nuclei-count ranking")
    p.add_argument("image")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--mode", choices=["ranked", "random"], default="ranked")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_patches)

    p = sub.add_parser("graph", help="KNN nuclei graph and summary statistics")
    p.add_argument("image")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("run", help="run the pipeline over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--group", default="PathVQA", choices=["PathVQA", "ArchPubMed", "ArchBooks"])
    p.add_argument("--variant", choices=["baseline", "concat_answers", "rag_description",
                                         "rag_answer"])
    p.add_argument("--num-patches", type=int)
    p.add_argument("--patch-mode", choices=["histo_ranked", "random"])
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--cache-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--no-timings", action="store_true",
                   help="omit wall-clock timings so traces are byte-reproducible")
    p.add_argument("--out", help="traces JSON-lines output (default stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score traces against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--group", default="PathVQA", choices=["PathVQA", "ArchPubMed", "ArchBooks"])
    p.add_argument("--traces", required=True)
    p.add_argument("--bootstrap-against", help="second traces file for a paired bootstrap")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--confidence", type=float, default=95.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", help="row label (default: the traces' variant)")
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-arch", help="generate open-ended QA pairs from captions")
    p.add_argument("--captions", required=True)
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--cache-dir")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--max-retries", type=int, default=2)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_gen_arch)
    return parser


def _overrides(args) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    ov = {
        "pipeline.variant": get("variant"),
        "pipeline.num_patches": get("num_patches"),
        "pipeline.patch_mode": get("patch_mode"),
        "pipeline.seed": get("seed"),
        "backend.kind": get("backend"),
        "backend.cache_dir": get("cache_dir"),
        "run.workers": get("workers"),
    }
    if get("no_normalize"):
        ov["pipeline.normalize"] = False
    if get("no_timings"):
        ov["pipeline.record_timings"] = False
    return ov


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if cfg["pipeline"]["variant"] == "baseline":
            cfg["pipeline"]["num_patches"] = 0
        return args.func(args, cfg)
    except (ConfigError, DatasetError, LengthMismatch) as exc:
        print(f"pathrag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PathRagError, OSError) as exc:
        print(f"pathrag: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
