"""Command-line pipeline: synth, split, build-graph, train, evaluate, predict.

Configuration precedence: built-in defaults < --config file (flat JSON object)
< explicit command-line flags. Every command echoes its fully resolved
configuration to stdout and writes it next to its outputs as
``effective_config.json``; all randomness flows from the single --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .corpus import (CorpusError, build_vocab, load_facts_with_report, load_hierarchy)
from .graph import HeteroGraph, build_citation_graph
from .metrics import evaluate_predictions
from .model import Model, load_checkpoint, save_checkpoint
from .split import SplitSpec, iterative_stratified_split, split_report
from .synth import write_synth
from .training import (Predictor, TrainingConfig, citation_frequencies, export_config,
                       predict_corpus, train_model, tune_threshold)

SPLIT_ROLES = ("train", "validation", "test")


def _add_shared(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="flat JSON config file")
    parser.add_argument("--seed", type=int, help="root random seed")
    parser.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--ablation", choices=["full", "E", "S", "V"], default=None,
                        help="E: lookup structural encoder, S: no structural loss, V: vanilla weights")
    parser.add_argument("--tau", type=float, help="decision threshold override")
    parser.add_argument("--eta", type=float, help="class-weight cap override")
    parser.add_argument("--desk-scale", action="store_true",
                        help="small dimensions/epochs for laptop-scale runs")


def _resolve_config(args) -> TrainingConfig:
    values: dict = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except json.JSONDecodeError as e:
            raise SystemExit(f"error: config file {args.config}: {e}")
    known = {f.name for f in fields(TrainingConfig)}
    unknown = set(values) - known - {"ablation"}
    if unknown:
        raise SystemExit(f"error: unknown config keys {sorted(unknown)}")
    ablation = values.pop("ablation", "full")
    for flag in ("seed", "tau", "eta"):
        if getattr(args, flag, None) is not None:
            values[flag] = getattr(args, flag)
    if getattr(args, "desk_scale", False):
        config = TrainingConfig.desk_scale(**values)
    else:
        config = TrainingConfig(**values)
    if getattr(args, "ablation", None):
        ablation = args.ablation
    return config.with_ablation(ablation), ablation


def _echo_and_store(out_dir: Path, command: str, config_dict: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **config_dict}
    print(json.dumps(payload, indent=2, default=str))
    (out_dir / "effective_config.json").write_text(
        json.dumps(payload, indent=2, default=str), encoding="utf-8")


def _load_corpus(facts_path: Path, hierarchy):
    docs, report = load_facts_with_report(facts_path, hierarchy)
    if report.n_dropped_labels or report.n_excluded:
        print(f"warning: dropped {report.n_dropped_labels} unknown label refs, "
              f"excluded {report.n_excluded} documents with no known labels", file=sys.stderr)
    return docs


def _check_role(facts_path: Path, wanted: str):
    """Refuse building graphs from anything but the training split when a
    split report sits next to the facts file."""
    report_path = facts_path.parent / "split_report.json"
    if not report_path.exists():
        return
    roles = json.loads(report_path.read_text(encoding="utf-8")).get("files", {})
    for role, name in roles.items():
        if name == facts_path.name and role != wanted:
            raise SystemExit(
                f"error: {facts_path.name} is the {role} split; training facts only")


# -- commands -----------------------------------------------------------------------


def cmd_synth(args) -> int:
    config, _ = _resolve_config(args)
    _echo_and_store(args.out_dir, "synth", {
        "n_docs": args.n_docs, "n_sections": args.n_sections, "seed": config.seed,
        "n_topics": args.n_topics, "topic_coherence": args.topic_coherence,
        "skew": args.skew, "section_kw_share": args.section_kw_share,
        "dilute_rare": args.dilute_rare,
    })
    facts, hierarchy = write_synth(args.out_dir, args.n_docs, args.n_sections, config.seed,
                                   args.n_topics, args.topic_coherence, args.skew,
                                   args.section_kw_share, args.dilute_rare)
    print(f"wrote {facts} and {hierarchy}")
    return 0


def cmd_split(args) -> int:
    config, _ = _resolve_config(args)
    ratios = tuple(float(x) for x in args.ratios.split(",")) if args.ratios else (0.64, 0.16, 0.20)
    try:
        spec = SplitSpec(ratios=ratios, seed=config.seed)
    except ValueError as e:
        raise SystemExit(f"error: {e}")
    _echo_and_store(args.out_dir, "split", {"ratios": list(spec.ratios), "seed": spec.seed,
                                            "facts": str(args.facts)})
    hierarchy = load_hierarchy(args.hierarchy)
    docs = _load_corpus(args.facts, hierarchy)
    folds = iterative_stratified_split(docs, spec)

    files = {}
    raw_lines = {}
    with Path(args.facts).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                raw_lines[json.loads(line)["id"]] = line.rstrip("\n")
    for role, fold in zip(SPLIT_ROLES, folds):
        path = args.out_dir / f"{role}.jsonl"
        with path.open("w", encoding="utf-8") as fh:
            for doc in fold:
                fh.write(raw_lines[doc.id] + "\n")
        files[role] = path.name
    report = split_report(folds, labels=hierarchy.section_ids)
    report["files"] = files
    report["seed"] = spec.seed
    (args.out_dir / "split_report.json").write_text(json.dumps(report, indent=2),
                                                    encoding="utf-8")
    print(f"fold sizes: {report['fold_sizes']}")
    return 0


def cmd_build_graph(args) -> int:
    config, _ = _resolve_config(args)
    _check_role(args.facts, "train")
    _echo_and_store(args.out_dir, "build-graph", {"facts": str(args.facts),
                                                  "hierarchy": str(args.hierarchy)})
    hierarchy = load_hierarchy(args.hierarchy)
    docs = _load_corpus(args.facts, hierarchy)
    graph = build_citation_graph(docs, hierarchy)
    graph_path = args.out_dir / "graph.json"
    graph.save(graph_path)
    stats = graph.stats()
    (args.out_dir / "graph_stats.json").write_text(json.dumps(stats, indent=2), encoding="utf-8")
    print(json.dumps(stats))
    print(f"wrote {graph_path}")
    return 0


def cmd_train(args) -> int:
    config, ablation = _resolve_config(args)
    if args.exclude_self_edges:
        config = replace(config, exclude_self_edges=True)
    _check_role(args.facts, "train")
    _echo_and_store(args.out_dir, "train", {**export_config(config), "ablation": ablation,
                                            "facts": str(args.facts), "val_facts": str(args.val_facts),
                                            "graph": str(args.graph)})
    hierarchy = load_hierarchy(args.hierarchy)
    train_docs = _load_corpus(args.facts, hierarchy)
    val_docs = _load_corpus(args.val_facts, hierarchy)
    graph = HeteroGraph.load(args.graph)

    vocab = build_vocab([d.tokens() for d in train_docs] +
                        [s.tokens() for s in hierarchy.sections], min_freq=config.min_freq)
    pretrained = pretrained_mask = None
    if args.vectors:
        pretrained, pretrained_mask = vocab.load_vectors(args.vectors, config.embed_dim)
        print(f"initialized {int(pretrained_mask.sum())}/{len(vocab)} embeddings "
              f"from {args.vectors}")
    rng = np.random.default_rng(config.seed)
    model = Model(rng, config.model_spec(), len(vocab), graph, hierarchy.section_ids,
                  pretrained=pretrained, pretrained_mask=pretrained_mask)

    log_path = args.out_dir / "train_log.jsonl"
    with log_path.open("w", encoding="utf-8") as log_fh:
        def hook(record):
            log_fh.write(json.dumps(record) + "\n")
            log_fh.flush()
            print(f"epoch {record['epoch']:3d}  loss {record['loss']:9.4f}  "
                  f"val macro-F1 {record['val_macro_f1']:6.2f}")
        result = train_model(model, graph, train_docs, val_docs, hierarchy, vocab, config,
                             log_hook=hook)

    if args.tune_threshold:
        predictor = Predictor(model, graph, hierarchy, vocab, config)
        tuned = tune_threshold(predictor, val_docs)
        print(f"tuned tau: {tuned}")
    else:
        tuned = config.tau
    checkpoint = args.out_dir / "checkpoint.npz"
    save_checkpoint(checkpoint, model, vocab, export_config(config),
                    extra={"ablation": ablation, "best_epoch": result.best_epoch,
                           "best_val_macro_f1": result.best_val_f1, "tuned_tau": tuned})
    print(f"best epoch {result.best_epoch} val macro-F1 {result.best_val_f1:.2f}")
    print(f"wrote {checkpoint}")
    return 0


def _restore(args):
    graph = HeteroGraph.load(args.graph)
    model, vocab, meta = load_checkpoint(args.checkpoint, graph)
    config = TrainingConfig(**meta["train_config"])
    if args.tau is not None:
        config = TrainingConfig(**{**meta["train_config"], "tau": args.tau})
    hierarchy = load_hierarchy(args.hierarchy)
    if hierarchy.section_ids != model.section_ids:
        raise SystemExit("error: hierarchy file does not match the checkpoint's section order")
    return graph, model, vocab, config, meta, hierarchy


def cmd_evaluate(args) -> int:
    graph, model, vocab, config, meta, hierarchy = _restore(args)
    _echo_and_store(args.out_dir, "evaluate", {**export_config(config),
                                               "checkpoint": str(args.checkpoint),
                                               "facts": str(args.facts)})
    docs = _load_corpus(args.facts, hierarchy)
    predictor = Predictor(model, graph, hierarchy, vocab, config)
    preds, _ = predict_corpus(predictor, docs)
    golds = [d.labels for d in docs]
    freqs = citation_frequencies(docs, hierarchy.section_ids)
    report = evaluate_predictions(preds, golds, hierarchy.section_ids,
                                  courts=[d.court for d in docs],
                                  citation_freqs=dict(zip(hierarchy.section_ids, freqs)))
    (args.out_dir / "eval_report.json").write_text(report.to_json(), encoding="utf-8")
    print(report.summary())
    return 0


def cmd_predict(args) -> int:
    graph, model, vocab, config, meta, hierarchy = _restore(args)
    _echo_and_store(args.out_dir, "predict", {**export_config(config),
                                              "checkpoint": str(args.checkpoint),
                                              "facts": str(args.facts)})
    docs = _load_corpus(args.facts, hierarchy)
    predictor = Predictor(model, graph, hierarchy, vocab, config)
    out_path = args.out_dir / "predictions.jsonl"
    with out_path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            labels, scores = predictor.predict(doc)
            record = {
                "id": doc.id,
                "predicted": sorted(labels, key=hierarchy.section_index.get),
                "scores": {sid: round(float(s), 6)
                           for sid, s in zip(hierarchy.section_ids, scores)},
            }
            fh.write(json.dumps(record) + "\n")
            print(f"{doc.id}: {record['predicted']}")
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexcite",
        description="Statute identification over a heterogeneous legal citation network")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus and hierarchy")
    _add_shared(p)
    p.add_argument("--n-docs", type=int, required=True)
    p.add_argument("--n-sections", type=int, required=True)
    p.add_argument("--n-topics", type=int, default=None)
    p.add_argument("--topic-coherence", type=float, default=0.85)
    p.add_argument("--skew", type=float, default=1.0,
                   help="citation-popularity exponent (higher = rarer tail)")
    p.add_argument("--section-kw-share", type=float, default=0.5,
                   help="fraction of content words from the cited section's pool")
    p.add_argument("--dilute-rare", type=float, default=0.0,
                   help="fraction of rare-half section keywords replaced by topic keywords")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="iterative stratified train/val/test split")
    _add_shared(p)
    p.add_argument("--facts", type=Path, required=True)
    p.add_argument("--hierarchy", type=Path, required=True)
    p.add_argument("--ratios", type=str, default=None, help="e.g. 0.64,0.16,0.20")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("build-graph", help="build the citation network from training facts")
    _add_shared(p)
    p.add_argument("--facts", type=Path, required=True)
    p.add_argument("--hierarchy", type=Path, required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", help="train the model")
    _add_shared(p)
    p.add_argument("--facts", type=Path, required=True, help="training split")
    p.add_argument("--val-facts", type=Path, required=True)
    p.add_argument("--hierarchy", type=Path, required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--vectors", type=Path, default=None,
                   help="pretrained word vectors (token v1..vd per line)")
    p.add_argument("--exclude-self-edges", action="store_true",
                   help="experimental: walks for a node may not revisit it")
    p.add_argument("--tune-threshold", action="store_true",
                   help="grid-search tau on the validation split after training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a facts file")
    _add_shared(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--hierarchy", type=Path, required=True)
    p.add_argument("--facts", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="predict sections for each fact in a file")
    _add_shared(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--hierarchy", type=Path, required=True)
    p.add_argument("--facts", type=Path, required=True)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
