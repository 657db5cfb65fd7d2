"""Command-line orchestrator: file-based handoff between subcommands, a run
manifest next to every artifact, and mandatory seeds for anything random.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import annotate as ann
from . import corpus as cstore
from . import datasets as ds
from . import evalkit
from . import experiments
from . import manifest as mf
from . import prompts
from .classifier import Hyper, Prediction, load_model, predict, save_model, train_files


class UsageError(ValueError):
    pass


def _parse_labels(s: str):
    names = [x.strip() for x in s.split(",")]
    if len(names) != 2:
        raise UsageError(f"--labels needs two comma-separated names, got {s!r}")
    return tuple(names)


def _load_prompt_spec(args, corpus):
    if args.prompt == "imdb":
        return prompts.default_imdb_spec(args.k, corpus)
    if args.prompt == "umls":
        return prompts.default_umls_spec(args.k, corpus)
    return prompts.load_prompt_spec(args.prompt, corpus)


def _write_predictions(preds, path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            fh.write(json.dumps({"doc_id": p.doc_id, "label": p.label, "score": p.score}) + "\n")


def _load_predictions(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(Prediction(obj["doc_id"], obj["label"], obj["score"]))
    return out


def _gold_from_eval_file(path):
    rows = ds.load_stage(path)
    return {row["id"]: row["label"] for row in rows}, rows


def _hyper_from(args) -> Hyper:
    return Hyper(d=args.dim, learning_rate=args.lr, l2=args.l2,
                 epochs=args.epochs, batch_size=args.batch_size)


def _add_hyper_flags(p):
    p.add_argument("--dim", type=int, default=18, help="feature hash bits")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-6)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=16)


def cmd_ingest(args):
    sources = [bool(args.jsonl), bool(args.imdb_dir), bool(args.umls_tsv)]
    if sum(sources) != 1:
        raise UsageError("exactly one of --jsonl/--imdb-dir/--umls-tsv required")
    if args.dry_run:
        print(f"would ingest into {args.out}")
        return 0
    if args.jsonl:
        if not args.task_id or not args.labels:
            raise UsageError("--jsonl requires --task-id and --labels")
        corpus = cstore.ingest_jsonl(args.jsonl, args.task_id, _parse_labels(args.labels))
        src = args.jsonl
    elif args.imdb_dir:
        corpus = cstore.ingest_imdb_dir(args.imdb_dir)
        src = args.imdb_dir
    else:
        corpus = cstore.ingest_umls_tsv(args.umls_tsv, split=args.split)
        src = args.umls_tsv
    cstore.save_corpus(corpus, args.out)
    mf.append_run(Path(args.out).parent, "ingest", {"source": str(src)},
                  counts={"documents": len(corpus), **corpus.split_sizes()},
                  artifacts=[args.out])
    print(f"ingested {len(corpus)} documents -> {args.out}")
    return 0


def cmd_sample(args):
    corpus = cstore.load_corpus(args.corpus)
    ids = cstore.sample_subset(corpus, args.split, args.n, args.seed)
    if args.dry_run:
        print(f"would sample {len(ids)} ids -> {args.out}")
        return 0
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(ids) + ("\n" if ids else ""))
    mf.append_run(Path(args.out).parent, "sample",
                  {"split": args.split, "n": args.n}, seeds={"sample": args.seed},
                  counts={"sampled": len(ids)}, inputs=[args.corpus], artifacts=[args.out])
    print(f"sampled {len(ids)} ids -> {args.out}")
    return 0


def cmd_annotate(args):
    corpus = cstore.load_corpus(args.corpus)
    if args.ids:
        doc_ids = [l.strip() for l in Path(args.ids).read_text().splitlines() if l.strip()]
    else:
        if args.n is None:
            raise UsageError("need --ids or --split/--n")
        doc_ids = cstore.sample_subset(corpus, args.split, args.n, args.seed)
    spec = _load_prompt_spec(args, corpus)
    if args.backend == "mock":
        config = ann.LlmBackendConfig(
            kind="mock_oracle", model_name=args.model,
            oracle_params=ann.OracleParams(args.error_rate, args.garbage_rate, args.seed),
        )
    else:
        if not args.base_url:
            raise UsageError("--backend http requires --base-url")
        config = ann.LlmBackendConfig(
            kind="http_chat", base_url=args.base_url, model_name=args.model,
            max_in_flight=args.max_in_flight,
        )
    if args.dry_run:
        print(f"would annotate {len(doc_ids)} docs with {config.name} -> {args.out}")
        return 0
    cache = ann.ResponseCache(args.cache) if args.cache else None
    backend = ann.make_backend(config, corpus)
    labels = ann.label_subset(doc_ids, spec, backend, cache, out_dir=args.out)
    gold = {i: corpus[i].gold_label for i in labels.records if corpus[i].gold_label is not None}
    flips = sum(1 for i, g in gold.items() if labels.records[i].label != g)
    mf.append_run(args.out, "annotate",
                  {"backend": asdict(config), "prompt": args.prompt, "k": args.k,
                   "exemplar_ids": [d.id for d, _ in spec.exemplars],
                   "exemplar_char_budget": spec.exemplar_char_budget},
                  seeds={"seed": args.seed},
                  counts={"requested": len(doc_ids), "labeled": len(labels.records),
                          "discarded": len(labels.discards),
                          "gold_available": len(gold), "gold_disagreements": flips},
                  inputs=[args.corpus],
                  artifacts=[str(Path(args.out) / "labels.jsonl"),
                             str(Path(args.out) / "discards.jsonl")])
    print(f"labeled {len(labels.records)}, discarded {len(labels.discards)} -> {args.out}")
    return 0


def cmd_build(args):
    corpus = cstore.load_corpus(args.corpus)
    llm_labels = ann.load_label_set(args.llm_labels, corpus.task_id) if args.llm_labels else None
    plan = ds.build_plan(args.strategy, corpus, llm_labels=llm_labels,
                         eval_split=args.eval_split)
    if args.dry_run:
        print(f"would export stages of sizes {plan.stage_sizes()} -> {args.out}")
        return 0
    written = ds.export_plan(plan, corpus, args.out)
    mf.append_run(args.out, "build",
                  {"strategy": args.strategy, "eval_split": args.eval_split},
                  counts={f"stage{i+1}": n for i, n in enumerate(plan.stage_sizes())},
                  inputs=[args.corpus] + ([args.llm_labels] if args.llm_labels else []),
                  artifacts=written)
    print(f"built {args.strategy}: stages {plan.stage_sizes()} -> {args.out}")
    return 0


def cmd_noise(args):
    rows = ds.load_stage(args.stage)
    labels = sorted({row["label"] for row in rows})
    if len(labels) != 2:
        raise ds.DatasetError(f"stage must contain exactly 2 labels, found {labels}")
    records = experiments.rows_to_records(rows)
    noisy = ds.inject_noise(records, args.fraction, args.seed, tuple(labels))
    if args.dry_run:
        flips = sum(1 for a, b in zip(records, noisy) if a.label != b.label)
        print(f"would flip {flips} of {len(records)} labels -> {args.out}")
        return 0
    texts = {row["id"]: row["text"] for row in rows}
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in noisy:
            fh.write(json.dumps({"id": rec.doc_id, "text": texts[rec.doc_id],
                                 "label": rec.label}, ensure_ascii=False) + "\n")
    flips = sum(1 for a, b in zip(records, noisy) if a.label != b.label)
    mf.append_run(Path(args.out).parent, "noise", {"fraction": args.fraction},
                  seeds={"noise": args.seed}, counts={"records": len(records), "flipped": flips},
                  inputs=[args.stage], artifacts=[args.out])
    print(f"flipped {flips}/{len(records)} labels -> {args.out}")
    return 0


def cmd_sweep(args):
    stage_rows = ds.load_stage(args.stage)
    gold, eval_rows = _gold_from_eval_file(args.eval)
    label_names = _parse_labels(args.labels)
    hyper = _hyper_from(args)
    if args.kind == "noise":
        if not args.fractions:
            raise UsageError("--kind noise requires --fractions")
        grid = [float(x) for x in args.fractions.split(",")]
    else:
        if not args.sizes:
            raise UsageError("--kind size requires --sizes")
        grid = [int(x) for x in args.sizes.split(",")]
    if args.dry_run:
        print(f"would sweep {args.kind} over {grid} with {args.seeds} seeds -> {args.out}")
        return 0
    if args.kind == "noise":
        results = experiments.run_noise_sweep(stage_rows, eval_rows, label_names, grid,
                                              args.seeds, args.seed, hyper)
    else:
        results = experiments.run_size_sweep(stage_rows, eval_rows, label_names, grid,
                                             args.seeds, args.seed, hyper)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evalkit.sweep_report([(x, rep) for x, rep, _ in results], csv_path=out / "sweep.csv")
    per_seed = {str(x): accs for x, _, accs in results}
    with open(out / "sweep_seeds.json", "w", encoding="utf-8") as fh:
        json.dump(per_seed, fh, indent=2)
        fh.write("\n")
    mf.append_run(out, "sweep", {"kind": args.kind, "grid": grid, "n_seeds": args.seeds,
                                 "hyper": hyper.to_dict()},
                  seeds={"base": args.seed},
                  inputs=[args.stage, args.eval],
                  artifacts=[str(out / "sweep.csv")])
    for x, rep, _ in results:
        print(f"{x}\t{rep.accuracy:.4f}")
    print(f"sweep -> {out / 'sweep.csv'}")
    return 0


def cmd_train(args):
    label_names = _parse_labels(args.labels)
    hyper = _hyper_from(args)
    if args.dry_run:
        print(f"would train on {args.stages} -> {args.out}")
        return 0
    model = train_files(args.stages, label_names, hyper, args.seed)
    save_model(model, args.out)
    mf.append_run(Path(args.out).parent, "train",
                  {"hyper": hyper.to_dict(), "stages": [str(s) for s in args.stages]},
                  seeds={"train": args.seed},
                  counts={"log_entries": len(model.training_log)},
                  inputs=list(args.stages), artifacts=[args.out])
    final = model.training_log[-1]
    print(f"trained: final stage={final[0]} epoch={final[1]} loss={final[2]:.4f} -> {args.out}")
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    if args.eval_file:
        rows = ds.load_stage(args.eval_file)
        docs = [(row["id"], row["text"]) for row in rows]
        src = args.eval_file
    else:
        corpus = cstore.load_corpus(args.corpus)
        ids = corpus.split_ids(args.split) if args.split else corpus.ids()
        docs = [(i, corpus[i].text) for i in ids]
        src = args.corpus
    if args.dry_run:
        print(f"would predict {len(docs)} docs -> {args.out}")
        return 0
    preds = predict(model, docs)
    _write_predictions(preds, args.out)
    mf.append_run(Path(args.out).parent, "predict", {"model": str(args.model)},
                  counts={"predictions": len(preds)}, inputs=[src, args.model],
                  artifacts=[args.out])
    print(f"predicted {len(preds)} docs -> {args.out}")
    return 0


def cmd_eval(args):
    preds = _load_predictions(args.predictions)
    gold, _ = _gold_from_eval_file(args.gold)
    labels = _parse_labels(args.labels) if args.labels else tuple(sorted(set(gold.values())))
    report = evalkit.evaluate(preds, gold, labels)
    if args.dry_run:
        print(f"would write report -> {args.out}")
        return 0
    evalkit.save_report(report, args.out)
    mf.append_run(Path(args.out).parent, "eval", {"labels": list(labels)},
                  counts={"n": report.n}, inputs=[args.predictions, args.gold],
                  artifacts=[args.out])
    print(f"accuracy {report.accuracy:.4f} over {report.n} docs -> {args.out}")
    return 0


def cmd_errors(args):
    preds = _load_predictions(args.predictions)
    gold, rows = _gold_from_eval_file(args.gold)
    texts = {row["id"]: row["text"] for row in rows}
    if args.dry_run:
        print(f"would export up to {args.n} error docs -> {args.out}")
        return 0
    sampled = evalkit.sample_errors(preds, gold, args.n, args.seed, texts=texts,
                                    export_path=args.out)
    if len(sampled) < args.n:
        print(f"warning: only {len(sampled)} disagreements available (asked for {args.n})",
              file=sys.stderr)
    mf.append_run(Path(args.out).parent, "errors", {"n": args.n},
                  seeds={"sample": args.seed}, counts={"exported": len(sampled)},
                  inputs=[args.predictions, args.gold], artifacts=[args.out])
    print(f"exported {len(sampled)} error docs -> {args.out}")
    return 0


def cmd_crosstab(args):
    annotations = evalkit.load_human_annotations(args.annotations)
    preds = _load_predictions(args.predictions)
    table = evalkit.crosstab_human(annotations, preds)
    rendered = evalkit.render_crosstab(table)
    if args.out and not args.dry_run:
        Path(args.out).write_text(rendered + "\n", encoding="utf-8")
    print(rendered)
    return 0


def cmd_report(args):
    if args.values:
        values = [float(x) for x in args.values.split(",")]
        interval = evalkit.ci_over_seeds(values)
        print(interval.render())
        return 0
    if not args.report:
        raise UsageError("need --report or --values")
    report = evalkit.load_report(args.report)
    print(f"n = {report.n}")
    print(f"accuracy = {report.accuracy:.4f}")
    neg, pos = report.label_names
    print(f"confusion (rows=gold, cols=predicted; order {neg}, {pos}):")
    for name, row in zip(report.label_names, report.confusion):
        print(f"  {name:<10} {row[0]:>8} {row[1]:>8}")
    if report.discard_count:
        print(f"discards = {report.discard_count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llambert",
                                     description="LLM-assisted labeling pipeline")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the plan without writing anything")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a corpus file from raw data")
    p.add_argument("--jsonl")
    p.add_argument("--imdb-dir")
    p.add_argument("--umls-tsv")
    p.add_argument("--task-id")
    p.add_argument("--labels", help="negative,positive")
    p.add_argument("--split", default="test", help="split for --umls-tsv rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sample", help="seeded subset of a split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("annotate", help="label documents via a backend")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ids", help="file of doc ids, one per line")
    p.add_argument("--split", default="extra")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--backend", choices=("mock", "http"), default="mock")
    p.add_argument("--base-url")
    p.add_argument("--model", default="mock-oracle")
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("--garbage-rate", type=float, default=0.0)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--prompt", default="imdb", help="imdb, umls, or a spec config path")
    p.add_argument("--k", type=int, default=0, help="few-shot exemplar count")
    p.add_argument("--cache", help="response cache JSONL path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("build", help="materialize a training strategy")
    p.add_argument("--corpus", required=True)
    p.add_argument("--strategy", required=True,
                   choices=[s.value for s in ds.Strategy])
    p.add_argument("--llm-labels", help="labels.jsonl from annotate")
    p.add_argument("--eval-split", default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("noise", help="flip a seeded fraction of stage labels")
    p.add_argument("--stage", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("sweep", help="noise or size sweep with retraining")
    p.add_argument("--kind", choices=("noise", "size"), required=True)
    p.add_argument("--stage", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--fractions", help="comma list, e.g. 0,0.0461,0.1")
    p.add_argument("--sizes", help="comma list, e.g. 500,1000,2500")
    p.add_argument("--seeds", type=int, default=5, help="seeds per grid point")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="train the native classifier on stage files")
    p.add_argument("--stages", nargs="+", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score documents with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--eval-file", help="stage-format file to predict on")
    p.add_argument("--corpus")
    p.add_argument("--split")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="accuracy + confusion vs gold labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True, help="eval.jsonl with gold labels")
    p.add_argument("--labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("errors", help="export a blind sample of misclassified docs")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("crosstab", help="human annotations vs model outputs")
    p.add_argument("--annotations", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_crosstab)

    p = sub.add_parser("report", help="render a metrics report or seed CI")
    p.add_argument("--report")
    p.add_argument("--values", help="comma list of per-seed metric values")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (cstore.CorpusError, prompts.PromptError, ann.AnnotateError, ds.DatasetError,
            evalkit.EvalError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
