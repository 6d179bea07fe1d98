"""Batch command line: train, evaluate, answer and grid-search.

Reports go to stdout as tab-separated lines (see ``kgebow.report``), progress
and warnings to stderr.  Exit codes: 0 success, 2 usage error, 1 runtime
failure.  ``KGE_THREADS`` supplies the default for ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from kgebow import dataio, kbc, qa
from kgebow.data import TripleStore, Vocab
from kgebow.model import NEGATIVE_SAMPLING, SOFTMAX, LossConfig
from kgebow.report import EvalReport, RunManifest, report_line
from kgebow.train import TrainConfig, train

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


def _default_threads() -> int:
    return int(os.environ.get("KGE_THREADS", "1"))


def _require_files(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"file not found: {p}")


def _dataset_name(test_path: str, override: str | None) -> str:
    if override:
        return override
    p = Path(test_path)
    parent = p.resolve().parent.name
    return parent if parent not in ("", "/", ".") else p.stem


def _split_paths(text: str) -> list[str]:
    return [p for p in (s.strip() for s in text.split(",")) if p]


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise UsageError(f"bad integer list {text!r}") from e


# ---------------------------------------------------------------- train-kbc


def _resolve_loss(args) -> LossConfig:
    if args.loss == SOFTMAX:
        if args.neg is not None:
            raise UsageError("--neg only applies to the ns loss")
        return LossConfig(SOFTMAX)
    return LossConfig(NEGATIVE_SAMPLING, args.neg if args.neg is not None else 5)


def _train_kbc_model(
    task: str,
    train_paths: list[str],
    config: TrainConfig,
    verbose: bool = True,
) -> tuple[TripleStore, kbc.DirectionalVocab, object, object]:
    store = dataio.parse_triples(train_paths)
    vocab = kbc.build_vocab(store, task)
    if task == kbc.ENTITY_TASK:
        examples = kbc.encode_entity_prediction(store, vocab)
    else:
        examples = kbc.encode_relation_prediction(store, vocab)
    model, stats = train(
        examples,
        config,
        vocab.input_vocab_size,
        vocab.output_class_count,
        verbose=verbose,
    )
    return store, vocab, model, stats


def cmd_train_kbc(args) -> int:
    if args.include_valid and not args.valid:
        raise UsageError("--include-valid needs --valid")
    _require_files(args.train, args.valid)
    loss = _resolve_loss(args)
    train_paths = [args.train]
    if args.include_valid:
        train_paths.append(args.valid)
    config = TrainConfig(
        dim=args.dim,
        epochs=args.epoch,
        lr0=args.lr,
        loss=loss,
        threads=args.threads,
        seed=args.seed,
    )
    manifest = RunManifest(
        command="train-kbc",
        params={
            "task": args.task,
            "train_paths": train_paths,
            "dim": args.dim,
            "epoch": args.epoch,
            "neg": loss.negatives if loss.kind == NEGATIVE_SAMPLING else None,
            "lr": args.lr,
            "loss": loss.kind,
            "threads": args.threads,
        },
        seed=args.seed,
    )
    _, vocab, model, stats = _train_kbc_model(args.task, train_paths, config)
    task_tag = (
        "entity-prediction" if args.task == kbc.ENTITY_TASK else "relation-prediction"
    )
    dataio.save_model(
        dataio.ModelFile(
            task=task_tag,
            model=model,
            input_strings=tuple(vocab.input_token_strings()),
            output_strings=tuple(vocab.output_strings()),
            metadata={"manifest_hash": manifest.hash, **manifest.params},
        ),
        args.out,
    )
    manifest.write(str(args.out) + ".manifest.json")
    print(
        f"train\t{args.out}\t{stats.examples_processed}"
        f"\t{stats.final_avg_loss:.6f}\t{stats.wall_time_seconds:.3f}"
        f"\t{manifest.hash}"
    )
    return 0


# ----------------------------------------------------------------- eval-kbc


def _known_in_model_space(
    filter_paths: list[str], vocab: kbc.DirectionalVocab
) -> set:
    store = dataio.parse_triples(filter_paths)
    mapped, _ = kbc.map_store_triples(store, vocab)
    return set(mapped)


def cmd_eval_kbc(args) -> int:
    _require_files(args.model, args.test)
    model_file = dataio.load_model(args.model)
    task = (
        kbc.ENTITY_TASK
        if model_file.task == "entity-prediction"
        else kbc.RELATION_TASK
    )
    if model_file.task == "qa-relation":
        raise UsageError("eval-kbc needs an entity- or relation-prediction model")
    vocab = kbc.DirectionalVocab.from_token_strings(
        task, model_file.input_strings, model_file.output_strings
    )
    test_store = dataio.parse_triples(args.test)
    test_triples, skipped = kbc.map_store_triples(test_store, vocab)
    if skipped:
        log.warning("%d test triples name tokens unknown to the model", skipped)
    dataset = _dataset_name(args.test, args.dataset_name)
    manifest = RunManifest(
        command="eval-kbc",
        params={
            "model": args.model,
            "test": args.test,
            "filter": args.filter,
            "k": args.k,
            "mode": args.mode,
            "hit_percent": args.hit_percent,
        },
    )

    reports: list[EvalReport] = []
    if args.hit_percent is not None:
        if task != kbc.RELATION_TASK:
            raise UsageError("--hit-percent needs a relation-prediction model")
        reports.append(
            kbc.evaluate_hit_at_percent(
                model_file.model, vocab, test_triples, args.hit_percent
            )
        )
    else:
        if task != kbc.ENTITY_TASK:
            raise UsageError("Hit@K entity ranking needs an entity-prediction model")
        modes = ["raw", "filtered"] if args.mode == "both" else [args.mode]
        known = None
        if "filtered" in modes:
            if not args.filter:
                raise UsageError("filtered mode needs --filter <paths>")
            filter_paths = _split_paths(args.filter)
            _require_files(*filter_paths)
            known = _known_in_model_space(filter_paths, vocab)
        for mode in modes:
            reports.append(
                kbc.evaluate_hits(
                    model_file.model, vocab, test_triples, args.k, mode, known
                )
            )
    for report in reports:
        manifest.record(dataset, report)
        print(report_line(dataset, report, manifest.hash))
    if args.manifest_out:
        manifest.write(args.manifest_out)
    return 0


# ----------------------------------------------------------------------- qa


def _load_qa_pairs(path: str, fmt: str) -> list:
    if fmt == "simplequestions":
        return dataio.parse_simplequestions(path)
    return dataio.parse_wikimovies(path)


def _qa_table_from_metadata(
    aliases_path: str, kb: TripleStore, metadata: dict
) -> qa.AliasTable:
    table = qa.build_alias_table(aliases_path, kb)
    for name, count in metadata.get("linker_frequencies", {}).items():
        entity_id = kb.entity_vocab.get(name)
        if entity_id is not None:
            table.frequency[entity_id] = count
    return table


def cmd_qa_train(args) -> int:
    _require_files(args.pairs, args.kb, args.aliases)
    kb = dataio.parse_triples(args.kb)
    pairs = _load_qa_pairs(args.pairs, args.pairs_format)
    if args.pairs_format == "wikimovies":
        # pairs carry no gold relation: derive one by matching the KB
        bootstrap = qa.build_alias_table(args.aliases, kb)
        pairs, _ = qa.attach_gold_relations(pairs, kb, bootstrap)
    table = qa.build_alias_table(args.aliases, kb, training_pairs=pairs)
    words = qa.build_question_vocab(pairs)
    bucket_count = args.bigram_buckets if args.bigrams else 0
    examples, _ = qa.make_relation_training_set(
        pairs, words, kb.relation_vocab, bucket_count
    )
    if not examples:
        raise UsageError("no trainable pairs (missing relations or features)")
    config = TrainConfig(
        dim=args.dim,
        epochs=args.epoch,
        lr0=args.lr,
        loss=LossConfig(SOFTMAX),
        threads=args.threads,
        seed=args.seed,
    )
    manifest = RunManifest(
        command="qa-train",
        params={
            "pairs": args.pairs,
            "kb": args.kb,
            "aliases": args.aliases,
            "pairs_format": args.pairs_format,
            "dim": args.dim,
            "epoch": args.epoch,
            "lr": args.lr,
            "bigrams": bool(args.bigrams),
            "bigram_buckets": bucket_count,
            "threads": args.threads,
        },
        seed=args.seed,
    )
    model, stats = train(
        examples, config, len(words) + bucket_count, kb.num_relations
    )
    frequencies = {
        kb.entity_vocab.string(e): c for e, c in table.frequency.items()
    }
    dataio.save_model(
        dataio.ModelFile(
            task="qa-relation",
            model=model,
            input_strings=tuple(words.strings),
            output_strings=tuple(kb.relation_vocab.strings),
            metadata={
                "manifest_hash": manifest.hash,
                "linker_frequencies": frequencies,
                **manifest.params,
            },
        ),
        args.out,
    )
    manifest.write(str(args.out) + ".manifest.json")
    print(
        f"train\t{args.out}\t{stats.examples_processed}"
        f"\t{stats.final_avg_loss:.6f}\t{stats.wall_time_seconds:.3f}"
        f"\t{manifest.hash}"
    )
    return 0


def _load_qa_model(model_path: str, kb: TripleStore):
    model_file = dataio.load_model(model_path)
    if model_file.task != "qa-relation":
        raise UsageError("this command needs a qa-relation model")
    words = Vocab(model_file.input_strings)
    relation_ids = [
        kb.relation_vocab.get(s, -1) for s in model_file.output_strings
    ]
    return model_file, words, relation_ids


def cmd_qa_answer(args) -> int:
    if not args.question.strip():
        raise UsageError("empty question")
    _require_files(args.model, args.kb, args.aliases)
    kb = dataio.parse_triples(args.kb)
    model_file, words, relation_ids = _load_qa_model(args.model, kb)
    table = _qa_table_from_metadata(args.aliases, kb, model_file.metadata)
    answer = qa.answer_question(
        args.question,
        model_file.model,
        kb,
        table,
        words,
        model_file.bucket_count,
        relation_ids,
    )
    if answer is None:
        print(f"{args.question}\tNO_ANSWER\t\t")
    else:
        names = ",".join(
            kb.entity_vocab.string(a) for a in sorted(answer.answers)
        )
        print(
            f"{args.question}\t{kb.relation_vocab.string(answer.relation)}"
            f"\t{kb.entity_vocab.string(answer.subject)}\t{names}"
        )
    return 0


def cmd_qa_eval(args) -> int:
    _require_files(args.model, args.kb, args.aliases, args.pairs)
    kb = dataio.parse_triples(args.kb)
    model_file, words, relation_ids = _load_qa_model(args.model, kb)
    table = _qa_table_from_metadata(args.aliases, kb, model_file.metadata)
    pairs = _load_qa_pairs(args.pairs, args.pairs_format)
    metric = args.metric or (
        qa.ACCURACY if args.pairs_format == "simplequestions" else qa.HITS_AT_1
    )
    manifest = RunManifest(
        command="qa-eval",
        params={
            "model": args.model,
            "kb": args.kb,
            "aliases": args.aliases,
            "pairs": args.pairs,
            "metric": metric,
        },
    )
    report = qa.evaluate_qa(
        pairs,
        model_file.model,
        kb,
        table,
        words,
        model_file.bucket_count,
        metric,
        relation_ids,
        dump_path=args.dump,
    )
    dataset = _dataset_name(args.pairs, args.dataset_name)
    manifest.record(dataset, report)
    print(report_line(dataset, report, manifest.hash))
    if args.manifest_out:
        manifest.write(args.manifest_out)
    return 0


def cmd_qa(args) -> int:
    return args.qa_func(args)


# --------------------------------------------------------------------- grid


def _grid_configs(args) -> list[dict]:
    dims = _int_list(args.grid_dim)
    epochs = _int_list(args.grid_epoch)
    negs = _int_list(args.grid_neg) if args.grid_neg else [None]
    if args.loss == SOFTMAX and args.grid_neg:
        raise UsageError("--grid-neg only applies to the ns loss")
    if args.loss == NEGATIVE_SAMPLING and not args.grid_neg:
        raise UsageError("the ns loss needs --grid-neg")
    configs = [
        {"dim": d, "epoch": e, "neg": g}
        for d in dims
        for e in epochs
        for g in negs
    ]
    if not configs:
        raise UsageError("empty hyperparameter grid")
    return configs


def _config_label(cfg: dict) -> str:
    label = f"d{cfg['dim']}_e{cfg['epoch']}"
    if cfg["neg"] is not None:
        label += f"_n{cfg['neg']}"
    return label


def cmd_grid(args) -> int:
    configs = _grid_configs(args)
    manifests: list[RunManifest] = []
    if args.task == "qa":
        code = _grid_qa(args, configs, manifests)
    else:
        code = _grid_kbc(args, configs, manifests)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "manifests.jsonl", "w") as f:
            for m in manifests:
                f.write(json.dumps(m.to_dict()) + "\n")
    return code


def _make_train_config(args, cfg: dict) -> TrainConfig:
    if cfg["neg"] is not None:
        loss = LossConfig(NEGATIVE_SAMPLING, cfg["neg"])
    else:
        loss = LossConfig(SOFTMAX)
    return TrainConfig(
        dim=cfg["dim"],
        epochs=cfg["epoch"],
        lr0=args.lr,
        loss=loss,
        threads=args.threads,
        seed=args.seed,
    )


def _grid_kbc(args, configs, manifests) -> int:
    if args.select_metric == "accuracy":
        raise UsageError("accuracy selection is only for --task qa")
    if args.task == kbc.ENTITY_TASK and args.select_metric != "filtered-hit@10":
        raise UsageError("entity task selects on filtered-hit@10")
    if args.task == kbc.RELATION_TASK and args.select_metric != "hit@5pct":
        raise UsageError("relation task selects on hit@5pct")
    _require_files(args.train, args.valid, args.test)

    train_store = dataio.parse_triples(args.train)
    valid_store = dataio.parse_triples(args.valid, vocab_from=train_store)
    vocab = kbc.build_vocab(train_store, args.task)
    if args.task == kbc.ENTITY_TASK:
        examples = kbc.encode_entity_prediction(train_store, vocab)
        known = train_store.known_index | valid_store.known_index
    else:
        examples = kbc.encode_relation_prediction(train_store, vocab)

    best_value = -1.0
    best_cfg = None
    best_report = None
    for cfg in configs:
        config = _make_train_config(args, cfg)
        manifest = RunManifest(
            command="grid",
            params={"task": args.task, "train": args.train, "lr": args.lr, **cfg},
            seed=args.seed,
        )
        model, _ = train(
            examples,
            config,
            vocab.input_vocab_size,
            vocab.output_class_count,
            verbose=args.verbose,
        )
        if args.task == kbc.ENTITY_TASK:
            report = kbc.evaluate_hits(
                model, vocab, valid_store.triples, 10, "filtered", known
            )
        else:
            report = kbc.evaluate_hit_at_percent(
                model, vocab, valid_store.triples, 5.0
            )
        manifest.record(_config_label(cfg), report)
        manifests.append(manifest)
        print(report_line(_config_label(cfg), report, manifest.hash))
        if report.value > best_value:
            best_value, best_cfg, best_report = report.value, cfg, report
    print(
        report_line(
            f"selected:{_config_label(best_cfg)}", best_report, manifests[0].hash
        )
    )
    _finalize_kbc_winner(args, best_cfg, vocab, manifests)
    return 0


def _finalize_kbc_winner(args, best_cfg, vocab, manifests) -> None:
    """Re-train the selected configuration on train (and train+valid)."""
    if not (args.out or args.test):
        return
    regimes = [("train", [args.train])]
    if args.include_valid:
        regimes.append(("train+valid", [args.train, args.valid]))
    task_tag = (
        "entity-prediction"
        if args.task == kbc.ENTITY_TASK
        else "relation-prediction"
    )
    for name, paths in regimes:
        config = _make_train_config(args, best_cfg)
        manifest = RunManifest(
            command="grid-final",
            params={
                "task": args.task,
                "regime": name,
                "train_paths": paths,
                "lr": args.lr,
                **best_cfg,
            },
            seed=args.seed,
        )
        store, final_vocab, model, _ = _train_kbc_model(
            args.task, paths, config, verbose=args.verbose
        )
        if args.test:
            test_store = dataio.parse_triples(args.test, vocab_from=store)
            # snapshot again so test-only entities are known to the vocab
            final_vocab = kbc.build_vocab(store, args.task)
            test_triples, _ = kbc.map_store_triples(test_store, final_vocab)
            if args.task == kbc.ENTITY_TASK:
                known = _known_in_model_space(
                    [args.train, args.valid, args.test], final_vocab
                )
                report = kbc.evaluate_hits(
                    model, final_vocab, test_triples, 10, "filtered", known
                )
            else:
                report = kbc.evaluate_hit_at_percent(
                    model, final_vocab, test_triples, 5.0
                )
            manifest.record(name, report)
            print(report_line(f"final:{name}", report, manifest.hash))
        if args.out:
            out = Path(args.out) / f"winner-{name.replace('+', '_')}.bin"
            Path(args.out).mkdir(parents=True, exist_ok=True)
            dataio.save_model(
                dataio.ModelFile(
                    task=task_tag,
                    model=model,
                    input_strings=tuple(final_vocab.input_token_strings()),
                    output_strings=tuple(final_vocab.output_strings()),
                    metadata={"manifest_hash": manifest.hash, **manifest.params},
                ),
                out,
            )
        manifests.append(manifest)


def _grid_qa(args, configs, manifests) -> int:
    if args.select_metric != "accuracy":
        raise UsageError("--task qa selects on accuracy")
    _require_files(args.pairs, args.valid_pairs, args.kb, args.aliases)
    kb = dataio.parse_triples(args.kb)
    pairs = _load_qa_pairs(args.pairs, args.pairs_format)
    valid_pairs = _load_qa_pairs(args.valid_pairs, args.pairs_format)
    if args.pairs_format == "wikimovies":
        bootstrap = qa.build_alias_table(args.aliases, kb)
        pairs, _ = qa.attach_gold_relations(pairs, kb, bootstrap)
        valid_pairs, _ = qa.attach_gold_relations(valid_pairs, kb, bootstrap)
    words = qa.build_question_vocab(pairs)
    bucket_count = args.bigram_buckets if args.bigrams else 0
    examples, _ = qa.make_relation_training_set(
        pairs, words, kb.relation_vocab, bucket_count
    )

    best_value = -1.0
    best_cfg = None
    best_report = None
    for cfg in configs:
        config = _make_train_config(args, cfg)
        manifest = RunManifest(
            command="grid",
            params={"task": "qa", "pairs": args.pairs, "lr": args.lr, **cfg},
            seed=args.seed,
        )
        model, _ = train(
            examples,
            config,
            len(words) + bucket_count,
            kb.num_relations,
            verbose=args.verbose,
        )
        t0 = time.perf_counter()
        value = qa.relation_top1_accuracy(
            valid_pairs, model, kb.relation_vocab, words, bucket_count
        )
        report = EvalReport(
            metric="accuracy",
            mode="-",
            value=value,
            num_queries=len(valid_pairs),
            seconds=time.perf_counter() - t0,
        )
        manifest.record(_config_label(cfg), report)
        manifests.append(manifest)
        print(report_line(_config_label(cfg), report, manifest.hash))
        if report.value > best_value:
            best_value, best_cfg, best_report = report.value, cfg, report
    print(
        report_line(
            f"selected:{_config_label(best_cfg)}", best_report, manifests[0].hash
        )
    )
    return 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgebow",
        description="Bag-of-words linear classifiers for KB completion and QA",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-kbc", help="train an entity/relation predictor")
    p.add_argument("--task", choices=["entity", "relation"], required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--valid")
    p.add_argument("--include-valid", action="store_true",
                   help="concatenate the validation split into training")
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--epoch", type=int, default=5)
    p.add_argument("--neg", type=int, default=None)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--loss", choices=[SOFTMAX, NEGATIVE_SAMPLING], default="ns")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_kbc)

    p = sub.add_parser("eval-kbc", help="rank test triples with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--filter", help="comma-separated triple files to filter with")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--mode", choices=["raw", "filtered", "both"], default="raw")
    p.add_argument("--hit-percent", type=float, default=None)
    p.add_argument("--dataset-name")
    p.add_argument("--manifest-out")
    p.set_defaults(func=cmd_eval_kbc)

    p = sub.add_parser("qa", help="question answering over a KB")
    qa_sub = p.add_subparsers(dest="qa_command", required=True)

    q = qa_sub.add_parser("train", help="train the relation classifier")
    q.add_argument("--pairs", required=True)
    q.add_argument("--kb", required=True)
    q.add_argument("--aliases", required=True)
    q.add_argument("--pairs-format",
                   choices=["simplequestions", "wikimovies"],
                   default="simplequestions")
    q.add_argument("--dim", type=int, default=100)
    q.add_argument("--epoch", type=int, default=5)
    q.add_argument("--lr", type=float, default=0.2)
    q.add_argument("--bigrams", action="store_true")
    q.add_argument("--bigram-buckets", type=int, default=qa.DEFAULT_BIGRAM_BUCKETS)
    q.add_argument("--threads", type=int, default=_default_threads())
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_qa, qa_func=cmd_qa_train)

    q = qa_sub.add_parser("answer", help="answer a single question")
    q.add_argument("--model", required=True)
    q.add_argument("--kb", required=True)
    q.add_argument("--aliases", required=True)
    q.add_argument("--question", required=True)
    q.set_defaults(func=cmd_qa, qa_func=cmd_qa_answer)

    q = qa_sub.add_parser("eval", help="evaluate QA accuracy")
    q.add_argument("--model", required=True)
    q.add_argument("--kb", required=True)
    q.add_argument("--aliases", required=True)
    q.add_argument("--pairs", required=True)
    q.add_argument("--pairs-format",
                   choices=["simplequestions", "wikimovies"],
                   default="simplequestions")
    q.add_argument("--metric", choices=[qa.ACCURACY, qa.HITS_AT_1])
    q.add_argument("--dump", help="write per-question predictions here")
    q.add_argument("--dataset-name")
    q.add_argument("--manifest-out")
    q.set_defaults(func=cmd_qa, qa_func=cmd_qa_eval)

    p = sub.add_parser("grid", help="sequential hyperparameter grid search")
    p.add_argument("--task", choices=["entity", "relation", "qa"], required=True)
    p.add_argument("--train")
    p.add_argument("--valid")
    p.add_argument("--test")
    p.add_argument("--include-valid", action="store_true")
    p.add_argument("--pairs")
    p.add_argument("--valid-pairs")
    p.add_argument("--kb")
    p.add_argument("--aliases")
    p.add_argument("--pairs-format",
                   choices=["simplequestions", "wikimovies"],
                   default="simplequestions")
    p.add_argument("--grid-dim", required=True)
    p.add_argument("--grid-epoch", required=True)
    p.add_argument("--grid-neg")
    p.add_argument("--loss", choices=[SOFTMAX, NEGATIVE_SAMPLING], default="ns")
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--bigrams", action="store_true")
    p.add_argument("--bigram-buckets", type=int, default=qa.DEFAULT_BIGRAM_BUCKETS)
    p.add_argument("--select-metric",
                   choices=["filtered-hit@10", "hit@5pct", "accuracy"],
                   required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--verbose", action="store_true",
                   help="emit per-epoch training progress during the grid")
    p.set_defaults(func=cmd_grid)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
