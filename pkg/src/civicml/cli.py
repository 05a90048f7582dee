"""Command-line entry point orchestrating the pipeline.

Subcommands: ingest, tokenizer, baseline, pretrain, extend-context, finetune,
grid-search, calibrate, evaluate, explain, fewshot, report. Every run writes a
manifest next to its primary output recording the resolved flags, seeds, and
sha256 of each emitted artifact. Configuration precedence: flags > TOML config
file (--config) > defaults.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import LEVELS, __version__
from . import attribution as A
from . import baseline as B
from . import data as D
from . import fewshot as F
from . import metrics as M
from . import model as MODEL
from . import tokenizer as T
from . import training as TR

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

CIVIC_ENDPOINT = "https://civicdb.org/api/graphql"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(message)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(command: str, args: argparse.Namespace, outputs: list[Path],
                   started_at: float) -> Path:
    primary = outputs[0]
    manifest = {
        "command": command,
        "version": __version__,
        "config": {k: (str(v) if isinstance(v, Path) else v)
                   for k, v in vars(args).items() if k != "func"},
        "outputs": {str(p): _sha256(p) for p in outputs if p.exists()},
        "started_at": started_at,
        "finished_at": time.time(),
    }
    path = Path(str(primary) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _read_corpus(path: str) -> list[str]:
    """Text corpus: one document per line, or train-split abstracts from a
    dataset JSONL (validation/test text stays out of vocab and pretraining)."""
    p = Path(path)
    if p.suffix == ".jsonl":
        return [it.abstract for it in D.read_jsonl(p).train]
    return [ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]


def _scores_for(model, vocab, items):
    return TR.predict_scores(model, vocab, items)


def _labels_of(items) -> np.ndarray:
    return np.stack([it.labels for it in items])


def write_predictions_jsonl(path: Path, items, scores, preds) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item, s, p in zip(items, scores, preds):
            fh.write(json.dumps({
                "abstract": item.abstract,
                "scores": [float(x) for x in s],
                "pred": {lvl: bool(p[i]) for i, lvl in enumerate(LEVELS)},
                "gold": {lvl: bool(item.labels[i]) for i, lvl in enumerate(LEVELS)},
            }, ensure_ascii=False) + "\n")


def read_predictions_jsonl(path: Path):
    abstracts, preds, gold = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            abstracts.append(obj["abstract"])
            preds.append([bool(obj["pred"][lvl]) for lvl in LEVELS])
            gold.append([bool(obj["gold"][lvl]) for lvl in LEVELS])
    return abstracts, np.array(preds, dtype=bool), np.array(gold, dtype=bool)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> list[Path]:
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if len(ratios) != 3:
        raise UsageError("--ratios needs three comma-separated fractions")
    if args.from_fixture:
        records = D.load_raw_records(args.from_fixture)
    else:
        records = D.fetch_evidence(args.endpoint, args.page_size)
    print(f"fetched {len(records)} raw records")
    kept = D.filter_records(records)
    items = D.compile_multilabel(kept)
    print(f"filtered to {len(kept)} records, compiled {len(items)} items")
    split = D.stratified_split(items, ratios, args.seed)
    D.write_jsonl(split, args.out)
    counts = {name: len(part) for name, part in split.parts().items()}
    print(f"split sizes: {counts}")
    return [Path(args.out)]


def cmd_tokenizer(args) -> list[Path]:
    corpus = _read_corpus(args.corpus)
    vocab = T.train_vocab(corpus, args.size)
    T.save_vocab(vocab, args.out)
    n_long = T.count_long_texts(vocab, corpus, threshold=512)
    print(f"trained vocabulary of {len(vocab)} tokens from {len(corpus)} documents; "
          f"{n_long} documents ({100 * n_long / len(corpus):.1f}%) exceed 512 tokens")
    return [Path(args.out)]


def cmd_baseline(args) -> list[Path]:
    split = D.read_jsonl(args.data)
    if args.action == "train":
        tfidf = B.fit_tfidf([it.abstract for it in split.train])
        feats = B.transform_many(tfidf, [it.abstract for it in split.train])
        ovr = B.train_ovr(feats, _labels_of(split.train), reg=args.reg)
        B.save_baseline(tfidf, ovr, args.out)
        print(f"baseline trained on {len(split.train)} items, {len(tfidf.features)} features")
        return [Path(args.out)]
    # eval
    tfidf, ovr = B.load_baseline(args.model)
    val_scores = B.predict_proba(ovr, B.transform_many(tfidf, [it.abstract for it in split.validation]))
    thresholds = M.calibrate_thresholds(val_scores, _labels_of(split.validation))
    test_scores = B.predict_proba(ovr, B.transform_many(tfidf, [it.abstract for it in split.test]))
    preds = M.apply_thresholds(test_scores, thresholds)
    report = M.compute_metrics(preds, _labels_of(split.test))
    rows = [("baseline", report)]
    print(M.metrics_table(rows), end="")
    outputs = [Path(args.out)]
    Path(args.out).write_text(M.metrics_csv(rows), encoding="utf-8")
    if args.pred_out:
        write_predictions_jsonl(Path(args.pred_out), split.test, test_scores, preds)
        outputs.append(Path(args.pred_out))
    return outputs


def _model_from_args(args) -> MODEL.EncoderModel:
    if getattr(args, "ckpt", None):
        return MODEL.load_model(args.ckpt)
    vocab = T.load_vocab(args.vocab)
    config = MODEL.ModelConfig(
        num_blocks=args.blocks, context_width=args.context, embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim, num_heads=args.heads, vocab_size=len(vocab),
    )
    return MODEL.init_model(config, args.seed)


def cmd_pretrain(args) -> list[Path]:
    vocab = T.load_vocab(args.vocab)
    model = _model_from_args(args)
    corpus = _read_corpus(args.corpus)
    if args.min_tokens:
        corpus = T.filter_long_texts(vocab, corpus, args.min_tokens)
        print(f"kept {len(corpus)} documents of >= {args.min_tokens} tokens")
    schedule = TR.TrainSchedule(
        steps=args.steps, batch_size=args.batch, grad_accum=args.grad_accum,
        lr=args.lr, warmup_steps=args.warmup, decay="linear",
        max_grad_norm=args.clip, seed=args.seed,
    )
    model, trace = TR.pretrain_mlm(model, corpus, vocab, schedule)
    MODEL.save_model(model, args.out)
    if trace:
        print(f"pretrained {len(trace)} updates; loss {trace[0]:.4f} -> {trace[-1]:.4f}")
    return [Path(args.out)]


def cmd_extend_context(args) -> list[Path]:
    model = MODEL.load_model(args.inp)
    extended = TR.extend_context(model, model.config.context_width * args.factor)
    MODEL.save_model(extended, args.out)
    print(f"context width {model.config.context_width} -> {extended.config.context_width}")
    return [Path(args.out)]


def cmd_finetune(args) -> list[Path]:
    vocab = T.load_vocab(args.vocab)
    split = D.read_jsonl(args.data)
    base = MODEL.load_model(args.ckpt)
    seeds = [int(s) for s in args.seeds.split(",")]
    outputs: list[Path] = []
    if len(seeds) == 1:
        result = TR.finetune(base, split, vocab, args.lr, args.batch, args.epochs, seeds[0])
        MODEL.save_model(result.model, args.out)
        print(f"best epoch {result.best_epoch} val loss {result.best_val_loss:.4f}")
        outputs.append(Path(args.out))
    else:
        results, reports, agg = TR.multi_seed_run(
            lambda seed: base.copy(), split, vocab, args.lr, args.batch, args.epochs, seeds)
        stem = Path(args.out)
        for seed, res in zip(seeds, results):
            p = stem.with_name(f"{stem.stem}.seed{seed}{stem.suffix}")
            MODEL.save_model(res.model, p)
            outputs.append(p)
        summary = {
            "seeds": seeds,
            "per_seed_weighted_f1": agg.per_seed_weighted_f1,
            "weighted_f1_mean": agg.mean.weighted_f1,
            "weighted_f1_min": agg.wf1_min,
            "weighted_f1_median": agg.wf1_median,
            "weighted_f1_max": agg.wf1_max,
        }
        box_path = stem.with_name(f"{stem.stem}.seed_summary.json")
        box_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        outputs.insert(0, box_path)
        print(M.metrics_table([(f"seed{seed}", r) for seed, r in zip(seeds, reports)]), end="")
        print(f"mean weighted F1: {100 * agg.mean.weighted_f1:.1f}")
    return outputs


def cmd_grid_search(args) -> list[Path]:
    vocab = T.load_vocab(args.vocab)
    split = D.read_jsonl(args.data)
    base = MODEL.load_model(args.ckpt)
    grid = TR.FinetuneGrid(
        learning_rates=tuple(float(x) for x in args.lrs.split(",")),
        batch_sizes=tuple(int(x) for x in args.batches.split(",")),
        epochs=args.epochs, seeds_per_cell=args.seeds_per_cell, base_seed=args.seed,
    )
    result = TR.hyperparam_search(lambda seed: base.copy(), split, vocab, grid)
    table = {f"lr={lr:g},batch={bs}": loss for (lr, bs), loss in result.mean_val_loss.items()}
    obj = {"best_lr": result.best_lr, "best_batch_size": result.best_batch_size,
           "mean_val_loss": table}
    Path(args.out).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    for cell, loss in table.items():
        print(f"{cell}: {loss:.4f}")
    print(f"best: lr={result.best_lr:g} batch={result.best_batch_size}")
    return [Path(args.out)]


def cmd_calibrate(args) -> list[Path]:
    vocab = T.load_vocab(args.vocab)
    split = D.read_jsonl(args.data)
    model = MODEL.load_model(args.ckpt)
    scores = _scores_for(model, vocab, split.validation)
    thresholds = M.calibrate_thresholds(scores, _labels_of(split.validation))
    obj = {lvl: float(thresholds[i]) for i, lvl in enumerate(LEVELS)}
    Path(args.out).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    print("thresholds:", obj)
    return [Path(args.out)]


def cmd_evaluate(args) -> list[Path]:
    vocab = T.load_vocab(args.vocab)
    split = D.read_jsonl(args.data)
    model = MODEL.load_model(args.ckpt)
    if args.thresholds:
        obj = json.loads(Path(args.thresholds).read_text(encoding="utf-8"))
        thresholds = np.array([float(obj[lvl]) for lvl in LEVELS])
    else:
        val_scores = _scores_for(model, vocab, split.validation)
        thresholds = M.calibrate_thresholds(val_scores, _labels_of(split.validation))
    scores = _scores_for(model, vocab, split.test)
    preds = M.apply_thresholds(scores, thresholds)
    report = M.compute_metrics(preds, _labels_of(split.test))
    rows = [(args.label, report)]
    print(M.metrics_table(rows), end="")
    Path(args.out).write_text(M.metrics_csv(rows), encoding="utf-8")
    outputs = [Path(args.out)]
    if args.pred_out:
        write_predictions_jsonl(Path(args.pred_out), split.test, scores, preds)
        outputs.append(Path(args.pred_out))
    return outputs


def cmd_explain(args) -> list[Path]:
    vocab = T.load_vocab(args.vocab)
    split = D.read_jsonl(args.data)
    model = MODEL.load_model(args.ckpt)
    items = split.test[: args.items] if args.items else split.test
    baseline_kind = "zero_embedding" if args.baseline == "zero" else "pad_sequence"
    config = A.AttributionConfig(baseline_kind=baseline_kind, steps=args.steps,
                                 target_class=args.target_class)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            attributions = A.attribute_item(model, vocab, item.abstract, config)
            fh.write(json.dumps({
                "abstract": item.abstract,
                "class": args.target_class,
                "tokens": [{"token": ta.token, "position": ta.position, "score": ta.score}
                           for ta in attributions],
                "completeness_residual": attributions[0].completeness_residual if attributions else 0.0,
            }, ensure_ascii=False) + "\n")
    top = A.top_tokens_per_class(model, vocab, items, k=args.top_k, steps=args.steps,
                                 baseline_kind=baseline_kind)
    width = max(len(tok) for ranked in top.values() for tok, _ in ranked) if any(top.values()) else 5
    print("top tokens by class:")
    for level in LEVELS:
        ranked = ", ".join(f"{tok:<{width}} {score:+.3f}" for tok, score in top[level])
        print(f"  {level}: {ranked}")
    return [Path(args.out)]


def cmd_fewshot(args) -> list[Path]:
    split = D.read_jsonl(args.data)
    reduced = F.carve_reduced_testset(split.test, per_level=args.per_level, seed=args.seed)
    if args.client == "live":
        client: F.LlmClient = F.HttpChatClient.from_env()
    elif args.client.startswith("constant:"):
        client = F.MockConstantClient(args.client.split(":", 1)[1])
    else:
        client = F.MockOracleClient(reduced)
    shots = tuple(int(s) for s in args.shots.split(","))
    evals = F.evaluate_fewshot(client, split.train, reduced, shots,
                               repetitions=args.reps, seed=args.seed,
                               token_budget=args.token_budget or None)
    rows = [(f"{n}-shot", ev.mean_report) for n, ev in evals.items() if ev.mean_report]
    print(M.metrics_table(rows), end="")
    Path(args.out).write_text(M.metrics_csv(rows), encoding="utf-8")
    return [Path(args.out)]


def cmd_report(args) -> list[Path]:
    preds_by_model: dict[str, np.ndarray] = {}
    gold_ref = None
    abstracts_ref = None
    for path in args.compare:
        abstracts, preds, gold = read_predictions_jsonl(Path(path))
        name = Path(path).stem
        preds_by_model[name] = preds
        if gold_ref is None:
            gold_ref, abstracts_ref = gold, abstracts
        elif abstracts != abstracts_ref:
            raise D.DataError(f"prediction file {path} covers different items than {args.compare[0]}")
    overlap = M.misclassification_analysis(preds_by_model, gold_ref)
    lines = ["model," + ",".join(overlap.model_names)]
    for i, name in enumerate(overlap.model_names):
        lines.append(name + "," + ",".join(f"{overlap.shared_error_pct[i, j]:.1f}"
                                           for j in range(len(overlap.model_names))))
    lines.append("")
    lines.append("models_correct,item_count")
    for k_count, n_items in sorted(overlap.correct_model_histogram.items()):
        lines.append(f"{k_count},{n_items}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return [Path(args.out)]


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="civicml", description=__doc__)
    parser.add_argument("--config", default=None, help="TOML config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="fetch, filter, compile, and split the dataset")
    p.add_argument("--endpoint", default=CIVIC_ENDPOINT)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--page-size", type=int, default=100)
    p.add_argument("--from-fixture", default=None, help="read raw records from a JSON fixture instead of the API")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tokenizer", help="train the subword vocabulary")
    p.add_argument("action", choices=["train"])
    p.add_argument("--corpus", required=True)
    p.add_argument("--size", type=int, default=8192)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tokenizer)

    p = sub.add_parser("baseline", help="train or evaluate the tf-idf baseline")
    p.add_argument("action", choices=["train", "eval"])
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None, help="model JSON (eval)")
    p.add_argument("--reg", type=float, default=1.0)
    p.add_argument("--pred-out", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("pretrain", help="masked-language-model pretraining")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ckpt", default=None, help="continue from a checkpoint")
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--grad-accum", type=int, default=16)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--warmup", type=int, default=500)
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-tokens", type=int, default=0, help="keep only documents this long")
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--context", type=int, default=128)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--hidden-dim", type=int, default=256)
    p.add_argument("--heads", type=int, default=4)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("extend-context", help="tile the positional table to a wider context")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--factor", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extend_context)

    p = sub.add_parser("finetune", help="multi-label fine-tuning (one or many seeds)")
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seeds", default="0")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("grid-search", help="hyperparameter grid over lr and batch size")
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lrs", default="1e-6,3e-6,6e-6")
    p.add_argument("--batches", default="16,32")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seeds-per-cell", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("calibrate", help="pick per-class thresholds on validation")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="test-set metrics with calibrated thresholds")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--thresholds", default=None)
    p.add_argument("--pred-out", default=None)
    p.add_argument("--label", default="model")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="integrated-gradients token attribution")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--class", dest="target_class", choices=list(LEVELS), required=True)
    p.add_argument("--baseline", choices=["zero", "pad"], default="zero")
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--items", type=int, default=0, help="limit to the first N test items")
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("fewshot", help="N-shot evaluation on the reduced test set")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shots", default="0,1,2,3,4,5,10")
    p.add_argument("--client", default="mock", help="live | mock | constant:<letters>")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-level", type=int, default=4)
    p.add_argument("--token-budget", type=int, default=0, help="error if a prompt exceeds this many tokens")
    p.set_defaults(func=cmd_fewshot)

    p = sub.add_parser("report", help="misclassification overlap across prediction files")
    p.add_argument("--compare", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    for sp in sub.choices.values():  # accept --config after the subcommand too
        sp.add_argument("--config", default=None, help="TOML config file; flags override it")

    return parser


def _load_toml(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python 3.10
        try:
            import tomli as tomllib
        except ModuleNotFoundError:
            return _parse_flat_toml(path)
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _parse_flat_toml(path: str) -> dict:
    """Minimal [section] key = scalar parser for environments without tomllib."""
    cfg: dict = {}
    section: dict = cfg
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = cfg.setdefault(line[1:-1].strip(), {})
            continue
        key, _, value = line.partition("=")
        value = value.strip()
        if value.startswith(("'", '"')):
            parsed: object = value[1:-1]
        elif value in ("true", "false"):
            parsed = value == "true"
        else:
            try:
                parsed = int(value)
            except ValueError:
                parsed = float(value)
        section[key.strip()] = parsed
    return cfg


def _apply_config_file(parser: _Parser, argv: list[str]) -> list[str]:
    """Fold TOML config values in as defaults (flags still win)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    cfg_path = argv[idx + 1]
    cfg = _load_toml(cfg_path)
    command = next((a for a in argv if not a.startswith("-") and a != cfg_path), None)
    section = cfg.get(command, {}) if command else {}
    extra: list[str] = []
    for key, value in section.items():
        flag = "--" + key.replace("_", "-")
        if flag not in argv:
            extra += [flag, str(value)]
    return argv + extra


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    started = time.time()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        outputs = args.func(args)
        if outputs:
            manifest = write_manifest(args.command, args, outputs, started)
            print(f"manifest: {manifest}")
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (D.DataError, FileNotFoundError, F.ClientError, F.PromptBudgetError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MODEL.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
