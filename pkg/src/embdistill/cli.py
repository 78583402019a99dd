"""Command-line entry points.

Subcommands: prepare, teacher, soft-targets, train, distill, fold,
eval, bench, compare.  A JSON config file (flat keys, same names as the
long flags) can supply any value; explicit flags win.  Exit codes: 0
success, 2 configuration problem, 3 data problem, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .data import (
    ALL_PHRASES,
    DatasetSplits,
    SENTENCE_ONLY,
    Sample,
    build_vocab,
    extract_samples,
    read_tree_file,
)
from .distillation import (
    DIRECT_SMALL,
    ENCODING_DISTILL,
    MATCHING_SOFTMAX,
    Regime,
    RegimeOutcome,
    fold_model,
    generate_soft_targets,
    load_soft_targets,
    run_regime,
    save_soft_targets,
    train_teacher,
)
from .embeddings import (
    EmbeddingTable,
    Vocabulary,
    align_to_vocab,
    load_table,
    load_word2vec_text,
)
from .errors import ConfigError, DataError, DivergenceError
from .model import (
    ModelConfig,
    count_parameters,
    evaluate_accuracy,
    load_model,
    predict,
    save_model,
)
from .report import build_report, format_text, format_tsv
from .training import (
    DECAY_SCHEMES,
    TrainConfig,
    TrainingProtocol,
)

_SPLIT_FILES = {"train": "train.samples", "valid": "valid.samples", "test": "test.samples"}
_SENTENCE_TRAIN = "train_sentence.samples"


# ---------------------------------------------------------------------------
# config plumbing

def _load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON config ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg


def _merged(args, key: str, default=None):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    config = getattr(args, "_config", {})
    return config.get(key, default)


def _require(args, key: str):
    value = _merged(args, key)
    if value is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return value


def _floats(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v != ""]


def _ints(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v != ""]


def _strs(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [s for s in str(value).split(",") if s != ""]


def _out_dir(args) -> str:
    out = _require(args, "out")
    os.makedirs(out, exist_ok=True)
    return out


def _dump_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# prepared-dataset cache

def _write_samples(path, samples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(f"{s.label}\t{' '.join(str(int(t)) for t in s.tokens)}\n")


def _read_samples(path) -> list[Sample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            try:
                label_text, tokens_text = line.split("\t")
                samples.append(
                    Sample(np.array([int(t) for t in tokens_text.split()]), int(label_text))
                )
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed sample line") from None
    return samples


def _read_vocab_file(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        words = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    return Vocabulary.from_words(words)


def _load_prepared(data_dir, train_file: str = "train.samples") -> DatasetSplits:
    vocab = _read_vocab_file(os.path.join(data_dir, "vocab.txt"))
    return DatasetSplits(
        train=_read_samples(os.path.join(data_dir, train_file)),
        valid=_read_samples(os.path.join(data_dir, "valid.samples")),
        test=_read_samples(os.path.join(data_dir, "test.samples")),
        vocab=vocab,
    )


def cmd_prepare(args) -> int:
    mode = _merged(args, "mode", ALL_PHRASES)
    if mode not in (ALL_PHRASES, SENTENCE_ONLY):
        raise ConfigError(f"unknown mode {mode!r}")
    lowercase = bool(_merged(args, "lowercase", False))

    # Parse everything before writing anything, so a bad line can never
    # leave a partial cache behind.
    train_trees = read_tree_file(_require(args, "train"))
    valid_trees = read_tree_file(_require(args, "valid"))
    test_trees = read_tree_file(_require(args, "test"))
    vocab = build_vocab(train_trees, lowercase)

    train_phrases = [
        s for t in train_trees for s in extract_samples(t, ALL_PHRASES, vocab, lowercase)
    ]
    train_sentences = [
        s for t in train_trees for s in extract_samples(t, SENTENCE_ONLY, vocab, lowercase)
    ]
    valid = [
        s for t in valid_trees for s in extract_samples(t, SENTENCE_ONLY, vocab, lowercase)
    ]
    test = [
        s for t in test_trees for s in extract_samples(t, SENTENCE_ONLY, vocab, lowercase)
    ]
    train = train_phrases if mode == ALL_PHRASES else train_sentences

    out = _out_dir(args)
    with open(os.path.join(out, "vocab.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(vocab.words) + "\n")
    _write_samples(os.path.join(out, "train.samples"), train)
    _write_samples(os.path.join(out, _SENTENCE_TRAIN), train_sentences)
    _write_samples(os.path.join(out, "valid.samples"), valid)
    _write_samples(os.path.join(out, "test.samples"), test)
    _dump_json(
        {
            "mode": mode,
            "lowercase": lowercase,
            "vocab_size": len(vocab),
            "train_sentences": len(train_sentences),
            "train_phrases": len(train_phrases),
            "valid": len(valid),
            "test": len(test),
        },
        os.path.join(out, "meta.json"),
    )
    print(f"vocab: {len(vocab)} tokens (unknown token included)")
    print(f"train: {len(train_trees)} trees, {len(train_sentences)} sentence samples, "
          f"{len(train_phrases)} phrase samples")
    print(f"valid: {len(valid)} sentence samples")
    print(f"test: {len(test)} sentence samples")
    print(f"cached mode: {mode}")
    return 0


# ---------------------------------------------------------------------------
# embeddings on the task vocabulary

def _load_any_table(path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"EMB1":
        return load_table(path)
    return load_word2vec_text(path)


def _task_table(args, vocab: Vocabulary, seed: int) -> EmbeddingTable | None:
    path = _merged(args, "embeddings")
    if path is None:
        return None
    pretrained = _load_any_table(path)
    rng = np.random.default_rng([seed, 2])
    scale = float(_merged(args, "init_scale", 0.1))
    return align_to_vocab(pretrained, vocab, rng, scale)


# ---------------------------------------------------------------------------
# protocol assembly

def _protocol(args) -> TrainingProtocol:
    defaults = TrainingProtocol()
    lrs = _merged(args, "lr")
    schemes = _merged(args, "decay")
    dropouts = _merged(args, "dropout")
    protocol = TrainingProtocol(
        learning_rates=tuple(_floats(lrs)) if lrs is not None else defaults.learning_rates,
        decay_schemes=tuple(_strs(schemes)) if schemes is not None else defaults.decay_schemes,
        dropout_rates=tuple(_floats(dropouts)) if dropouts is not None else defaults.dropout_rates,
        batch_size=int(_merged(args, "batch_size", defaults.batch_size)),
        max_epochs=int(_merged(args, "epochs", defaults.max_epochs)),
        patience=int(_merged(args, "patience", defaults.patience)),
        grid_seed=int(_merged(args, "grid_seed", defaults.grid_seed)),
        restart_seeds=tuple(_ints(_merged(args, "seeds", list(defaults.restart_seeds)))),
    )
    for scheme in protocol.decay_schemes:
        if scheme not in DECAY_SCHEMES:
            raise ConfigError(
                f"unknown decay scheme {scheme!r}, expected one of {DECAY_SCHEMES}"
            )
    if any(lr == 0 for lr in protocol.learning_rates):
        print("warning: learning rate 0 leaves parameters unchanged")
    return protocol


def _outcome_payload(outcome: RegimeOutcome, protocol: TrainingProtocol,
                     model_config: ModelConfig) -> dict:
    grid_rows = []
    for entry in outcome.grid.entries:
        row = {"config": asdict(entry.config), "skipped": entry.skipped}
        if entry.result is not None:
            row.update(
                best_valid_accuracy=entry.result.best_valid_accuracy,
                test_accuracy=entry.result.test_accuracy,
                best_epoch=entry.result.best_epoch,
                seconds=entry.result.seconds,
            )
        grid_rows.append(row)
    return {
        "regime": outcome.regime.tag,
        "toolkit_version": __version__,
        "temperature": outcome.regime.temperature,
        "model_config": asdict(model_config),
        "protocol": protocol.to_dict(),
        "best_config": asdict(outcome.grid.best_config),
        "grid": grid_rows,
        "aggregate": outcome.aggregate.to_dict(),
        "deployed_parameters": outcome.deployed_parameters,
    }


def _run_and_save_regime(args, regime: Regime, **regime_kwargs) -> int:
    data_dir = _require(args, "data")
    train_file = "train.samples"
    if bool(_merged(args, "sentences_only", False)):
        train_file = _SENTENCE_TRAIN
    splits = _load_prepared(data_dir, train_file)
    protocol = _protocol(args)
    out = _out_dir(args)
    log_dir = os.path.join(out, "logs")
    os.makedirs(log_dir, exist_ok=True)

    outcome = run_regime(
        regime,
        splits,
        protocol,
        n_hidden=int(_merged(args, "hidden", 50)),
        n_classes=int(_merged(args, "classes", 5)),
        jobs=int(_merged(args, "jobs", 1)),
        log_dir=log_dir,
        init_scale=float(_merged(args, "init_scale", 0.1)),
        **regime_kwargs,
    )
    best_path = os.path.join(out, "best.mdl")
    save_model(outcome.best_model, best_path)
    if outcome.folded_model is not None:
        # fold from the saved file so the standalone fold command
        # reproduces this artifact byte for byte
        save_model(fold_model(load_model(best_path)), os.path.join(out, "folded.mdl"))
    _dump_json(
        _outcome_payload(outcome, protocol, outcome.best_model.config),
        os.path.join(out, "result.json"),
    )
    agg = outcome.aggregate
    print(f"regime: {regime.tag}")
    print(f"best config: lr={outcome.grid.best_config.learning_rate:g} "
          f"decay={outcome.grid.best_config.decay_scheme} "
          f"dropout={outcome.grid.best_config.dropout_rate:g}")
    print(f"test accuracy: {100 * agg.mean_accuracy:.1f} ± {100 * agg.std_accuracy:.1f} "
          f"(restart pick {100 * agg.restart_test_accuracy:.1f})")
    print(f"deployed parameters: {outcome.deployed_parameters}")
    return 0


def cmd_train(args) -> int:
    regime_name = _merged(args, "regime", "direct")
    seed = int(_merged(args, "seed", 0))
    data_dir = _require(args, "data")
    vocab = _read_vocab_file(os.path.join(data_dir, "vocab.txt"))
    table = _task_table(args, vocab, seed)

    if regime_name in ("direct", DIRECT_SMALL):
        regime = Regime(DIRECT_SMALL)
        embed_dim = _merged(args, "embed_dim")
        if table is None and embed_dim is None:
            raise ConfigError("direct training needs --embeddings or --embed-dim")
        return _run_and_save_regime(
            args, regime, table=table,
            embed_dim=int(embed_dim) if embed_dim is not None else None,
        )
    if regime_name in ("matching-softmax", MATCHING_SOFTMAX):
        temperature = float(_merged(args, "temperature", 2.0))
        regime = Regime(MATCHING_SOFTMAX, temperature)
        targets = load_soft_targets(_require(args, "soft_targets"))
        embed_dim = _merged(args, "embed_dim")
        if table is None and embed_dim is None:
            raise ConfigError("matching softmax needs --embeddings or --embed-dim")
        return _run_and_save_regime(
            args, regime, table=table,
            embed_dim=int(embed_dim) if embed_dim is not None else None,
            soft_targets=targets,
        )
    raise ConfigError(f"unknown regime {regime_name!r} for train")


def cmd_distill(args) -> int:
    seed = int(_merged(args, "seed", 0))
    data_dir = _require(args, "data")
    vocab = _read_vocab_file(os.path.join(data_dir, "vocab.txt"))
    table = _task_table(args, vocab, seed)
    if table is None:
        raise ConfigError("distill needs --embeddings with the large pretrained table")
    regime = Regime(ENCODING_DISTILL)
    return _run_and_save_regime(
        args, regime, table=table, distill_dim=int(_merged(args, "distill_dim", 50))
    )


def cmd_teacher(args) -> int:
    seed = int(_merged(args, "seed", 0))
    data_dir = _require(args, "data")
    splits = _load_prepared(data_dir)
    table = _task_table(args, splits.vocab, seed)
    if table is None:
        raise ConfigError("teacher training needs --embeddings")
    cfg = TrainConfig(
        learning_rate=float(_merged(args, "lr", 0.3)),
        decay_scheme=str(_merged(args, "decay", "constant")),
        batch_size=int(_merged(args, "batch_size", 200)),
        max_epochs=int(_merged(args, "epochs", 30)),
        dropout_rate=float(_merged(args, "dropout", 0.0)),
        seed=seed,
        patience=int(_merged(args, "patience", 5)),
    )
    if cfg.learning_rate == 0:
        print("warning: learning rate 0 leaves parameters unchanged")
    out = _out_dir(args)
    model, result = train_teacher(
        splits, table, cfg,
        n_hidden=int(_merged(args, "hidden", 200)),
        n_classes=int(_merged(args, "classes", 5)),
    )
    save_model(model, os.path.join(out, "teacher.mdl"))
    payload = result.to_dict()
    payload["toolkit_version"] = __version__
    payload["parameters"] = count_parameters(model)
    _dump_json(payload, os.path.join(out, "teacher_result.json"))
    with open(os.path.join(out, "teacher.log"), "w", encoding="utf-8") as fh:
        for epoch, (loss, acc) in enumerate(zip(result.train_losses, result.valid_accuracies)):
            fh.write(f"{epoch}\t{loss:.6f}\t{acc:.6f}\n")
    print(f"teacher validation accuracy: {100 * result.best_valid_accuracy:.1f}")
    print(f"teacher test accuracy: {100 * result.test_accuracy:.1f}")
    print(f"teacher parameters: {count_parameters(model)}")
    return 0


def cmd_soft_targets(args) -> int:
    data_dir = _require(args, "data")
    train_file = _SENTENCE_TRAIN if bool(_merged(args, "sentences_only", False)) else "train.samples"
    samples = _read_samples(os.path.join(data_dir, train_file))
    teacher = load_model(_require(args, "teacher"))
    temperature = float(_merged(args, "temperature", 2.0))
    targets = generate_soft_targets(teacher, samples, temperature)
    out = _out_dir(args)
    path = os.path.join(out, "soft_targets.sft")
    save_soft_targets(targets, path)
    print(f"wrote {len(targets)} soft targets at T={temperature:g} to {path}")
    return 0


def cmd_fold(args) -> int:
    model = load_model(_require(args, "model"))
    folded = fold_model(model)
    out_path = _require(args, "out")
    save_model(folded, out_path)
    print(f"folded parameters: {count_parameters(folded)} "
          f"(was {count_parameters(model)})")
    return 0


def cmd_eval(args) -> int:
    model = load_model(_require(args, "model"))
    data_dir = _require(args, "data")
    split = _merged(args, "split", "test")
    if split not in _SPLIT_FILES:
        raise ConfigError(f"unknown split {split!r}, expected one of {sorted(_SPLIT_FILES)}")
    samples = _read_samples(os.path.join(data_dir, _SPLIT_FILES[split]))
    vocab = _read_vocab_file(os.path.join(data_dir, "vocab.txt"))
    if len(vocab) != len(model.embedding.vocab):
        raise ConfigError(
            f"model vocabulary ({len(model.embedding.vocab)}) does not match "
            f"prepared data ({len(vocab)})"
        )
    acc = evaluate_accuracy(model, samples)
    print(f"{split} accuracy: {acc:.6f} ({len(samples)} samples)")
    return 0


# Each timed sweep is padded to at least this long so scheduler noise
# stays small relative to the measurement.
_MIN_REP_SECONDS = 0.1


def _time_pass(model, samples, loops: int = 1) -> float:
    """Seconds for one inference sweep over the corpus (averaged over
    ``loops`` back-to-back sweeps)."""
    start = time.perf_counter()
    for _ in range(loops):
        for s in samples:
            predict(model, s)
    return (time.perf_counter() - start) / loops


def cmd_bench(args) -> int:
    reps = int(_merged(args, "reps", 5))
    if reps < 3:
        raise ConfigError(f"bench needs reps >= 3, got {reps}")
    data_dir = _require(args, "data")
    split = _merged(args, "split", "test")
    if split not in _SPLIT_FILES:
        raise ConfigError(f"unknown split {split!r}")
    samples = _read_samples(os.path.join(data_dir, _SPLIT_FILES[split]))
    large = load_model(_require(args, "large"))
    small = load_model(_require(args, "small"))
    # warm-up passes double as probes that size the repetitions; each
    # rep then measures in palindrome order (large, small, small, large)
    # so clock drift and measurement-slot bias cancel for both models
    probe = min(_time_pass(large, samples), _time_pass(small, samples))
    loops = max(1, int(np.ceil(_MIN_REP_SECONDS / max(probe, 1e-9))))
    large_times, small_times = [], []
    for _ in range(reps):
        first = _time_pass(large, samples, loops)
        inner_a = _time_pass(small, samples, loops)
        inner_b = _time_pass(small, samples, loops)
        last = _time_pass(large, samples, loops)
        large_times.append((first + last) / 2.0)
        small_times.append((inner_a + inner_b) / 2.0)
    large_sec = float(np.median(large_times))
    small_sec = float(np.median(small_times))
    payload = {
        "large_seconds": large_sec,
        "small_seconds": small_sec,
        "relative_time": small_sec / large_sec,
        "reps": reps,
        "corpus_size": len(samples),
        "large_parameters": count_parameters(large),
        "small_parameters": count_parameters(small),
    }
    out = _merged(args, "out")
    if out is not None:
        _dump_json(payload, out)
    print(f"large: {large_sec:.4f}s  small: {small_sec:.4f}s  "
          f"relative time: {payload['relative_time']:.4f}x "
          f"(median of {reps} reps over {len(samples)} samples)")
    return 0


def cmd_compare(args) -> int:
    result_paths = _merged(args, "results")
    if not result_paths:
        raise ConfigError("compare needs at least one result file")
    results = []
    seen = set()
    for path in result_paths:
        with open(path, encoding="utf-8") as fh:
            res = json.load(fh)
        tag = res.get("regime")
        if tag in seen:
            raise ConfigError(f"duplicate result for regime {tag!r}")
        seen.add(tag)
        results.append(res)
    bench = None
    bench_path = _merged(args, "bench")
    if bench_path is not None:
        with open(bench_path, encoding="utf-8") as fh:
            bench = json.load(fh)
    report = build_report(results, bench)
    out = _out_dir(args)
    tsv = format_tsv(report)
    txt = format_text(report)
    with open(os.path.join(out, "report.tsv"), "w", encoding="utf-8") as fh:
        fh.write(tsv)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(txt)
    print(txt, end="")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--jobs", type=int, help="max concurrent grid lanes")
    p.add_argument("--out", help="output directory (or file for fold/bench)")


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", help="comma-separated learning-rate grid")
    p.add_argument("--decay", help="comma-separated decay schemes")
    p.add_argument("--dropout", help="comma-separated dropout grid")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--grid-seed", type=int)
    p.add_argument("--seeds", help="comma-separated restart seeds")
    p.add_argument("--hidden", type=int, help="hidden layer width")
    p.add_argument("--classes", type=int, help="number of classes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embdistill",
        description="Distill task knowledge from large word embeddings into small ones.",
    )
    parser.add_argument("--version", action="version", version=f"embdistill {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="parse tree files and cache vocab/splits")
    p.add_argument("--train")
    p.add_argument("--valid")
    p.add_argument("--test")
    p.add_argument("--mode", choices=(ALL_PHRASES, SENTENCE_ONLY))
    p.add_argument("--lowercase", action="store_const", const=True)
    _add_common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("teacher", help="train the large-scale teacher model")
    p.add_argument("--data")
    p.add_argument("--embeddings")
    p.add_argument("--lr")
    p.add_argument("--decay")
    p.add_argument("--dropout")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--classes", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_teacher)

    p = sub.add_parser("soft-targets", help="cache teacher distributions for training")
    p.add_argument("--data")
    p.add_argument("--teacher")
    p.add_argument("--temperature", type=float)
    p.add_argument("--sentences-only", action="store_const", const=True)
    _add_common(p)
    p.set_defaults(func=cmd_soft_targets)

    p = sub.add_parser("train", help="run a small-model regime (direct or matching-softmax)")
    p.add_argument("--data")
    p.add_argument("--regime", choices=("direct", "matching-softmax"))
    p.add_argument("--embeddings", help="small pretrained vectors")
    p.add_argument("--embed-dim", type=int, help="random-vector width when no file")
    p.add_argument("--init-scale", type=float)
    p.add_argument("--soft-targets", help="cache from the soft-targets command")
    p.add_argument("--temperature", type=float)
    p.add_argument("--sentences-only", action="store_const", const=True)
    _add_protocol_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("distill", help="run the encoding regime on large embeddings")
    p.add_argument("--data")
    p.add_argument("--embeddings", help="large pretrained vectors")
    p.add_argument("--distill-dim", type=int)
    p.add_argument("--init-scale", type=float)
    _add_protocol_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("fold", help="bake a model's encoder into a small table")
    p.add_argument("--model")
    _add_common(p)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("eval", help="accuracy of a saved model on a split")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--split", choices=tuple(_SPLIT_FILES))
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="relative inference time of two saved models")
    p.add_argument("--large")
    p.add_argument("--small")
    p.add_argument("--data")
    p.add_argument("--split", choices=tuple(_SPLIT_FILES))
    p.add_argument("--reps", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="emit the regime comparison report")
    p.add_argument("--results", nargs="+", help="result.json files, one per regime")
    p.add_argument("--bench", help="bench output for the relative-time row")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = _load_config_file(args.config) if getattr(args, "config", None) else {}
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
