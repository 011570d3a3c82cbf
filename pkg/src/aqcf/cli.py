"""Command-line entry points: train, eval, diagnose-plateau, encode."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import warnings
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import checkpoint as ckpt, config as config_mod, data as data_mod, training
from .errors import AqcfError, InvalidInputError
from .fusion import quantum_utilization
from .model import AqcfModel, ModelConfig


def classification_metrics(y_true: Sequence[int], y_pred: Sequence[int],
                           num_classes: int) -> Dict[str, float]:
    """Accuracy plus macro-averaged precision/recall/F1.

    Classes absent from both truth and prediction contribute 0 to the macro
    averages (with a warning) rather than being dropped.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise InvalidInputError("metrics need equal-length non-empty label arrays")
    precisions, recalls, f1s = [], [], []
    for c in range(num_classes):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        if tp + fp + fn == 0:
            warnings.warn(f"class {c} absent from both truth and predictions")
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return {
        "accuracy": float(np.mean(y_true == y_pred)),
        "precision_macro": float(np.mean(precisions)),
        "recall_macro": float(np.mean(recalls)),
        "f1_macro": float(np.mean(f1s)),
    }


def _evaluate(model: AqcfModel, examples) -> Tuple[Dict[str, float], List[float]]:
    y_true, y_pred, lambdas = [], [], []
    for ids, label in examples:
        logits, trace = model.forward(ids, mode="infer")
        y_true.append(label)
        y_pred.append(int(np.argmax(logits.data)))
        lambdas.append(trace.lam)
    return classification_metrics(y_true, y_pred, model.cfg.num_classes), lambdas


def _apply_threads(threads: int):
    if threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def _resolve_common(args, cfg: Optional[config_mod.RunConfig]):
    """Fold global flags and AQCF_THREADS into the run configuration."""
    if cfg is None:
        cfg = config_mod.RunConfig()
    if args.seed is not None:
        cfg.training.seed = args.seed
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if args.threads is not None:
        cfg.threads = args.threads
    env_threads = os.environ.get("AQCF_THREADS")
    if env_threads:
        try:
            cfg.threads = int(env_threads)
        except ValueError:
            raise InvalidInputError(f"AQCF_THREADS={env_threads!r} is not an integer")
    _apply_threads(cfg.threads)
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg


def _split_eval(examples, fraction: float, seed: int):
    if not 0.0 < fraction < 1.0:
        raise InvalidInputError("eval_fraction must lie strictly between 0 and 1")
    order = np.random.default_rng(seed).permutation(len(examples))
    n_eval = max(1, int(round(fraction * len(examples))))
    if n_eval >= len(examples):
        raise InvalidInputError("eval split would consume the whole training set")
    eval_idx = set(order[:n_eval].tolist())
    train_part = [examples[i] for i in range(len(examples)) if i not in eval_idx]
    eval_part = [examples[i] for i in sorted(eval_idx)]
    return train_part, eval_part


def _save(path: str, model: AqcfModel, vocab, epoch: int, step: int, seed: int):
    meta = {"vocab": vocab, "init_seed": seed, "epoch": epoch, "step": step}
    ckpt.save_checkpoint(path, model, meta)


def cmd_train(args) -> int:
    cfg = _resolve_common(args, config_mod.parse_config(args.config))
    if not cfg.data.train_path:
        raise InvalidInputError("[data] train_path is required for training")

    num_classes = cfg.model.num_classes
    train_rows = data_mod.read_labeled_csv(cfg.data.train_path, num_classes)
    vocab = data_mod.build_vocab(train_rows, cfg.data.min_count)
    model_cfg = ModelConfig(**config_mod.model_config_kwargs(cfg.model, len(vocab)))
    cfg.model.vocab_size = model_cfg.vocab_size
    config_mod.write_effective_config(cfg, os.path.join(cfg.output_dir, "config.ini"))

    encoded_train = data_mod.encode_dataset(
        train_rows, vocab, model_cfg.max_seq_len, model_cfg.truncate_overlong)
    if cfg.data.eval_path:
        eval_rows = data_mod.read_labeled_csv(cfg.data.eval_path, num_classes)
        encoded_eval = data_mod.encode_dataset(
            eval_rows, vocab, model_cfg.max_seq_len, model_cfg.truncate_overlong)
    else:
        encoded_train, encoded_eval = _split_eval(
            encoded_train, cfg.data.eval_fraction, cfg.training.seed)

    seed = cfg.training.seed
    model = AqcfModel(model_cfg, seed=seed)
    metrics_path = os.path.join(cfg.output_dir, "metrics.jsonl")
    final_path = os.path.join(cfg.output_dir, "checkpoint.aqcf")
    state = {"step": 0}

    with open(metrics_path, "w", encoding="utf-8") as metrics_fh:
        if cfg.training.epochs == 0:
            _save(final_path, model, vocab, 0, 0, seed)
        else:
            def on_step(record: training.StepRecord):
                metrics_fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                metrics_fh.flush()
                state["step"] = record.step + 1

            def on_epoch(epoch: int):
                path = os.path.join(cfg.output_dir, f"checkpoint_epoch{epoch:03d}.aqcf")
                _save(path, model, vocab, epoch + 1, state["step"], seed)
                _save(final_path, model, vocab, epoch + 1, state["step"], seed)

            try:
                training.train(model, encoded_train, cfg.training,
                               on_step=on_step, on_epoch=on_epoch)
            except InvalidInputError as exc:
                print(f"error: training aborted: {exc}", file=sys.stderr)
                print(f"last good checkpoint: {final_path}" if os.path.exists(final_path)
                      else "no checkpoint was completed", file=sys.stderr)
                return 1

    if cfg.training.epochs > 0:
        model, meta, _ = ckpt.load_checkpoint(final_path)  # evaluate what was saved
    metrics, lambdas = _evaluate(model, encoded_eval)
    mean_lam, frac_quantum = quantum_utilization(lambdas)
    summary = dict(metrics, mean_lambda=mean_lam, quantum_fraction=frac_quantum,
                   n_train=len(encoded_train), n_eval=len(encoded_eval),
                   epochs=cfg.training.epochs, seed=seed,
                   parameters=model.count_parameters())
    with open(os.path.join(cfg.output_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_common(args, None)
    model, meta, _ = ckpt.load_checkpoint(args.checkpoint)
    vocab = meta.get("vocab")
    if not vocab:
        raise InvalidInputError("checkpoint metadata lacks a vocabulary")
    rows = data_mod.read_labeled_csv(args.data, model.cfg.num_classes)
    examples = data_mod.encode_dataset(rows, vocab, model.cfg.max_seq_len,
                                       model.cfg.truncate_overlong)
    metrics, lambdas = _evaluate(model, examples)
    mean_lam, frac_quantum = quantum_utilization(lambdas)
    result = dict(metrics, mean_lambda=mean_lam, quantum_fraction=frac_quantum,
                  n_examples=len(examples), checkpoint=args.checkpoint)
    with open(os.path.join(cfg.output_dir, "eval.json"), "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_diagnose_plateau(args) -> int:
    base = config_mod.parse_config(args.config) if args.config else None
    cfg = _resolve_common(args, base)
    rng = np.random.default_rng(cfg.training.seed)
    cells = training.plateau_diagnostic(cfg.plateau.n_qubits, cfg.plateau.depths,
                                        cfg.plateau.samples, rng)
    lines = ["n_qubits,depth,samples,grad_variance"]
    for cell in cells:
        var = "skipped" if cell.grad_variance is None else repr(cell.grad_variance)
        lines.append(f"{cell.n_qubits},{cell.depth},{cell.samples},{var}")
    path = os.path.join(cfg.output_dir, "plateau.csv")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
    print(f"wrote {len(cells)} cells to {path}")
    return 0


def cmd_encode(args) -> int:
    _resolve_common(args, None)
    model, meta, _ = ckpt.load_checkpoint(args.checkpoint)
    vocab = meta.get("vocab")
    if not vocab:
        raise InvalidInputError("checkpoint metadata lacks a vocabulary")
    ids = data_mod.tokenize(args.text, vocab, model.cfg.max_seq_len,
                            model.cfg.truncate_overlong)
    if ids.size == 0:
        raise InvalidInputError("input text produced no tokens")
    logits, trace = model.forward(ids, mode="infer")
    out = {
        "token_ids": ids.tolist(),
        "expectations": trace.quantum_outputs.data.tolist(),
        "depths": trace.depths,
        "lambda": trace.lam,
        "logits": logits.data.tolist(),
        "prediction": int(np.argmax(logits.data)),
    }
    print(json.dumps(out, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqcf",
                                     description="adaptive quantum-classical fusion")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output-dir", default=None)
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap (AQCF_THREADS overrides)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the staged training protocol")
    p_train.add_argument("--config", required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a CSV file")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_plat = sub.add_parser("diagnose-plateau",
                            help="gradient-variance scan over circuit sizes")
    p_plat.add_argument("--config", default=None)
    p_plat.set_defaults(func=cmd_diagnose_plateau)

    p_enc = sub.add_parser("encode", help="quantum-encode a text with a checkpoint")
    p_enc.add_argument("--text", required=True)
    p_enc.add_argument("--checkpoint", required=True)
    p_enc.set_defaults(func=cmd_encode)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AqcfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
