"""Command-line surface: data generation, training, evaluation, sampling,
alignment heatmaps, the pruning benchmark, and reference-DP printouts.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datagen, reference_dp
from .checkpoint import CheckpointError
from .config import (load_model_config, model_config_kv, read_kv_file,
                     split_config, write_kv_file)
from .datagen import CorpusFormatError, read_corpus, write_corpus
from .edit_tree import tree_forward, tree_stats
from .model import alignment_matrix, forward_probs, predictive_distributions
from .modules import ConfigError, ModelConfig, ParamStore, init_params
from .training import (TrainConfig, TrainingDiverged, evaluate_params, sweep,
                       train)

USAGE_ERRORS = (ConfigError, CorpusFormatError, CheckpointError)


def save_model(params: ParamStore, path: Path):
    params.save(path)
    write_kv_file(str(path) + ".cfg", model_config_kv(params.cfg))


def load_model(path: Path) -> ParamStore:
    cfg = load_model_config(str(path) + ".cfg")
    params = init_params(cfg, seed=0)
    params.load(path)
    return params


def write_pgm(path, gray: np.ndarray):
    """8-bit binary PGM from values in [0, 1]."""
    h, w = gray.shape
    data = np.clip(np.round(gray * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _resolved_model_config(args, alphabet_size: int) -> tuple[ModelConfig, dict]:
    """defaults < config file < command-line flags, all recorded."""
    model_kwargs: dict = {}
    train_kwargs: dict = {}
    if args.config:
        m, t = split_config(read_kv_file(args.config))
        model_kwargs.update(m)
        train_kwargs.update(t)
    for name in ("kind", "dim", "n_out", "alpha", "delta", "lstm_layers",
                 "soft_select", "decoupled_scorer", "backend", "k_max",
                 "d_max", "n_priority", "soft_temperature"):
        v = getattr(args, name.replace("-", "_"), None)
        if v is not None:
            model_kwargs[name] = v
    for name in ("lr", "max_strikes", "epoch_cap", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            train_kwargs[name] = v
    model_kwargs["alphabet_size"] = alphabet_size
    return ModelConfig(**model_kwargs), train_kwargs


def _load_splits(args):
    return {
        "train": read_corpus(args.train, "train"),
        "valid": read_corpus(args.valid, "valid"),
        "test": read_corpus(args.test, "test"),
    }


def _parse_int_list(raw: str, allow_inf: bool = False):
    out = []
    for tok in raw.split(","):
        tok = tok.strip()
        if allow_inf and tok in ("inf", "none"):
            out.append(None)
        else:
            out.append(int(tok))
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args):
    corpus = datagen.gen(args.process, args.scheme, args.n, args.seed, args.split)
    write_corpus(corpus, args.out)
    write_kv_file(str(args.out) + ".cfg", {
        "process": args.process, "scheme": args.scheme, "n": args.n,
        "seed": args.seed, "split": args.split,
        "alphabet_size": corpus.alphabet_size,
    })
    print(f"wrote {len(corpus.sequences)} sequences to {args.out}")
    return 0


def cmd_train(args):
    splits = _load_splits(args)
    cfg, train_kwargs = _resolved_model_config(args, splits["train"].alphabet_size)
    tc = TrainConfig(model=cfg, **train_kwargs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_kv_file(out / "config.txt", tc.to_kv())

    def show(e):
        print(f"epoch {e.epoch:3d}  train {e.train_nll:.4f}  "
              f"valid {e.valid_nll:.4f}  strikes {e.strikes}  {e.seconds:.1f}s")

    record = train(tc, splits, on_epoch=show if not args.quiet else None)
    record.write_epochs(out / "epochs.txt")
    params = init_params(cfg, seed=tc.seed)
    params.load_data(record.best_params)
    save_model(params, out / "model.ckpt")
    print(f"best epoch {record.best_epoch}  valid {record.best_valid_nll:.4f}  "
          f"test {record.test_nll:.4f} ± {record.test_stderr:.4f} nats/symbol")
    return 0


def cmd_eval(args):
    params = load_model(Path(args.checkpoint))
    corpus = read_corpus(args.corpus, "test")
    mean, stderr = evaluate_params(params, corpus)
    print(f"nll {mean:.6f} ± {stderr:.6f} nats/symbol over "
          f"{len(corpus.sequences)} sequences")
    return 0


def cmd_sweep(args):
    splits = _load_splits(args)
    alphabet = splits["train"].alphabet_size
    base_model, train_kwargs = _resolved_model_config(args, alphabet)
    kinds = [k.strip() for k in args.kinds.split(",")]
    dims = _parse_int_list(args.dims)
    layer_set = _parse_int_list(args.layers)
    configs = []
    for kind in kinds:
        for dim in dims:
            if kind in ("lstm", "motifnet+lstm"):
                for layers in layer_set:
                    m = replace(base_model, kind=kind, dim=dim, n_out=None,
                                lstm_hidden=None, lstm_layers=layers)
                    configs.append(TrainConfig(model=m, label=f"{kind}-d{dim}-l{layers}",
                                               **train_kwargs))
            else:
                m = replace(base_model, kind=kind, dim=dim, n_out=None,
                            lstm_hidden=None)
                configs.append(TrainConfig(model=m, label=f"{kind}-d{dim}",
                                           **train_kwargs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_kv_file(out / "config.txt", {**train_kwargs, "kinds": args.kinds,
                                       "dims": args.dims, "layers": args.layers,
                                       "workers": args.workers})
    best, records, warnings = sweep(configs, splits, workers=args.workers)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "kind", "dim", "lstm_layers", "best_epoch",
                    "valid_nll", "test_nll", "test_stderr", "selected"])
        for rec in records:
            sel = best[rec.config.model.kind] is rec
            w.writerow([rec.config.label, rec.config.model.kind,
                        rec.config.model.dim, rec.config.model.lstm_layers,
                        rec.best_epoch, f"{rec.best_valid_nll:.6f}",
                        f"{rec.test_nll:.6f}" if sel else "",
                        f"{rec.test_stderr:.6f}" if sel else "",
                        int(sel)])
    for kind, rec in sorted(best.items()):
        params = init_params(rec.config.model, seed=rec.config.seed)
        params.load_data(rec.best_params)
        save_model(params, out / f"best_{kind.replace('+', '_')}.ckpt")
        print(f"{kind}: {rec.config.label}  valid {rec.best_valid_nll:.4f}  "
              f"test {rec.test_nll:.4f} ± {rec.test_stderr:.4f}")
    for msg in warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return 0


def cmd_sample(args):
    if args.length < 1:
        raise ConfigError("length must be >= 1")
    params = load_model(Path(args.checkpoint))
    rng = np.random.default_rng(args.seed)
    seq: list[int] = []
    for _ in range(args.length):
        probs = predictive_distributions(seq, params, include_final=True)[-1]
        probs = probs / probs.sum()
        seq.append(int(rng.choice(params.cfg.alphabet_size, p=probs)))
    line = " ".join(str(s) for s in seq)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"#alphabet {params.cfg.alphabet_size}\n{line}\n")
    print(line)
    return 0


def cmd_viz_align(args):
    params = load_model(Path(args.checkpoint))
    seq = [int(tok) for tok in args.sequence.split()]
    fc = forward_probs(seq, params, include_final=True)
    m = alignment_matrix(fc, len(seq))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(str(out) + ".csv", m, delimiter=",", fmt="%.6f")
    write_pgm(str(out) + ".pgm", m)
    write_kv_file(str(out) + ".cfg", {"checkpoint": args.checkpoint,
                                      "sequence": args.sequence})
    print(f"wrote {out}.csv and {out}.pgm ({len(seq)}x{len(seq)})")
    return 0


def cmd_bench(args):
    params = load_model(Path(args.checkpoint))
    corpus = read_corpus(args.corpus, "test")
    if corpus.alphabet_size != params.cfg.alphabet_size:
        raise ConfigError("corpus alphabet does not match checkpoint")
    priorities = _parse_int_list(args.n_priorities, allow_inf=True)
    if not priorities:
        raise ConfigError("need at least one n_priority value")
    rows = []
    for np_val in priorities:
        cfg = replace(params.cfg, backend="tree", n_priority=np_val,
                      d_max=args.d_max if args.d_max else params.cfg.d_max,
                      soft_select=False)
        p2 = init_params(cfg, seed=0)
        p2.load_data(params.clone_data())
        times = []
        nodes = 0
        mean = 0.0
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            mean, _err = evaluate_params(p2, corpus)
            times.append(time.perf_counter() - t0)
        for seq in corpus.sequences:
            tree, _cells, _fc = tree_forward(seq, p2)
            nodes += tree_stats(tree)["node_count"]
        label = "inf" if np_val is None else str(np_val)
        rows.append((label, mean, float(np.median(times)), nodes))
    print(f"{'n_priority':>10}  {'test_nll':>10}  {'median_s':>9}  {'nodes':>8}")
    for label, mean, med, nodes in rows:
        print(f"{label:>10}  {mean:10.6f}  {med:9.3f}  {nodes:8d}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n_priority", "test_nll", "median_seconds", "node_count"])
            w.writerows(rows)
    return 0


def cmd_dp(args):
    costs = reference_dp.unit_costs()
    pattern = args.pattern
    text = args.text
    table = reference_dp.sellers_matrix(pattern, text, costs)
    labels = ["-"] + [str(t) for t in text]
    print("    " + " ".join(f"{c:>3}" for c in labels))
    for i, row in enumerate(table):
        tag = "-" if i == 0 else str(pattern[i - 1])
        print(f"{tag:>3} " + " ".join(f"{v:>3}" for v in row))
    print(f"edit distance: {reference_dp.edit_distance(pattern, text, costs)}")
    return 0


# ---------------------------------------------------------------------------


def _add_model_flags(p):
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--kind", choices=("lstm", "motifnet", "motifnet+lstm"))
    p.add_argument("--dim", type=int)
    p.add_argument("--n-out", dest="n_out", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--lstm-layers", dest="lstm_layers", type=int)
    p.add_argument("--soft-select", dest="soft_select", action="store_const", const=True)
    p.add_argument("--soft-temperature", dest="soft_temperature", type=float)
    p.add_argument("--decoupled-scorer", dest="decoupled_scorer",
                   action="store_const", const=True)
    p.add_argument("--backend", choices=("dense", "tree"))
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--d-max", dest="d_max", type=int)
    p.add_argument("--n-priority", dest="n_priority", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-strikes", dest="max_strikes", type=int)
    p.add_argument("--epoch-cap", dest="epoch_cap", type=int)
    p.add_argument("--seed", type=int)


def _add_split_flags(p):
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--test", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="motifdp",
                                 description="sequence modeling by learned "
                                             "self-alignment")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a toy corpus")
    p.add_argument("--process", required=True, choices=datagen.PROCESSES)
    p.add_argument("--scheme", required=True, choices=datagen.SCHEMES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--split", default="train", choices=datagen.SPLITS)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train one model")
    _add_split_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="train a config grid, select by validation")
    _add_split_flags(p)
    _add_model_flags(p)
    p.add_argument("--kinds", default="motifnet,lstm")
    p.add_argument("--dims", default="16")
    p.add_argument("--layers", default="1")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("sample", help="ancestral sampling from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("viz-align", help="alignment heatmap (CSV and PGM)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sequence", required=True,
                   help="space-separated symbols, e.g. '0 1 5 10'")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(fn=cmd_viz_align)

    p = sub.add_parser("bench", help="speed/accuracy table over n_priority")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--n-priorities", dest="n_priorities", required=True,
                   help="comma list, 'inf' allowed")
    p.add_argument("--d-max", dest="d_max", type=int, default=None)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("dp", help="print the reference suffix-match table")
    p.add_argument("--pattern", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(fn=cmd_dp)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
