"""Training loop, strike-based early stopping, evaluation, and sweeps.

Training runs full epochs of per-sequence updates in a seed-shuffled order.
After each epoch the validation NLL is compared against the best seen so far;
every epoch that exceeds it costs a strike, and training stops when the
strikes are used up (default three). The parameters of the best validation
epoch are restored before the single test evaluation.
"""

from __future__ import annotations

import gc
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .datagen import Corpus
from .model import sequence_nll
from .modules import ConfigError, ModelConfig, ParamStore, init_params
from .optim import Adam

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "RunRecord",
    "TrainingDiverged",
    "EarlyStopper",
    "apply_strike_rule",
    "train",
    "evaluate_params",
    "sweep",
]


@dataclass
class TrainConfig:
    model: ModelConfig
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_strikes: int = 3
    epoch_cap: int = 200
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.max_strikes < 1:
            raise ConfigError("max_strikes must be >= 1")
        if self.epoch_cap < 1:
            raise ConfigError("epoch_cap must be >= 1")

    def to_kv(self) -> dict:
        kv = {k: v for k, v in self.model.to_dict().items() if v is not None}
        kv.update(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
                  max_strikes=self.max_strikes, epoch_cap=self.epoch_cap,
                  seed=self.seed)
        return kv


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    valid_nll: float
    strikes: int
    seconds: float


@dataclass
class RunRecord:
    config: TrainConfig
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_valid_nll: float = math.inf
    test_nll: float | None = None
    test_stderr: float | None = None
    best_params: dict | None = None
    checkpoint_path: str | None = None

    def median_epoch_seconds(self) -> float:
        return float(np.median([e.seconds for e in self.epochs]))

    def write_epochs(self, path):
        with open(path, "w") as fh:
            fh.write("# epoch train_nll valid_nll strikes seconds\n")
            for e in self.epochs:
                fh.write(f"{e.epoch} {e.train_nll:.6f} {e.valid_nll:.6f} "
                         f"{e.strikes} {e.seconds:.3f}\n")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, seq_index: int, sequence):
        super().__init__(
            f"non-finite loss at epoch {epoch}, sequence {seq_index}: {sequence}")
        self.epoch = epoch
        self.seq_index = seq_index
        self.sequence = sequence


class EarlyStopper:
    """Counts epochs whose validation NLL exceeds the best seen so far."""

    def __init__(self, max_strikes: int):
        self.max_strikes = max_strikes
        self.best = math.inf
        self.best_epoch = -1
        self.strikes = 0

    def update(self, valid_nll: float, epoch: int):
        """Record one epoch; returns (stop, improved)."""
        improved = valid_nll < self.best
        if improved:
            self.best = valid_nll
            self.best_epoch = epoch
        elif valid_nll > self.best:
            self.strikes += 1
        return self.strikes >= self.max_strikes, improved


def apply_strike_rule(valid_nlls, max_strikes: int = 3):
    """Pure form of the stopping rule: returns (best_index, stop_index,
    strikes_after_each_epoch), indices 0-based into valid_nlls; stop_index is
    the last epoch run (len-1 if the budget never ran out)."""
    stopper = EarlyStopper(max_strikes)
    strikes = []
    for idx, nll in enumerate(valid_nlls):
        stop, _ = stopper.update(nll, idx)
        strikes.append(stopper.strikes)
        if stop:
            return stopper.best_epoch, idx, strikes
    return stopper.best_epoch, len(valid_nlls) - 1, strikes


def evaluate_params(params: ParamStore, corpus: Corpus):
    """Mean NLL in nats per symbol (position-count weighted) and the standard
    error across sequences (0 for a single sequence)."""
    if corpus.alphabet_size != params.cfg.alphabet_size:
        raise ConfigError(
            f"corpus alphabet {corpus.alphabet_size} != model alphabet "
            f"{params.cfg.alphabet_size}")
    total = 0.0
    count = 0
    per_seq = []
    for seq in corpus.sequences:
        nll = float(sequence_nll(seq, params).data)
        per_seq.append(nll)
        total += nll * len(seq)
        count += len(seq)
    mean = total / count
    stderr = 0.0
    if len(per_seq) > 1:
        stderr = float(np.std(per_seq, ddof=1) / math.sqrt(len(per_seq)))
    return mean, stderr


def train(config: TrainConfig, splits: dict[str, Corpus],
          on_epoch=None) -> RunRecord:
    """Full training run on {train, valid, test} splits; the returned record
    holds the per-epoch history and a snapshot of the best parameters."""
    for name in ("train", "valid", "test"):
        if name not in splits:
            raise ConfigError(f"missing split {name!r}")
    params = init_params(config.model, seed=config.seed)
    opt = Adam(params.tensors, lr=config.lr, beta1=config.beta1,
               beta2=config.beta2, eps=config.eps)
    rng = np.random.default_rng(config.seed)
    stopper = EarlyStopper(config.max_strikes)
    record = RunRecord(config=config)
    train_seqs = splits["train"].sequences

    # tapes allocate heavily and hold no reference cycles
    gc_was_on = gc.isenabled()
    gc.disable()
    try:
        _train_epochs(config, splits, params, opt, rng, stopper, record,
                      train_seqs, on_epoch)
    finally:
        if gc_was_on:
            gc.enable()

    record.best_epoch = stopper.best_epoch
    record.best_valid_nll = stopper.best
    params.load_data(record.best_params)
    record.test_nll, record.test_stderr = evaluate_params(params, splits["test"])
    return record


def _train_epochs(config, splits, params, opt, rng, stopper, record,
                  train_seqs, on_epoch):
    for epoch in range(1, config.epoch_cap + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_seqs))
        loss_sum = 0.0
        sym_count = 0
        for seq_index in order:
            seq = train_seqs[seq_index]
            with Tape() as tape:
                loss = sequence_nll(seq, params)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise TrainingDiverged(epoch, int(seq_index), seq)
                tape.backward(loss)
            opt.step()
            loss_sum += value * len(seq)
            sym_count += len(seq)
        valid_nll, _ = evaluate_params(params, splits["valid"])
        seconds = time.perf_counter() - t0
        stop, improved = stopper.update(valid_nll, epoch)
        if improved:
            record.best_params = params.clone_data()
        record.epochs.append(EpochRecord(epoch, loss_sum / sym_count,
                                         valid_nll, stopper.strikes, seconds))
        if on_epoch is not None:
            on_epoch(record.epochs[-1])
        if stop:
            break


def _run_entry(args):
    config, splits = args
    return train(config, splits)


def sweep(configs: list[TrainConfig], splits: dict[str, Corpus], workers: int = 1):
    """Train every config; pick the best per model kind strictly by validation
    NLL (ties: earliest config). Returns (best per kind, all records,
    boundary warnings)."""
    if not configs:
        raise ConfigError("sweep needs at least one config")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_entry, [(c, splits) for c in configs]))
    else:
        records = [train(c, splits) for c in configs]

    best: dict[str, RunRecord] = {}
    for rec in records:
        kind = rec.config.model.kind
        cur = best.get(kind)
        if cur is None or rec.best_valid_nll < cur.best_valid_nll:
            best[kind] = rec

    warnings = []
    for kind, rec in best.items():
        group = [r.config for r in records if r.config.model.kind == kind]
        for axis, get in (("dim", lambda c: c.model.dim),
                          ("lstm_layers", lambda c: c.model.lstm_layers),
                          ("n_priority", lambda c: c.model.n_priority)):
            values = sorted({get(c) for c in group if get(c) is not None})
            if len(values) > 1 and get(rec.config) in (values[0], values[-1]):
                warnings.append(
                    f"{kind}: best {axis}={get(rec.config)} sits on the sweep "
                    f"boundary {values[0]}..{values[-1]}")
    return best, records, warnings
