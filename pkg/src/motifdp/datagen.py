"""Synthetic sequence processes, generation schemes, and corpus file I/O.

Two base processes over the alphabet {0..11}: independent uniform draws, and a
Markov chain whose initial and transition probabilities are drawn uniformly at
random (flat Dirichlet rows). Five schemes shape the draws into sequences:

  plain      length-12 draw straight from the process
  loop       a length-4 motif repeated three times
  shiftloop  like loop, but repetitions two and three are shifted by integers
             drawn uniformly from {0..11}; values are not wrapped, so the
             alphabet widens to {0..22}
  noiseloop  loop, then each element replaced with a uniform draw w.p. 0.15
  editloop   loop, then each element w.p. 0.15 either deleted or followed by
             an inserted uniform draw (half/half)

Everything is a pure function of (process kind, scheme, seed, split): the same
arguments always reproduce the same corpus, and the three splits of one seed
use the same process parameters but independent draw streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BASE_ALPHABET = 12
MOTIF_LEN = 4
REPEATS = 3
NOISE_P = 0.15
PROCESSES = ("uniform", "markov")
SCHEMES = ("plain", "loop", "shiftloop", "noiseloop", "editloop")
SPLITS = ("train", "valid", "test")


class CorpusFormatError(ValueError):
    pass


@dataclass
class ToyProcess:
    kind: str
    initial: np.ndarray | None = None
    transition: np.ndarray | None = None

    def draw(self, rng: np.random.Generator, length: int) -> list[int]:
        if self.kind == "uniform":
            return rng.integers(0, BASE_ALPHABET, size=length).tolist()
        seq = [int(rng.choice(BASE_ALPHABET, p=self.initial))]
        for _ in range(length - 1):
            seq.append(int(rng.choice(BASE_ALPHABET, p=self.transition[seq[-1]])))
        return seq


@dataclass
class Corpus:
    sequences: list
    alphabet_size: int
    split: str = "train"
    seed: int | None = None


def alphabet_for(scheme: str) -> int:
    # shifts reach 11 + 11 without wrapping
    return 2 * BASE_ALPHABET - 1 if scheme == "shiftloop" else BASE_ALPHABET


def make_process(kind: str, rng: np.random.Generator) -> ToyProcess:
    if kind == "uniform":
        return ToyProcess("uniform")
    if kind == "markov":
        initial = rng.dirichlet(np.ones(BASE_ALPHABET))
        transition = rng.dirichlet(np.ones(BASE_ALPHABET), size=BASE_ALPHABET)
        return ToyProcess("markov", initial, transition)
    raise ValueError(f"unknown process {kind!r}")


def _apply_scheme(process: ToyProcess, scheme: str, rng: np.random.Generator) -> list[int]:
    if scheme == "plain":
        return process.draw(rng, MOTIF_LEN * REPEATS)
    motif = process.draw(rng, MOTIF_LEN)
    if scheme == "loop":
        return motif * REPEATS
    if scheme == "shiftloop":
        out = list(motif)
        for _ in range(REPEATS - 1):
            shift = int(rng.integers(0, BASE_ALPHABET))
            out.extend(m + shift for m in motif)
        return out
    if scheme == "noiseloop":
        out = motif * REPEATS
        for idx in range(len(out)):
            if rng.random() < NOISE_P:
                out[idx] = int(rng.integers(0, BASE_ALPHABET))
        return out
    if scheme == "editloop":
        out = []
        for s in motif * REPEATS:
            if rng.random() < NOISE_P:
                if rng.random() < 0.5:
                    continue  # delete s
                out.append(s)
                out.append(int(rng.integers(0, BASE_ALPHABET)))
            else:
                out.append(s)
        return out
    raise ValueError(f"unknown scheme {scheme!r}")


def gen(process_kind: str, scheme: str, n: int, seed: int,
        split: str = "train") -> Corpus:
    """Generate n sequences for one replicate seed and split.

    The process parameters come from a stream shared by all splits of the
    seed; each split then draws sequences from its own independent stream.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if process_kind not in PROCESSES:
        raise ValueError(f"unknown process {process_kind!r}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    master = np.random.SeedSequence(seed)
    param_ss, *split_ss = master.spawn(1 + len(SPLITS))
    process = make_process(process_kind, np.random.default_rng(param_ss))
    rng = np.random.default_rng(split_ss[SPLITS.index(split)])
    seqs = [_apply_scheme(process, scheme, rng) for _ in range(n)]
    # editloop can, rarely, delete everything; redraw those
    while any(len(s) == 0 for s in seqs):
        seqs = [s if len(s) > 0 else _apply_scheme(process, scheme, rng) for s in seqs]
    return Corpus(seqs, alphabet_for(scheme), split=split, seed=seed)


def gen_splits(process_kind: str, scheme: str, n: int, seed: int) -> dict[str, Corpus]:
    return {split: gen(process_kind, scheme, n, seed, split) for split in SPLITS}


def write_corpus(corpus: Corpus, path):
    with open(path, "w") as fh:
        fh.write(f"#alphabet {corpus.alphabet_size}\n")
        for seq in corpus.sequences:
            fh.write(" ".join(str(s) for s in seq) + "\n")


def read_corpus(path, split: str = "train") -> Corpus:
    numbered = []
    alphabet_size = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#alphabet"):
                try:
                    alphabet_size = int(line.split()[1])
                except (IndexError, ValueError):
                    raise CorpusFormatError(f"{path}:{lineno}: bad alphabet header")
                continue
            if line.startswith("#"):
                continue
            try:
                seq = [int(tok) for tok in line.split()]
            except ValueError:
                raise CorpusFormatError(f"{path}:{lineno}: non-integer symbol")
            numbered.append((lineno, seq))
    if alphabet_size is None:
        raise CorpusFormatError(f"{path}: missing '#alphabet N' header")
    if not numbered:
        raise CorpusFormatError(f"{path}: no sequences")
    for lineno, seq in numbered:
        for s in seq:
            if not 0 <= s < alphabet_size:
                raise CorpusFormatError(
                    f"{path}:{lineno}: symbol {s} outside alphabet of {alphabet_size}")
    return Corpus([seq for _, seq in numbered], alphabet_size, split=split)
