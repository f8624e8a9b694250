"""The full sequence model: exact cubic-time distance tensor, attention-style
forecast over (position, suffix-length) cells, and per-symbol NLL.

The distance recursion fills D(i,j,k) for 1 <= j <= i <= n and
1 <= k <= min(i, k_max). The k=1 base folds a substitution cost into the
learned start distance; deeper cells pick, by scored arg-max, among up to
three candidates built from already-computed cells (delete the suffix symbol,
substitute, delete the earlier symbol). A candidate exists only when its
source cell does. The soft variant replaces the arg-max with a softmax
mixture, which makes every candidate differentiable but rules out the tree
shortcut.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .modules import (
    ConfigError,
    CostTable,
    GruKernel,
    ParamStore,
    f_analogy,
    f_forecast,
    lstm_forward,
)

__all__ = [
    "DenseDistance",
    "ForecastContext",
    "NeuralOps",
    "ScalarOps",
    "dense_distance",
    "scalar_config_distance",
    "forecast",
    "forward_probs",
    "sequence_nll",
    "predictive_distributions",
    "alignment_matrix",
    "expected_cell_count",
]

# fixed candidate order; first maximal score wins ties
OP_ORDER = ("down", "diag", "right")


class NeuralOps:
    """Binds the recursion to the learned modules of a parameter store.
    Weight data is pre-bound once per forward pass, off the hot path."""

    __slots__ = ("params", "costs", "d0", "accumulate", "_w_sel")

    def __init__(self, params: ParamStore, costs: CostTable | None = None):
        self.params = params
        self.costs = costs or CostTable(params)
        self.d0 = params["d0"]
        self.accumulate = GruKernel(params).step
        self._w_sel = params["score.w"].data[:, 0]

    def subst(self, a, b):
        return self.costs.subst(a, b)

    def delete(self, s):
        return self.costs.delete(s)

    def select_score(self, data) -> float:
        return float(data @ self._w_sel)


class ScalarOps:
    """Scalar instantiation of the recursion: one-dimensional distances,
    accumulation by addition, costs from a classic cost model, and scoring by
    negated distance (so the arg-max is the minimum). Cross-checks the neural
    driver against the plain reference recursion."""

    __slots__ = ("model", "d0", "_del", "_sub")

    def __init__(self, cost_model, d0: float = 0.0):
        self.model = cost_model
        self.d0 = Tensor(np.array([d0]))
        self._del = {}
        self._sub = {}

    def subst(self, a, b):
        key = (a, b) if a <= b else (b, a)
        t = self._sub.get(key)
        if t is None:
            t = self._sub[key] = Tensor(np.array(
                [self.model.substitute_cost(a, b)], dtype=np.float64))
        return t

    def delete(self, s):
        t = self._del.get(s)
        if t is None:
            t = self._del[s] = Tensor(np.array(
                [self.model.delete_cost(s)], dtype=np.float64))
        return t

    def accumulate(self, d, c):
        return ad.add(d, c)

    def select_score(self, data) -> float:
        return -float(data[0])


@dataclass
class DenseDistance:
    """Distance tensors per cell plus the selection that produced each."""

    n: int
    k_max: int
    cells: dict = field(default_factory=dict)
    selections: dict = field(default_factory=dict)


@dataclass
class ForecastContext:
    """Per-position penultimate vectors, attention weights over cells, and
    predictive distributions. probs[i] is p(s_{i+1} | s_1..s_i)."""

    probs: list
    o_vectors: list
    weights: list  # per position: list of ((i,j,k), weight) or None


def expected_cell_count(n: int, k_max: int | None = None) -> int:
    km = n if k_max is None else min(k_max, n)
    return sum(i * min(i, km) for i in range(1, n + 1))


def _validate_sequence(seq, alphabet_size: int):
    for s in seq:
        if not 0 <= s < alphabet_size:
            raise ConfigError(f"symbol {s} outside alphabet of {alphabet_size}")


def dense_distance(seq, params: ParamStore, costs: CostTable | None = None) -> DenseDistance:
    """Exact distance tensor; every defined cell is evaluated on its own."""
    cfg = params.cfg
    _validate_sequence(seq, cfg.alphabet_size)
    km = len(seq) if cfg.k_max is None else cfg.k_max
    soft_mix = None
    if cfg.soft_select:
        soft_mix = lambda batch, m: _soft_mix(params, batch, m,
                                              1.0 / cfg.soft_temperature)
    return _dense_cells(seq, NeuralOps(params, costs), km, soft_mix)


def scalar_config_distance(seq, cost_model, d0: float = 0.0,
                           k_max: int | None = None) -> DenseDistance:
    """The same dense driver run in the scalar configuration."""
    return _dense_cells(seq, ScalarOps(cost_model, d0),
                        len(seq) if k_max is None else k_max, None)


def _dense_cells(seq, ops, k_max: int, soft_mix) -> DenseDistance:
    n = len(seq)
    if n < 1:
        raise ValueError("sequence must be nonempty")
    km = min(k_max, n)
    out = DenseDistance(n=n, k_max=km)
    cells, sels = out.cells, out.selections

    for i in range(1, n + 1):
        si = seq[i - 1]
        del_i = None
        for k in range(1, min(i, km) + 1):
            if k == 1:
                for j in range(1, i + 1):
                    cells[(i, j, 1)] = ops.accumulate(ops.d0, ops.subst(si, seq[j - 1]))
                    sels[(i, j, 1)] = "base"
                continue
            if del_i is None:
                del_i = ops.delete(si)
            for j in range(1, i + 1):
                cand = []
                if j <= i - 1:
                    cand.append(("down", cells[(i - 1, j, k - 1)], del_i))
                if j >= 2:
                    cand.append(("diag", cells[(i - 1, j - 1, k - 1)], ops.subst(si, seq[j - 1])))
                    cand.append(("right", cells[(i, j - 1, k)], ops.delete(seq[j - 1])))
                if not cand:
                    raise AssertionError(f"cell ({i},{j},{k}) has no candidate")
                if len(cand) == 1:
                    value = ops.accumulate(cand[0][1], cand[0][2])
                    cells[(i, j, k)], sels[(i, j, k)] = value, cand[0][0]
                elif soft_mix is not None:
                    # one batched accumulator call covers every candidate
                    d_src = ad.stack([c[1] for c in cand])
                    c_src = ad.stack([c[2] for c in cand])
                    mixed, pick = soft_mix(ops.accumulate(d_src, c_src), len(cand))
                    cells[(i, j, k)], sels[(i, j, k)] = mixed, cand[pick][0]
                else:
                    values = [ops.accumulate(src, cost) for _, src, cost in cand]
                    best = 0
                    best_score = ops.select_score(values[0].data)
                    for m in range(1, len(values)):
                        sc = ops.select_score(values[m].data)
                        if sc > best_score:
                            best, best_score = m, sc
                    cells[(i, j, k)], sels[(i, j, k)] = values[best], cand[best][0]
    return out


def _soft_mix(params, batch, m, inv_temp):
    scores = ad.reshape(ad.linear(batch, params["score.w"]), (m,))
    if inv_temp != 1.0:
        scores = ad.scale(scores, inv_temp)
    w = ad.softmax(scores)
    return ad.linear(w, batch), int(np.argmax(w.data))


def forecast(seq, cells: dict, params: ParamStore,
             lstm_outputs=None, include_final: bool = False) -> ForecastContext:
    """Attention over cells (i,j,k), j < i: weights are a softmax of the
    scored distances, the penultimate vector is the weighted mean of analogy
    features paired with each earlier continuation s_{j+1}. Positions with no
    usable cell (i < 2, or everything pruned) fall back to a learned initial
    vector. In combined mode the recurrent output is concatenated in front.
    """
    cfg = params.cfg
    n = len(seq)
    km = n if cfg.k_max is None else min(cfg.k_max, n)
    last = n if include_final else n - 1
    probs, o_vecs, weights = [], [], []
    embed = params["embed"]

    for i in range(0, last + 1):
        o_i = None
        if cfg.uses_motif:
            keys = []
            if i >= 2:
                for j in range(1, i):
                    for k in range(1, min(i, km) + 1):
                        if (i, j, k) in cells:
                            keys.append((i, j, k))
            if keys:
                d_mat = ad.stack([cells[key] for key in keys])
                raw = ad.reshape(_fc_score(params, d_mat), (len(keys),))
                w = ad.softmax(raw)
                e_mat = ad.embedding_rows(embed, [seq[key[1]] for key in keys])
                g_mat = f_analogy(params, d_mat, e_mat)
                o_i = ad.linear(w, g_mat)
                weights.append(list(zip(keys, w.data.tolist())))
            else:
                o_i = params["o_init"]
                weights.append(None)
        else:
            weights.append(None)
        o_vecs.append(o_i)

        if cfg.kind == "lstm":
            x = _lstm_at(lstm_outputs, i, cfg)
        elif cfg.kind == "motifnet+lstm":
            x = ad.concat((_lstm_at(lstm_outputs, i, cfg), o_i))
        else:
            x = o_i
        probs.append(f_forecast(params, x))
    return ForecastContext(probs=probs, o_vectors=o_vecs, weights=weights)


def _fc_score(params, d_mat):
    name = "score_fc.w" if params.cfg.decoupled_scorer else "score.w"
    return ad.linear(d_mat, params[name])


def _lstm_at(lstm_outputs, i, cfg):
    if i == 0:
        return Tensor(np.zeros(cfg.lstm_hidden))
    return lstm_outputs[i - 1]


def forward_probs(seq, params: ParamStore, include_final: bool = False) -> ForecastContext:
    """Run the configured model end to end on one sequence. The empty prefix
    is allowed with include_final: it yields the unconditional p(s_1)."""
    cfg = params.cfg
    _validate_sequence(seq, cfg.alphabet_size)
    lstm_outputs = lstm_forward(params, seq) if cfg.uses_lstm else None
    if not cfg.uses_motif or len(seq) == 0:
        return forecast(seq, {}, params, lstm_outputs, include_final)
    if cfg.backend == "tree":
        from .edit_tree import tree_forward

        _, _, fc = tree_forward(seq, params, lstm_outputs=lstm_outputs,
                                include_final=include_final)
        return fc
    dist = dense_distance(seq, params)
    return forecast(seq, dist.cells, params, lstm_outputs, include_final)


def sequence_nll(seq, params: ParamStore) -> Tensor:
    """Mean negative log likelihood of the sequence, nats per symbol."""
    fc = forward_probs(seq, params, include_final=False)
    terms = [ad.nll_pick(fc.probs[i], seq[i]) for i in range(len(seq))]
    if len(terms) == 1:
        return terms[0]
    return ad.scale(ad.add_n(terms), 1.0 / len(terms))


def predictive_distributions(seq, params: ParamStore,
                             include_final: bool = False) -> list[np.ndarray]:
    """Tape-free forward; returns one probability vector per position."""
    fc = forward_probs(seq, params, include_final=include_final)
    return [p.data for p in fc.probs]


def alignment_matrix(fc: ForecastContext, n: int) -> np.ndarray:
    """Self-alignment heatmap M(i,j) = sum_k w_{i,j,k}, each row scaled to a
    max of 1. Rows/cols are 1-based positions stored 0-based; entries with
    j >= i are never computed and stay 0."""
    m = np.zeros((n, n))
    for entry in fc.weights:
        if not entry:
            continue
        for (i, j, _k), w in entry:
            if i <= n:
                m[i - 1, j - 1] += w
    row_max = m.max(axis=1, keepdims=True)
    np.divide(m, row_max, out=m, where=row_max > 0)
    return m
