"""Learned function modules assembled over the autodiff tape.

Seven small networks make up the sequence model: a symbol embedding table, a
deletion-cost net and a symmetric substitution-cost net (two-layer leaky
feed-forward stacks), a GRU cell that accumulates edit costs into a distance
vector, a bias-free linear scorer, an analogy net acting on (distance,
embedding) pairs, and a softmax forecasting head. A stacked LSTM is available
both as a baseline model and for the combined variant.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_arrays, save_arrays

__all__ = [
    "ModelConfig",
    "ParamStore",
    "ConfigError",
    "init_params",
    "GruKernel",
    "gru_step",
    "lstm_step",
    "CostTable",
    "f_embed",
    "f_delete",
    "f_subst",
    "f_accumulate",
    "f_score",
    "f_analogy",
    "f_forecast",
    "lstm_forward",
]

MODEL_KINDS = ("lstm", "motifnet", "motifnet+lstm")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    """One model instance: sizes, slopes, caps, and variant flags.

    dim is the shared size of embeddings, edit costs and distances. n_out is
    the penultimate size (defaults to dim). k_max caps the suffix length used
    for forecasting; d_max bounds tree depth (and implies the k cap in tree
    mode); n_priority caps retained children per tree node. None means
    unbounded for all three.
    """

    alphabet_size: int
    dim: int = 16
    n_out: int | None = None
    alpha: float = 0.01
    delta: float = 0.5
    kind: str = "motifnet"
    lstm_layers: int = 1
    lstm_hidden: int | None = None
    soft_select: bool = False
    soft_temperature: float = 1.0
    decoupled_scorer: bool = False
    backend: str = "dense"
    k_max: int | None = None
    d_max: int | None = None
    n_priority: int | None = None

    def __post_init__(self):
        if self.n_out is None:
            self.n_out = self.dim
        if self.lstm_hidden is None:
            self.lstm_hidden = self.dim
        if self.alphabet_size < 1 or self.dim < 1 or self.n_out < 1:
            raise ConfigError("sizes must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0,1), got {self.alpha}")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.lstm_layers not in (1, 2, 3, 4):
            raise ConfigError("lstm_layers must be 1..4")
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.backend not in ("dense", "tree"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.soft_select and self.backend == "tree":
            raise ConfigError("soft selection needs the dense backend; the "
                              "tree shortcut only tracks hard selections")
        for name in ("k_max", "d_max", "n_priority"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1 or None")

    @property
    def uses_motif(self) -> bool:
        return self.kind in ("motifnet", "motifnet+lstm")

    @property
    def uses_lstm(self) -> bool:
        return self.kind in ("lstm", "motifnet+lstm")

    @property
    def forecast_in_dim(self) -> int:
        if self.kind == "lstm":
            return self.lstm_hidden
        if self.kind == "motifnet+lstm":
            return self.n_out + self.lstm_hidden
        return self.n_out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class ParamStore:
    """Named learnable tensors for one model configuration."""

    def __init__(self, cfg: ModelConfig, tensors: dict[str, Tensor]):
        self.cfg = cfg
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self):
        return sorted(self.tensors)

    def n_params(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def clone_data(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.tensors.items()}

    def load_data(self, arrays: dict[str, np.ndarray]):
        if set(arrays) != set(self.tensors):
            missing = set(self.tensors) - set(arrays)
            extra = set(arrays) - set(self.tensors)
            raise ConfigError(f"parameter mismatch: missing={sorted(missing)} "
                              f"extra={sorted(extra)}")
        for k, t in self.tensors.items():
            a = arrays[k]
            if a.shape != t.data.shape:
                raise ConfigError(f"{k}: shape {a.shape} != {t.data.shape}")
            t.data = np.array(a, dtype=np.float64, copy=True)
            t.grad = None

    def save(self, path):
        save_arrays(path, {k: t.data for k, t in self.tensors.items()})

    def load(self, path):
        self.load_data(load_arrays(path))


def _linear_pair(rng, fan_in, fan_out):
    """Fan-in scaled uniform weight and bias (nonzero bias keeps the leaky
    units off their kink at init, which matters for finite-difference checks)."""
    bound = 1.0 / np.sqrt(fan_in)
    w = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
    b = Tensor(rng.uniform(-bound, bound, size=fan_out), requires_grad=True)
    return w, b


def init_params(cfg: ModelConfig, seed: int = 0) -> ParamStore:
    """Build and initialize every learnable for the configured model kind.

    Weights are fan-in scaled uniform, biases zero, embeddings normal scaled
    by 1/sqrt(dim); the identical seed reproduces the identical store.
    """
    rng = np.random.default_rng(seed)
    n_sym = cfg.alphabet_size
    d = cfg.dim
    p: dict[str, Tensor] = {}

    p["embed"] = Tensor(rng.standard_normal((n_sym, d)) / np.sqrt(d),
                        requires_grad=True)

    if cfg.uses_motif:
        for net, fan_in in (("del", d), ("sub", d)):
            w1, b1 = _linear_pair(rng, fan_in, d)
            w2, b2 = _linear_pair(rng, d, d)
            p[f"{net}.w1"], p[f"{net}.b1"] = w1, b1
            p[f"{net}.w2"], p[f"{net}.b2"] = w2, b2
        for gate in ("z", "r", "h"):
            p[f"add.w{gate}"], p[f"add.b{gate}"] = _linear_pair(rng, d, d)
            p[f"add.u{gate}"], _ = _linear_pair(rng, d, d)
        p["score.w"] = Tensor(
            rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(d, 1)),
            requires_grad=True)
        if cfg.decoupled_scorer:
            p["score_fc.w"] = Tensor(p["score.w"].data.copy(), requires_grad=True)
        w1, b1 = _linear_pair(rng, 2 * d, d)
        w2, b2 = _linear_pair(rng, d, cfg.n_out)
        p["analogy.w1"], p["analogy.b1"] = w1, b1
        p["analogy.w2"], p["analogy.b2"] = w2, b2
        p["d0"] = Tensor(rng.standard_normal(d) / np.sqrt(d), requires_grad=True)
        p["o_init"] = Tensor(rng.standard_normal(cfg.n_out) / np.sqrt(cfg.n_out),
                             requires_grad=True)

    if cfg.uses_lstm:
        h = cfg.lstm_hidden
        for layer in range(cfg.lstm_layers):
            fan_in = d if layer == 0 else h
            p[f"lstm.l{layer}.wx"], p[f"lstm.l{layer}.b"] = _linear_pair(rng, fan_in, 4 * h)
            p[f"lstm.l{layer}.wh"], _ = _linear_pair(rng, h, 4 * h)

    fin = cfg.forecast_in_dim
    w1, b1 = _linear_pair(rng, fin, fin)
    w2, b2 = _linear_pair(rng, fin, n_sym)
    p["forecast.w1"], p["forecast.b1"] = w1, b1
    p["forecast.w2"], p["forecast.b2"] = w2, b2
    return ParamStore(cfg, p)


# ---------------------------------------------------------------------------
# fused recurrent cells


class GruKernel:
    """One forward pass worth of GRU machinery with the z/r gate weights
    fused into single matrices. Built once per sequence; the fused arrays are
    plain data, while gradients still land on the original parameter tensors.
    """

    __slots__ = ("tensors", "w_zr", "u_zr", "b_zr", "wh", "uh", "bh", "n")

    def __init__(self, params: "ParamStore"):
        p = params.tensors
        self.tensors = (p["add.wz"], p["add.uz"], p["add.bz"],
                        p["add.wr"], p["add.ur"], p["add.br"],
                        p["add.wh"], p["add.uh"], p["add.bh"])
        wz, uz, bz, wr, ur, br, wh, uh, bh = (t.data for t in self.tensors)
        self.w_zr = np.concatenate([wz, wr], axis=1)
        self.u_zr = np.concatenate([uz, ur], axis=1)
        self.b_zr = np.concatenate([bz, br])
        self.wh, self.uh, self.bh = wh, uh, bh
        self.n = wh.shape[1]

    def step(self, d: Tensor, c: Tensor) -> Tensor:
        """New state (1-z)*d + z*tanh-candidate; z update gate, r reset gate.
        Accepts (n,) vectors or (m, n) row batches; one tape node."""
        dd, cd = d.data, c.data
        if dd.shape[:-1] != cd.shape[:-1] or dd.shape[-1] != self.n \
                or cd.shape[-1] != self.w_zr.shape[0]:
            raise ad.ShapeError(f"gru step: state {dd.shape}, input {cd.shape}")
        n = self.n
        a_zr = cd @ self.w_zr + dd @ self.u_zr + self.b_zr
        zr = 1.0 / (1.0 + np.exp(-a_zr))
        z = zr[..., :n]
        r = zr[..., n:]
        rd = r * dd
        hbar = np.tanh(cd @ self.wh + rd @ self.uh + self.bh)
        out = Tensor(dd + z * (hbar - dd))

        def bw(g):
            dz = g * (hbar - dd)
            da_h = (g * z) * (1.0 - hbar * hbar)
            gd = g - g * z
            gc = da_h @ self.wh.T
            g_rd = da_h @ self.uh.T
            gd += g_rd * r
            da_zr = np.concatenate([dz * z, g_rd * dd * r], axis=-1)
            da_zr -= da_zr * zr
            gc += da_zr @ self.w_zr.T
            gd += da_zr @ self.u_zr.T
            if dd.ndim == 2:
                gw = cd.T @ da_zr
                gu = dd.T @ da_zr
                gwh = cd.T @ da_h
                guh = rd.T @ da_h
                gb = da_zr.sum(axis=0)
                gbh = da_h.sum(axis=0)
            else:
                gw = np.outer(cd, da_zr)
                gu = np.outer(dd, da_zr)
                gwh = np.outer(cd, da_h)
                guh = np.outer(rd, da_h)
                gb = da_zr
                gbh = da_h
            return (gd, gc,
                    gw[:, :n], gu[:, :n], gb[:n],
                    gw[:, n:], gu[:, n:], gb[n:],
                    gwh, guh, gbh)

        ad.record((out,), (d, c) + self.tensors, bw)
        return out


def gru_step(params: "ParamStore", d: Tensor, c: Tensor) -> Tensor:
    """Single GRU step; for repeated use build a GruKernel once instead."""
    return GruKernel(params).step(d, c)


def lstm_step(x: Tensor, h: Tensor, c: Tensor, wx, wh, b):
    """One LSTM step; gate order i, f, g, o in the fused weight matrices.
    Returns (h', c') from a single two-output tape node.
    """
    xd, hd, cd = x.data, h.data, c.data
    n = hd.shape[-1]
    a = xd @ wx.data + hd @ wh.data + b.data
    ig = 1.0 / (1.0 + np.exp(-a[..., :n]))
    fg = 1.0 / (1.0 + np.exp(-a[..., n:2 * n]))
    gg = np.tanh(a[..., 2 * n:3 * n])
    og = 1.0 / (1.0 + np.exp(-a[..., 3 * n:]))
    c_new = fg * cd + ig * gg
    tc = np.tanh(c_new)
    h_out = Tensor(og * tc)
    c_out = Tensor(c_new)

    def bw(gh, gc):
        do = gh * tc
        dc_total = gc + gh * og * (1.0 - tc * tc)
        da = np.concatenate([
            (dc_total * gg) * ig * (1.0 - ig),
            (dc_total * cd) * fg * (1.0 - fg),
            (dc_total * ig) * (1.0 - gg * gg),
            do * og * (1.0 - og),
        ], axis=-1)
        gx = da @ wx.data.T
        gh_in = da @ wh.data.T
        gc_in = dc_total * fg
        if xd.ndim == 2:
            return gx, gh_in, gc_in, xd.T @ da, hd.T @ da, da.sum(axis=0)
        return gx, gh_in, gc_in, np.outer(xd, da), np.outer(hd, da), da

    ad.record((h_out, c_out), (x, h, c, wx, wh, b), bw)
    return h_out, c_out


# ---------------------------------------------------------------------------
# the function modules


def f_embed(params: ParamStore, s: int) -> Tensor:
    """Embedding row lookup for one symbol."""
    return ad.embedding_row(params["embed"], s)


def _two_layer(x: Tensor, params: ParamStore, prefix: str, alpha: float) -> Tensor:
    h = ad.leaky_relu(ad.linear(x, params[f"{prefix}.w1"], params[f"{prefix}.b1"]), alpha)
    return ad.leaky_relu(ad.linear(h, params[f"{prefix}.w2"], params[f"{prefix}.b2"]), alpha)


def f_delete(params: ParamStore, s: int) -> Tensor:
    """Deletion cost vector for one symbol."""
    return _two_layer(f_embed(params, s), params, "del", params.cfg.alpha)


def f_subst(params: ParamStore, a: int, b: int) -> Tensor:
    """Substitution cost vector; symmetric because the smoothed absolute value
    of the embedding difference is even elementwise."""
    diff = ad.sub(f_embed(params, a), f_embed(params, b))
    even = ad.pseudo_huber(diff, params.cfg.delta)
    return _two_layer(even, params, "sub", params.cfg.alpha)


def f_accumulate(params: ParamStore, d: Tensor, c: Tensor) -> Tensor:
    """Fold one edit cost into the running distance (GRU step)."""
    return GruKernel(params).step(d, c)


def f_score(params: ParamStore, d: Tensor, role: str = "select") -> Tensor:
    """Bias-free linear score of a distance vector (or a row batch of them).

    role picks the scorer when the decoupled variant registers a second one:
    'select' drives the recursion's arg-max and tree pruning, 'forecast'
    drives the attention weights.
    """
    name = "score.w"
    if role == "forecast" and params.cfg.decoupled_scorer:
        name = "score_fc.w"
    return ad.linear(d, params[name])


def score_value(params: ParamStore, data: np.ndarray, role: str = "select") -> float:
    """Tape-free scalar score used for arg-max selection and pruning; the
    hard selection itself is piecewise constant so no gradient is lost."""
    name = "score.w"
    if role == "forecast" and params.cfg.decoupled_scorer:
        name = "score_fc.w"
    return float(data @ params[name].data[:, 0])


def f_analogy(params: ParamStore, d: Tensor, e: Tensor) -> Tensor:
    """Features for 'what followed there should follow here': two-layer net on
    the concatenation of a distance and the embedding of the earlier
    continuation. Accepts row batches."""
    axis = 1 if d.data.ndim == 2 else 0
    return _two_layer(ad.concat((d, e), axis=axis), params, "analogy", params.cfg.alpha)


def f_forecast(params: ParamStore, o: Tensor) -> Tensor:
    """Next-symbol distribution from the penultimate vector."""
    h = ad.leaky_relu(ad.linear(o, params["forecast.w1"], params["forecast.b1"]),
                      params.cfg.alpha)
    return ad.softmax(ad.linear(h, params["forecast.w2"], params["forecast.b2"]))


class CostTable:
    """Per-sequence cache of deletion/substitution cost tensors.

    The cost nets are pure functions of their symbols, so repeated edit
    operations within one forward pass share a single evaluation (and a single
    tape node chain).
    """

    def __init__(self, params: ParamStore):
        self.params = params
        self._del: dict[int, Tensor] = {}
        self._sub: dict[tuple[int, int], Tensor] = {}

    def delete(self, s: int) -> Tensor:
        t = self._del.get(s)
        if t is None:
            t = self._del[s] = f_delete(self.params, s)
        return t

    def subst(self, a: int, b: int) -> Tensor:
        key = (a, b) if a <= b else (b, a)
        t = self._sub.get(key)
        if t is None:
            t = self._sub[key] = f_subst(self.params, key[0], key[1])
        return t


def lstm_forward(params: ParamStore, symbols) -> list[Tensor]:
    """Stacked LSTM over the symbol embeddings; returns the top-layer hidden
    state after each step (step i sees inputs up to i only)."""
    cfg = params.cfg
    h_size = cfg.lstm_hidden
    zeros = lambda: Tensor(np.zeros(h_size))
    hs = [zeros() for _ in range(cfg.lstm_layers)]
    cs = [zeros() for _ in range(cfg.lstm_layers)]
    outputs = []
    for s in symbols:
        x = f_embed(params, s)
        for layer in range(cfg.lstm_layers):
            hs[layer], cs[layer] = lstm_step(
                x, hs[layer], cs[layer],
                params[f"lstm.l{layer}.wx"], params[f"lstm.l{layer}.wh"],
                params[f"lstm.l{layer}.b"])
            x = hs[layer]
        outputs.append(x)
    return outputs
