"""Central finite-difference gradient checking utilities."""

from __future__ import annotations

import numpy as np

from .autodiff import Tape, Tensor


def fd_gradient(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return g


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max |a-n| scaled by the largest numeric gradient magnitude."""
    denom = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / denom


def check_tensor_grad(build_loss, leaves: dict[str, Tensor],
                      eps: float = 1e-5) -> dict[str, float]:
    """Compare tape gradients of build_loss() against finite differences.

    build_loss must re-read the current leaf data every call and return a
    scalar Tensor. Returns the relative error per leaf name.
    """
    for t in leaves.values():
        t.zero_grad()
    with Tape() as tape:
        loss = build_loss()
        tape.backward(loss)
    analytic = {k: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
                for k, t in leaves.items()}

    errs = {}
    for name, t in leaves.items():
        def f(_x, _t=t):
            return float(build_loss().data)

        numeric = fd_gradient(f, t.data, eps=eps)
        errs[name] = rel_error(analytic[name], numeric)
    return errs
