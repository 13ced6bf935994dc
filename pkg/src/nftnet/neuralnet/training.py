"""Adam optimiser and the training loop."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument
from .checkpoint import save_checkpoint
from .model import Direction, ModelSpec, ModelState, init_state, model_backward

__all__ = [
    "DEFAULT_LR",
    "DEFAULT_BATCH",
    "adam_step",
    "complex_to_rows",
    "rows_to_complex",
    "training_pairs",
    "TrainResult",
    "train",
]

DEFAULT_LR = 3e-4
DEFAULT_BATCH = 32


def adam_step(state: ModelState, grads, lr: float = DEFAULT_LR, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> ModelState:
    """Bias-corrected Adam update, in place on ``state``; returns ``state``."""
    g = np.asarray(grads, dtype=np.float32)
    if g.shape != state.parameters.shape:
        raise InvalidArgument(f"gradient shape {g.shape} does not match parameters {state.parameters.shape}")
    t = state.step_count + 1
    b1, b2 = np.float32(beta1), np.float32(beta2)
    state.adam_m *= b1
    state.adam_m += (1 - b1) * g
    state.adam_v *= b2
    state.adam_v += (1 - b2) * g * g
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    step = np.float32(lr / c1) * state.adam_m / (np.sqrt(state.adam_v / np.float32(c2)) + np.float32(eps))
    state.parameters -= step
    state.step_count = t
    return state


def complex_to_rows(v) -> np.ndarray:
    """Complex vector -> float32 array of shape (2, n) with real and imaginary rows."""
    v = np.asarray(v)
    return np.stack([v.real, v.imag]).astype(np.float32)


def rows_to_complex(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != 2:
        raise InvalidArgument(f"expected shape (2, n), got {a.shape}")
    return a[0] + 1j * a[1]


def training_pairs(records, direction) -> tuple:
    """Stacked ``(inputs, labels)`` as float32 arrays of shape (N, 2, n).

    NFT maps the normalised linear spectrum to the normalised nonlinear one;
    iNFT maps the other way.
    """
    direction = Direction.parse(direction)
    lin = np.stack([complex_to_rows(r.linear.values) for r in records])
    nl = np.stack([complex_to_rows(r.nonlinear.values) for r in records])
    return (lin, nl) if direction is Direction.NFT else (nl, lin)


@dataclass
class TrainResult:
    state: ModelState
    epoch_loss: list = field(default_factory=list)
    step_loss: list = field(default_factory=list)


def train(spec: ModelSpec, dataset, epochs: int, batch_size: int = DEFAULT_BATCH, lr: float = DEFAULT_LR,
          seed: int = 0, checkpoint_dir=None, state: ModelState | None = None, log=None,
          max_steps: int | None = None) -> TrainResult:
    """Mini-batch Adam on RMSE.

    Parameters
    ----------
    spec : ModelSpec
    dataset : Dataset or sequence of BurstRecord
    epochs, batch_size : int
    lr : float
    seed : int
        Seeds initialisation and per-epoch shuffling (one stream).
    checkpoint_dir : path, optional
        Receives ``epoch_NNN.nftck`` and ``latest.nftck`` after every epoch.
    state : ModelState, optional
        Resume from this state instead of initialising.
    log : callable, optional
        Called with one line per epoch: index, mean RMSE, wall time.
    max_steps : int, optional
        Stop after this many optimiser steps.
    """
    records = list(getattr(dataset, "records", dataset))
    if not records:
        raise InvalidArgument("cannot train on an empty dataset")
    if epochs < 0 or batch_size < 1:
        raise InvalidArgument("epochs must be >= 0 and batch_size >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    if state is None:
        state = init_state(spec, rng)
    elif state.spec != spec:
        raise InvalidArgument("state was built for a different model spec")
    inputs, labels = training_pairs(records, spec.direction)
    if inputs.shape[1:] != (spec.channels, spec.length):
        raise InvalidArgument(f"records have shape {inputs.shape[1:]}, model expects ({spec.channels}, {spec.length})")
    ckdir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckdir is not None:
        ckdir.mkdir(parents=True, exist_ok=True)
    result = TrainResult(state)
    n = len(records)
    steps = 0
    for epoch in range(epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            grad, loss = model_backward(spec, state, inputs[idx], labels[idx])
            adam_step(state, grad, lr)
            losses.append(loss)
            result.step_loss.append(loss)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        mean = float(np.mean(losses))
        result.epoch_loss.append(mean)
        if ckdir is not None:
            save_checkpoint(state, ckdir / f"epoch_{epoch + 1:03d}.nftck")
            save_checkpoint(state, ckdir / "latest.nftck")
        if log is not None:
            log(f"epoch {epoch + 1} rmse {mean:.6e} time {time.perf_counter() - t0:.2f}s")
        if max_steps is not None and steps >= max_steps:
            break
    return result
