"""Central finite-difference verification of analytic gradients.

The harness perturbs every parameter element in place, re-evaluates the loss,
and compares the central-difference slope against the recorded analytic
gradient.  It is deliberately ignorant of how the loss is computed: callers
hand it a pure loss closure and a closure that populates the gradients.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import ParameterSet


def finite_diff_check(
    loss_fn: Callable[[], float],
    backward_fn: Callable[[], None],
    params: ParameterSet,
    epsilon: float = 1e-5,
) -> float:
    """Max over all parameter elements of the relative analytic-vs-numeric error.

    ``backward_fn`` must leave ``d loss / d theta`` in each parameter's grad
    slot.  The relative error for one element is
    ``|analytic - cd| / max(|analytic|, |cd|, 1e-8)``.
    """
    if not (1e-6 <= epsilon <= 1e-4):
        raise ValueError("epsilon must lie in [1e-6, 1e-4]")

    params.clear_grads()
    backward_fn()
    analytic = {}
    for name, t in params.items():
        if t.grad is None:
            raise ValueError(f"backward_fn left parameter {name!r} without a gradient")
        analytic[name] = t.grad.copy()

    worst = 0.0
    for name, t in params.items():
        flat = t.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            lp = loss_fn()
            flat[i] = orig - epsilon
            lm = loss_fn()
            flat[i] = orig
            cd = (lp - lm) / (2.0 * epsilon)
            err = abs(a_flat[i] - cd) / max(abs(a_flat[i]), abs(cd), 1e-8)
            worst = max(worst, err)
    params.clear_grads()
    return worst


def find_kink_safe_seed(
    margin_fn: Callable[[int], float],
    min_margin: float = 1e-3,
    start_seed: int = 0,
    max_tries: int = 64,
) -> int:
    """First seed whose forward pass stays ``min_margin`` away from every
    ReLU zero and pooling tie, so finite differences are well-posed there."""
    for seed in range(start_seed, start_seed + max_tries):
        if margin_fn(seed) >= min_margin:
            return seed
    raise RuntimeError(
        f"no kink-safe probe point found in {max_tries} seeds (margin >= {min_margin})"
    )
