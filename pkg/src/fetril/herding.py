"""Greedy herding selection.

Picks s items from a candidate pool so that the running mean of the selected
items approximates a target mean. Exact greedy: every step rescans all
remaining candidates and takes the one minimizing the residual
``||target - running_mean||``, ties broken by lowest index. When s exceeds
the pool size the greedy pass restarts while the running sum keeps
accumulating (multi-round herding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import herd_select
from .errors import ContractError


@dataclass(frozen=True)
class HerdingResult:
    selected_indices: np.ndarray
    residual_norms: np.ndarray


def herd(pool: np.ndarray, target_mean: np.ndarray, s: int) -> HerdingResult:
    pool = np.atleast_2d(np.asarray(pool, dtype=np.float64))
    target_mean = np.asarray(target_mean, dtype=np.float64)
    if pool.shape[0] == 0:
        raise ContractError("herding: empty candidate pool")
    if s < 1:
        raise ContractError(f"herding: s must be >= 1, got {s}")
    if pool.shape[1] != target_mean.shape[0]:
        raise ContractError(
            f"herding: pool dim {pool.shape[1]} != target dim {target_mean.shape[0]}")
    indices, residuals = herd_select(pool, target_mean, s)
    return HerdingResult(selected_indices=indices, residual_norms=residuals)
