"""Global linear classification layer over all seen classes.

Retrained from scratch in every incremental state on l2-normalized inputs
(real features for new classes, pseudo-features for past classes). Two
variants: 'hinge' solves the primal l2-regularized (squared-)hinge problem
one class against the rest; 'softmax' trains a single fully-connected layer
with mini-batch cross-entropy descent. The one-vs-rest negatives can be
capped at a ratio r per positive to accelerate training.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .backend import svm_primal
from .errors import ContractError, FormatError
from .feature_store import BANK_MAGIC, NORM_EPS

_BANK_HEADER = struct.Struct("<II")
_NORM_TOL = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "hinge"
    reg_c: float = 1.0
    tolerance: float = 1e-4
    max_epochs: int = 1000
    neg_ratio: int | None = None  # None = full one-vs-all
    seed: int = 0
    squared_hinge: bool = True
    softmax_epochs: int = 50
    softmax_lr: float = 0.1
    softmax_lr_decay: float = 0.1
    softmax_patience: int = 10
    softmax_batch: int = 128

    def __post_init__(self):
        if self.variant not in ("hinge", "softmax"):
            raise ContractError(f"unknown classifier variant {self.variant!r}")
        if self.reg_c <= 0 or self.tolerance <= 0:
            raise ContractError("reg_c and tolerance must be positive")
        if self.neg_ratio is not None and self.neg_ratio < 1:
            raise ContractError(f"neg_ratio must be >= 1, got {self.neg_ratio}")


@dataclass(frozen=True)
class ClassifierBank:
    """One weight row and bias per seen class, in class_ids order."""

    weights: np.ndarray
    biases: np.ndarray
    class_ids: tuple[int, ...]
    variant: str = "hinge"
    trained_in_state: int = 0

    def __post_init__(self):
        if self.weights.shape[0] != len(self.class_ids):
            raise ContractError("bank: one weight row per class required")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ContractError("bank: non-finite weights")
        self.weights.setflags(write=False)
        self.biases.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.dim:
            raise ContractError(
                f"bank dim {self.dim} != feature dim {features.shape[1]}")
        return features @ self.weights.T + self.biases

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Argmax class per row; score ties go to the lowest row index."""
        rows = np.argmax(self.scores(features), axis=1)
        ids = np.asarray(self.class_ids)
        return ids[rows]

    def save(self, path) -> None:
        """Binary bank format: magic, rows, dim+1, then float32 rows of
        [weights..., bias]. Class ids and variant go to a JSON sidecar."""
        data = np.hstack([self.weights, self.biases[:, None]]).astype(np.float32)
        with open(path, "wb") as fh:
            fh.write(BANK_MAGIC)
            fh.write(_BANK_HEADER.pack(data.shape[0], data.shape[1]))
            fh.write(np.ascontiguousarray(data).tobytes())
        sidecar = {"class_ids": list(self.class_ids), "variant": self.variant,
                   "trained_in_state": self.trained_in_state}
        Path(str(path) + ".json").write_text(json.dumps(sidecar) + "\n")


def load_bank(path) -> ClassifierBank:
    with open(path, "rb") as fh:
        magic = fh.read(len(BANK_MAGIC))
        if magic != BANK_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {BANK_MAGIC!r}")
        rows, cols = _BANK_HEADER.unpack(fh.read(_BANK_HEADER.size))
        payload = fh.read()
    if len(payload) != rows * cols * 4:
        raise FormatError(f"{path}: truncated bank payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)
    sidecar_path = Path(str(path) + ".json")
    if sidecar_path.exists():
        meta = json.loads(sidecar_path.read_text())
        class_ids = tuple(int(c) for c in meta["class_ids"])
        variant = meta.get("variant", "hinge")
        state = int(meta.get("trained_in_state", 0))
    else:
        class_ids = tuple(range(rows))
        variant, state = "hinge", 0
    return ClassifierBank(weights=data[:, :-1], biases=data[:, -1].copy(),
                          class_ids=class_ids, variant=variant,
                          trained_in_state=state)


def sample_negatives(positives_count: int, pools: Mapping[int, np.ndarray],
                     r: int, rng: int | np.random.Generator) -> np.ndarray:
    """Sample min(r * positives_count, pool size) negative rows.

    Stratified proportionally per class by the largest-remainder rule
    (integer arithmetic, remainder ties broken by ascending class id);
    uniform without replacement inside each class.
    """
    if r < 1:
        raise ContractError(f"negative ratio must be >= 1, got {r}")
    if not pools:
        raise ContractError("sample_negatives: empty negative pool")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(np.random.SeedSequence(int(rng) & (2**64 - 1)))
    class_ids = sorted(pools)
    sizes = {c: np.asarray(pools[c]).shape[0] for c in class_ids}
    total = sum(sizes.values())
    if total == 0:
        raise ContractError("sample_negatives: empty negative pool")
    m = min(r * positives_count, total)

    base = {c: (m * sizes[c]) // total for c in class_ids}
    leftovers = m - sum(base.values())
    by_remainder = sorted(class_ids,
                          key=lambda c: (-((m * sizes[c]) % total), c))
    quota = dict(base)
    for c in by_remainder[:leftovers]:
        quota[c] += 1

    picked = []
    for c in class_ids:
        if quota[c] == 0:
            continue
        rows = np.asarray(pools[c])
        idx = np.sort(rng.choice(sizes[c], size=quota[c], replace=False))
        picked.append(rows[idx])
    return np.vstack(picked)


def _check_normalized(class_id: int, rows: np.ndarray) -> None:
    norms = np.linalg.norm(rows, axis=1)
    bad = ~((np.abs(norms - 1.0) <= _NORM_TOL) | (norms <= NORM_EPS))
    if bad.any():
        raise ContractError(
            f"class {class_id}: {int(bad.sum())} rows are not l2-normalized")


def _augment(rows: np.ndarray) -> np.ndarray:
    return np.hstack([rows, np.ones((rows.shape[0], 1))])


def _train_hinge(features_by_class, class_ids, config: TrainConfig):
    dim = features_by_class[class_ids[0]].shape[1]
    weights = np.zeros((len(class_ids), dim))
    biases = np.zeros(len(class_ids))
    for row, target in enumerate(class_ids):
        positives = features_by_class[target]
        others = {c: features_by_class[c] for c in class_ids if c != target}
        if others:
            if config.neg_ratio is None:
                negatives = np.vstack([others[c] for c in sorted(others)])
            else:
                rng = np.random.default_rng(np.random.SeedSequence(
                    [config.seed & (2**64 - 1), target]))
                negatives = sample_negatives(positives.shape[0], others,
                                             config.neg_ratio, rng)
            stacked = np.vstack([positives, negatives])
            labels = np.concatenate([np.ones(positives.shape[0]),
                                     -np.ones(negatives.shape[0])])
        else:
            # Degenerate single-class bank: fit positives against the origin.
            stacked = positives
            labels = np.ones(positives.shape[0])
        w, _, _ = svm_primal(_augment(stacked), labels, config.reg_c,
                             config.tolerance, config.max_epochs,
                             config.squared_hinge)
        weights[row] = w[:-1]
        biases[row] = w[-1]
    return weights, biases


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _train_softmax(features_by_class, class_ids, config: TrainConfig):
    xa = _augment(np.vstack([features_by_class[c] for c in class_ids]))
    labels = np.concatenate([
        np.full(features_by_class[c].shape[0], row)
        for row, c in enumerate(class_ids)])
    n, d1 = xa.shape
    k = len(class_ids)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0

    rng = np.random.default_rng(np.random.SeedSequence(config.seed & (2**64 - 1)))
    w = np.zeros((k, d1))
    lr = config.softmax_lr
    best_loss = np.inf
    stall = 0
    decayed = False
    for _ in range(config.softmax_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.softmax_batch):
            idx = perm[start:start + config.softmax_batch]
            probs = np.exp(_log_softmax(xa[idx] @ w.T))
            grad = (probs - onehot[idx]).T @ xa[idx] / idx.shape[0]
            w -= lr * grad
        loss = -float(np.mean(_log_softmax(xa @ w.T)[np.arange(n), labels]))
        if loss < best_loss - 1e-12:
            best_loss = loss
            stall = 0
        else:
            stall += 1
        if stall >= config.softmax_patience:
            # One plateau decays the learning rate; a second one stops.
            if decayed:
                break
            lr *= config.softmax_lr_decay
            decayed = True
            stall = 0
    return w[:, :-1], w[:, -1]


def train(features_by_class: Mapping[int, np.ndarray], config: TrainConfig,
          trained_in_state: int = 0) -> ClassifierBank:
    """Train the bank over every class in ``features_by_class``.

    Rows must already be l2-normalized (unit norm within 1e-6, or exactly
    zero). Deterministic for fixed inputs, config and seed.
    """
    if not features_by_class:
        raise ContractError("train: no classes given")
    class_ids = sorted(features_by_class)
    prepared = {}
    dim = None
    for c in class_ids:
        rows = np.atleast_2d(np.asarray(features_by_class[c], dtype=np.float64))
        if rows.shape[0] < 1:
            raise ContractError(f"class {c}: needs at least one training row")
        if dim is None:
            dim = rows.shape[1]
        elif rows.shape[1] != dim:
            raise ContractError(f"class {c}: dim {rows.shape[1]} != {dim}")
        _check_normalized(c, rows)
        prepared[c] = rows

    if config.variant == "hinge":
        weights, biases = _train_hinge(prepared, class_ids, config)
    else:
        weights, biases = _train_softmax(prepared, class_ids, config)
    return ClassifierBank(weights=weights, biases=biases,
                          class_ids=tuple(class_ids), variant=config.variant,
                          trained_in_state=trained_in_state)
