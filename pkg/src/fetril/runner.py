"""End-to-end incremental protocol execution.

Classes are shuffled once into an initial state plus T incremental states.
Every state registers the prototypes of its new classes, then trains and
evaluates according to the method:

  fetril  - retrain one global bank on real new-class features plus
            translated pseudo-features for every past class;
  ncm     - nearest prototype under cosine, no training;
  deesil  - per-state banks trained only against that state's classes,
            scored jointly across states at test time.

Training features of a class are only readable during the state in which the
class arrives; afterwards the handle is retired and only the prototype
remains available.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import ClassifierBank, TrainConfig, train
from .errors import ConsistencyError, ContractError, ProtocolError
from .feature_store import ClassPrototype, FeatureStore, l2_normalize_rows
from .generator import SelectionStrategy, generate_for_past_class
from .metrics import StateReport, build_state_report

REPEAT_SEED_STRIDE = 1000003


@dataclass(frozen=True)
class IncrementalSchedule:
    initial_classes: tuple[int, ...]
    states: tuple[tuple[int, ...], ...]
    seed: int

    def __post_init__(self):
        groups = [self.initial_classes, *self.states]
        flat = [c for g in groups for c in g]
        if len(set(flat)) != len(flat):
            raise ContractError("schedule: states must be pairwise disjoint")
        if any(len(g) == 0 for g in groups):
            raise ContractError("schedule: empty state")

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def all_classes(self) -> list[int]:
        return [c for g in (self.initial_classes, *self.states) for c in g]


def build_schedule(classes, initial_count: int, num_states: int,
                   seed: int, class_order=None) -> IncrementalSchedule:
    """Partition classes into an initial state plus ``num_states`` blocks.

    ``classes`` is a class-id sequence or an int N meaning ids 0..N-1. The
    order is a seeded uniform shuffle unless ``class_order`` pins it
    explicitly. The remainder classes, when the split is uneven, go to the
    earlier states. ``num_states`` = 0 is the joint, non-incremental edge
    case and requires initial_count == N.
    """
    if isinstance(classes, (int, np.integer)):
        classes = list(range(int(classes)))
    ids = sorted(int(c) for c in classes)
    n = len(ids)
    if initial_count < 1:
        raise ContractError(f"initial_count must be >= 1, got {initial_count}")
    if num_states < 0:
        raise ContractError(f"num_states must be >= 0, got {num_states}")
    if num_states == 0 and initial_count != n:
        raise ContractError(
            f"num_states=0 requires initial_count == {n}, got {initial_count}")
    if num_states > 0 and initial_count + num_states > n:
        raise ContractError(
            f"infeasible split: initial {initial_count} + {num_states} states "
            f"> {n} classes")

    if class_order is not None:
        order = [int(c) for c in class_order]
        if sorted(order) != ids:
            raise ContractError("class_order must be a permutation of the dataset classes")
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed & (2**64 - 1)))
        order = [ids[i] for i in rng.permutation(n)]

    initial = tuple(order[:initial_count])
    remaining = order[initial_count:]
    states = []
    if num_states > 0:
        base, extra = divmod(len(remaining), num_states)
        offset = 0
        for i in range(num_states):
            size = base + (1 if i < extra else 0)
            states.append(tuple(remaining[offset:offset + size]))
            offset += size
    return IncrementalSchedule(initial_classes=initial, states=tuple(states),
                               seed=seed)


class PrototypeRegistry:
    """Insert-only map class_id -> prototype; prototypes are never replaced."""

    def __init__(self):
        self._protos: dict[int, ClassPrototype] = {}

    def register(self, proto: ClassPrototype) -> None:
        if proto.class_id in self._protos:
            raise ContractError(
                f"prototype for class {proto.class_id} already registered")
        self._protos[proto.class_id] = proto

    def __getitem__(self, class_id: int) -> ClassPrototype:
        return self._protos[class_id]

    def __contains__(self, class_id: int) -> bool:
        return class_id in self._protos

    def __len__(self) -> int:
        return len(self._protos)

    @property
    def class_ids(self) -> list[int]:
        return sorted(self._protos)


class GuardedTrainView:
    """Store view enforcing exemplar-freedom.

    A class's training matrix is readable until ``retire`` is called for it;
    any later read raises. The runner retires every class at the end of the
    state in which it arrived.
    """

    def __init__(self, store: FeatureStore):
        self._store = store
        self._retired: set[int] = set()

    def matrix(self, class_id: int):
        if class_id in self._retired:
            raise ProtocolError(
                f"training features of class {class_id} were dropped after its "
                "arrival state (exemplar-free protocol)")
        return self._store.matrix(class_id)

    def retire(self, class_ids) -> None:
        self._retired.update(int(c) for c in class_ids)


@dataclass(frozen=True)
class RunConfig:
    method: str = "fetril"
    initial_count: int = 10
    num_states: int = 5
    strategy: SelectionStrategy = field(default_factory=SelectionStrategy)
    samples_per_class: int | None = None
    classifier: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    class_order: tuple[int, ...] | None = None
    normalize_before_translate: bool = False

    def __post_init__(self):
        if self.method not in ("fetril", "ncm", "deesil"):
            raise ContractError(f"unknown method {self.method!r}")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed,
                       strategy=replace(self.strategy, seed=seed),
                       classifier=replace(self.classifier, seed=seed))


def _default_samples_per_class(store: FeatureStore) -> int:
    counts = [e.count for e in store.manifest.classes]
    return max(1, int(round(float(np.median(counts)))))


def _ncm_predict(protos: list[ClassPrototype], features: np.ndarray) -> np.ndarray:
    """Nearest prototype by cosine similarity; ties go to the lowest class id."""
    ids = np.asarray([p.class_id for p in protos])
    mat = l2_normalize_rows(np.vstack([p.centroid for p in protos]))
    scores = features @ mat.T
    return ids[np.argmax(scores, axis=1)]


def _joint_bank_predict(banks: list[ClassifierBank], features: np.ndarray) -> np.ndarray:
    """Stack per-state banks and take the globally best-scoring class."""
    all_ids = np.asarray([c for b in banks for c in b.class_ids])
    scores = np.hstack([b.scores(features) for b in banks])
    return all_ids[np.argmax(scores, axis=1)]


class ProtocolRun:
    """Single seeded execution of one method over one dataset pair."""

    def __init__(self, config: RunConfig, train_store: FeatureStore,
                 test_store: FeatureStore):
        if set(train_store.class_ids) != set(test_store.class_ids):
            raise ConsistencyError("train and test manifests list different classes")
        if train_store.dim != test_store.dim:
            raise ConsistencyError("train and test manifests disagree on dim")
        self.config = config
        self.train_view = GuardedTrainView(train_store)
        self.test_store = test_store
        self.registry = PrototypeRegistry()
        self.schedule = build_schedule(train_store.class_ids,
                                       config.initial_count, config.num_states,
                                       config.seed, config.class_order)
        self.samples_per_class = (config.samples_per_class
                                  or _default_samples_per_class(train_store))
        self._test_cache: dict[int, np.ndarray] = {}
        self._bank: ClassifierBank | None = None
        self._state_banks: list[ClassifierBank] = []

    def _test_features(self, class_id: int) -> np.ndarray:
        if class_id not in self._test_cache:
            raw = self.test_store.matrix(class_id).data
            self._test_cache[class_id] = l2_normalize_rows(raw)
        return self._test_cache[class_id]

    def _train_rows(self, matrix) -> np.ndarray:
        rows = np.asarray(matrix.data, dtype=np.float64)
        if self.config.normalize_before_translate:
            rows = l2_normalize_rows(rows)
        return rows

    def _predictor(self, seen_ids: list[int]):
        method = self.config.method
        if method == "ncm":
            protos = [self.registry[c] for c in seen_ids]
            return lambda x: _ncm_predict(protos, x)
        if method == "deesil":
            banks = list(self._state_banks)
            return lambda x: _joint_bank_predict(banks, x)
        bank = self._bank
        return bank.predict

    def _evaluate(self, state_idx: int, seen_ids: list[int], new_classes) -> StateReport:
        predict = self._predictor(seen_ids)
        per_class = {}
        for c in seen_ids:
            feats = self._test_features(c)
            preds = predict(feats)
            per_class[c] = (int(np.sum(preds == c)), feats.shape[0])
        return build_state_report(state_idx, per_class, new_classes)

    def _train_state(self, state_idx: int, new_feats: dict[int, np.ndarray],
                     past_ids: list[int]) -> None:
        cfg = self.config
        if cfg.method == "ncm":
            return
        if cfg.method == "deesil":
            if state_idx > 0 and len(new_feats) < 2:
                raise ProtocolError(
                    "deesil needs >= 2 classes per incremental state "
                    "(no cross-state negatives exist)")
            bank = train({c: l2_normalize_rows(rows) for c, rows in new_feats.items()},
                         cfg.classifier, trained_in_state=state_idx)
            self._state_banks.append(bank)
            return
        # fetril: real new features plus pseudo-features of every past class
        train_map = {c: l2_normalize_rows(rows) for c, rows in new_feats.items()}
        if past_ids:
            new_protos = {c: self.registry[c] for c in new_feats}
            for past in past_ids:
                pseudo = generate_for_past_class(self.registry[past], new_feats,
                                                 new_protos, cfg.strategy,
                                                 self.samples_per_class)
                train_map[past] = l2_normalize_rows(pseudo.features)
        self._bank = train(train_map, cfg.classifier, trained_in_state=state_idx)

    def execute(self) -> list[StateReport]:
        reports = []
        seen: list[int] = []
        groups = [self.schedule.initial_classes, *self.schedule.states]
        for state_idx, classes in enumerate(groups):
            new_feats = {}
            for c in classes:
                matrix = self.train_view.matrix(c)
                rows = self._train_rows(matrix)
                # Prototype and generator must live in the same space, so the
                # centroid comes from the rows the generator will see.
                self.registry.register(ClassPrototype(
                    class_id=c, centroid=rows.mean(axis=0),
                    state_first_seen=state_idx))
                new_feats[c] = rows
            self._train_state(state_idx, new_feats, past_ids=list(seen))
            self.train_view.retire(classes)
            del new_feats
            seen = sorted(seen + list(classes))
            reports.append(self._evaluate(state_idx, seen, classes))
        return reports


def run(config: RunConfig, train_store: FeatureStore,
        test_store: FeatureStore) -> list[StateReport]:
    """Run the full incremental protocol once; one report per state."""
    return ProtocolRun(config, train_store, test_store).execute()


def run_repeats(config: RunConfig, train_store: FeatureStore,
                test_store: FeatureStore, repeats: int = 3) -> list[list[StateReport]]:
    """Run ``repeats`` seeded executions; repeat i uses a seed derived from
    the base seed so repeats are independent but reproducible."""
    if repeats < 1:
        raise ContractError(f"repeats must be >= 1, got {repeats}")
    out = []
    for i in range(repeats):
        seed = config.seed + REPEAT_SEED_STRIDE * i
        out.append(run(config.with_seed(seed), train_store, test_store))
    return out
