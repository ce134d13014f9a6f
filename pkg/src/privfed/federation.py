"""Simulated federated training rounds with encrypted model updates.

Each client holds a stratified share of the training split, rebalanced once
with SMOTE, and appends ``trees_total / rounds`` boosted trees per round. The
serialized model travels to the server as a Fernet token; the server decrypts,
scores every client model on the shared test split and combines them into a
weighted ensemble with weights proportional to F1 x training size.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import fernet, gbdt
from .data import Dataset, load_csv, partition_clients, stratified_holdout
from .dp import DpConfig, privatize
from .errors import (
    AllZeroMass,
    ConfigError,
    CryptoError,
    CryptoFailure,
    LengthMismatch,
    PrivfedError,
    TrainingFailure,
)
from .gbdt import GbdtHyper, GbdtModel
from .metrics import score
from .report import ClientRoundStats, ExperimentReport, ReportRow, RoundRecord
from .rng import derive_stream
from .smote import SmoteConfig, oversample

log = logging.getLogger(__name__)

# logical clock for token timestamps: one tick per round
LOGICAL_EPOCH = 1_700_000_000
TOKEN_TTL = 60

Tamper = Callable[[int, int, str], str]


@dataclass(frozen=True)
class FederationConfig:
    k_clients: int = 3
    rounds: int = 5
    master_seed: int = 0
    test_fraction: float = 0.2
    gbdt: GbdtHyper = field(default_factory=GbdtHyper)
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    dp: DpConfig = field(default_factory=DpConfig)
    encryption_enabled: bool = True
    decision_threshold: float = 0.5

    def validate(self) -> "FederationConfig":
        if self.k_clients < 1:
            raise ConfigError("k_clients must be >= 1")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        self.gbdt.validate()
        if self.gbdt.trees_total % self.rounds:
            raise ConfigError(
                f"gbdt.trees_total={self.gbdt.trees_total} is not divisible by rounds={self.rounds}"
            )
        if not 0.0 < self.decision_threshold < 1.0:
            raise ConfigError("decision_threshold must lie in (0, 1)")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in [0, 1)")
        return self

    @property
    def trees_per_round(self) -> int:
        return self.gbdt.trees_total // self.rounds


@dataclass(frozen=True)
class AggregationWeights:
    weights: tuple[float, ...]

    def __len__(self):
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def compute_weights(f1_scores, sizes) -> AggregationWeights:
    """w_i = f1_i * n_i / sum_j f1_j * n_j."""
    f1_scores = [float(v) for v in f1_scores]
    sizes = [int(n) for n in sizes]
    if len(f1_scores) != len(sizes):
        raise LengthMismatch(f"{len(f1_scores)} f1 scores but {len(sizes)} sizes")
    if any(not 0.0 <= v <= 1.0 for v in f1_scores) or any(n < 1 for n in sizes):
        raise ValueError("f1 scores must lie in [0, 1] and sizes must be >= 1")
    mass = [v * n for v, n in zip(f1_scores, sizes)]
    total = sum(mass)
    if total == 0:
        raise AllZeroMass("every client has f1 * size = 0")
    return AggregationWeights(tuple(m / total for m in mass))


def ensemble_scores(models, weights: AggregationWeights, X) -> np.ndarray:
    if len(models) != len(weights):
        raise LengthMismatch(f"{len(models)} models but {len(weights)} weights")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    probs = np.stack([gbdt.predict_proba(m, X) for m in models])
    s = weights.as_array() @ probs
    # guard the convex-combination bound against rounding
    return np.clip(s, probs.min(axis=0), probs.max(axis=0))


def aggregate_predict(models, weights: AggregationWeights, x, threshold: float) -> tuple[float, int]:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    s = float(ensemble_scores(models, weights, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
    return s, int(s >= threshold)


@dataclass
class ClientState:
    client_id: int
    data: Dataset
    key: fernet.SecretKey
    model: Optional[GbdtModel] = None


@dataclass
class FederationState:
    config: FederationConfig
    train: Dataset
    test: Dataset
    clients: list[ClientState]
    round_index: int = 0
    server_models: list[GbdtModel] = field(default_factory=list)
    weights: Optional[AggregationWeights] = None
    encryption_identical: bool = True


def init_state(config: FederationConfig, dataset: Dataset) -> FederationState:
    """Holdout, partition, per-client SMOTE and session keys."""
    config.validate()
    train, test = stratified_holdout(dataset, config.test_fraction, config.master_seed)
    parts = partition_clients(train, config.k_clients, config.master_seed)
    keys = fernet.session_keys(config.k_clients, config.master_seed)
    clients = []
    for part, key in zip(parts, keys):
        rng = derive_stream(config.master_seed, "smote", part.client_id)
        clients.append(ClientState(part.client_id, oversample(part.data, config.smote, rng=rng), key))
    return FederationState(config=config, train=train, test=test, clients=clients)


def _client_step(client: ClientState, config: FederationConfig, round_index: int):
    try:
        model = gbdt.train_increment(
            client.model, client.data, config.gbdt, config.trees_per_round,
            seed=config.master_seed,
        )
    except PrivfedError as exc:
        raise TrainingFailure(f"client {client.client_id}: {exc}") from exc
    payload = gbdt.serialize(model)
    token = None
    if config.encryption_enabled:
        iv = derive_stream(config.master_seed, f"iv/client{client.client_id}", round_index).bytes(16)
        token = fernet.encrypt(client.key, payload, LOGICAL_EPOCH + round_index, iv)
    return model, payload, token


def run_round(state: FederationState, serial: bool = False, tamper: Tamper | None = None) -> RoundRecord:
    """Advance every client by one round and evaluate on the server.

    ``tamper(client_id, round_index, token)`` lets tests corrupt tokens in
    transit.
    """
    config = state.config
    r = state.round_index + 1
    if serial or len(state.clients) == 1:
        results = [_client_step(c, config, r) for c in state.clients]
    else:
        with ThreadPoolExecutor(max_workers=len(state.clients)) as pool:
            results = list(pool.map(lambda c: _client_step(c, config, r), state.clients))

    # server barrier
    received, stats = [], []
    for client, (model, payload, token) in zip(state.clients, results):
        client.model = model
        if token is not None:
            if tamper is not None:
                token = tamper(client.client_id, r, token)
            try:
                plain = fernet.decrypt(client.key, token, ttl=TOKEN_TTL, now=LOGICAL_EPOCH + r)
            except CryptoError as exc:
                raise CryptoFailure(client.client_id, exc) from exc
            state.encryption_identical &= plain == payload
        else:
            plain = payload
        try:
            server_model = gbdt.deserialize(plain)
        except PrivfedError as exc:
            raise CryptoFailure(client.client_id, exc) from exc
        received.append(server_model)
        pred = (gbdt.predict_proba(server_model, state.test.features) >= config.decision_threshold).astype(np.int64)
        acc, f1, _ = score(state.test.labels, pred)
        stats.append(ClientRoundStats(
            client_id=client.client_id,
            accuracy=acc,
            f1=f1,
            model_bytes_len=len(payload),
            token_len=0 if token is None else len(token),
        ))

    weights = compute_weights([s.f1 for s in stats], [c.data.n for c in state.clients])
    scores = ensemble_scores(received, weights, state.test.features)
    labels = (scores >= config.decision_threshold).astype(np.int64)
    g_acc, g_f1, _ = score(state.test.labels, labels)
    dp_labels = privatize(scores, config.dp, config.decision_threshold,
                          derive_stream(config.master_seed, "dp/global", 0))
    dp_acc, dp_f1, _ = score(state.test.labels, dp_labels)

    state.round_index = r
    state.server_models = received
    state.weights = weights
    log.info("round %d: global accuracy %.4f f1 %.4f (dp %.4f)", r, g_acc, g_f1, dp_acc)
    return RoundRecord(
        round_index=r,
        per_client=tuple(stats),
        weights=weights.weights,
        global_accuracy=g_acc,
        global_f1=g_f1,
        dp_global_accuracy=dp_acc,
        dp_global_f1=dp_f1,
    )


def _evaluate_row(name, scores, test: Dataset, config: FederationConfig, dp_domain, enc):
    labels = (scores >= config.decision_threshold).astype(np.int64)
    acc, f1, degenerate = score(test.labels, labels)
    if dp_domain is None:
        return ReportRow(name, acc, f1, None, None, None, enc), degenerate
    dp_labels = privatize(scores, config.dp, config.decision_threshold,
                          derive_stream(config.master_seed, *dp_domain))
    dp_acc, dp_f1, dp_degenerate = score(test.labels, dp_labels)
    return ReportRow(name, acc, f1, dp_acc, dp_f1, dp_acc - acc, enc), degenerate or dp_degenerate


def run_experiment(config: FederationConfig, dataset, serial: bool = False,
                   tamper: Tamper | None = None) -> ExperimentReport:
    """Full pipeline: load, split, SMOTE, R rounds, centralized baseline.

    ``dataset`` is a CSV path or an already loaded :class:`Dataset`.
    """
    config.validate()
    dataset_path = None
    if not isinstance(dataset, Dataset):
        dataset_path = os.fspath(dataset)
        dataset = load_csv(dataset_path)
    state = init_state(config, dataset)
    trajectory = [run_round(state, serial=serial, tamper=tamper) for _ in range(config.rounds)]

    enc = "identical" if state.encryption_identical else "divergent"
    rows, degenerate = [], False
    for client, model in zip(state.clients, state.server_models):
        row, deg = _evaluate_row(
            f"Client {client.client_id + 1}", gbdt.predict_proba(model, state.test.features),
            state.test, config, ("dp/client", client.client_id), enc,
        )
        rows.append(row)
        degenerate |= deg
    row, deg = _evaluate_row(
        "Global Model", ensemble_scores(state.server_models, state.weights, state.test.features),
        state.test, config, ("dp/global", 0), enc,
    )
    rows.append(row)
    degenerate |= deg

    try:
        baseline = gbdt.train_increment(None, state.train, config.gbdt, config.gbdt.trees_total,
                                        seed=config.master_seed)
    except PrivfedError as exc:
        raise TrainingFailure(f"centralized baseline: {exc}") from exc
    row, deg = _evaluate_row(
        "Centralized Baseline", gbdt.predict_proba(baseline, state.test.features),
        state.test, config, None, None,
    )
    rows.append(row)
    degenerate |= deg

    return ExperimentReport(
        config=config_echo(config, dataset_path),
        rows=tuple(rows),
        trajectory=tuple(trajectory),
        f1_degenerate=degenerate,
        n_train=state.train.n,
        n_test=state.test.n,
        client_sizes=tuple(c.data.n for c in state.clients),
    )


def config_echo(config: FederationConfig, dataset_path: str | None = None) -> dict:
    echo = asdict(config)
    echo["dataset_path"] = dataset_path
    return echo
