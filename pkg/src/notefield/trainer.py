"""Parameter fitting by L1-regularized pseudo-likelihood.

Each interior grid cell yields one training sample: its symbol plus the
K-window around it.  The smooth loss is the mean over voices of the mean
negative conditional log-likelihood of the center symbols; its gradient per
feature is the conditional expectation of the feature minus its empirical
value.  Sufficient statistics are preprocessed into integer id tensors so
one objective evaluation is a handful of numpy gathers and scatters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import Corpus, corpus_fingerprint
from .errors import ConfigError, EmptyDatasetError, ValidationError
from .model import Model, Topology, canonicalize
from .optim import owlqn, proximal_gradient

OPTIMIZERS = ("owlqn", "proximal")

CONFIG_DOC_KEYS = {"K", "L", "lambda", "max_iterations", "tolerance", "optimizer",
                   "seed", "exempt_local_fields", "normalize_lambda",
                   "bins_per_cycle", "mode"}


def config_from_doc(doc) -> "TrainingConfig":
    """Build a TrainingConfig from a parsed config document.

    The document may also carry K, L, bins_per_cycle, and mode, which shape
    the topology and corpus split; callers read those directly.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - CONFIG_DOC_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("K", "L"):
        if key not in doc:
            raise ConfigError(f"config must set {key!r}")
        if not isinstance(doc[key], int) or doc[key] < 0:
            raise ConfigError(f"config {key!r} must be a nonnegative integer")
    if doc["L"] > doc["K"]:
        raise ConfigError("config requires L <= K")
    return TrainingConfig(
        lam=doc.get("lambda", 3e-5),
        max_iterations=doc.get("max_iterations", 500),
        tolerance=doc.get("tolerance", 1e-6),
        optimizer=doc.get("optimizer", "owlqn"),
        seed=doc.get("seed"),
        exempt_local_fields=doc.get("exempt_local_fields", False),
        normalize_lambda=doc.get("normalize_lambda", False),
    )


@dataclass
class TrainingConfig:
    lam: float = 3e-5
    max_iterations: int = 500
    tolerance: float = 1e-6
    optimizer: str = "owlqn"
    seed: Optional[int] = None
    exempt_local_fields: bool = False
    normalize_lambda: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")


@dataclass
class VoiceDataset:
    """Interior samples for one voice: (piece, column) pairs plus shared grids."""

    voice: int
    samples: list
    index_grids: list  # per piece: per voice, int array of alphabet indices
    topology: Topology


def _index_grids(corpus: Corpus, topology: Topology) -> list:
    grids = []
    for piece in corpus.pieces:
        rows = []
        for v in range(topology.n):
            idx = topology.symbol_index[v]
            try:
                rows.append(np.array([idx[sym] for sym in piece.grid[v]], dtype=np.int32))
            except KeyError as exc:
                raise ValidationError(
                    f"piece {piece.id!r}: symbol {exc.args[0]!r} not in voice {v}'s alphabet"
                ) from exc
        grids.append(rows)
    return grids


def build_datasets(corpus: Corpus, topology: Topology) -> list:
    """One dataset per voice; samples are the columns whose K-window fits.

    A piece of length l contributes columns K .. l-K-1, so l - 2K samples
    per voice; shorter pieces contribute none.
    """
    if corpus.voices != topology.n:
        raise ValidationError(f"corpus has {corpus.voices} voices, topology declares {topology.n}")
    K = topology.K
    samples = []
    for p_idx, piece in enumerate(corpus.pieces):
        for t in range(K, piece.length - K):
            samples.append((p_idx, t))
    if not samples:
        raise EmptyDatasetError(f"no piece is longer than 2K = {2 * K} beats")
    grids = _index_grids(corpus, topology)
    return [VoiceDataset(voice=v, samples=list(samples), index_grids=grids, topology=topology)
            for v in range(topology.n)]


def _slots(topology: Topology, voice: int) -> list:
    """Neighbor offsets read by one sample: (other voice, column delta)."""
    out = []
    for w in range(topology.n):
        if w == voice:
            out.extend((w, d) for d in range(-topology.K, topology.K + 1) if d != 0)
        else:
            out.extend((w, d) for d in range(-topology.L, topology.L + 1))
    return out


@dataclass
class _VoiceStats:
    voice: int
    ids: np.ndarray      # (S, n_slots, A) parameter index per slot and candidate
    lfids: np.ndarray    # (S, A) unary parameter index per candidate
    center: np.ndarray   # (S,) alphabet index of the observed symbol
    emp: np.ndarray = None  # filled in at finalize, length n_keys


@dataclass
class SufficientStats:
    """Preprocessed corpus: parameter key table plus per-voice id tensors."""

    topology: Topology
    keys: list = field(default_factory=list)
    key_index: dict = field(default_factory=dict)
    voices: list = field(default_factory=list)

    @property
    def n_keys(self) -> int:
        return len(self.keys)

    @property
    def total_samples(self) -> int:
        return sum(len(vs.center) for vs in self.voices)

    def unary_mask(self) -> np.ndarray:
        """True for local-field / position-field coordinates."""
        mask = np.zeros(self.n_keys, dtype=bool)
        for idx, key in enumerate(self.keys):
            if len(key) == 3 or (key[2] == key[3] and key[4] == 0):
                mask[idx] = True
        return mask

    def _intern(self, key) -> int:
        idx = self.key_index.get(key)
        if idx is None:
            idx = len(self.keys)
            self.key_index[key] = idx
            self.keys.append(key)
        return idx


def precompute_stats(datasets: list) -> SufficientStats:
    topology = datasets[0].topology
    stats = SufficientStats(topology=topology)
    for ds in datasets:
        stats.voices.append(_build_voice_stats(stats, ds))
    for vs in stats.voices:
        S = len(vs.center)
        center_ids = vs.ids[np.arange(S), :, vs.center]
        center_lf = vs.lfids[np.arange(S), vs.center]
        flat = np.concatenate([center_ids.ravel(), center_lf])
        vs.emp = np.bincount(flat, minlength=stats.n_keys).astype(float)
    return stats


def _build_voice_stats(stats: SufficientStats, ds: VoiceDataset) -> _VoiceStats:
    topo = ds.topology
    v = ds.voice
    alphabet = topo.alphabets[v]
    A = len(alphabet)
    slots = _slots(topo, v)

    # Key lookup tables depend only on (slot, candidate, neighbor symbol).
    tables = np.empty((len(slots), A, max(len(a) for a in topo.alphabets)), dtype=np.int32)
    for s_idx, (w, d) in enumerate(slots):
        other = topo.alphabets[w]
        for ci, c in enumerate(alphabet):
            for xi, x in enumerate(other):
                tables[s_idx, ci, xi] = stats._intern(canonicalize(c, x, v, w, d, topo))

    S = len(ds.samples)
    nbr = np.empty((S, len(slots)), dtype=np.int32)
    center = np.empty(S, dtype=np.int64)
    for row, (p_idx, t) in enumerate(ds.samples):
        grid = ds.index_grids[p_idx]
        center[row] = grid[v][t]
        for s_idx, (w, d) in enumerate(slots):
            nbr[row, s_idx] = grid[w][t + d]

    slot_axis = np.arange(len(slots))[None, :, None]
    cand_axis = np.arange(A)[None, None, :]
    ids = tables[slot_axis, cand_axis, nbr[:, :, None]].astype(np.int32)

    if topo.rhythm is None:
        lf_row = np.array([stats._intern((c, c, v, v, 0)) for c in alphabet], dtype=np.int32)
        lfids = np.broadcast_to(lf_row, (S, A)).copy()
    else:
        M = topo.rhythm
        pos_rows = {}
        lfids = np.empty((S, A), dtype=np.int32)
        for row, (p_idx, t) in enumerate(ds.samples):
            pos = t % M
            cached = pos_rows.get(pos)
            if cached is None:
                cached = np.array([stats._intern((v, c, pos)) for c in alphabet], dtype=np.int32)
                pos_rows[pos] = cached
            lfids[row] = cached
    return _VoiceStats(voice=v, ids=ids, lfids=lfids, center=center)


def objective_and_gradient(theta: np.ndarray, stats: SufficientStats):
    """Smooth loss (no L1 term) and its exact gradient."""
    n = len(stats.voices)
    total = 0.0
    grad = np.zeros(stats.n_keys)
    for vs in stats.voices:
        S = len(vs.center)
        scores = theta[vs.ids].sum(axis=1) + theta[vs.lfids]
        m = scores.max(axis=1)
        ex = np.exp(scores - m[:, None])
        Z = ex.sum(axis=1)
        logp = scores[np.arange(S), vs.center] - (np.log(Z) + m)
        total += -logp.mean() / n
        W = ex / Z[:, None]
        wts = np.broadcast_to(W[:, None, :], vs.ids.shape)
        cond = np.zeros(stats.n_keys)
        cond += np.bincount(vs.ids.ravel(), weights=wts.ravel(), minlength=stats.n_keys)
        cond += np.bincount(vs.lfids.ravel(), weights=W.ravel(), minlength=stats.n_keys)
        grad += (cond - vs.emp) / (S * n)
    return total, grad


def _assemble_model(theta: np.ndarray, stats: SufficientStats, metadata: dict) -> Model:
    params = {}
    position_fields = {} if stats.topology.rhythm is not None else None
    for key, value in zip(stats.keys, theta):
        if value == 0.0:
            continue
        if len(key) == 3:
            position_fields[key] = float(value)
        else:
            params[key] = float(value)
    return Model(topology=stats.topology, params=params,
                 position_fields=position_fields, metadata=metadata)


def fit(corpus: Corpus, topology: Topology, config: Optional[TrainingConfig] = None) -> Model:
    """Minimize the regularized pseudo-likelihood and package the result."""
    config = config or TrainingConfig()
    datasets = build_datasets(corpus, topology)
    stats = precompute_stats(datasets)

    lam = np.full(stats.n_keys, config.lam)
    if config.exempt_local_fields:
        lam[stats.unary_mask()] = 0.0
    if config.normalize_lambda:
        lam /= stats.total_samples

    def fun(theta):
        return objective_and_gradient(theta, stats)

    x0 = np.zeros(stats.n_keys)
    optimize = owlqn if config.optimizer == "owlqn" else proximal_gradient
    result = optimize(fun, x0, lam, max_iterations=config.max_iterations,
                      tolerance=config.tolerance)

    modes = {p.mode for p in corpus.pieces}
    metadata = {
        "lambda": config.lam,
        "optimizer": config.optimizer,
        "iterations": result.iterations,
        "converged": result.converged,
        "objective": result.objective,
        "samples": stats.total_samples,
        "corpus": corpus_fingerprint(corpus),
        "mode": modes.pop() if len(modes) == 1 else "mixed",
        "exempt_local_fields": config.exempt_local_fields,
        "normalize_lambda": config.normalize_lambda,
    }
    return _assemble_model(result.x, stats, metadata)


def fit_independent(corpus: Corpus, topology: Topology) -> Model:
    """Closed-form baseline: per-voice symbol log-frequencies, no couplings."""
    base = Topology(n=topology.n, K=0, L=0, alphabets=topology.alphabets,
                    rhythm=topology.rhythm)
    counts = [dict.fromkeys(a, 0) for a in base.alphabets]
    totals = [0] * base.n
    for piece in corpus.pieces:
        for v in range(base.n):
            for sym in piece.grid[v]:
                counts[v][sym] += 1
                totals[v] += 1
    params = {}
    position_fields = {} if base.rhythm is not None else None
    for v, table in enumerate(counts):
        for sym, c in table.items():
            if c == 0:
                continue
            value = float(np.log(c / totals[v]))
            if base.rhythm is None:
                params[(sym, sym, v, v, 0)] = value
            else:
                for pos in range(base.rhythm):
                    position_fields[(v, sym, pos)] = value
    metadata = {"baseline": "independent", "corpus": corpus_fingerprint(corpus)}
    return Model(topology=base, params=params, position_fields=position_fields,
                 metadata=metadata)
