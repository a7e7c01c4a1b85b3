"""Pairwise maximum-entropy model core.

The model assigns each n-voice, l-column grid s an energy

    E(s) = - sum over features of theta_f * f(s)

where a feature f counts occurrences of a symbol pair (a at voice i, b at
voice j, offset k columns to the right), and local fields count single
symbol occurrences.  (a,b,i,j,k) and (b,a,j,i,-k) name the same feature, so
parameters are stored under one canonical representative: k > 0, or k = 0
with i < j, or the local field (k = 0, i = j, a = b).  Same-voice pairs
reach |k| <= K, cross-voice pairs |k| <= L <= K.  Boundaries are open:
pairs with an endpoint off the grid contribute nothing.

With the rhythm extension, local fields depend on the metrical position
(column index mod bins_per_cycle) and live in a separate table; pair
parameters stay translation-invariant.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .errors import (
    ParseError,
    ScopeError,
    ShapeError,
    TooLargeError,
    ValidationError,
    VersionError,
    ZeroFeatureError,
)
from .symbols import Symbol, parse_cell

MODEL_VERSION = 1

PairKey = Tuple[Symbol, Symbol, int, int, int]
PosKey = Tuple[int, Symbol, int]


@dataclass
class Topology:
    """Shape of the feature family: voices, scopes, alphabets, rhythm."""

    n: int
    K: int
    L: int
    alphabets: list
    rhythm: Optional[int] = None  # bins_per_cycle, None when the extension is off

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("topology needs at least one voice")
        if not 0 <= self.L <= self.K:
            raise ValidationError(f"scopes must satisfy 0 <= L <= K, got K={self.K}, L={self.L}")
        if len(self.alphabets) != self.n:
            raise ValidationError(f"expected {self.n} alphabets, got {len(self.alphabets)}")
        if any(len(a) == 0 for a in self.alphabets):
            raise ValidationError("alphabets must be non-empty")
        if any(len(set(a)) != len(a) for a in self.alphabets):
            raise ValidationError("alphabets must not repeat symbols")
        if self.rhythm is not None and self.rhythm < 1:
            raise ValidationError("bins_per_cycle must be a positive integer")
        self.symbol_index = [{sym: idx for idx, sym in enumerate(a)} for a in self.alphabets]

    def scope(self, i: int, j: int) -> int:
        return self.K if i == j else self.L

    def mean_alphabet_size(self) -> float:
        return sum(len(a) for a in self.alphabets) / self.n


def canonicalize(a: Symbol, b: Symbol, i: int, j: int, k: int, topology: Topology) -> PairKey:
    """Map a feature name to its unique stored representative.

    (a,b,i,j,k) and (b,a,j,i,-k) describe the same pair; the representative
    has k > 0, or k = 0 with i < j, or is a local field (k = 0, i = j,
    a = b).  A same-cell pair of distinct symbols can never occur, so it is
    excluded from the family.
    """
    if not (0 <= i < topology.n and 0 <= j < topology.n):
        raise ScopeError(f"voice index out of range: ({i}, {j})")
    if abs(k) > topology.scope(i, j):
        raise ScopeError(f"offset {k} exceeds scope for voices ({i}, {j})")
    if k < 0 or (k == 0 and i > j):
        a, b, i, j, k = b, a, j, i, -k
    if k == 0 and i == j and a != b:
        raise ZeroFeatureError(f"feature ({a!r}, {b!r}, {i}, {i}, 0) is identically zero")
    return (a, b, i, j, k)


def count_features(grid, topology: Topology) -> Dict[PairKey, int]:
    """Occurrence counts of every canonical feature in a grid.

    Pair counts fold both orientations into the canonical key.  Without the
    rhythm extension, local-field counts appear as (a, a, i, i, 0) keys;
    with it, use count_position_fields for the unary part.
    """
    n, K, L = topology.n, topology.K, topology.L
    l = len(grid[0])
    counts: Dict[PairKey, int] = {}

    def bump(key):
        counts[key] = counts.get(key, 0) + 1

    for i in range(n):
        row = grid[i]
        for m in range(l):
            a = row[m]
            if topology.rhythm is None:
                bump((a, a, i, i, 0))
            for j in range(i + 1, n):  # vertical pairs, i < j canonical
                bump((a, grid[j][m], i, j, 0))
            for k in range(1, K + 1):  # rightward pairs, k > 0 canonical
                if m + k >= l:
                    break
                for j in range(n):
                    if k <= topology.scope(i, j):
                        bump((a, grid[j][m + k], i, j, k))
    return counts


def count_position_fields(grid, topology: Topology) -> Dict[PosKey, int]:
    """Occurrence counts keyed by (voice, symbol, metrical position)."""
    if topology.rhythm is None:
        raise ValidationError("position fields require the rhythm extension")
    M = topology.rhythm
    counts: Dict[PosKey, int] = {}
    for v, row in enumerate(grid):
        for m, sym in enumerate(row):
            key = (v, sym, m % M)
            counts[key] = counts.get(key, 0) + 1
    return counts


@dataclass(eq=False)
class Model:
    """Topology plus sparse parameters; absent keys mean theta = 0."""

    topology: Topology
    params: Dict[PairKey, float] = field(default_factory=dict)
    position_fields: Optional[Dict[PosKey, float]] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.topology.rhythm is not None) and self.position_fields is None:
            self.position_fields = {}
        if (self.topology.rhythm is None) and self.position_fields is not None:
            raise ValidationError("position fields require the rhythm extension")

    def theta(self, key: PairKey) -> float:
        return self.params.get(key, 0.0)

    def local_field(self, voice: int, sym: Symbol, column: int) -> float:
        if self.topology.rhythm is None:
            return self.params.get((sym, sym, voice, voice, 0), 0.0)
        return self.position_fields.get((voice, sym, column % self.topology.rhythm), 0.0)


def validate_model(model: Model) -> None:
    """Check every stored parameter key against the topology."""
    topo = model.topology
    for key, value in model.params.items():
        a, b, i, j, k = key
        if not math.isfinite(value):
            raise ValidationError(f"parameter {key} is not finite")
        try:
            canon = canonicalize(a, b, i, j, k, topo)
        except (ScopeError, ZeroFeatureError) as exc:
            raise ValidationError(f"parameter key {key} invalid: {exc}") from exc
        if canon != key:
            raise ValidationError(f"parameter key {key} is not canonical")
        if a not in topo.symbol_index[i] or b not in topo.symbol_index[j]:
            raise ValidationError(f"parameter key {key} names symbols outside the alphabets")
        if topo.rhythm is not None and k == 0 and i == j:
            raise ValidationError("plain local fields are invalid under the rhythm extension")
    if model.position_fields:
        for key, value in model.position_fields.items():
            v, sym, pos = key
            if not math.isfinite(value):
                raise ValidationError(f"position field {key} is not finite")
            if not 0 <= v < topo.n or sym not in topo.symbol_index[v]:
                raise ValidationError(f"position field {key} names an invalid voice or symbol")
            if not 0 <= pos < topo.rhythm:
                raise ValidationError(f"position field {key} outside the metrical cycle")


def _check_grid(grid, topology: Topology) -> None:
    if len(grid) != topology.n:
        raise ShapeError(f"grid has {len(grid)} voices, topology declares {topology.n}")
    l = len(grid[0])
    for v, row in enumerate(grid):
        if len(row) != l:
            raise ShapeError("grid rows must have equal length")
        idx = topology.symbol_index[v]
        for sym in row:
            if sym not in idx:
                raise ValidationError(f"symbol {sym!r} not in voice {v}'s alphabet")


def energy(grid, model: Model) -> float:
    """Negative weighted feature count; the probability is exp(-E)/Z."""
    counts = count_features(grid, model.topology)
    total = 0.0
    params = model.params
    for key, c in counts.items():
        th = params.get(key)
        if th is not None:
            total += th * c
    if model.topology.rhythm is not None:
        pf = model.position_fields
        for key, c in count_position_fields(grid, model.topology).items():
            th = pf.get(key)
            if th is not None:
                total += th * c
    return -total


def cell_scores(grid, voice: int, t: int, model: Model) -> np.ndarray:
    """Score of each candidate symbol at cell (voice, t).

    score(c) = local field + sum of thetas coupling c to every neighbor
    cell within scope; the conditional distribution is softmax(score).
    Terms not involving the cell cancel from the conditional, so only the
    K-window around column t is read.
    """
    topo = model.topology
    alphabet = topo.alphabets[voice]
    l = len(grid[0])
    params = model.params
    scores = np.empty(len(alphabet))
    for ci, c in enumerate(alphabet):
        s = model.local_field(voice, c, t)
        for w in range(topo.n):
            row = grid[w]
            reach = topo.scope(voice, w)
            for d in range(-reach, reach + 1):
                if d == 0 and w == voice:
                    continue
                u = t + d
                if not 0 <= u < l:
                    continue
                key = canonicalize(c, row[u], voice, w, d, topo)
                th = params.get(key)
                if th is not None:
                    s += th
        scores[ci] = s
    return scores


def conditional_distribution(grid, voice: int, t: int, model: Model) -> np.ndarray:
    """P(cell symbol | rest of grid), a vector over the voice's alphabet."""
    scores = cell_scores(grid, voice, t, model)
    scores -= scores.max()
    w = np.exp(scores)
    return w / w.sum()


def enumerate_grids(topology: Topology, l: int) -> Iterator[tuple]:
    """All n x l grids over the per-voice alphabets, as tuples of rows."""
    cells = []
    for v in range(topology.n):
        cells.extend([topology.alphabets[v]] * l)
    n = topology.n
    for flat in itertools.product(*cells):
        yield tuple(flat[v * l:(v + 1) * l] for v in range(n))


def _state_count(topology: Topology, l: int) -> float:
    total = 1.0
    for a in topology.alphabets:
        total *= float(len(a)) ** l
    return total


def exact_partition_oracle(model: Model, l: int) -> float:
    """Z(theta) by exhaustive enumeration; desk-scale only."""
    if _state_count(model.topology, l) > 1e7:
        raise TooLargeError("state space exceeds the enumeration guard (1e7)")
    return sum(math.exp(-energy(g, model)) for g in enumerate_grids(model.topology, l))


def exact_distribution(model: Model, l: int):
    """All states with their exact probabilities; desk-scale only."""
    if _state_count(model.topology, l) > 1e7:
        raise TooLargeError("state space exceeds the enumeration guard (1e7)")
    states = list(enumerate_grids(model.topology, l))
    neg_e = np.array([-energy(g, model) for g in states])
    neg_e -= neg_e.max()
    p = np.exp(neg_e)
    p /= p.sum()
    return states, p


def _sym_to_json(sym: Symbol):
    return sym


def model_to_doc(model: Model) -> dict:
    topo = model.topology
    doc = {
        "version": MODEL_VERSION,
        "topology": {
            "n": topo.n,
            "K": topo.K,
            "L": topo.L,
            "alphabets": [list(a) for a in topo.alphabets],
            "rhythm": {"bins_per_cycle": topo.rhythm} if topo.rhythm is not None else None,
        },
        "params": sorted(
            ([_sym_to_json(a), _sym_to_json(b), i, j, k, v]
             for (a, b, i, j, k), v in model.params.items()),
            key=lambda e: (e[2], e[3], e[4], str(e[0]), str(e[1]))),
        "position_fields": None,
        "metadata": dict(model.metadata),
    }
    if model.position_fields is not None:
        doc["position_fields"] = sorted(
            ([v, _sym_to_json(sym), pos, val]
             for (v, sym, pos), val in model.position_fields.items()),
            key=lambda e: (e[0], e[2], str(e[1])))
    return doc


def model_from_doc(doc: dict) -> Model:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    if doc.get("version") != MODEL_VERSION:
        raise VersionError(f"unsupported model version: {doc.get('version')!r}")
    t = doc.get("topology")
    if not isinstance(t, dict):
        raise ParseError("model 'topology' must be an object")
    try:
        rhythm_doc = t.get("rhythm")
        rhythm = None if rhythm_doc is None else rhythm_doc["bins_per_cycle"]
        alphabets = [[parse_cell(c) for c in a] for a in t["alphabets"]]
        topo = Topology(n=t["n"], K=t["K"], L=t["L"], alphabets=alphabets, rhythm=rhythm)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed topology: {exc}") from exc
    params: Dict[PairKey, float] = {}
    for entry in doc.get("params", []):
        if not (isinstance(entry, list) and len(entry) == 6):
            raise ParseError(f"malformed parameter entry: {entry!r}")
        a, b, i, j, k, value = entry
        key = (parse_cell(a), parse_cell(b), i, j, k)
        if key in params:
            raise ValidationError(f"duplicate parameter key {key}")
        params[key] = float(value)
    position_fields = None
    pf_doc = doc.get("position_fields")
    if pf_doc is not None:
        position_fields = {}
        for entry in pf_doc:
            if not (isinstance(entry, list) and len(entry) == 4):
                raise ParseError(f"malformed position-field entry: {entry!r}")
            v, sym, pos, value = entry
            key = (v, parse_cell(sym), pos)
            if key in position_fields:
                raise ValidationError(f"duplicate position-field key {key}")
            position_fields[key] = float(value)
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ParseError("model 'metadata' must be an object")
    model = Model(topology=topo, params=params, position_fields=position_fields,
                  metadata=metadata)
    validate_model(model)
    return model


def save_model(model: Model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_doc(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> Model:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read model file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: {exc}") from exc
    return model_from_doc(doc)


def enumerate_family(topology: Topology, include_locals: bool = True):
    """Every canonical feature key the topology admits.

    Used to size the parameter space and to drive dense oracles; training
    only ever materializes keys observed in data.
    """
    keys = []
    n, K, L = topology.n, topology.K, topology.L
    if include_locals and topology.rhythm is None:
        for i in range(n):
            for a in topology.alphabets[i]:
                keys.append((a, a, i, i, 0))
    for i in range(n):
        for j in range(i + 1, n):
            for a in topology.alphabets[i]:
                for b in topology.alphabets[j]:
                    keys.append((a, b, i, j, 0))
    for k in range(1, K + 1):
        for i in range(n):
            for j in range(n):
                if k > topology.scope(i, j):
                    continue
                for a in topology.alphabets[i]:
                    for b in topology.alphabets[j]:
                        keys.append((a, b, i, j, k))
    return keys
