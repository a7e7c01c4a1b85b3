"""Metropolis-Hastings generation with pins and pitch-set constraints.

Proposals change one cell: a uniformly chosen unpinned cell gets a
uniformly chosen candidate from its allowed set (possibly the current
symbol, which keeps the proposal symmetric).  The acceptance ratio uses
only the parameters touching the changed cell, so one step costs O(nK)
lookups regardless of sequence length.

The chain state is kept as per-voice lists of alphabet indices, and all
couplings are flattened into per-voice lookup tables before the loop runs;
the loop itself is plain Python tuned to stay a few microseconds per step.
The reharmonizer drives the same loop with per-beat tables, which keeps the
two generators bit-identical when every beat carries the same key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, FullyPinnedError, ValidationError
from .model import Model, Topology, canonicalize
from .symbols import Symbol

RNG_NAME = "philox4x64"
DEFAULT_BUDGET_CONSTANT = 20
_BLOCK = 8192


@dataclass
class ConstraintSet:
    pins: Dict[Tuple[int, int], Symbol] = field(default_factory=dict)
    ranges: Dict[Tuple[int, int], list] = field(default_factory=dict)


def constraints_from_doc(doc) -> ConstraintSet:
    if doc is None:
        return ConstraintSet()
    if not isinstance(doc, dict):
        raise ValidationError("constraint document must be a JSON object")
    cs = ConstraintSet()
    for entry in doc.get("pins", []):
        if not (isinstance(entry, list) and len(entry) == 3):
            raise ValidationError(f"malformed pin entry: {entry!r}")
        v, t, cell = entry
        cs.pins[(v, t)] = cell
    for entry in doc.get("ranges", []):
        if not (isinstance(entry, list) and len(entry) == 3 and isinstance(entry[2], list)):
            raise ValidationError(f"malformed range entry: {entry!r}")
        v, t, cells = entry
        cs.ranges[(v, t)] = list(cells)
    return cs


def constraints_to_doc(cs: ConstraintSet) -> dict:
    return {
        "pins": [[v, t, cell] for (v, t), cell in sorted(cs.pins.items())],
        "ranges": [[v, t, list(cells)] for (v, t), cells in sorted(cs.ranges.items())],
    }


def validate_constraints(cs: ConstraintSet, topology: Topology, l: int) -> None:
    for (v, t), cell in cs.pins.items():
        if not (0 <= v < topology.n and 0 <= t < l):
            raise ValidationError(f"pin at ({v}, {t}) outside the {topology.n}x{l} grid")
        if cell not in topology.symbol_index[v]:
            raise ValidationError(f"pinned symbol {cell!r} not in voice {v}'s alphabet")
        if (v, t) in cs.ranges:
            raise ValidationError(f"cell ({v}, {t}) is both pinned and range-constrained")
    for (v, t), cells in cs.ranges.items():
        if not (0 <= v < topology.n and 0 <= t < l):
            raise ValidationError(f"range at ({v}, {t}) outside the {topology.n}x{l} grid")
        if not cells:
            raise ValidationError(f"range at ({v}, {t}) is empty")
        for cell in cells:
            if cell not in topology.symbol_index[v]:
                raise ValidationError(f"range symbol {cell!r} not in voice {v}'s alphabet")
        if len(set(cells)) != len(cells):
            raise ValidationError(f"range at ({v}, {t}) repeats symbols")


@dataclass
class SamplerConfig:
    total_steps: Optional[int] = None
    burn_in: Optional[int] = None
    thinning: Optional[int] = None
    seed: Optional[int] = None
    record_trajectory: bool = False

    def resolve(self, model: Model, l: int) -> "SamplerConfig":
        total = self.total_steps if self.total_steps is not None else default_step_budget(model, l)
        burn = self.burn_in if self.burn_in is not None else total // 2
        thin = self.thinning if self.thinning is not None else max(1, model.topology.n * l)
        seed = self.seed if self.seed is not None else int(np.random.SeedSequence().entropy % (2 ** 63))
        if total < 0 or burn < 0:
            raise ConfigError("step counts must be nonnegative")
        if total > 0 and burn >= total:
            raise ConfigError(f"burn_in ({burn}) must be smaller than total_steps ({total})")
        if thin < 1:
            raise ConfigError("thinning must be at least 1")
        return SamplerConfig(total_steps=total, burn_in=burn, thinning=thin, seed=seed,
                             record_trajectory=self.record_trajectory)


def default_step_budget(model: Model, l: int, constant: int = DEFAULT_BUDGET_CONSTANT) -> int:
    """Steps to convergence scale with n * l * mean alphabet size."""
    topo = model.topology
    return int(round(constant * topo.n * l * topo.mean_alphabet_size()))


@dataclass
class SampleResult:
    grid: list
    metadata: dict
    trajectory: Optional[np.ndarray] = None


def propose(rows: list, cells: list, allowed: list, rng) -> Tuple[Tuple[int, int], int]:
    """One proposal draw: uniform unpinned cell, uniform allowed candidate."""
    if not cells:
        raise FullyPinnedError("every cell is pinned")
    ci = int(rng.random() * len(cells))
    v, t = cells[ci]
    cand = allowed[ci]
    return (v, t), cand[int(rng.random() * len(cand))]


def acceptance_ratio(grid, move: Tuple[int, int, Symbol], model: Model) -> float:
    """alpha for a single-cell move, from the touching parameters only."""
    v, t, cand = move
    cur = grid[v][t]
    if cand == cur:
        return 1.0
    topo = model.topology
    l = len(grid[0])
    params = model.params
    delta = model.local_field(v, cand, t) - model.local_field(v, cur, t)
    for w in range(topo.n):
        row = grid[w]
        reach = topo.scope(v, w)
        for d in range(-reach, reach + 1):
            if d == 0 and w == v:
                continue
            u = t + d
            if not 0 <= u < l:
                continue
            x = row[u]
            delta += params.get(canonicalize(cand, x, v, w, d, topo), 0.0)
            delta -= params.get(canonicalize(cur, x, v, w, d, topo), 0.0)
    return math.exp(min(delta, 700.0))


class ChainSpec:
    """Flattened chain state: mutable index rows plus per-cell lookup refs.

    cell_slots[c] holds (row, d, table) triples; a candidate i replacing j
    next to neighbor symbol x changes the score by table[i][x] - table[j][x].
    """

    __slots__ = ("rows", "l", "cell_rows", "cell_t", "cell_lf", "cell_allowed",
                 "cell_slots", "pinned")

    def __init__(self, rows: list, l: int):
        self.rows = rows
        self.l = l
        self.cell_rows: list = []
        self.cell_t: list = []
        self.cell_lf: list = []
        self.cell_allowed: list = []
        self.cell_slots: list = []
        self.pinned: set = set()

    @property
    def n_cells(self) -> int:
        return len(self.cell_t)


def coupling_table(model: Model, v: int, w: int, d: int) -> Optional[list]:
    """Dense theta[candidate at voice v][neighbor at voice w, offset d] table.

    Returns None when every entry is zero so the chain can skip the slot.
    """
    topo = model.topology
    params = model.params
    table = []
    nonzero = False
    for a in topo.alphabets[v]:
        row = []
        for b in topo.alphabets[w]:
            th = params.get(canonicalize(a, b, v, w, d, topo), 0.0)
            row.append(th)
            if th != 0.0:
                nonzero = True
        table.append(row)
    return table if nonzero else None


def _local_field_rows(model: Model, v: int) -> list:
    """One score row per metrical position (a single row without rhythm)."""
    topo = model.topology
    if topo.rhythm is None:
        return [[model.params.get((a, a, v, v, 0), 0.0) for a in topo.alphabets[v]]]
    return [[model.position_fields.get((v, a, pos), 0.0) for a in topo.alphabets[v]]
            for pos in range(topo.rhythm)]


def build_chain_spec(model: Model, l: int, constraints: ConstraintSet, rng) -> ChainSpec:
    """Initial state plus lookup structure for an unconstrained-key chain.

    The initial grid draws each free cell uniformly from its allowed set,
    consuming one uniform per free cell in row-major order.
    """
    topo = model.topology
    validate_constraints(constraints, topology=topo, l=l)
    M = topo.rhythm

    slots_by_voice = []
    for v in range(topo.n):
        slots = []
        for w in range(topo.n):
            reach = topo.scope(v, w)
            for d in range(-reach, reach + 1):
                if d == 0 and w == v:
                    continue
                table = coupling_table(model, v, w, d)
                if table is not None:
                    slots.append((w, d, table))
        slots_by_voice.append(slots)
    lf_by_voice = [_local_field_rows(model, v) for v in range(topo.n)]

    rows = [[0] * l for _ in range(topo.n)]
    spec = ChainSpec(rows, l)
    bound_slots = [[(rows[w], d, tbl) for (w, d, tbl) in slots_by_voice[v]]
                   for v in range(topo.n)]
    for v in range(topo.n):
        index = topo.symbol_index[v]
        lf_rows = lf_by_voice[v]
        for t in range(l):
            pin = constraints.pins.get((v, t))
            if pin is not None:
                rows[v][t] = index[pin]
                spec.pinned.add((v, t))
                continue
            rng_cells = constraints.ranges.get((v, t))
            if rng_cells is None:
                cand = list(range(len(topo.alphabets[v])))
            else:
                cand = sorted(index[c] for c in rng_cells)
            rows[v][t] = cand[int(rng.random() * len(cand))]
            spec.cell_rows.append(rows[v])
            spec.cell_t.append(t)
            spec.cell_lf.append(lf_rows[t % M] if M is not None else lf_rows[0])
            spec.cell_allowed.append(cand)
            spec.cell_slots.append(bound_slots[v])
    return spec


def run_chain(spec: ChainSpec, total_steps: int, burn_in: int, thinning: int, rng,
              observer: Optional[Callable] = None, record: bool = False):
    """Drive the MH loop; returns (accepted count, snapshots or None).

    Consumes uniforms in blocks of three arrays (cell pick, candidate pick,
    acceptance) so runs with equal configs replay identical streams.
    """
    n_cells = spec.n_cells
    if n_cells == 0:
        raise FullyPinnedError("every cell is pinned")
    cell_rows = spec.cell_rows
    cell_t = spec.cell_t
    cell_lf = spec.cell_lf
    cell_allowed = spec.cell_allowed
    cell_slots = spec.cell_slots
    l = spec.l
    exp = math.exp

    snapshots = []
    n_recorded = (total_steps - burn_in + thinning - 1) // thinning if total_steps > burn_in else 0
    accepted = 0
    step = 0
    rec_idx = 0
    next_record = burn_in
    while step < total_steps:
        block = min(_BLOCK, total_steps - step)
        u = rng.random((3, block))
        u_cell, u_cand, u_acc = u[0].tolist(), u[1].tolist(), u[2].tolist()
        for b in range(block):
            ci = int(u_cell[b] * n_cells)
            row = cell_rows[ci]
            t = cell_t[ci]
            cand = cell_allowed[ci]
            new = cand[int(u_cand[b] * len(cand))]
            cur = row[t]
            if new == cur:
                accepted += 1
            else:
                lf = cell_lf[ci]
                delta = lf[new] - lf[cur]
                for nrow, d, tbl in cell_slots[ci]:
                    uu = t + d
                    if 0 <= uu < l:
                        x = nrow[uu]
                        delta += tbl[new][x] - tbl[cur][x]
                if delta >= 0.0 or u_acc[b] < exp(delta):
                    row[t] = new
                    accepted += 1
            if step == next_record:
                if observer is not None:
                    observer(rec_idx, spec.rows)
                if record:
                    snapshots.append(np.array(spec.rows, dtype=np.int16))
                rec_idx += 1
                next_record += thinning
            step += 1
    assert rec_idx == n_recorded
    return accepted, (np.stack(snapshots) if record and snapshots else None)


def run(model: Model, l: int, constraints: Optional[ConstraintSet] = None,
        config: Optional[SamplerConfig] = None,
        observer: Optional[Callable] = None) -> SampleResult:
    """Generate an n x l grid from the model under the given constraints."""
    if l < 0:
        raise ConfigError("sequence length must be nonnegative")
    constraints = constraints or ConstraintSet()
    config = (config or SamplerConfig()).resolve(model, l)
    topo = model.topology
    metadata = {
        "rng": RNG_NAME,
        "seed": config.seed,
        "total_steps": config.total_steps,
        "burn_in": config.burn_in,
        "thinning": config.thinning,
    }
    if l == 0:
        metadata.update(accepted=0, acceptance_rate=0.0)
        return SampleResult(grid=[[] for _ in range(topo.n)], metadata=metadata)

    rng = np.random.Generator(np.random.Philox(config.seed))
    spec = build_chain_spec(model, l, constraints, rng)
    accepted, snapshots = run_chain(spec, config.total_steps, config.burn_in,
                                    config.thinning, rng, observer=observer,
                                    record=config.record_trajectory)
    metadata.update(accepted=accepted,
                    acceptance_rate=accepted / config.total_steps if config.total_steps else 0.0)
    grid = [[topo.alphabets[v][idx] for idx in spec.rows[v]] for v in range(topo.n)]
    return SampleResult(grid=grid, metadata=metadata, trajectory=snapshots)
