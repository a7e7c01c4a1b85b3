"""Melody reharmonization with per-beat key dispatch.

A melody is pinned into one voice and the other voices are sampled.  Moves
at beat t are scored by the model for that beat's key: the local window is
shifted into the model's C frame, candidates are clamped to pitches that
land inside the voice alphabet after the shift, and neighbors that leave
their alphabet contribute nothing.  The chain itself is the sampler's loop,
so a constant C track reproduces plain constrained sampling bit for bit.

Key detection correlates a sliding 8-beat pitch-class histogram against the
Krumhansl-Kessler major and minor profiles; the track switches keys only
when a challenger wins 4 consecutive windows, ties favoring the incumbent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import AlphabetError, MissingModelError, ValidationError
from .model import Model, canonicalize
from .sampler import (
    RNG_NAME,
    ChainSpec,
    ConstraintSet,
    SamplerConfig,
    run_chain,
)
from .symbols import is_pitch, shift_to_c, symbol_sort_key

# Krumhansl-Kessler probe-tone profiles, tonic first.
MAJOR_PROFILE = (6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88)
MINOR_PROFILE = (6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17)

KEY_WINDOW = 8
KEY_HYSTERESIS = 4

KeyLabel = Tuple[int, str]  # (pitch class of the tonic, "major" | "minor")
KeyTrack = List[KeyLabel]


def _profile_scores(hist: np.ndarray) -> dict:
    """Correlation of a pitch-class histogram against all 24 keys."""
    scores = {}
    for mode, profile in (("major", MAJOR_PROFILE), ("minor", MINOR_PROFILE)):
        prof = np.array(profile)
        for pc in range(12):
            rotated = np.roll(prof, pc)  # profile of the key with tonic pc
            if hist.std() == 0.0:
                scores[(pc, mode)] = 0.0
            else:
                scores[(pc, mode)] = float(np.corrcoef(hist, rotated)[0, 1])
    return scores


def _histogram(melody, start: int, stop: int) -> np.ndarray:
    hist = np.zeros(12)
    for sym in melody[start:stop]:
        if is_pitch(sym):
            hist[sym % 12] += 1
    return hist


_KEY_ORDER = [(pc, mode) for mode in ("major", "minor") for pc in range(12)]


def _best_key(scores: dict, incumbent: Optional[KeyLabel] = None) -> KeyLabel:
    best = max(scores.values())
    if incumbent is not None and scores[incumbent] >= best - 1e-12:
        return incumbent
    for key in _KEY_ORDER:
        if scores[key] >= best - 1e-12:
            return key
    raise AssertionError("unreachable")


def detect_keys(melody) -> KeyTrack:
    """Per-beat key labels for a melody row."""
    if not melody:
        raise ValidationError("melody must be non-empty")
    l = len(melody)
    window_scores = [_profile_scores(_histogram(melody, j, min(j + KEY_WINDOW, l)))
                     for j in range(l)]
    incumbent = _best_key(_profile_scores(_histogram(melody, 0, l)))
    track = []
    for j in range(l):
        challenger = _best_key(window_scores[j], incumbent)
        if challenger != incumbent and j + KEY_HYSTERESIS <= l:
            if all(_best_key(window_scores[j + r], incumbent) == challenger
                   for r in range(1, KEY_HYSTERESIS)):
                incumbent = challenger
        track.append(incumbent)
    return track


def keytrack_to_doc(track: KeyTrack) -> list:
    return [[beat, pc, mode] for beat, (pc, mode) in enumerate(track)]


def keytrack_from_doc(doc) -> KeyTrack:
    if not isinstance(doc, list):
        raise ValidationError("key track must be a list of [beat, keypc, mode] rows")
    entries = {}
    for row in doc:
        if not (isinstance(row, list) and len(row) == 3):
            raise ValidationError(f"malformed key-track row: {row!r}")
        beat, pc, mode = row
        if not (isinstance(beat, int) and isinstance(pc, int) and 0 <= pc <= 11):
            raise ValidationError(f"malformed key-track row: {row!r}")
        if mode not in ("major", "minor"):
            raise ValidationError(f"unknown mode in key track: {mode!r}")
        entries[beat] = (pc, mode)
    if sorted(entries) != list(range(len(entries))):
        raise ValidationError("key track must cover beats 0..l-1 exactly once")
    return [entries[beat] for beat in range(len(entries))]


def _check_same_topology(models: Dict[str, Model]) -> Model:
    first = next(iter(models.values()))
    t0 = first.topology
    for model in models.values():
        t = model.topology
        if (t.n, t.K, t.L, t.rhythm) != (t0.n, t0.K, t0.L, t0.rhythm):
            raise ValidationError("per-mode models must share voices, scopes, and rhythm")
    return first


class _KeyFrame:
    """Everything needed to score moves under one (shift, mode) pair."""

    __slots__ = ("model", "shift", "to_model", "allowed", "lf_rows", "tables")

    def __init__(self, model: Model, shift: int, working: list):
        topo = model.topology
        self.model = model
        self.shift = shift
        # working-alphabet index -> model-alphabet index, -1 when outside
        self.to_model = []
        self.allowed = []
        for v in range(topo.n):
            index = topo.symbol_index[v]
            col = []
            ok = []
            for wi, sym in enumerate(working[v]):
                shifted = sym + shift if is_pitch(sym) else sym
                mi = index.get(shifted, -1)
                col.append(mi)
                if mi >= 0:
                    ok.append(wi)
            self.to_model.append(col)
            self.allowed.append(ok)
        self.lf_rows = [self._build_lf(v, working) for v in range(topo.n)]
        self.tables = {}

    def _build_lf(self, v: int, working: list) -> list:
        topo = self.model.topology
        positions = range(topo.rhythm) if topo.rhythm is not None else (None,)
        rows = []
        for pos in positions:
            row = []
            for mi in self.to_model[v]:
                if mi < 0:
                    row.append(0.0)
                elif pos is None:
                    sym = topo.alphabets[v][mi]
                    row.append(self.model.params.get((sym, sym, v, v, 0), 0.0))
                else:
                    sym = topo.alphabets[v][mi]
                    row.append(self.model.position_fields.get((v, sym, pos), 0.0))
            rows.append(row)
        return rows

    def table(self, v: int, w: int, d: int) -> Optional[list]:
        cached = self.tables.get((v, w, d))
        if (v, w, d) in self.tables:
            return cached
        topo = self.model.topology
        params = self.model.params
        alpha_v, alpha_w = topo.alphabets[v], topo.alphabets[w]
        out = []
        nonzero = False
        for mi in self.to_model[v]:
            row = []
            for mj in self.to_model[w]:
                if mi < 0 or mj < 0:
                    row.append(0.0)  # out-of-alphabet neighbor contributes nothing
                    continue
                th = params.get(canonicalize(alpha_v[mi], alpha_w[mj], v, w, d, topo), 0.0)
                row.append(th)
                if th != 0.0:
                    nonzero = True
            out.append(row)
        result = out if nonzero else None
        self.tables[(v, w, d)] = result
        return result


@dataclass
class HarmonizationResult:
    grid: list
    key_track: KeyTrack
    metadata: dict


def reharmonize(melody, models: Dict[str, Model], target_voice: int = 0,
                track: Optional[KeyTrack] = None,
                constraints: Optional[ConstraintSet] = None,
                config: Optional[SamplerConfig] = None) -> HarmonizationResult:
    """Sample the non-melody voices under per-beat key models.

    models maps mode name to a model trained in C; the track (detected from
    the melody when not supplied) picks the model and the transposition for
    every beat.
    """
    if not melody:
        raise ValidationError("melody must be non-empty")
    if not models:
        raise MissingModelError("no models supplied")
    base = _check_same_topology(models)
    topo = base.topology
    n, l = topo.n, len(melody)
    if not 0 <= target_voice < n:
        raise ValidationError(f"target voice {target_voice} outside 0..{n - 1}")
    if track is None:
        track = detect_keys(melody)
    if len(track) != l:
        raise ValidationError(f"key track length {len(track)} != melody length {l}")
    for pc, mode in track:
        if mode not in models:
            raise MissingModelError(f"no trained model for mode {mode!r}")
    constraints = constraints or ConstraintSet()
    for (v, t) in list(constraints.pins) + list(constraints.ranges):
        if v == target_voice:
            raise ValidationError("extra constraints must not touch the melody voice")
        if not (0 <= v < n and 0 <= t < l):
            raise ValidationError(f"constraint at ({v}, {t}) outside the {n}x{l} grid")

    frames: Dict[Tuple[int, str], _KeyFrame] = {}
    labels = sorted(set(track))

    # Working alphabets: every pitch reachable in any key, plus pinned notes.
    working = [set() for _ in range(n)]
    for pc, mode in labels:
        shift = shift_to_c(pc)
        for v in range(n):
            for sym in models[mode].topology.alphabets[v]:
                working[v].add(sym - shift if is_pitch(sym) else sym)
    for sym in melody:
        working[target_voice].add(sym)
    for (v, t), sym in constraints.pins.items():
        working[v].add(sym)
    for (v, t), cells in constraints.ranges.items():
        working[v].update(cells)
    working = [sorted(w, key=symbol_sort_key) for w in working]
    working_index = [{sym: i for i, sym in enumerate(w)} for w in working]

    for pc, mode in labels:
        frames[(pc, mode)] = _KeyFrame(models[mode], shift_to_c(pc), working)

    # Melody notes must sit inside the target alphabet once shifted.
    for t, sym in enumerate(melody):
        frame = frames[track[t]]
        if frame.to_model[target_voice][working_index[target_voice][sym]] < 0:
            raise AlphabetError(
                f"melody note {sym!r} at beat {t} leaves the voice alphabet in its key")

    config = (config or SamplerConfig()).resolve(base, l)
    rng = np.random.Generator(np.random.Philox(config.seed))

    rows = [[0] * l for _ in range(n)]
    spec = ChainSpec(rows, l)
    slot_offsets = []
    for v in range(n):
        offs = []
        for w in range(n):
            reach = topo.scope(v, w)
            offs.extend((w, d) for d in range(-reach, reach + 1) if not (d == 0 and w == v))
        slot_offsets.append(offs)
    slot_cache: dict = {}

    for v in range(n):
        index = working_index[v]
        for t in range(l):
            frame = frames[track[t]]
            if v == target_voice:
                rows[v][t] = index[melody[t]]
                spec.pinned.add((v, t))
                continue
            pin = constraints.pins.get((v, t))
            if pin is not None:
                rows[v][t] = index[pin]
                spec.pinned.add((v, t))
                continue
            range_cells = constraints.ranges.get((v, t))
            if range_cells is None:
                cand = frame.allowed[v]
            else:
                in_key = set(frame.allowed[v])
                cand = sorted(index[c] for c in range_cells if index[c] in in_key)
                if not cand:
                    raise AlphabetError(
                        f"range at ({v}, {t}) has no pitch valid in key {track[t]}")
            if not cand:
                raise AlphabetError(f"voice {v} has no pitch valid in key {track[t]}")
            rows[v][t] = cand[int(rng.random() * len(cand))]
            cache_key = (v, track[t])
            slots = slot_cache.get(cache_key)
            if slots is None:
                slots = []
                for w, d in slot_offsets[v]:
                    table = frame.table(v, w, d)
                    if table is not None:
                        slots.append((rows[w], d, table))
                slot_cache[cache_key] = slots
            M = topo.rhythm
            lf_rows = frame.lf_rows[v]
            spec.cell_rows.append(rows[v])
            spec.cell_t.append(t)
            spec.cell_lf.append(lf_rows[t % M] if M is not None else lf_rows[0])
            spec.cell_allowed.append(cand)
            spec.cell_slots.append(slots)

    accepted, snapshots = run_chain(spec, config.total_steps, config.burn_in,
                                    config.thinning, rng,
                                    record=config.record_trajectory)
    grid = [[working[v][idx] for idx in rows[v]] for v in range(n)]
    metadata = {
        "rng": RNG_NAME,
        "seed": config.seed,
        "total_steps": config.total_steps,
        "burn_in": config.burn_in,
        "thinning": config.thinning,
        "accepted": accepted,
        "acceptance_rate": accepted / config.total_steps if config.total_steps else 0.0,
        "keys": [[pc, mode] for pc, mode in labels],
    }
    return HarmonizationResult(grid=grid, key_track=list(track), metadata=metadata)
