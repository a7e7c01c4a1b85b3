"""Corpus ingestion and normalization.

Pieces are rectangular grids: one row per voice (top to bottom), one column
per beat or metrical position.  A richer onset-list variant carries
(voice, onset, duration, pitch) events and is converted to a grid by
beat_quantize or encode_rhythm_grid.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import (
    EmptyBeatError,
    ParseError,
    RangeError,
    ResolutionError,
    ShapeError,
)
from .symbols import HOLD, REST, is_pitch, parse_cell, shift_symbol, shift_to_c, symbol_sort_key

MODES = ("major", "minor")


@dataclass
class Piece:
    """One multi-voice piece, either as a grid or as an event list."""

    id: str
    mode: str
    original_key: int
    grid: Optional[list] = None
    beats_per_bar: Optional[int] = None
    events: Optional[list] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParseError(f"piece {self.id!r}: mode must be major or minor, got {self.mode!r}")
        if not isinstance(self.original_key, int) or not 0 <= self.original_key <= 11:
            raise ParseError(f"piece {self.id!r}: original_key must be a pitch class 0-11")
        if (self.grid is None) == (self.events is None):
            raise ParseError(f"piece {self.id!r}: exactly one of grid/events required")
        if self.grid is not None:
            if not self.grid or any(len(row) != len(self.grid[0]) for row in self.grid):
                raise ShapeError(f"piece {self.id!r}: rows must be non-empty and of equal length")
            if len(self.grid[0]) < 1:
                raise ShapeError(f"piece {self.id!r}: grid must have at least one column")

    @property
    def n_voices(self) -> int:
        if self.grid is not None:
            return len(self.grid)
        return 1 + max(ev[0] for ev in self.events)

    @property
    def length(self) -> int:
        if self.grid is None:
            raise ShapeError(f"piece {self.id!r}: event piece has no grid length")
        return len(self.grid[0])


@dataclass
class Corpus:
    """A set of pieces sharing a voice count, with data-derived alphabets."""

    voices: int
    pieces: list
    alphabets: list = field(default_factory=list)

    @classmethod
    def from_pieces(cls, voices: int, pieces: Sequence[Piece]) -> "Corpus":
        for p in pieces:
            if p.grid is not None and len(p.grid) != voices:
                raise ShapeError(f"piece {p.id!r}: has {len(p.grid)} voices, corpus declares {voices}")
        return cls(voices=voices, pieces=list(pieces), alphabets=compute_alphabets(voices, pieces))


def compute_alphabets(voices: int, pieces: Sequence[Piece]) -> list:
    """Per-voice sorted symbol sets: exactly the symbols observed, no padding."""
    seen = [set() for _ in range(voices)]
    for p in pieces:
        if p.grid is None:
            continue
        for v in range(voices):
            seen[v].update(p.grid[v])
    return [sorted(s, key=symbol_sort_key) for s in seen]


def _parse_piece(doc: dict, voices: int) -> Piece:
    if not isinstance(doc, dict):
        raise ParseError("piece entry must be an object")
    for key in ("id", "mode", "original_key"):
        if key not in doc:
            raise ParseError(f"piece missing required key {key!r}")
    pid = doc["id"]
    if not isinstance(pid, str):
        raise ParseError("piece id must be a string")
    grid = None
    events = None
    if "grid" in doc and "events" in doc:
        raise ParseError(f"piece {pid!r}: grid and events are mutually exclusive")
    if "grid" in doc:
        raw = doc["grid"]
        if not isinstance(raw, list) or not all(isinstance(r, list) for r in raw):
            raise ParseError(f"piece {pid!r}: grid must be a list of rows")
        if len(raw) != voices:
            raise ShapeError(f"piece {pid!r}: has {len(raw)} voices, corpus declares {voices}")
        try:
            grid = [[parse_cell(c) for c in row] for row in raw]
        except RangeError as exc:
            raise ParseError(f"piece {pid!r}: {exc}") from exc
    elif "events" in doc:
        raw = doc["events"]
        if not isinstance(raw, list):
            raise ParseError(f"piece {pid!r}: events must be a list")
        events = []
        for ev in raw:
            if not (isinstance(ev, list) and len(ev) == 4 and all(isinstance(x, int) for x in ev)):
                raise ParseError(f"piece {pid!r}: event must be [voice, onset, duration, pitch]")
            voice, onset, duration, pitch = ev
            if not 0 <= voice < voices:
                raise ParseError(f"piece {pid!r}: event voice {voice} outside [0, {voices})")
            if onset < 0 or duration < 1:
                raise ParseError(f"piece {pid!r}: event onset/duration out of range")
            if not 0 <= pitch <= 127:
                raise ParseError(f"piece {pid!r}: event pitch {pitch} outside [0, 127]")
            events.append((voice, onset, duration, pitch))
    else:
        raise ParseError(f"piece {pid!r}: needs a grid or an events list")
    bpb = doc.get("beats_per_bar")
    if bpb is not None and (not isinstance(bpb, int) or bpb < 1):
        raise ParseError(f"piece {pid!r}: beats_per_bar must be a positive integer")
    try:
        return Piece(id=pid, mode=doc["mode"], original_key=doc["original_key"],
                     grid=grid, beats_per_bar=bpb, events=events)
    except ParseError:
        raise
    except ShapeError:
        raise


def corpus_from_doc(doc) -> Corpus:
    """Build a Corpus from an already-parsed JSON document."""
    if not isinstance(doc, dict):
        raise ParseError("corpus document must be a JSON object")
    voices = doc.get("voices")
    if not isinstance(voices, int) or voices < 1:
        raise ParseError("corpus 'voices' must be a positive integer")
    pieces_raw = doc.get("pieces")
    if not isinstance(pieces_raw, list):
        raise ParseError("corpus 'pieces' must be a list")
    pieces = [_parse_piece(p, voices) for p in pieces_raw]
    return Corpus.from_pieces(voices, pieces)


def load_corpus(path) -> Corpus:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read corpus file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"corpus file is not valid JSON: {exc}") from exc
    return corpus_from_doc(doc)


def piece_to_doc(piece: Piece) -> dict:
    doc = {"id": piece.id, "mode": piece.mode, "original_key": piece.original_key}
    if piece.beats_per_bar is not None:
        doc["beats_per_bar"] = piece.beats_per_bar
    if piece.grid is not None:
        doc["grid"] = [list(row) for row in piece.grid]
    else:
        doc["events"] = [list(ev) for ev in piece.events]
    return doc


def corpus_to_doc(corpus: Corpus) -> dict:
    return {"voices": corpus.voices, "pieces": [piece_to_doc(p) for p in corpus.pieces]}


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w") as fh:
        json.dump(corpus_to_doc(corpus), fh, indent=1)
        fh.write("\n")


def corpus_fingerprint(corpus: Corpus) -> str:
    blob = json.dumps(corpus_to_doc(corpus), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def beat_quantize(piece: Piece, beat_grid: Sequence[int], onset_only: bool = False,
                  rhythm: bool = False) -> Piece:
    """Decimate an event piece to one column per beat.

    Each cell holds the symbol sounding at the beat's onset (a note sounds
    on [onset, onset + duration)).  With onset_only, only notes struck
    exactly on the beat are kept.  A silent beat raises EmptyBeatError
    unless the rhythm extension is on, in which case it becomes Rest.
    """
    if piece.events is None:
        raise ParseError(f"piece {piece.id!r}: beat_quantize needs an event piece")
    voices = piece.n_voices
    grid = [[None] * len(beat_grid) for _ in range(voices)]
    for voice, onset, duration, pitch in piece.events:
        for j, t in enumerate(beat_grid):
            hit = onset == t if onset_only else onset <= t < onset + duration
            if hit:
                grid[voice][j] = pitch
    for v in range(voices):
        for j in range(len(beat_grid)):
            if grid[v][j] is None:
                if not rhythm:
                    raise EmptyBeatError(
                        f"piece {piece.id!r}: voice {v} has no sounding note at beat {j}")
                grid[v][j] = REST
    return Piece(id=piece.id, mode=piece.mode, original_key=piece.original_key,
                 grid=grid, beats_per_bar=piece.beats_per_bar)


def transpose_piece(piece: Piece, semitones: int, original_key: Optional[int] = None) -> Piece:
    new_key = piece.original_key if original_key is None else original_key
    if piece.grid is not None:
        grid = [[shift_symbol(c, semitones) for c in row] for row in piece.grid]
        return Piece(id=piece.id, mode=piece.mode, original_key=new_key,
                     grid=grid, beats_per_bar=piece.beats_per_bar)
    events = [(v, o, d, p + semitones) for v, o, d, p in piece.events]
    for _, _, _, p in events:
        if not 0 <= p <= 127:
            raise RangeError(f"piece {piece.id!r}: transposition leaves [0, 127]")
    return Piece(id=piece.id, mode=piece.mode, original_key=new_key,
                 events=events, beats_per_bar=piece.beats_per_bar)


def transpose_to_c(piece: Piece) -> Piece:
    """Shift the piece so its key's tonic becomes C (pitch class 0).

    The shift is the representative of -original_key mod 12 in [-6, +5],
    keeping voices near their original tessitura.
    """
    return transpose_piece(piece, shift_to_c(piece.original_key), original_key=0)


def normalize_corpus(corpus: Corpus) -> Corpus:
    return Corpus.from_pieces(corpus.voices, [transpose_to_c(p) for p in corpus.pieces])


def split_by_mode(corpus: Corpus):
    major = [p for p in corpus.pieces if p.mode == "major"]
    minor = [p for p in corpus.pieces if p.mode == "minor"]
    return (Corpus.from_pieces(corpus.voices, major),
            Corpus.from_pieces(corpus.voices, minor))


def encode_rhythm_grid(piece: Piece, bins_per_cycle: int, bin_divisor: int = 1) -> Piece:
    """Encode an event piece as a metrical-position grid.

    Source times are divided by bin_divisor to land on the output bins; an
    onset that does not divide evenly raises ResolutionError.  A note emits
    its pitch at the onset bin and Hold for the rest of its duration;
    silence emits Rest.  Column j sits at metrical position j mod
    bins_per_cycle.
    """
    if piece.events is None:
        raise ParseError(f"piece {piece.id!r}: encode_rhythm_grid needs an event piece")
    if bins_per_cycle < 1 or bin_divisor < 1:
        raise ResolutionError("bins_per_cycle and bin_divisor must be positive")
    voices = piece.n_voices
    end = 0
    scaled = []
    for voice, onset, duration, pitch in piece.events:
        if onset % bin_divisor or duration % bin_divisor:
            raise ResolutionError(
                f"piece {piece.id!r}: event at {onset} (dur {duration}) off the bin lattice")
        o, d = onset // bin_divisor, duration // bin_divisor
        scaled.append((voice, o, d, pitch))
        end = max(end, o + d)
    length = -(-end // bins_per_cycle) * bins_per_cycle  # pad to whole cycles
    grid = [[REST] * length for _ in range(voices)]
    for voice, o, d, pitch in sorted(scaled, key=lambda e: e[1]):
        grid[voice][o] = pitch
        for t in range(o + 1, o + d):
            grid[voice][t] = HOLD
    return Piece(id=piece.id, mode=piece.mode, original_key=piece.original_key,
                 grid=grid, beats_per_bar=bins_per_cycle)


def decode_rhythm_grid(piece: Piece) -> list:
    """Invert encode_rhythm_grid: merge Hold runs, drop Rest.

    Returns (voice, onset, duration, pitch) tuples in onset order.
    """
    if piece.grid is None:
        raise ParseError(f"piece {piece.id!r}: decode_rhythm_grid needs a grid piece")
    events = []
    for v, row in enumerate(piece.grid):
        j = 0
        while j < len(row):
            sym = row[j]
            if is_pitch(sym):
                d = 1
                while j + d < len(row) and row[j + d] == HOLD:
                    d += 1
                events.append((v, j, d, sym))
                j += d
            elif sym == HOLD:
                raise ParseError(f"piece {piece.id!r}: voice {v} holds with no preceding note at {j}")
            else:
                j += 1
    events.sort(key=lambda e: (e[1], e[0]))
    return events
