"""Grid cell symbols: integer MIDI pitches plus the rest/hold markers.

A cell is either an ``int`` pitch in [0, 127], the rest symbol ``"R"``, or
the hold symbol ``"H"`` (continuation of the previous note).  Rest and hold
only occur in corpora prepared for the rhythm extension.
"""

from __future__ import annotations

from typing import Union

from .errors import ParseError, RangeError

Symbol = Union[int, str]

REST = "R"
HOLD = "H"

# Rows are voices (top to bottom), columns are beats / metrical positions.
Grid = list


def is_pitch(sym: Symbol) -> bool:
    return isinstance(sym, int) and not isinstance(sym, bool)


def validate_symbol(sym: Symbol) -> Symbol:
    if is_pitch(sym):
        if not 0 <= sym <= 127:
            raise RangeError(f"pitch {sym} outside [0, 127]")
        return sym
    if sym in (REST, HOLD):
        return sym
    raise ParseError(f"invalid cell symbol: {sym!r}")


def symbol_sort_key(sym: Symbol) -> tuple:
    """Pitches ascending, then Rest, then Hold."""
    if is_pitch(sym):
        return (0, sym)
    return (1, 0) if sym == REST else (2, 0)


def shift_symbol(sym: Symbol, semitones: int) -> Symbol:
    """Transpose a pitch; rest and hold are unchanged."""
    if not is_pitch(sym):
        return sym
    shifted = sym + semitones
    if not 0 <= shifted <= 127:
        raise RangeError(f"pitch {sym} shifted by {semitones} leaves [0, 127]")
    return shifted


def shift_to_c(key_pc: int) -> int:
    """Semitone shift that moves pitch-class ``key_pc`` to C.

    The representative of -key_pc mod 12 inside [-6, +5]; the tie at six
    semitones resolves to -6 so voices stay near their tessitura.
    """
    return (-key_pc + 6) % 12 - 6


def parse_cell(raw) -> Symbol:
    """Decode one JSON grid cell."""
    if isinstance(raw, bool):
        raise ParseError(f"invalid cell symbol: {raw!r}")
    if isinstance(raw, int):
        return validate_symbol(raw)
    if raw in (REST, HOLD):
        return raw
    raise ParseError(f"invalid cell symbol: {raw!r}")
