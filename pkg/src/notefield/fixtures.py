"""Synthetic chorale-like corpora for tests and benchmarks.

Pieces are drawn from a seeded chord-progression Markov chain with
nearest-tone voice leading, which plants strong vertical (chord membership),
horizontal (stepwise motion), and diagonal correlations for the model to
recover.  A rhythmic variant emits onset lists over an 8-bin bar cycle with
position-dependent note lengths and rests.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, Piece, encode_rhythm_grid

VOICE_RANGES = ((60, 79), (55, 74), (48, 67), (36, 59))  # S, A, T, B

_MAJOR_CHORDS = {
    "I": (0, 4, 7), "ii": (2, 5, 9), "iii": (4, 7, 11),
    "IV": (5, 9, 0), "V": (7, 11, 2), "vi": (9, 0, 4),
}
_MAJOR_MOVES = {
    "I": (("IV", 0.22), ("V", 0.22), ("vi", 0.18), ("ii", 0.16), ("I", 0.12), ("iii", 0.10)),
    "ii": (("V", 0.55), ("vi", 0.15), ("IV", 0.15), ("ii", 0.15)),
    "iii": (("vi", 0.45), ("IV", 0.35), ("iii", 0.20)),
    "IV": (("V", 0.40), ("I", 0.30), ("ii", 0.20), ("IV", 0.10)),
    "V": (("I", 0.55), ("vi", 0.25), ("V", 0.20)),
    "vi": (("ii", 0.40), ("IV", 0.30), ("V", 0.20), ("vi", 0.10)),
}
_MINOR_CHORDS = {
    "i": (0, 3, 7), "iv": (5, 8, 0), "V": (7, 11, 2),
    "VI": (8, 0, 3), "III": (3, 7, 10),
}
_MINOR_MOVES = {
    "i": (("iv", 0.28), ("V", 0.26), ("VI", 0.20), ("III", 0.14), ("i", 0.12)),
    "iv": (("V", 0.45), ("i", 0.30), ("VI", 0.25)),
    "V": (("i", 0.60), ("VI", 0.25), ("V", 0.15)),
    "VI": (("iv", 0.35), ("III", 0.30), ("V", 0.20), ("VI", 0.15)),
    "III": (("VI", 0.45), ("iv", 0.35), ("III", 0.20)),
}


def _tables(mode: str):
    return (_MAJOR_CHORDS, _MAJOR_MOVES) if mode == "major" else (_MINOR_CHORDS, _MINOR_MOVES)


def _pick(rng, moves):
    names = [m[0] for m in moves]
    weights = np.array([m[1] for m in moves])
    return names[rng.choice(len(names), p=weights / weights.sum())]


def _tones_in_range(pcs, lo: int, hi: int) -> list:
    return [p for p in range(lo, hi + 1) if p % 12 in pcs]


def _nearest(candidates: list, target: int, rng) -> int:
    best = min(abs(c - target) for c in candidates)
    ties = [c for c in candidates if abs(c - target) == best]
    return min(ties) if len(ties) == 1 or rng.random() < 0.5 else max(ties)


def _progression(rng, length: int, mode: str) -> list:
    chords, moves = _tables(mode)
    name = "I" if mode == "major" else "i"
    out = []
    for _ in range(length):
        out.append(chords[name])
        name = _pick(rng, moves[name])
    return out


def _voice_line(rng, progression: list, lo: int, hi: int, is_bass: bool,
                jump_prob: float) -> list:
    line = []
    prev = None
    for pcs in progression:
        if is_bass and rng.random() < 0.85:
            candidates = _tones_in_range({pcs[0]}, lo, hi) or _tones_in_range(pcs, lo, hi)
        else:
            candidates = _tones_in_range(pcs, lo, hi)
        if prev is None or rng.random() < jump_prob:
            pitch = candidates[int(rng.random() * len(candidates))]
        else:
            pitch = _nearest(candidates, prev, rng)
        line.append(pitch)
        prev = pitch
    return line


def chorale_piece(rng, piece_id: str, length: int, mode: str,
                  jump_prob: float = 0.08) -> Piece:
    progression = _progression(rng, length, mode)
    grid = []
    for v, (lo, hi) in enumerate(VOICE_RANGES):
        grid.append(_voice_line(rng, progression, lo, hi, is_bass=(v == 3),
                                jump_prob=jump_prob))
    return Piece(id=piece_id, mode=mode, original_key=0, grid=grid)


def chorale_corpus(seed: int = 0, n_pieces: int = 24, length: int = 48,
                   mode: str = "major", jump_prob: float = 0.08) -> Corpus:
    rng = np.random.Generator(np.random.Philox(seed))
    pieces = [chorale_piece(rng, f"{mode}-{seed}-{idx:03d}", length, mode, jump_prob)
              for idx in range(n_pieces)]
    return Corpus.from_pieces(len(VOICE_RANGES), pieces)


# Duration menus per voice, keyed by metrical strength of the onset bin.
# Probabilities lean longer on strong bins and shorter off the beat, but no
# bin is ever forced into a single symbol class: that keeps the learned
# position fields moderate and the energy landscape navigable.
_DUR_MENU = {
    0: {"strong": ((1, 0.25), (2, 0.45), (4, 0.30)), "weak": ((1, 0.60), (2, 0.40))},
    1: {"strong": ((1, 0.20), (2, 0.45), (4, 0.35)), "weak": ((1, 0.55), (2, 0.45))},
    2: {"strong": ((2, 0.40), (4, 0.60)), "weak": ((1, 0.45), (2, 0.55))},
    3: {"strong": ((2, 0.30), (4, 0.70)), "weak": ((1, 0.35), (2, 0.65))},
}
_REST_PROB = {0: 0.10, 1: 0.08, 2: 0.07, 3: 0.06}


def _rhythm_events(rng, progression: list, mode: str) -> list:
    """Events over 8-bin bars, built by walking each bar bin by bin."""
    events = []
    prev = [None, None, None, None]

    def emit(voice, bar, onset, dur, pcs, jump=0.15):
        lo, hi = VOICE_RANGES[voice]
        if voice == 3 and rng.random() < 0.85:
            candidates = _tones_in_range({pcs[0]}, lo, hi) or _tones_in_range(pcs, lo, hi)
        else:
            candidates = _tones_in_range(pcs, lo, hi)
        if prev[voice] is None or rng.random() < jump:
            pitch = candidates[int(rng.random() * len(candidates))]
        else:
            pitch = _nearest(candidates, prev[voice], rng)
        prev[voice] = pitch
        events.append((voice, bar * 8 + onset, dur, pitch))

    def pick_duration(voice, bin_):
        menu = _DUR_MENU[voice]["strong" if bin_ % 2 == 0 else "weak"]
        r = rng.random()
        acc = 0.0
        for dur, p in menu:
            acc += p
            if r < acc:
                return dur
        return menu[-1][0]

    total = 8 * len(progression)
    for voice in range(4):
        bin_ = 0
        while bin_ < total:
            dur = min(pick_duration(voice, bin_ % 8), total - bin_)
            if rng.random() < _REST_PROB[voice]:
                bin_ += dur  # leave a gap; encoding renders it as rests
                continue
            pcs = progression[bin_ // 8]  # ties across barlines are allowed
            emit(voice, 0, bin_, dur, pcs)
            bin_ += dur
    return events


def rhythm_corpus(seed: int = 0, n_pieces: int = 20, bars: int = 8,
                  mode: str = "major") -> Corpus:
    """Corpus of 8-bin-cycle grids with Rest and Hold symbols."""
    rng = np.random.Generator(np.random.Philox(seed + 7_000))
    pieces = []
    for idx in range(n_pieces):
        progression = _progression(rng, bars, mode)
        events = [list(ev) for ev in _rhythm_events(rng, progression, mode)]
        raw = Piece(id=f"rhythm-{seed}-{idx:03d}", mode=mode, original_key=0,
                    events=events, beats_per_bar=8)
        pieces.append(encode_rhythm_grid(raw, bins_per_cycle=8))
    return Corpus.from_pieces(len(VOICE_RANGES), pieces)


def scale_melody(length: int = 32, tonic: int = 60, mode: str = "major") -> list:
    """Deterministic stepwise melody walking the scale, for harmonizer demos."""
    steps = (0, 2, 4, 5, 7, 9, 11) if mode == "major" else (0, 2, 3, 5, 7, 8, 11)
    up = [tonic + s for s in steps] + [tonic + 12]
    walk = up + up[-2::-1]
    return [walk[i % len(walk)] for i in range(length)]
