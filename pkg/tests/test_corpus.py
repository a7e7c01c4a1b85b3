
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from notefield import corpus as C
from notefield.errors import (
    EmptyBeatError,
    ParseError,
    RangeError,
    ResolutionError,
    ShapeError,
)
from notefield.symbols import HOLD, REST


def grid_piece(grid, mode="major", key=0, **kw):
    return C.Piece(id="p", mode=mode, original_key=key, grid=grid, **kw)


def event_piece(events, mode="major", key=0, **kw):
    return C.Piece(id="p", mode=mode, original_key=key, events=events, **kw)


# ---------------------------------------------------------------- parsing

def test_corpus_doc_round_trip(tmp_path):
    doc = {
        "voices": 2,
        "pieces": [
            {"id": "a", "mode": "major", "original_key": 0,
             "grid": [[60, 62], [48, 48]]},
            {"id": "b", "mode": "minor", "original_key": 9, "beats_per_bar": 4,
             "grid": [[57, "R"], [45, "H"]]},
        ],
    }
    corp = C.corpus_from_doc(doc)
    assert corp.voices == 2
    assert corp.alphabets[0] == [57, 60, 62, REST]
    path = tmp_path / "c.json"
    C.save_corpus(corp, path)
    again = C.load_corpus(path)
    assert C.corpus_to_doc(again) == C.corpus_to_doc(corp)
    assert C.corpus_fingerprint(again) == C.corpus_fingerprint(corp)


def test_corpus_rejects_bad_cells_and_shapes():
    base = {"voices": 1, "pieces": [{"id": "a", "mode": "major", "original_key": 0}]}
    bad_cell = dict(base, pieces=[dict(base["pieces"][0], grid=[[60, "X"]])])
    with pytest.raises(ParseError):
        C.corpus_from_doc(bad_cell)
    out_of_range = dict(base, pieces=[dict(base["pieces"][0], grid=[[200]])])
    with pytest.raises(ParseError):
        C.corpus_from_doc(out_of_range)
    ragged = {"voices": 2, "pieces": [dict(base["pieces"][0], grid=[[60, 62], [48]])]}
    with pytest.raises(ShapeError):
        C.corpus_from_doc(ragged)
    wrong_voices = {"voices": 3, "pieces": [dict(base["pieces"][0], grid=[[60], [48]])]}
    with pytest.raises(ShapeError):
        C.corpus_from_doc(wrong_voices)
    with pytest.raises(ParseError):
        C.corpus_from_doc({"voices": 1, "pieces": [dict(base["pieces"][0], mode="dorian", grid=[[60]])]})


def test_corpus_event_piece_parsing():
    doc = {"voices": 2, "pieces": [
        {"id": "e", "mode": "major", "original_key": 0,
         "events": [[0, 0, 2, 60], [1, 0, 2, 48]]}]}
    corp = C.corpus_from_doc(doc)
    assert corp.pieces[0].events == [(0, 0, 2, 60), (1, 0, 2, 48)]
    bad = {"voices": 2, "pieces": [
        {"id": "e", "mode": "major", "original_key": 0, "events": [[0, 0, 0, 60]]}]}
    with pytest.raises(ParseError):
        C.corpus_from_doc(bad)


def test_piece_requires_exactly_one_of_grid_events():
    with pytest.raises(ParseError):
        C.Piece(id="p", mode="major", original_key=0)
    with pytest.raises(ParseError):
        C.Piece(id="p", mode="major", original_key=0, grid=[[60]], events=[(0, 0, 1, 60)])


def test_load_corpus_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        C.load_corpus(path)
    with pytest.raises(ParseError):
        C.load_corpus(tmp_path / "missing.json")


# ---------------------------------------------------------------- beat_quantize

def test_beat_quantize_sustained_note_sampled_at_each_beat():
    p = event_piece([(0, 0, 4, 60)])  # half note over beats 0 and 2
    q = C.beat_quantize(p, [0, 2])
    assert q.grid == [[60, 60]]


def test_beat_quantize_keeps_onset_symbol_of_subdivided_beat():
    # eighth pair (C4, D4) inside beat 0: the symbol sounding at the beat onset wins
    p = event_piece([(0, 0, 1, 60), (0, 1, 1, 62), (0, 2, 2, 64)])
    q = C.beat_quantize(p, [0, 2])
    assert q.grid == [[60, 64]]


def test_beat_quantize_silent_beat():
    p = event_piece([(0, 0, 1, 60)])
    with pytest.raises(EmptyBeatError):
        C.beat_quantize(p, [0, 1])
    q = C.beat_quantize(p, [0, 1], rhythm=True)
    assert q.grid == [[60, REST]]


def test_beat_quantize_onset_only_flag():
    p = event_piece([(0, 0, 4, 60)])
    q = C.beat_quantize(p, [0, 2], rhythm=True, onset_only=True)
    assert q.grid == [[60, REST]]  # sustain alone does not count


# ---------------------------------------------------------------- transposition

def test_transpose_to_c_identity_for_c():
    p = grid_piece([[60, 64]], key=0)
    q = C.transpose_to_c(p)
    assert q.grid == p.grid and q.original_key == 0


def test_transpose_to_c_examples():
    d = C.transpose_to_c(grid_piece([[62]], key=2))
    assert d.grid == [[60]]
    g = C.transpose_to_c(grid_piece([[67]], key=7))  # shift +5, not -7
    assert g.grid == [[72]]


def test_transpose_to_c_is_idempotent_and_invertible():
    p = grid_piece([[67, 69, REST]], key=7)
    once = C.transpose_to_c(p)
    twice = C.transpose_to_c(once)
    assert twice.grid == once.grid
    back = C.transpose_piece(once, -C.shift_to_c(7), original_key=7)
    assert back.grid == p.grid


def test_transpose_range_error():
    with pytest.raises(RangeError):
        C.transpose_piece(grid_piece([[126]]), 5)


# ---------------------------------------------------------------- split / alphabets

def test_split_by_mode_partitions():
    pieces = [
        C.Piece(id="m1", mode="major", original_key=0, grid=[[60]]),
        C.Piece(id="m2", mode="major", original_key=0, grid=[[62]]),
        C.Piece(id="n1", mode="minor", original_key=9, grid=[[57]]),
    ]
    corp = C.Corpus.from_pieces(1, pieces)
    major, minor = C.split_by_mode(corp)
    assert [p.id for p in major.pieces] == ["m1", "m2"]
    assert [p.id for p in minor.pieces] == ["n1"]
    assert major.alphabets == [[60, 62]]  # recomputed per sub-corpus
    assert minor.alphabets == [[57]]
    assert len(major.pieces) + len(minor.pieces) == len(corp.pieces)


def test_all_major_split_gives_empty_minor():
    corp = C.Corpus.from_pieces(1, [C.Piece(id="a", mode="major", original_key=0, grid=[[60]])])
    major, minor = C.split_by_mode(corp)
    assert len(major.pieces) == 1 and len(minor.pieces) == 0


def test_alphabet_closure_after_normalize(chorale24):
    norm = C.normalize_corpus(chorale24)
    for p in norm.pieces:
        for v, row in enumerate(p.grid):
            assert set(row) <= set(norm.alphabets[v])


# ---------------------------------------------------------------- rhythm grids

def test_encode_rhythm_quarter_note_in_eighth_bins():
    p = event_piece([(0, 0, 2, 60), (0, 2, 6, 62)])
    enc = C.encode_rhythm_grid(p, 8)
    assert enc.grid == [[60, HOLD, 62, HOLD, HOLD, HOLD, HOLD, HOLD]]
    assert enc.beats_per_bar == 8


def test_encode_rhythm_full_bar_rest_padding():
    p = event_piece([(0, 8, 8, 60)])  # silence for the whole first cycle
    enc = C.encode_rhythm_grid(p, 8)
    assert enc.grid[0][:8] == [REST] * 8
    assert enc.grid[0][8] == 60


def test_encode_rhythm_off_lattice_onset():
    p = event_piece([(0, 1, 2, 60)])
    with pytest.raises(ResolutionError):
        C.encode_rhythm_grid(p, 8, bin_divisor=2)


def test_decode_rejects_orphan_hold():
    p = grid_piece([[REST, HOLD]])
    with pytest.raises(ParseError):
        C.decode_rhythm_grid(p)


@st.composite
def voice_events(draw):
    """Non-overlapping events for a handful of voices, on an integer lattice."""
    events = []
    for v in range(draw(st.integers(1, 3))):
        t = draw(st.integers(0, 3))
        for _ in range(draw(st.integers(1, 4))):
            dur = draw(st.integers(1, 4))
            events.append((v, t, dur, draw(st.integers(40, 80))))
            t += dur + draw(st.integers(0, 3))
    return events


@given(voice_events(), st.sampled_from([4, 8]))
@settings(max_examples=60, deadline=None)
def test_rhythm_grid_round_trip(events, bins):
    p = event_piece([list(ev) for ev in events])
    enc = C.encode_rhythm_grid(p, bins)
    assert len(enc.grid[0]) % bins == 0
    decoded = C.decode_rhythm_grid(enc)
    assert decoded == sorted(events, key=lambda e: (e[1], e[0]))
