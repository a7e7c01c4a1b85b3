import math

import numpy as np
import pytest

from notefield import sampler
from notefield.errors import ConfigError, FullyPinnedError, ValidationError
from notefield.model import Model, Topology, energy

from conftest import make_tiny_model


def zero_model(n=2, A=3, K=1):
    alphabets = [[60 + 2 * a for a in range(A)] for _ in range(n)]
    return Model(topology=Topology(n=n, K=K, L=K, alphabets=alphabets))


# ---------------------------------------------------------------- propose

def test_propose_uniform_over_cells_and_candidates():
    rng = np.random.Generator(np.random.Philox(1))
    n, l = 4, 10
    cells = [(v, t) for v in range(n) for t in range(l)]
    allowed = [[0, 1, 2]] * len(cells)
    rows = [[0] * l for _ in range(n)]
    draws = 1_000_000
    counts = {}
    for _ in range(draws):
        (v, t), c = sampler.propose(rows, cells, allowed, rng)
        counts[(v, t)] = counts.get((v, t), 0) + 1
    expected = draws / len(cells)
    chi2 = sum((counts.get(cell, 0) - expected) ** 2 / expected for cell in cells)
    assert chi2 < 72.05  # chi-square, 39 dof, p = 0.001


def test_propose_forced_single_cell():
    rng = np.random.Generator(np.random.Philox(2))
    rows = [[0, 0]]
    for _ in range(50):
        (v, t), c = sampler.propose(rows, [(0, 1)], [[0]], rng)
        assert (v, t, c) == (0, 1, 0)


def test_propose_never_touches_pinned_voice():
    rng = np.random.Generator(np.random.Philox(3))
    cells = [(v, t) for v in range(1, 4) for t in range(6)]  # voice 0 pinned away
    rows = [[0] * 6 for _ in range(4)]
    for _ in range(200):
        (v, _), _ = sampler.propose(rows, cells, [[0, 1]] * len(cells), rng)
        assert v != 0


def test_propose_fully_pinned():
    rng = np.random.Generator(np.random.Philox(4))
    with pytest.raises(FullyPinnedError):
        sampler.propose([[0]], [], [], rng)


# ---------------------------------------------------------------- acceptance ratio

def test_alpha_is_one_for_self_move(tiny_model):
    grid = [[60, 62, 64], [60, 62, 64]]
    assert sampler.acceptance_ratio(grid, (0, 1, 62), tiny_model) == 1.0


def test_alpha_is_one_at_zero_theta():
    m = zero_model()
    grid = [[60, 62, 64], [60, 62, 64]]
    for move in [(0, 0, 64), (1, 2, 60), (0, 1, 60)]:
        assert sampler.acceptance_ratio(grid, move, m) == 1.0


def test_incremental_alpha_matches_full_energy(tiny_model):
    rng = np.random.default_rng(9)
    alph = tiny_model.topology.alphabets
    grid = [[alph[v][rng.integers(3)] for _ in range(8)] for v in range(2)]
    for _ in range(2000):
        v = int(rng.integers(2))
        t = int(rng.integers(8))
        cand = alph[v][rng.integers(3)]
        alpha = sampler.acceptance_ratio(grid, (v, t, cand), tiny_model)
        changed = [list(r) for r in grid]
        changed[v][t] = cand
        full = math.exp(energy(grid, tiny_model) - energy(changed, tiny_model))
        assert abs(alpha - full) <= 1e-9 * full
        if rng.random() < 0.5:  # walk the state around
            grid[v][t] = cand


# ---------------------------------------------------------------- budget

def test_default_step_budget_examples():
    m = zero_model(n=4, A=20, K=1)
    assert sampler.default_step_budget(m, 100) == 160_000
    assert sampler.default_step_budget(m, 0) == 0
    uneven = Model(topology=Topology(n=2, K=1, L=1, alphabets=[[60, 62], [40, 42, 44, 46]]))
    assert sampler.default_step_budget(uneven, 10) == 20 * 2 * 10 * 3


# ---------------------------------------------------------------- run

def test_run_is_deterministic_and_seed_sensitive(tiny_model):
    cfg = sampler.SamplerConfig(total_steps=4000, seed=11)
    a = sampler.run(tiny_model, 6, config=cfg)
    b = sampler.run(tiny_model, 6, config=cfg)
    assert a.grid == b.grid
    assert a.metadata["seed"] == 11
    assert a.metadata["rng"] == "philox4x64"
    c = sampler.run(tiny_model, 6, config=sampler.SamplerConfig(total_steps=4000, seed=12))
    assert c.grid != a.grid


def test_run_zero_length(tiny_model):
    res = sampler.run(tiny_model, 0)
    assert res.grid == [[], []]
    assert res.metadata["accepted"] == 0


def test_run_honors_pins_and_ranges(tiny_model):
    cs = sampler.ConstraintSet(pins={(0, 2): 64, (1, 0): 60},
                               ranges={(0, 0): [60, 62], (1, 3): [62]})
    res = sampler.run(tiny_model, 5, constraints=cs,
                      config=sampler.SamplerConfig(total_steps=3000, seed=4))
    assert res.grid[0][2] == 64
    assert res.grid[1][0] == 60
    assert res.grid[0][0] in (60, 62)
    assert res.grid[1][3] == 62


def test_recorded_trajectory_honors_constraints(tiny_model):
    idx = tiny_model.topology.symbol_index
    rng = np.random.default_rng(21)
    alph = tiny_model.topology.alphabets
    for trial in range(10):
        pins, ranges = {}, {}
        for v in range(2):
            for t in range(6):
                r = rng.random()
                if r < 0.2:
                    pins[(v, t)] = alph[v][rng.integers(3)]
                elif r < 0.35:
                    size = int(rng.integers(1, 3))
                    ranges[(v, t)] = list(rng.choice(alph[v], size=size, replace=False))
        if len(pins) + len(ranges) == 12:
            continue
        cs = sampler.ConstraintSet(pins=pins, ranges=ranges)
        cfg = sampler.SamplerConfig(total_steps=2000, burn_in=100, thinning=50,
                                    seed=trial, record_trajectory=True)
        res = sampler.run(tiny_model, 6, constraints=cs, config=cfg)
        assert res.trajectory is not None and len(res.trajectory)
        for snap in res.trajectory:
            for (v, t), sym in pins.items():
                assert snap[v][t] == idx[v][sym]
            for (v, t), cells in ranges.items():
                assert snap[v][t] in {idx[v][c] for c in cells}


def test_trajectory_shape_and_count(tiny_model):
    cfg = sampler.SamplerConfig(total_steps=1000, burn_in=200, thinning=100,
                                seed=0, record_trajectory=True)
    res = sampler.run(tiny_model, 4, config=cfg)
    assert res.trajectory.shape == (8, 2, 4)  # records at 200, 300, ..., 900
    assert res.trajectory.dtype == np.int16


def test_fully_pinned_run(tiny_model):
    pins = {(v, t): tiny_model.topology.alphabets[v][0] for v in range(2) for t in range(3)}
    with pytest.raises(FullyPinnedError):
        sampler.run(tiny_model, 3, constraints=sampler.ConstraintSet(pins=pins),
                    config=sampler.SamplerConfig(total_steps=100, seed=0))


def test_config_validation(tiny_model):
    with pytest.raises(ConfigError):
        sampler.run(tiny_model, 4, config=sampler.SamplerConfig(total_steps=100, burn_in=100))
    with pytest.raises(ConfigError):
        sampler.run(tiny_model, 4, config=sampler.SamplerConfig(total_steps=100, thinning=0))
    with pytest.raises(ConfigError):
        sampler.run(tiny_model, -1)


def test_constraint_validation_errors(tiny_model):
    topo = tiny_model.topology
    cases = [
        sampler.ConstraintSet(pins={(0, 9): 60}),                 # off the grid
        sampler.ConstraintSet(pins={(0, 0): 61}),                 # not in alphabet
        sampler.ConstraintSet(pins={(0, 0): 60}, ranges={(0, 0): [62]}),
        sampler.ConstraintSet(ranges={(0, 0): []}),
        sampler.ConstraintSet(ranges={(0, 0): [60, 60]}),
    ]
    for cs in cases:
        with pytest.raises(ValidationError):
            sampler.validate_constraints(cs, topo, 3)


def test_constraints_doc_round_trip():
    doc = {"pins": [[0, 1, 60], [1, 2, "R"]], "ranges": [[0, 0, [60, 62]]]}
    cs = sampler.constraints_from_doc(doc)
    assert cs.pins == {(0, 1): 60, (1, 2): "R"}
    assert sampler.constraints_from_doc(sampler.constraints_to_doc(cs)).pins == cs.pins
    with pytest.raises(ValidationError):
        sampler.constraints_from_doc({"pins": [[0, 1]]})


# ---------------------------------------------------------------- balance

def test_detailed_balance_desk_scale():
    m = make_tiny_model(seed=17, n=1, l_alpha=2, K=1, theta_scale=0.8)
    states = []
    cfg = sampler.SamplerConfig(total_steps=120_000, burn_in=20_000, thinning=1, seed=33)

    def observer(_, rows):
        states.append((rows[0][0], rows[0][1]))

    sampler.run(m, 2, config=cfg, observer=observer)
    flows = {}
    for a, b in zip(states, states[1:]):
        if a != b:
            flows[(a, b)] = flows.get((a, b), 0) + 1
    seen = {tuple(sorted(pair)) for pair in flows}
    assert seen  # the chain actually moves
    for a, b in seen:
        fwd, back = flows.get((a, b), 0), flows.get((b, a), 0)
        assert abs(fwd - back) < 5 * math.sqrt(fwd + back + 1)
