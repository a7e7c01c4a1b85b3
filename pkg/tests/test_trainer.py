import numpy as np
import pytest

from notefield import fixtures, trainer
from notefield.corpus import Corpus, Piece
from notefield.errors import ConfigError, EmptyDatasetError, ValidationError
from notefield.model import Topology, count_features


def small_corpus(n_pieces=2, length=20, seed=7):
    return fixtures.chorale_corpus(seed=seed, n_pieces=n_pieces, length=length)


def grid_corpus(grids):
    pieces = [Piece(id=f"g{i}", mode="major", original_key=0, grid=g)
              for i, g in enumerate(grids)]
    return Corpus.from_pieces(len(grids[0]), pieces)


# ---------------------------------------------------------------- datasets

def test_dataset_counts_for_l20_k4():
    corp = grid_corpus([[[60] * 20, [55] * 20, [48] * 20, [40] * 20]])
    topo = Topology(n=4, K=4, L=2, alphabets=corp.alphabets)
    datasets = trainer.build_datasets(corp, topo)
    assert len(datasets) == 4
    for ds in datasets:
        assert len(ds.samples) == 12
        assert [t for _, t in ds.samples] == list(range(4, 16))


def test_dataset_single_interior_column():
    corp = grid_corpus([[[60] * 9]])
    topo = Topology(n=1, K=4, L=2, alphabets=corp.alphabets)
    (ds,) = trainer.build_datasets(corp, topo)
    assert [t for _, t in ds.samples] == [4]


def test_dataset_empty_when_pieces_too_short():
    corp = grid_corpus([[[60] * 4]])
    topo = Topology(n=1, K=4, L=2, alphabets=corp.alphabets)
    with pytest.raises(EmptyDatasetError):
        trainer.build_datasets(corp, topo)


def test_dataset_rejects_out_of_alphabet_symbols():
    corp = grid_corpus([[[60, 61, 60, 61, 60]]])
    topo = Topology(n=1, K=1, L=1, alphabets=[[60]])
    with pytest.raises(ValidationError):
        trainer.build_datasets(corp, topo)


# ---------------------------------------------------------------- objective

def test_objective_at_zero_is_mean_log_alphabet_size():
    corp = small_corpus()
    topo = Topology(n=4, K=2, L=1, alphabets=corp.alphabets)
    stats = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    value, grad = trainer.objective_and_gradient(np.zeros(stats.n_keys), stats)
    want = np.mean([np.log(len(a)) for a in corp.alphabets])
    assert abs(value - want) < 1e-12
    assert grad.shape == (stats.n_keys,)


def test_single_symbol_voice_contributes_log_one():
    corp = grid_corpus([[[60, 62, 60, 62, 60, 62], [40] * 6]])
    topo = Topology(n=2, K=1, L=0, alphabets=corp.alphabets)
    stats = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    value, _ = trainer.objective_and_gradient(np.zeros(stats.n_keys), stats)
    assert abs(value - np.log(2) / 2) < 1e-12


def test_gradient_matches_central_finite_differences():
    corp = small_corpus(n_pieces=1, length=12)
    topo = Topology(n=4, K=1, L=1, alphabets=corp.alphabets)
    stats = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    rng = np.random.default_rng(0)
    theta = rng.normal(0, 0.5, stats.n_keys)
    _, grad = trainer.objective_and_gradient(theta, stats)
    h = 1e-5
    for idx in rng.choice(stats.n_keys, size=30, replace=False):
        up, dn = theta.copy(), theta.copy()
        up[idx] += h
        dn[idx] -= h
        fd = (trainer.objective_and_gradient(up, stats)[0]
              - trainer.objective_and_gradient(dn, stats)[0]) / (2 * h)
        denom = max(abs(fd), 1e-8)
        assert abs(grad[idx] - fd) / denom < 1e-5


def test_per_voice_decomposition():
    corp = small_corpus(n_pieces=1, length=14)
    topo = Topology(n=4, K=1, L=1, alphabets=corp.alphabets)
    datasets = trainer.build_datasets(corp, topo)
    stats = trainer.precompute_stats(datasets)
    rng = np.random.default_rng(1)
    theta = rng.normal(0, 0.3, stats.n_keys)
    full, _ = trainer.objective_and_gradient(theta, stats)
    parts = []
    for ds in datasets:
        solo = trainer.precompute_stats([ds])
        theta_v = np.array([theta[stats.key_index[key]] for key in solo.keys])
        parts.append(trainer.objective_and_gradient(theta_v, solo)[0])
    assert abs(full - np.mean(parts)) < 1e-12


# ---------------------------------------------------------------- sufficient stats

def test_empirical_counts_match_feature_counts():
    corp = small_corpus(n_pieces=2, length=10)
    topo = Topology(n=4, K=0, L=0, alphabets=corp.alphabets)
    stats = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    emp = np.zeros(stats.n_keys)
    for vs in stats.voices:
        emp += vs.emp
    whole = {}
    for piece in corp.pieces:
        for key, c in count_features(piece.grid, topo).items():
            whole[key] = whole.get(key, 0) + c
    for idx, key in enumerate(stats.keys):
        a, b, i, j, _ = key
        want = whole.get(key, 0) * (1 if i == j else 2)  # pair keys hit from both voices
        assert emp[idx] == want


def test_local_field_counts_sum_to_sample_count():
    corp = small_corpus(n_pieces=2, length=12)
    topo = Topology(n=4, K=2, L=1, alphabets=corp.alphabets)
    stats = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    for vs in stats.voices:
        local_total = sum(vs.emp[idx] for idx, key in enumerate(stats.keys)
                          if key[2] == key[3] == vs.voice and key[4] == 0)
        assert local_total == len(vs.center)


def test_stats_recomputation_is_deterministic():
    corp = small_corpus(n_pieces=1, length=12)
    topo = Topology(n=4, K=1, L=1, alphabets=corp.alphabets)
    a = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    b = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    assert a.keys == b.keys
    for va, vb in zip(a.voices, b.voices):
        assert np.array_equal(va.emp, vb.emp)
        assert np.array_equal(va.ids, vb.ids)


# ---------------------------------------------------------------- fit

def test_fit_objective_no_worse_than_start():
    corp = small_corpus(n_pieces=3, length=24)
    topo = Topology(n=4, K=1, L=0, alphabets=corp.alphabets)
    lam = 1e-4
    model = trainer.fit(corp, topo, trainer.TrainingConfig(lam=lam))
    stats = trainer.precompute_stats(trainer.build_datasets(corp, topo))
    theta = np.array([model.theta(key) for key in stats.keys])
    smooth, _ = trainer.objective_and_gradient(theta, stats)
    at_zero, _ = trainer.objective_and_gradient(np.zeros(stats.n_keys), stats)
    assert smooth + lam * np.abs(theta).sum() <= at_zero + 1e-12
    assert model.metadata["converged"]


def test_huge_lambda_drives_theta_to_zero():
    corp = small_corpus(n_pieces=2, length=16)
    topo = Topology(n=4, K=1, L=0, alphabets=corp.alphabets)
    model = trainer.fit(corp, topo, trainer.TrainingConfig(lam=1e3))
    assert all(abs(v) < 1e-6 for v in model.params.values())


def test_sparsity_monotone_in_lambda(chorale24):
    topo = Topology(n=4, K=1, L=0, alphabets=chorale24.alphabets)
    nnz = []
    for lam in (1e-6, 1e-4, 1e-2):
        model = trainer.fit(chorale24, topo, trainer.TrainingConfig(lam=lam))
        nnz.append(len(model.params))
    assert nnz[0] >= nnz[1] >= nnz[2]


def test_optimizers_agree_on_objective():
    corp = small_corpus(n_pieces=2, length=20)
    topo = Topology(n=4, K=1, L=0, alphabets=corp.alphabets)
    tol = 1e-7
    runs = {}
    for opt in trainer.OPTIMIZERS:
        cfg = trainer.TrainingConfig(lam=1e-4, optimizer=opt, tolerance=tol,
                                     max_iterations=4000)
        runs[opt] = trainer.fit(corp, topo, cfg).metadata["objective"]
    assert abs(runs["owlqn"] - runs["proximal"]) <= 10 * tol * max(1.0, abs(runs["owlqn"]))


def test_fit_metadata_fields(full_model, chorale24):
    from notefield.corpus import corpus_fingerprint
    md = full_model.metadata
    assert md["lambda"] == 3e-5
    assert md["mode"] == "major"
    assert md["corpus"] == corpus_fingerprint(chorale24)
    assert md["samples"] == 4 * 24 * (48 - 8)
    assert md["iterations"] >= 1


# ---------------------------------------------------------------- config parsing

def test_config_from_doc():
    cfg = trainer.config_from_doc({"K": 4, "L": 2, "lambda": 3e-5, "optimizer": "owlqn"})
    assert (cfg.lam, cfg.optimizer) == (3e-5, "owlqn")
    with pytest.raises(ConfigError):
        trainer.config_from_doc({"L": 2})  # K required
    with pytest.raises(ConfigError):
        trainer.config_from_doc({"K": 4, "L": 2, "smoothing": 1})  # unknown key
    with pytest.raises(ConfigError):
        trainer.config_from_doc({"K": 4, "L": 2, "lambda": -1.0})
    with pytest.raises(ConfigError):
        trainer.config_from_doc({"K": 4, "L": 2, "optimizer": "sgd"})
    with pytest.raises(ConfigError):
        trainer.config_from_doc({"K": 2, "L": 4})  # L > K


def test_config_rejects_bad_tolerance():
    with pytest.raises(ConfigError):
        trainer.TrainingConfig(tolerance=0.0)
    with pytest.raises(ConfigError):
        trainer.TrainingConfig(lam=-0.1)


# ---------------------------------------------------------------- independent fit

def test_fit_independent_matches_unigram():
    corp = small_corpus(n_pieces=2, length=16)
    topo = Topology(n=4, K=2, L=1, alphabets=corp.alphabets)
    model = trainer.fit_independent(corp, topo)
    assert model.topology.K == 0 and model.topology.L == 0
    counts = {}
    total = 0
    for piece in corp.pieces:
        for sym in piece.grid[0]:
            counts[sym] = counts.get(sym, 0) + 1
            total += 1
    for sym, c in counts.items():
        assert model.params[(sym, sym, 0, 0, 0)] == pytest.approx(np.log(c / total))
