"""Style-imitation metrics: pair statistics, chord taxonomy, invention rates.

Chord identity is the exact ordered pitch tuple of a column, voicing and
octave included.  Quadrilateral tuples pair two voices across adjacent
columns.  Items found in the training material are "cited", items found
only in a reference collection are "discovered", everything else is
"invented".
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .corpus import Corpus
from .errors import EmptyReferenceError, ValidationError
from .model import Model, Topology, count_features, enumerate_family
from .symbols import HOLD, REST, is_pitch
from .trainer import TrainingConfig, fit, fit_independent


def _as_grids(source) -> list:
    if isinstance(source, Corpus):
        return [p.grid for p in source.pieces]
    if source and not isinstance(source[0], (list, tuple)):
        raise ValidationError("expected a Corpus or a list of grids")
    return list(source)


def pair_frequencies(source, topology: Topology) -> Dict[tuple, float]:
    """Feature counts normalized by the number of positions a pair fits.

    A pair at offset k >= 0 has l - k valid positions per piece; local
    fields have l.  Features never observed get frequency 0 implicitly.
    """
    grids = _as_grids(source)
    counts: Dict[tuple, int] = {}
    for grid in grids:
        for key, c in count_features(grid, topology).items():
            counts[key] = counts.get(key, 0) + c
    lengths = [len(g[0]) for g in grids]
    freqs = {}
    for key, c in counts.items():
        k = key[4]
        denom = sum(max(0, l - k) for l in lengths)
        freqs[key] = c / denom if denom else 0.0
    return freqs


@dataclass
class PairStatsTable:
    keys: list
    freq_generated: np.ndarray
    freq_corpus: np.ndarray
    group_correlations: Dict[Tuple[int, int, int], float]
    overall_correlation: float


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if np.array_equal(x, y):
        return 1.0
    if x.size < 2 or x.std() == 0.0 or y.std() == 0.0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


def pair_statistics_table(generated, corpus_source, topology: Topology) -> PairStatsTable:
    """Frequency pairs for every admissible feature, with correlations.

    Correlations are reported per (i, j, k) connection group and overall;
    identical frequency vectors give exactly 1.
    """
    gen_freq = pair_frequencies(generated, topology)
    ref_freq = pair_frequencies(corpus_source, topology)
    keys = enumerate_family(topology)
    fg = np.array([gen_freq.get(key, 0.0) for key in keys])
    fc = np.array([ref_freq.get(key, 0.0) for key in keys])
    groups: Dict[Tuple[int, int, int], list] = {}
    for idx, key in enumerate(keys):
        groups.setdefault((key[2], key[3], key[4]), []).append(idx)
    group_corr = {g: _pearson(fg[idxs], fc[idxs]) for g, idxs in sorted(groups.items())}
    return PairStatsTable(keys=keys, freq_generated=fg, freq_corpus=fc,
                          group_correlations=group_corr,
                          overall_correlation=_pearson(fg, fc))


def chord_keys(source) -> List[tuple]:
    """Every column of every grid as an ordered symbol tuple."""
    out = []
    for grid in _as_grids(source):
        n = len(grid)
        for t in range(len(grid[0])):
            out.append(tuple(grid[v][t] for v in range(n)))
    return out


def quad_keys(source) -> List[tuple]:
    """(i, i', four symbols) tuples over voice pairs and adjacent columns."""
    out = []
    for grid in _as_grids(source):
        n = len(grid)
        l = len(grid[0])
        for i in range(n):
            for ip in range(i + 1, n):
                gi, gp = grid[i], grid[ip]
                for t in range(l - 1):
                    out.append((i, ip, gi[t], gi[t + 1], gp[t], gp[t + 1]))
    return out


@dataclass
class TaxonomyReport:
    cited: int
    discovered: int
    invented: int

    @property
    def total(self) -> int:
        return self.cited + self.discovered + self.invented

    @property
    def fractions(self) -> Tuple[float, float, float]:
        t = self.total
        if t == 0:
            return (0.0, 0.0, 0.0)
        return (self.cited / t, self.discovered / t, self.invented / t)


def _classify(items: Iterable[tuple], train_set: set, reference_set: set,
              distinct: bool) -> TaxonomyReport:
    if distinct:
        items = set(items)
    cited = discovered = invented = 0
    for item in items:
        if item in train_set:
            cited += 1
        elif item in reference_set:
            discovered += 1
        else:
            invented += 1
    return TaxonomyReport(cited=cited, discovered=discovered, invented=invented)


def classify_chords(generated, train_corpus, reference_corpus=None,
                    distinct: bool = False) -> TaxonomyReport:
    """Label each generated chord cited / discovered / invented.

    Counts are token-level by default; distinct=True de-duplicates first.
    """
    ref = set(chord_keys(reference_corpus)) if reference_corpus is not None else set()
    return _classify(chord_keys(generated), set(chord_keys(train_corpus)), ref, distinct)


def classify_quads(generated, train_corpus, reference_corpus=None,
                   distinct: bool = False) -> TaxonomyReport:
    ref = set(quad_keys(reference_corpus)) if reference_corpus is not None else set()
    return _classify(quad_keys(generated), set(quad_keys(train_corpus)), ref, distinct)


def restitution_discovery(generated, train_corpus, test_corpus) -> Tuple[float, float]:
    """Distinct-chord recall against training and test-only material.

    Restitution: share of the training chord vocabulary the generation
    reproduces.  Discovery: share of the chords exclusive to the test
    corpus it finds.  Both in percent.
    """
    gen = set(chord_keys(generated))
    train = set(chord_keys(train_corpus))
    test_only = set(chord_keys(test_corpus)) - train
    if not train:
        raise EmptyReferenceError("training corpus has no chords")
    if not test_only:
        raise EmptyReferenceError("test corpus adds no chords beyond training")
    restitution = 100.0 * len(gen & train) / len(train)
    discovery = 100.0 * len(gen & test_only) / len(test_only)
    return restitution, discovery


def baseline_models(corpus: Corpus, kind: str,
                    config: Optional[TrainingConfig] = None) -> Model:
    """Comparison models: unigram-only, or vertical couplings only."""
    if kind == "independent":
        topo = Topology(n=corpus.voices, K=0, L=0, alphabets=corpus.alphabets)
        return fit_independent(corpus, topo)
    if kind == "vertical_only":
        topo = Topology(n=corpus.voices, K=0, L=0, alphabets=corpus.alphabets)
        model = fit(corpus, topo, config or TrainingConfig())
        model.metadata["baseline"] = "vertical_only"
        return model
    raise ValidationError(f"unknown baseline kind: {kind!r}")


def taxonomy_trajectory(snapshots: np.ndarray, topology: Topology, train_corpus,
                        reference_corpus=None, steps_per_snapshot: float = 1.0,
                        kind: str = "chords"):
    """Taxonomy fractions along a trajectory of index snapshots.

    The x coordinate is MH steps divided by n * l * mean alphabet size.
    Returns a list of (normalized iteration, cited, discovered, invented).
    """
    classify = classify_chords if kind == "chords" else classify_quads
    ref = reference_corpus
    scale = topology.n * snapshots.shape[2] * topology.mean_alphabet_size()
    out = []
    for idx in range(snapshots.shape[0]):
        grid = [[topology.alphabets[v][int(s)] for s in snapshots[idx, v]]
                for v in range(topology.n)]
        report = classify([grid], train_corpus, ref)
        x = (idx + 1) * steps_per_snapshot / scale
        out.append((x,) + report.fractions)
    return out


def position_class_frequencies(source, bins_per_cycle: int) -> np.ndarray:
    """Per metrical position, frequency of onset / rest / hold cells.

    Returns an array of shape (bins_per_cycle, 3) whose rows sum to 1.
    """
    counts = np.zeros((bins_per_cycle, 3))
    for grid in _as_grids(source):
        for row in grid:
            for t, sym in enumerate(row):
                pos = t % bins_per_cycle
                if is_pitch(sym):
                    counts[pos, 0] += 1
                elif sym == REST:
                    counts[pos, 1] += 1
                elif sym == HOLD:
                    counts[pos, 2] += 1
    totals = counts.sum(axis=1, keepdims=True)
    totals[totals == 0] = 1.0
    return counts / totals


def write_pair_stats_csv(path, table: PairStatsTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "b", "i", "j", "k", "freq_generated", "freq_corpus"])
        for key, fg, fc in zip(table.keys, table.freq_generated, table.freq_corpus):
            writer.writerow([key[0], key[1], key[2], key[3], key[4],
                             repr(float(fg)), repr(float(fc))])


def write_taxonomy_csv(path, rows) -> None:
    """rows: (kind, variant, TaxonomyReport) triples."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "variant", "cited", "discovered", "invented",
                         "cited_count", "discovered_count", "invented_count", "total"])
        for kind, variant, report in rows:
            c, d, i = report.fractions
            writer.writerow([kind, variant, repr(c), repr(d), repr(i),
                             report.cited, report.discovered, report.invented, report.total])


def write_restitution_csv(path, rows) -> None:
    """rows: (lambda, mode, restitution, discovery) tuples."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "mode", "restitution", "discovery"])
        for lam, mode, restitution, discovery in rows:
            writer.writerow([repr(float(lam)), mode, repr(float(restitution)),
                             repr(float(discovery))])
