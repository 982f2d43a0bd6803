"""Shared test utilities: finite-difference oracle and corpus factories.

The numerical gradient here is the independent oracle for every backward
pass: central differences on the same scalar loss the analytic path uses,
never calling the backward code it checks.
"""

import numpy as np

from ppikit.datasets import InteractionCorpus, InteractionPair
from ppikit.encoding import ALPHABET, ProteinRecord


def numerical_gradient(f, x, h=1e-6):
    """Central-difference gradient of scalar f() w.r.t. array x (in place)."""
    x = np.asarray(x)
    grad = np.zeros_like(x, dtype=np.float64)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        f_plus = f()
        flat_x[i] = orig - h
        f_minus = f()
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def rel_error(analytic, numeric):
    """Largest entry difference, scaled by the gradient magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def random_sequence(rng, length, alphabet=ALPHABET):
    return "".join(alphabet[i] for i in rng.integers(0, len(alphabet), size=length))


def make_protein(rng, name, min_len=8, max_len=24):
    length = int(rng.integers(min_len, max_len + 1))
    return ProteinRecord(name, random_sequence(rng, length))


def make_balanced_corpus(
    n_pairs, seed=0, n_proteins=None, min_len=8, max_len=24, rare_fraction=0.0
):
    """A balanced corpus of unique couples over a synthetic protein pool.

    ``rare_fraction`` of the proteins are used once only, which guarantees
    material for strict test sets.
    """
    assert n_pairs % 2 == 0
    rng = np.random.default_rng(seed)
    n_proteins = n_proteins or max(8, n_pairs // 3)
    proteins = [make_protein(rng, f"P{i:05d}", min_len, max_len) for i in range(n_proteins)]
    n_rare = int(n_proteins * rare_fraction)
    common = proteins[: n_proteins - n_rare] if n_rare else proteins
    rare = proteins[n_proteins - n_rare :]

    used = set()
    pairs = []
    rare_iter = iter(rare)

    def draw_pair():
        for _ in range(10000):
            rare_one = rare and rng.random() < 0.5
            try:
                a = next(rare_iter) if rare_one else common[rng.integers(len(common))]
            except StopIteration:
                a = common[rng.integers(len(common))]
            b = common[rng.integers(len(common))]
            key = tuple(sorted((a.id, b.id)))
            if a.id != b.id and key not in used:
                used.add(key)
                return a, b
        raise RuntimeError("could not draw enough unique couples")

    for i in range(n_pairs):
        a, b = draw_pair()
        # alternate labels so rare proteins land in both classes
        pairs.append(InteractionPair(a, b, 1 if i % 2 == 0 else 0))
    return InteractionCorpus(pairs, provenance=f"synthetic(seed={seed})")


def corpus_to_tsv(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in corpus.pairs:
            fh.write(f"{p.a.id}\t{p.a.sequence}\t{p.b.id}\t{p.b.sequence}\t{p.label}\n")
