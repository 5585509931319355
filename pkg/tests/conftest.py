"""Shared fixtures and brute-force oracles.

The oracles re-derive marginals, conditionals, and transition matrices by
explicit enumeration (plain Python loops over full assignments), independent
of the package's vectorized tensor assembly, so entrywise comparisons are a
genuine dual route and expected values in tests are computed, not copied.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from spectel import CondContext, FiniteTarget, random_target


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_small_target(rng, n_choices=(3, 4), axes_choices=(2, 3, 4)) -> FiniteTarget:
    n = int(rng.choice(n_choices))
    axes = [int(rng.choice(axes_choices)) for _ in range(n)]
    return random_target(axes, rng)


def _full_states(axes):
    return list(itertools.product(*[range(a) for a in axes]))


def _prob_lookup(target: FiniteTarget) -> dict:
    flat = target.probs.ravel()
    return dict(zip(_full_states(target.axes), flat))


def oracle_marginal(target: FiniteTarget, gamma) -> np.ndarray:
    """Marginal by explicit summation over all full assignments."""
    gamma = sorted(gamma)
    probs = _prob_lookup(target)
    shape = tuple(target.axes[i - 1] for i in gamma)
    out = np.zeros(shape)
    for full, p in probs.items():
        key = tuple(full[i - 1] for i in gamma)
        out[key] += p
    return out


def oracle_conditional(target: FiniteTarget, gamma, lam, y) -> np.ndarray:
    """Conditional by ratio of enumerated sums, uniform on zero mass."""
    gamma = sorted(gamma)
    probs = _prob_lookup(target)
    shape = tuple(target.axes[i - 1] for i in gamma)
    out = np.zeros(shape)
    mass = 0.0
    for full, p in probs.items():
        if all(full[i - 1] == v for i, v in zip(lam, y)):
            mass += p
            out[tuple(full[i - 1] for i in gamma)] += p
    if mass > 0:
        return out / mass
    return np.full(shape, 1.0 / out.size)


def free_states(target: FiniteTarget, lam):
    free = [i for i in range(1, target.n + 1) if i not in lam]
    return free, list(itertools.product(*[range(target.axes[i - 1]) for i in free]))


def oracle_gibbs_matrix(target: FiniteTarget, lam, y, l):
    """Block Gibbs matrix assembled straight from the algorithm's definition.

    Returns (matrix, weights, states) with states enumerated row-major over
    the free coordinates in increasing index order.
    """
    probs = _prob_lookup(target)
    free, states = free_states(target, lam)
    pos = {i: k for k, i in enumerate(free)}

    def joint(z):
        full = [0] * target.n
        for i, v in zip(lam, y):
            full[i - 1] = v
        for i in free:
            full[i - 1] = z[pos[i]]
        return probs[tuple(full)]

    index = {z: k for k, z in enumerate(states)}
    subsets = list(itertools.combinations(free, l))
    size = len(states)
    matrix = np.zeros((size, size))
    for z in states:
        for gamma in subsets:
            fixed = [i for i in free if i not in gamma]
            compat = [
                zp for zp in states if all(zp[pos[i]] == z[pos[i]] for i in fixed)
            ]
            mass = sum(joint(zp) for zp in compat)
            for zp in compat:
                if mass > 0:
                    matrix[index[z], index[zp]] += joint(zp) / mass / len(subsets)
                else:
                    matrix[index[z], index[zp]] += 1.0 / len(compat) / len(subsets)
    total = sum(joint(z) for z in states)
    weights = np.array([joint(z) / total for z in states])
    return matrix, weights, states


def oracle_rw_matrix(target: FiniteTarget, lam, y):
    """Index/value walk matrix by enumeration; states ordered (coord, value)."""
    probs = _prob_lookup(target)
    free = [i for i in range(1, target.n + 1) if i not in lam]
    m = len(free)
    walk_states = [(i, x) for i in free for x in range(target.axes[i - 1])]
    index = {s: k for k, s in enumerate(walk_states)}

    def pair_mass(i, xi, j, xj):
        total = 0.0
        for full, p in probs.items():
            if all(full[a - 1] == v for a, v in zip(lam, y)):
                if full[i - 1] == xi and full[j - 1] == xj:
                    total += p
        return total

    def single_mass(i, xi):
        total = 0.0
        for full, p in probs.items():
            if all(full[a - 1] == v for a, v in zip(lam, y)):
                if full[i - 1] == xi:
                    total += p
        return total

    size = len(walk_states)
    matrix = np.zeros((size, size))
    for (j, x) in walk_states:
        row = index[(j, x)]
        for j2 in free:
            if j2 == j:
                matrix[row, index[(j, x)]] += 1.0 / m
                continue
            mass = single_mass(j, x)
            for x2 in range(target.axes[j2 - 1]):
                if mass > 0:
                    p = pair_mass(j, x, j2, x2) / mass
                else:
                    p = 1.0 / target.axes[j2 - 1]
                matrix[row, index[(j2, x2)]] += p / m
    lam_mass = sum(
        p
        for full, p in probs.items()
        if all(full[a - 1] == v for a, v in zip(lam, y))
    )
    weights = np.array(
        [single_mass(i, x) / lam_mass / m for (i, x) in walk_states]
    )
    return matrix, weights, walk_states


def oracle_gap(matrix: np.ndarray, weights: np.ndarray) -> float:
    """Spectral gap of a reversible kernel via direct symmetrized eigenvalues."""
    keep = weights > 0
    mat = matrix[np.ix_(keep, keep)]
    w = weights[keep]
    d = np.sqrt(w)
    sym = (d[:, None] * mat) / d[None, :]
    sym = 0.5 * (sym + sym.T)
    spectrum = np.linalg.eigvalsh(sym - np.outer(d, d))
    return 1.0 - max(abs(spectrum[0]), abs(spectrum[-1]))


def context_of(lam, y) -> CondContext:
    return CondContext(tuple(lam), tuple(y))


def coupled_pair_target() -> FiniteTarget:
    """Two binary coordinates forced equal, uniform: the fully coupled pair."""
    return FiniteTarget([2, 2], [0.5, 0.0, 0.0, 0.5])
