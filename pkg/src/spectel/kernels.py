"""Exact transition operators for random-scan Gibbs samplers on finite targets.

Four kernel families are assembled as dense row-stochastic matrices:

* :func:`gibbs_kernel` -- one step of the block Gibbs sampler targeting the
  conditional distribution of the free coordinates given a context, with
  block size ``l`` (the uniform mixture over all size-``l`` blocks of the
  conditional-resample transition);
* :func:`recursive_gibbs_kernel` -- the same chain assembled by the recursive
  form (fix one more coordinate, recurse, average), which must agree with the
  direct form entrywise;
* :func:`random_walk_kernel` -- the index/value walk on the disjoint union of
  the free alphabets: move to a uniformly chosen coordinate and redraw its
  value from the one-coordinate conditional given the current (index, value);
* :func:`altered_random_walk_kernel` -- identical except that staying on the
  same coordinate redraws the value from that coordinate's conditional
  marginal instead of keeping it.

All of them are reversible with respect to their stationary weights, so the
spectral analysis symmetrizes with D^{1/2} K D^{-1/2} and uses a dense
symmetric eigensolver.  State spaces are hard-capped at :data:`STATE_CAP`
dense states: this module is a verifier, exactness beats scale.

Canonical enumerations (normative, so matrices are comparable across runs):
free-coordinate product states are row-major in increasing coordinate order;
index/value walk states are ordered by coordinate index, then value.
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalContractError, ResourceLimitError
from .target import (
    CondContext,
    FiniteTarget,
    conditional,
    conditional_tensor,
    free_indices,
    is_supported,
)

# Dense-eigensolver cap on the number of states of a single kernel.
STATE_CAP = 20_000

_ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightedKernel:
    """Row-stochastic matrix with its stationary weight vector.

    ``weights`` defines the L^2 inner product in which the kernel is
    self-adjoint.  Construction checks the structural facts (square shape,
    nonnegativity, row sums and weight mass equal to 1 within 1e-12);
    reversibility is enforced where it matters, in :func:`spectral_summary`.
    """

    matrix: np.ndarray
    weights: np.ndarray

    def __init__(self, matrix, weights) -> None:
        mat = np.asarray(matrix, dtype=float)
        w = np.asarray(weights, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DomainError(f"kernel matrix must be square, got shape {mat.shape}")
        if w.shape != (mat.shape[0],):
            raise DomainError(
                f"weights shape {w.shape} does not match matrix order {mat.shape[0]}"
            )
        if np.any(mat < 0) or np.any(w < 0):
            raise DomainError("kernel entries and weights must be nonnegative")
        row_err = np.abs(mat.sum(axis=1) - 1.0).max()
        if row_err > _ROW_TOL:
            raise DomainError(f"rows must sum to 1 within {_ROW_TOL}, max error {row_err:.3e}")
        w_err = abs(w.sum() - 1.0)
        if w_err > _ROW_TOL:
            raise DomainError(f"weights must sum to 1 within {_ROW_TOL}, error {w_err:.3e}")
        mat = mat.copy()
        w = w.copy()
        mat.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "weights", w)

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self) -> str:
        return f"WeightedKernel(order={self.order})"


@dataclass(frozen=True)
class SpectralSummary:
    """Operator norm on mean-zero functions, the gap, and the bottom eigenvalue."""

    norm: float
    gap: float
    min_eigenvalue: float


def _check_cap(n_states: int) -> None:
    if n_states > STATE_CAP:
        raise ResourceLimitError(
            f"state space has {n_states} states, exceeding the cap of {STATE_CAP}"
        )


def _require_supported(target: FiniteTarget, ctx: CondContext) -> None:
    if not is_supported(target, ctx):
        raise DomainError(f"context {ctx} has zero marginal mass")


def _free_shape(target: FiniteTarget, free: Sequence[int]) -> tuple[int, ...]:
    return tuple(target.axes[i - 1] for i in free)


def gibbs_kernel(target: FiniteTarget, ctx: CondContext, l: int) -> WeightedKernel:
    """Block Gibbs transition matrix on the free coordinates of a context.

    A step picks a uniformly random subset of ``l`` free coordinates and
    redraws it from its conditional given everything else (context included).
    Stationary weights are the conditional of the free block given the
    context.  With ``l`` equal to the number of free coordinates every row
    equals the stationary weights (one-step exact resampling).
    """
    _require_supported(target, ctx)
    free = free_indices(target, ctx)
    m = len(free)
    if not 1 <= l <= m:
        raise DomainError(f"block size {l} out of range 1..{m}")
    weights = conditional_tensor(target, ctx)
    shape = weights.shape
    n_states = weights.size
    _check_cap(n_states)

    kernel = np.zeros((n_states, n_states))
    canon = np.arange(n_states).reshape(shape)
    for gamma_pos in itertools.combinations(range(m), l):
        rest_pos = tuple(p for p in range(m) if p not in gamma_pos)
        perm = rest_pos + gamma_pos
        block = int(np.prod([shape[p] for p in gamma_pos]))
        joint = weights.transpose(perm).reshape(-1, block)
        mass = joint.sum(axis=1, keepdims=True)
        rows = np.where(mass > 0, joint / np.where(mass > 0, mass, 1.0), 1.0 / block)
        idx = canon.transpose(perm).reshape(-1, block)
        kernel[idx[:, :, None], idx[:, None, :]] += rows[:, None, :]
    kernel /= comb(m, l)
    return WeightedKernel(kernel, weights.reshape(-1))


def _insert_sorted(lam: tuple[int, ...], y: tuple[int, ...], i: int, v: int):
    pos = 0
    while pos < len(lam) and lam[pos] < i:
        pos += 1
    return lam[:pos] + (i,) + lam[pos:], y[:pos] + (v,) + y[pos:]


def _recursive_matrix(
    target: FiniteTarget,
    lam: tuple[int, ...],
    y: tuple[int, ...],
    l: int,
    memo: dict,
) -> np.ndarray:
    key = (lam, y)
    cached = memo.get(key)
    if cached is not None:
        return cached
    ctx = CondContext(lam, y)
    free = free_indices(target, ctx)
    m = len(free)
    shape = _free_shape(target, free)
    n_states = int(np.prod(shape))
    if m == l:
        # Base case: redraw the whole free block in one shot.
        row = conditional(target, free, ctx).reshape(-1)
        matrix = np.tile(row, (n_states, 1))
    else:
        matrix = np.zeros((n_states, n_states))
        canon = np.arange(n_states).reshape(shape)
        for pos, i in enumerate(free):
            for v in range(target.axes[i - 1]):
                lam2, y2 = _insert_sorted(lam, y, i, v)
                sub = _recursive_matrix(target, lam2, y2, l, memo)
                idx = np.take(canon, v, axis=pos).reshape(-1)
                matrix[np.ix_(idx, idx)] += sub
        matrix /= m
    memo[key] = matrix
    return matrix


def recursive_gibbs_kernel(target: FiniteTarget, ctx: CondContext, l: int) -> WeightedKernel:
    """Gibbs transition matrix assembled by the recursive construction.

    Below the full-block base case, the step fixes one uniformly chosen free
    coordinate at its current value and recurses on the remaining ones.
    Averaging the embedded sub-kernels reproduces :func:`gibbs_kernel`
    entrywise (within 1e-12); the recursion carries the zero-mass-to-uniform
    conditional convention through unsupported sub-contexts so the match is
    exact row by row.
    """
    _require_supported(target, ctx)
    free = free_indices(target, ctx)
    if not 1 <= l <= len(free):
        raise DomainError(f"block size {l} out of range 1..{len(free)}")
    _check_cap(int(np.prod(_free_shape(target, free))))
    matrix = _recursive_matrix(target, ctx.lam, ctx.y, l, {})
    return WeightedKernel(matrix, conditional_tensor(target, ctx).reshape(-1))


def indexed_states(target: FiniteTarget, ctx: CondContext) -> list[tuple[int, int]]:
    """Canonical enumeration of the index/value walk space: (coordinate, value)."""
    free = free_indices(target, ctx)
    return [(i, x) for i in free for x in range(target.axes[i - 1])]


def pair_conditional_rows(weights: np.ndarray, pos_i: int, pos_j: int) -> np.ndarray:
    """Rows of the conditional of free coordinate ``pos_j`` given ``pos_i``.

    Row ``x`` is the conditional pmf of coordinate ``pos_j`` given that
    coordinate ``pos_i`` equals ``x`` (and the ambient context); zero-mass
    rows fall back to uniform.
    """
    m = weights.ndim
    drop = tuple(p for p in range(m) if p not in (pos_i, pos_j))
    pair = weights.sum(axis=drop) if drop else weights
    if pos_i > pos_j:
        pair = pair.T
    mass = pair.sum(axis=1, keepdims=True)
    return np.where(mass > 0, pair / np.where(mass > 0, mass, 1.0), 1.0 / pair.shape[1])


def _walk_kernel(target: FiniteTarget, ctx: CondContext, altered: bool) -> WeightedKernel:
    _require_supported(target, ctx)
    free = free_indices(target, ctx)
    m = len(free)
    if m < 2:
        raise DomainError(f"the index/value walk needs at least 2 free coordinates, got {m}")
    sizes = _free_shape(target, free)
    n_states = sum(sizes)
    _check_cap(n_states)
    weights_tensor = conditional_tensor(target, ctx)
    marginals = [
        weights_tensor.sum(axis=tuple(p for p in range(m) if p != pos))
        for pos in range(m)
    ]
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    kernel = np.zeros((n_states, n_states))
    for a in range(m):
        sa = slice(offsets[a], offsets[a + 1])
        for b in range(m):
            sb = slice(offsets[b], offsets[b + 1])
            if a == b:
                if altered:
                    kernel[sa, sb] = np.tile(marginals[a], (sizes[a], 1)) / m
                else:
                    kernel[sa, sb] = np.eye(sizes[a]) / m
            else:
                kernel[sa, sb] = pair_conditional_rows(weights_tensor, a, b) / m
    phi = np.concatenate(marginals) / m
    return WeightedKernel(kernel, phi)


def random_walk_kernel(target: FiniteTarget, ctx: CondContext) -> WeightedKernel:
    """Index/value walk: jump to a uniform free coordinate, redraw its value.

    From state ``(j, x)`` the step picks ``j'`` uniformly among the free
    coordinates; if ``j' == j`` the value is kept, otherwise the new value is
    drawn from the conditional of coordinate ``j'`` given the context and
    ``X_j = x``.  The stationary weight of ``(i, A)`` is the conditional
    marginal of coordinate ``i`` on ``A`` divided by the number of free
    coordinates.
    """
    return _walk_kernel(target, ctx, altered=False)


def altered_random_walk_kernel(target: FiniteTarget, ctx: CondContext) -> WeightedKernel:
    """Index/value walk that redraws the value even when the index repeats.

    Identical to :func:`random_walk_kernel` except the ``j' == j`` branch
    redraws the value from coordinate ``j``'s conditional marginal.  On the
    subspace of functions with zero mean within every coordinate component,
    the two walks differ exactly by Id/m.
    """
    return _walk_kernel(target, ctx, altered=True)


def spectral_summary(kernel: WeightedKernel, *, balance_tol: float = 1e-10) -> SpectralSummary:
    """Operator norm and gap of a reversible kernel on mean-zero functions.

    States with zero stationary weight are dropped (the similarity transform
    is singular there), the kernel is symmetrized as D^{1/2} K D^{-1/2}, and
    the constant-function direction is deflated before taking the largest
    absolute eigenvalue.  Detailed balance beyond ``balance_tol`` raises
    :class:`NumericalContractError`.
    """
    keep = kernel.weights > 0.0
    mat = kernel.matrix[np.ix_(keep, keep)]
    w = kernel.weights[keep]
    flux = w[:, None] * mat
    balance_err = float(np.abs(flux - flux.T).max())
    if balance_err > balance_tol:
        raise NumericalContractError(
            f"detailed balance violated by {balance_err:.3e} (tol {balance_tol:.1e})"
        )
    d = np.sqrt(w)
    sym = (d[:, None] * mat) / d[None, :]
    sym = 0.5 * (sym + sym.T)
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    deflated = sym - np.outer(d, d)
    spectrum = np.linalg.eigvalsh(deflated)
    norm = float(max(abs(spectrum[0]), abs(spectrum[-1])))
    gap = 1.0 - norm
    if gap < -1e-10 or gap > 1.0 + 1e-10:
        raise NumericalContractError(f"gap {gap!r} escaped [0, 1]")
    gap = min(max(gap, 0.0), 1.0)
    return SpectralSummary(norm=norm, gap=gap, min_eigenvalue=min_eig)


def psd_check(kernel: WeightedKernel) -> float:
    """Smallest eigenvalue of the symmetrized operator (with zero-weight states dropped)."""
    return spectral_summary(kernel).min_eigenvalue


def sample_gibbs_chain(
    target: FiniteTarget,
    steps: int,
    rng: np.random.Generator,
    l: int = 1,
    x0: Sequence[int] | None = None,
) -> np.ndarray:
    """Simulate the block Gibbs chain on the full target; returns (steps, n) values.

    The start defaults to an exact draw from the target, so the emitted chain
    is stationary.  The trajectory is a deterministic function of the RNG
    stream and the start.
    """
    n = target.n
    if not 1 <= l <= n:
        raise DomainError(f"block size {l} out of range 1..{n}")
    if steps < 0:
        raise DomainError("steps must be >= 0")
    axes = target.axes
    combos = list(itertools.combinations(range(n), l))
    tables = []
    for gamma in combos:
        rest = tuple(p for p in range(n) if p not in gamma)
        perm = rest + gamma
        block = int(np.prod([axes[p] for p in gamma]))
        joint = target.probs.transpose(perm).reshape(-1, block)
        mass = joint.sum(axis=1, keepdims=True)
        rows = np.where(mass > 0, joint / np.where(mass > 0, mass, 1.0), 1.0 / block)
        cum = np.cumsum(rows, axis=1)
        cum[:, -1] = 1.0
        strides = []
        acc = 1
        for p in reversed(rest):
            strides.append(acc)
            acc *= axes[p]
        strides.reverse()
        gamma_values = [tuple(v) for v in np.ndindex(*(axes[p] for p in gamma))]
        tables.append((gamma, rest, tuple(strides), cum.tolist(), gamma_values))

    if x0 is None:
        flat0 = int(rng.choice(target.probs.size, p=target.probs.ravel()))
        state = list(np.unravel_index(flat0, axes))
    else:
        state = [int(v) for v in x0]
        if len(state) != n or any(not 0 <= v < axes[p] for p, v in enumerate(state)):
            raise DomainError(f"start state {x0} is not a valid assignment")
    state = [int(v) for v in state]

    out = np.empty((steps, n), dtype=np.int64)
    choice_stream = rng.integers(0, len(combos), size=steps).tolist() if steps else []
    u_stream = rng.random(steps).tolist() if steps else []
    for t in range(steps):
        gamma, rest, strides, cum, gamma_values = tables[choice_stream[t]]
        r = 0
        for s, p in zip(strides, rest):
            r += s * state[p]
        g = bisect_right(cum[r], u_stream[t])
        for p, v in zip(gamma, gamma_values[g]):
            state[p] = v
        out[t] = state
    return out
