"""Expected sampling sets, reconstruction checks and sampling-set selection."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    BudgetOutOfRange,
    DimensionMismatch,
    IndexOutOfRange,
    NotSymmetric,
    TooManyCombinations,
)
from .graph_core import FrequencySupport

PDET_EPS = 1e-10
RECONSTRUCTION_MARGIN = 1e-9
MAX_COMBINATIONS = 10**6

MAX_DET = "maxdet"
MAX_LAMBDA_MIN = "maxlambdamin"
OBJECTIVES = (MAX_DET, MAX_LAMBDA_MIN)


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SamplingDesign:
    """Per-node sampling probabilities and observation-noise variances.

    The expected sampling set is the set of nodes with positive probability.
    """

    probabilities: np.ndarray
    noise_variances: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probabilities)
        s2 = _frozen(self.noise_variances)
        if p.ndim != 1 or s2.shape != p.shape:
            raise DimensionMismatch("probabilities and noise variances must be equal-length vectors")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("sampling probabilities must lie in [0, 1]")
        if np.any(s2 < 0):
            raise ValueError("noise variances must be nonnegative")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "noise_variances", s2)

    @classmethod
    def from_set(cls, n: int, expected_set: Iterable[int], p=1.0, noise_variances=0.0) -> "SamplingDesign":
        """Design with probability ``p`` on ``expected_set`` and 0 elsewhere."""
        members = sorted({int(i) for i in expected_set})
        if members and (members[0] < 0 or members[-1] >= n):
            raise IndexOutOfRange(f"node index outside [0, {n})")
        probs = np.zeros(n)
        probs[members] = np.broadcast_to(np.asarray(p, dtype=float), (n,))[members]
        if np.any(probs[members] <= 0):
            raise ValueError("members of the expected set need a positive probability")
        return cls(probs, np.broadcast_to(np.asarray(noise_variances, dtype=float), (n,)))

    @classmethod
    def uniform(cls, n: int, p=1.0, noise_variances=0.0) -> "SamplingDesign":
        return cls(np.full(n, float(p)), np.broadcast_to(np.asarray(noise_variances, dtype=float), (n,)))

    @property
    def n_nodes(self) -> int:
        return self.probabilities.shape[0]

    @property
    def expected_set(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.probabilities > 0))

    @property
    def selection_weights(self) -> np.ndarray:
        """p_i / (1 + sigma_i^2)."""
        return self.probabilities / (1.0 + self.noise_variances)

    def restricted_to(self, expected_set: Iterable[int]) -> "SamplingDesign":
        """Same per-node values, but zero probability outside ``expected_set``."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[list(expected_set)] = True
        return SamplingDesign(np.where(mask, self.probabilities, 0.0), self.noise_variances)

    def with_probability(self, node: int, p: float) -> "SamplingDesign":
        probs = self.probabilities.copy()
        probs[node] = p
        return SamplingDesign(probs, self.noise_variances)


def reconstruction_condition(support: FrequencySupport, expected_set) -> tuple[bool, float]:
    """Check ``||D_Sc U_F||_2 < 1`` for the complement of ``expected_set``."""
    n = support.n_nodes
    members = {int(i) for i in expected_set}
    if any(i < 0 or i >= n for i in members):
        raise IndexOutOfRange(f"node index outside [0, {n})")
    complement = [i for i in range(n) if i not in members]
    if not complement:
        return True, 0.0
    norm = float(np.linalg.norm(support.u_f[complement], 2))
    return norm < 1.0 - RECONSTRUCTION_MARGIN, norm


def expected_gram(support: FrequencySupport, design: SamplingDesign) -> np.ndarray:
    """``sum_i p_i c_i c_i^T``."""
    if design.n_nodes != support.n_nodes:
        raise DimensionMismatch("design and support disagree on the node count")
    u = support.u_f
    return u.T @ (design.probabilities[:, None] * u)


def _check_symmetric(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {m.shape}")
    if np.any(np.abs(m - m.T) > 1e-10 * max(1.0, float(np.abs(m).max(initial=0.0)))):
        raise NotSymmetric("matrix is not symmetric")


def _spectrum(m: np.ndarray) -> np.ndarray:
    """Eigenvalues with those below ``PDET_EPS * lambda_max`` set to zero."""
    lam = np.linalg.eigvalsh(m)
    top = lam[-1] if lam.size else 0.0
    if top <= 0:
        return np.zeros_like(lam)
    return np.where(lam > PDET_EPS * top, lam, 0.0)


def log_pseudo_det(m) -> float:
    """Sum of log eigenvalues above the relative threshold; ``-inf`` if none."""
    m = np.asarray(m, dtype=float)
    _check_symmetric(m)
    lam = _spectrum(m)
    pos = lam[lam > 0]
    if pos.size == 0:
        return -math.inf
    return float(np.sum(np.log(pos)))


def lambda_min(m) -> float:
    m = np.asarray(m, dtype=float)
    _check_symmetric(m)
    return float(_spectrum(m)[0])


@dataclass(frozen=True)
class SelectionObjective:
    """``MaxDet`` (log pseudo-determinant) or ``MaxLambdaMin`` of the weighted Gram."""

    kind: str = MAX_DET

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}; expected one of {OBJECTIVES}")


def weighted_rows(support: FrequencySupport, design: SamplingDesign) -> np.ndarray:
    """Rows ``sqrt(p_i / (1 + sigma_i^2)) c_i`` broadcast by the selection protocol."""
    if design.n_nodes != support.n_nodes:
        raise DimensionMismatch("design and support disagree on the node count")
    return np.sqrt(design.selection_weights)[:, None] * support.u_f


def gram_from_rows(rows: Sequence[np.ndarray], dim: int) -> np.ndarray:
    # Accumulated in the given order so that every caller holding the same
    # rows in the same order gets a bit-identical matrix.
    g = np.zeros((dim, dim))
    for r in rows:
        g += np.outer(r, r)
    return g


def score_rows(obj: SelectionObjective, rows: Sequence[np.ndarray], dim: int) -> tuple:
    """Comparison key ``(rank, objective, log pseudo-det)`` of a set given its weighted rows.

    Pseudo-determinants of matrices of different rank are not comparable: a
    rank-increasing row contributes an eigenvalue that may be below one and
    lower the log sum. Candidates are therefore ranked by Gram rank first.
    The last entry only decides between exact ties of the first two, which
    for MaxLambdaMin happens while the Gram matrix is rank deficient.
    """
    if len(rows) == 0:
        return (0, -math.inf, -math.inf)
    g = gram_from_rows(rows, dim)
    lam = _spectrum(g)
    pos = lam[lam > 0]
    ld = float(np.sum(np.log(pos))) if pos.size else -math.inf
    if obj.kind == MAX_DET:
        return (int(pos.size), ld, ld)
    return (int(pos.size), float(lam[0]), ld)


def objective_value(obj: SelectionObjective, support: FrequencySupport, design: SamplingDesign,
                    subset: Sequence[int]) -> float:
    """``f(sum_{i in S} p_i/(1+sigma_i^2) c_i c_i^T)``; ``-inf`` for the empty set."""
    n = support.n_nodes
    subset = [int(i) for i in subset]
    if any(i < 0 or i >= n for i in subset):
        raise IndexOutOfRange(f"node index outside [0, {n})")
    rows = weighted_rows(support, design)
    return score_rows(obj, [rows[i] for i in subset], support.bandwidth)[1]


def best_candidate(keys: dict) -> int:
    """Argmax of comparison keys; exact ties go to the lowest node."""
    return max(keys, key=lambda j: (keys[j], -j))


def greedy_select(obj: SelectionObjective, support: FrequencySupport, design: SamplingDesign,
                  budget: int) -> list[int]:
    """Greedy maximisation of the selection objective; returns the pick order."""
    n = support.n_nodes
    if not 1 <= budget <= n:
        raise BudgetOutOfRange(f"budget must be in [1, {n}], got {budget}")
    rows = weighted_rows(support, design)
    dim = support.bandwidth
    selected: list[int] = []
    for _ in range(budget):
        base = [rows[i] for i in selected]
        keys = {j: score_rows(obj, base + [rows[j]], dim) for j in range(n) if j not in selected}
        selected.append(best_candidate(keys))
    return selected


def selection_path_values(obj: SelectionObjective, support: FrequencySupport, design: SamplingDesign,
                          order: Sequence[int]) -> list[float]:
    """Objective value after each pick of ``order``."""
    return [objective_value(obj, support, design, order[: k + 1]) for k in range(len(order))]


def exhaustive_select(score: Callable[[tuple], float], n: int, budget: int,
                      max_combinations: int = MAX_COMBINATIONS) -> tuple:
    """Best ``budget``-subset under ``score``; lexicographically first on ties."""
    if not 0 <= budget <= n:
        raise BudgetOutOfRange(f"budget must be in [0, {n}], got {budget}")
    total = math.comb(n, budget)
    if total > max_combinations:
        raise TooManyCombinations(f"C({n}, {budget}) = {total} exceeds {max_combinations}")
    best, best_val = None, -math.inf
    for subset in itertools.combinations(range(n), budget):
        val = score(subset)
        if val != val:  # NaN never wins
            continue
        if best is None or val > best_val:
            best, best_val = subset, val
    return best


def random_select(n: int, budget: int, seed) -> tuple:
    if not 0 <= budget <= n:
        raise BudgetOutOfRange(f"budget must be in [0, {n}], got {budget}")
    rng = np.random.default_rng(seed)
    return tuple(sorted(int(i) for i in rng.choice(n, size=budget, replace=False)))


def write_selection_csv(path, order: Sequence[int], values: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "node", "objective_value"])
        for rank, (node, val) in enumerate(zip(order, values)):
            w.writerow([rank, node, repr(float(val))])
