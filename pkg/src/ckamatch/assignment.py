"""Exact linear assignment (maximization) and its brute-force oracle.

``solve_lap_max`` is the direction oracle for the QAP solver and the
matcher behind every score matrix. It delegates to SciPy's modified
Jonker-Volgenant solver, maximizing by cost negation; only optimality is
contractual, not which optimal permutation comes back on ties.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import SizeError, ValidationError

BRUTE_FORCE_LIMIT = 9


@dataclass(frozen=True)
class PermutationMap:
    """A bijection on {0..n-1}; mapping[i] is the column matched to row i."""

    mapping: tuple[int, ...]
    objective: float = 0.0

    def __post_init__(self):
        mapping = tuple(int(i) for i in self.mapping)
        n = len(mapping)
        if n < 1:
            raise ValidationError("permutation must be non-empty")
        if sorted(mapping) != list(range(n)):
            raise ValidationError("mapping is not a bijection on 0..n-1")
        object.__setattr__(self, "mapping", mapping)

    @property
    def n(self) -> int:
        return len(self.mapping)

    def inverse(self) -> "PermutationMap":
        inv = [0] * self.n
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return PermutationMap(mapping=tuple(inv), objective=self.objective)

    def as_matrix(self) -> np.ndarray:
        p = np.zeros((self.n, self.n))
        p[np.arange(self.n), self.mapping] = 1.0
        return p


def _as_square_array(score) -> np.ndarray:
    values = np.asarray(getattr(score, "values", score), dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValidationError(f"assignment needs a square matrix, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ValidationError("assignment scores must be finite")
    return values


def solve_lap_max(score) -> PermutationMap:
    """Permutation maximizing the total score, exactly."""
    values = _as_square_array(score)
    rows, cols = linear_sum_assignment(values, maximize=True)
    objective = float(values[rows, cols].sum())
    return PermutationMap(mapping=tuple(int(c) for c in cols), objective=objective)


def brute_force_lap(score) -> PermutationMap:
    """Exhaustive maximum; ties go to the lexicographically smallest mapping."""
    values = _as_square_array(score)
    n = values.shape[0]
    if n > BRUTE_FORCE_LIMIT:
        raise SizeError(f"brute force capped at n <= {BRUTE_FORCE_LIMIT}, got {n}")
    best_mapping = None
    best_objective = -np.inf
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        objective = float(values[rows, perm].sum())
        if objective > best_objective:
            best_objective = objective
            best_mapping = perm
    return PermutationMap(mapping=best_mapping, objective=best_objective)
