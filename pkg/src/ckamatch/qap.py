"""Seeded Frank-Wolfe maximization of the kernel-alignment trace objective.

Given column sets Z and H whose first M columns are known-aligned anchors,
this maximizes tr((I_M (+) P)^T Kbar_Z (I_M (+) P) Kbar_H) over query
permutations P, where Kbar is the centered unit-Frobenius kernel. The
objective then equals the CKA obtained after reordering the query block of
Z, so ascent steps directly climb the alignment score.

Frank-Wolfe iterates over doubly-stochastic matrices: the gradient
2 A21 B12 + 2 A22 D B22 feeds a linear-assignment direction oracle, the
step size comes from an exact quadratic line search, and the final iterate
is projected to a permutation with one more assignment solve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .assignment import PermutationMap, solve_lap_max
from .errors import NumericalError, ValidationError
from .kernels import KernelSpec, cka, gram, normalized_centered
from .store import EmbeddingSet

INITS = ("barycenter", "identity", "random")


@dataclass(frozen=True)
class QapConfig:
    max_iters: int = 30
    tol: float = 1e-6
    init: str = "barycenter"
    init_seed: int = 0
    restarts: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.init not in INITS:
            raise ValidationError(f"init must be one of {INITS}")
        if self.restarts < 0:
            raise ValidationError("restarts must be non-negative")

    def describe(self) -> dict:
        return {
            "max_iters": self.max_iters,
            "tol": self.tol,
            "init": self.init,
            "init_seed": self.init_seed,
            "restarts": self.restarts,
        }


@dataclass(frozen=True)
class QapResult:
    permutation: PermutationMap
    objective_trace: float
    cka_achieved: float
    iterations: int
    converged: bool
    objective_history: tuple[float, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "mapping": list(self.permutation.mapping),
                "objective_trace": self.objective_trace,
                "cka_achieved": self.cka_achieved,
                "iterations": self.iterations,
                "converged": self.converged,
                "objective_history": list(self.objective_history),
            }
        )


def _profile_direction(a22: np.ndarray, b22: np.ndarray) -> np.ndarray:
    """Symmetry-breaking direction for a numerically zero gradient.

    Centered kernels annihilate the all-ones direction, so the unseeded
    barycenter start has gradient exactly zero and the assignment oracle
    would follow rounding noise. Sorted kernel rows are invariant to the
    unknown relabeling, so matching nodes by profile similarity gives a
    deterministic, informative vertex; on noiseless identical graphs it is
    the exact solution, which the line search then verifies and accepts.
    """
    prof_a = np.sort(a22, axis=1)
    prof_b = np.sort(b22, axis=1)
    sq = (
        np.sum(prof_a * prof_a, axis=1)[:, None]
        + np.sum(prof_b * prof_b, axis=1)[None, :]
        - 2.0 * prof_a @ prof_b.T
    )
    return -np.maximum(sq, 0.0)


def _init_iterate(init: str, n: int, rng: np.random.Generator | None) -> np.ndarray:
    if init == "barycenter":
        return np.full((n, n), 1.0 / n)
    if init == "identity":
        return np.eye(n)
    # random: exactly doubly stochastic blend of the barycenter with a
    # random permutation (Sinkhorn would only be approximately feasible)
    perm = rng.permutation(n)
    d = np.full((n, n), 0.5 / n)
    d[np.arange(n), perm] += 0.5
    return d


class _SeededTrace:
    """Blocks and evaluators for f(D) over one (A, B) pair with M seeds."""

    def __init__(self, a: np.ndarray, b: np.ndarray, m: int):
        self.n = a.shape[0] - m
        self.a22 = a[m:, m:]
        self.b22 = b[m:, m:]
        # constant anchor-block term and the linear gradient part
        self.const = float(np.sum(a[:m, :m] * b[:m, :m]))
        self.linear = a[m:, :m] @ b[:m, m:]

    def value(self, d: np.ndarray) -> float:
        quad = float(np.sum(d * (self.a22 @ d @ self.b22)))
        return self.const + 2.0 * float(np.sum(d * self.linear)) + quad

    def gradient(self, d: np.ndarray) -> np.ndarray:
        return 2.0 * self.linear + 2.0 * (self.a22 @ d @ self.b22)

    def value_of_mapping(self, mapping) -> float:
        idx = np.asarray(mapping, dtype=int)
        d = np.zeros((self.n, self.n))
        d[np.arange(self.n), idx] = 1.0
        return self.value(d)


def _line_search(trace: _SeededTrace, d: np.ndarray, q: np.ndarray, f0: float):
    """Maximize the exact quadratic f(D + alpha (Q - D)) on [0, 1]."""
    f1 = trace.value(q)
    fh = trace.value(0.5 * (d + q))
    # f(alpha) = a alpha^2 + b alpha + f0, fitted through alpha = 0, 1/2, 1
    a = 2.0 * f1 + 2.0 * f0 - 4.0 * fh
    b = f1 - f0 - a
    candidates = [(f0, 0.0), (f1, 1.0)]
    if a < 0.0:
        interior = -b / (2.0 * a)
        if 0.0 < interior < 1.0:
            candidates.append((a * interior * interior + b * interior + f0, interior))
    best_val, best_alpha = max(candidates, key=lambda c: c[0])
    return best_alpha, best_val


def solve_seeded_qap(
    a: np.ndarray, b: np.ndarray, m: int, cfg: QapConfig, iterate_hook=None
) -> tuple[PermutationMap, float, list[float], int, bool]:
    """Frank-Wolfe ascent on the seeded trace objective over raw matrices.

    ``a`` and ``b`` are symmetric (M+N) x (M+N) graph matrices whose leading
    M rows/columns are the anchor block. Returns the projected permutation
    of the N query items, its recomputed objective, the per-iteration
    objective history, the iteration count, and a convergence flag.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"graph matrices must share a square shape, got {a.shape} vs {b.shape}")
    total = a.shape[0]
    if not 0 <= m <= total - 2:
        raise ValidationError(f"anchor count {m} incompatible with {total} total columns")

    trace = _SeededTrace(a, b, m)
    n = trace.n
    grad_floor = 1e-12 * max(1.0, float(np.abs(a).max()) * float(np.abs(b).max())) * n

    best = None
    for attempt in range(cfg.restarts + 1):
        if attempt == 0:
            init, rng = cfg.init, np.random.default_rng(cfg.init_seed)
        else:
            init, rng = "random", np.random.default_rng(cfg.init_seed + attempt)
        d = _init_iterate(init, n, rng)
        if iterate_hook is not None:
            iterate_hook(d)
        f_curr = trace.value(d)
        history = [f_curr]
        converged = False
        iterations = 0
        for iterations in range(1, cfg.max_iters + 1):
            grad = trace.gradient(d)
            if not np.isfinite(grad).all():
                raise NumericalError("non-finite gradient in QAP ascent")
            if np.abs(grad).max() < grad_floor:
                grad = _profile_direction(trace.a22, trace.b22)
            direction = solve_lap_max(grad)
            q = direction.as_matrix()
            alpha, f_next = _line_search(trace, d, q, f_curr)
            d_next = d + alpha * (q - d)
            step_norm = abs(alpha) * float(np.linalg.norm(q - d))
            rel_impr = (f_next - f_curr) / max(1.0, abs(f_curr))
            d, f_curr = d_next, f_next
            if iterate_hook is not None:
                iterate_hook(d)
            history.append(f_curr)
            if rel_impr < cfg.tol or step_norm < cfg.tol:
                converged = True
                break
        projected = solve_lap_max(d)
        objective = trace.value_of_mapping(projected.mapping)
        candidate = (
            PermutationMap(mapping=projected.mapping, objective=objective),
            objective,
            history,
            iterations,
            converged,
        )
        if best is None or candidate[1] > best[1]:
            best = candidate
    return best


def qap_match(
    left: EmbeddingSet,
    right: EmbeddingSet,
    m_anchors: int,
    spec: KernelSpec,
    cfg: QapConfig | None = None,
) -> QapResult:
    """Recover the query-block permutation aligning ``left`` against ``right``.

    Both sets must hold the M anchor columns first, then the N query
    columns. mapping[i] = j in the result means left query column i is
    matched with right query column j.
    """
    cfg = cfg or QapConfig()
    if left.count != right.count:
        raise ValidationError(f"left has {left.count} columns, right has {right.count}")
    if not 0 <= m_anchors <= left.count - 2:
        raise ValidationError(
            f"anchor count {m_anchors} leaves fewer than 2 queries out of {left.count} columns"
        )
    kbar_left = normalized_centered(gram(left, spec)).values
    kbar_right = normalized_centered(gram(right, spec)).values
    perm, objective, history, iterations, converged = solve_seeded_qap(
        kbar_left, kbar_right, m_anchors, cfg
    )

    # independent route to the same number: reorder the query block of the
    # left set by the found permutation and measure plain CKA
    anchor_idx = list(range(m_anchors))
    inv = perm.inverse()
    query_idx = [m_anchors + inv.mapping[i] for i in range(perm.n)]
    realigned = left.select(anchor_idx + query_idx)
    achieved = cka(gram(realigned, spec), gram(right, spec))

    return QapResult(
        permutation=perm,
        objective_trace=objective,
        cka_achieved=achieved,
        iterations=iterations,
        converged=converged,
        objective_history=tuple(history),
    )
