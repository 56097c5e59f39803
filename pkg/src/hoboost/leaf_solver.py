"""Closed-form leaf weights and leaf scores at optimization order 2, 3 and 4.

All updates are members of the Householder family applied to the leaf
objective ``G1 w + (H/2) w^2 + (G3/6) w^3 + (G4/24) w^4`` at ``w = 0``,
where ``H = G2 + lambda``:

* order 2, Newton: ``w = -G1 / H``
* order 3, Halley: ``w = -G1/H / (1 - alpha/2)``
* order 3, exact stationary point of the cubic model
* order 3, series: ``w = -G1/H * (1 + alpha/2)``
* order 4: ``w = -G1 (H^2 - G1 G3/2) / (H^3 - G1 H G3 + G1^2 G4/6)``

with ``alpha = G1 G3 / H^2``. Every higher-order path falls back to the
Newton weight when its formula is singular or ``|alpha|`` leaves the trust
region.

The scalar kernels are compiled with numba so the split scanner in
:mod:`hoboost.tree` can call them per candidate boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

CUBIC_MODES = ("halley", "exact_root", "series")
FOURTH_ORDER_FORMULAS = ("classical", "paper_literal")

HALLEY, EXACT_ROOT, SERIES = 0, 1, 2
CLASSICAL, PAPER_LITERAL = 0, 1

HALLEY_SINGULAR_TOL = 1e-9
ORDER4_SINGULAR_TOL = 1e-12


class DegenerateDenominatorError(ArithmeticError):
    """G2 + lambda is not positive, so no step is defined."""


@dataclass(frozen=True)
class GradStats:
    G1: float = 0.0
    G2: float = 0.0
    G3: float = 0.0
    G4: float = 0.0
    count: int = 0

    def __post_init__(self):
        values = (self.G1, self.G2, self.G3, self.G4)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("gradient statistics must be finite")
        if self.count < 0:
            raise ValueError("count must be non-negative")

    @classmethod
    def from_bundle(cls, grads, rows=None) -> "GradStats":
        """Sum a :class:`~hoboost.losses.GradBundle` over ``rows`` (all rows if None)."""
        g = grads.g if rows is None else grads.g[:, np.asarray(rows, dtype=np.int64)]
        sums = [float(math.fsum(g[k])) if k < g.shape[0] else 0.0 for k in range(4)]
        return cls(*sums, count=int(g.shape[1]))

    def __add__(self, other: "GradStats") -> "GradStats":
        return GradStats(
            self.G1 + other.G1,
            self.G2 + other.G2,
            self.G3 + other.G3,
            self.G4 + other.G4,
            self.count + other.count,
        )


@dataclass(frozen=True)
class SolverConfig:
    order: int = 2
    lam: float = 1.0
    cubic_mode: str = "halley"
    trust_alpha: float = 1.0
    fourth_order_formula: str = "classical"

    def __post_init__(self):
        if self.order not in (2, 3, 4):
            raise ValueError(f"order must be 2, 3 or 4, got {self.order}")
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")
        if not self.trust_alpha > 0:
            raise ValueError("trust_alpha must be positive")
        if self.cubic_mode not in CUBIC_MODES:
            raise ValueError(f"cubic_mode must be one of {CUBIC_MODES}")
        if self.fourth_order_formula not in FOURTH_ORDER_FORMULAS:
            raise ValueError(f"fourth_order_formula must be one of {FOURTH_ORDER_FORMULAS}")

    @property
    def codes(self) -> tuple:
        """Positional arguments for the compiled kernels after the four sums."""
        return (
            float(self.lam),
            int(self.order),
            CUBIC_MODES.index(self.cubic_mode),
            float(self.trust_alpha),
            FOURTH_ORDER_FORMULAS.index(self.fourth_order_formula),
        )


@dataclass(frozen=True)
class SolverDiagnostics:
    alpha: float
    fallback_used: bool
    newton_weight: float


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def newton_kernel(G1, H):
    return -G1 / H


@numba.njit(cache=True)
def cubic_exact_kernel(G1, H, G3):
    """Root of G1 + H w + G3 w^2 / 2 on the branch that tends to Newton as G3 -> 0."""
    wn = -G1 / H
    if G3 == 0.0:
        return wn, False
    disc = 1.0 - 2.0 * G1 * G3 / (H * H)
    if disc < 0.0:
        return wn, True
    # -(H/G3)(1 - sqrt(D)) rewritten to avoid cancellation for small G1 G3
    return -2.0 * G1 / (H * (1.0 + math.sqrt(disc))), False


@numba.njit(cache=True)
def cubic_series_kernel(G1, H, G3, trust_alpha):
    wn = -G1 / H
    alpha = G1 * G3 / (H * H)
    if abs(alpha) > trust_alpha:
        return wn, True
    return wn * (1.0 + 0.5 * alpha), False


@numba.njit(cache=True)
def halley_kernel(G1, H, G3, trust_alpha):
    wn = -G1 / H
    alpha = G1 * G3 / (H * H)
    denom = 1.0 - 0.5 * alpha
    if abs(alpha) > trust_alpha or abs(denom) < HALLEY_SINGULAR_TOL:
        return wn, True
    return wn / denom, False


@numba.njit(cache=True)
def order4_kernel(G1, H, G3, G4, trust_alpha, formula):
    wn = -G1 / H
    if G3 == 0.0 and G4 == 0.0:
        return wn, False
    alpha = G1 * G3 / (H * H)
    if abs(alpha) > trust_alpha:
        return wn, True
    H3 = H * H * H
    if formula == PAPER_LITERAL:
        last = G1 * G4 / 6.0
    else:
        last = G1 * G1 * G4 / 6.0
    denom = H3 - G1 * H * G3 + last
    if abs(denom) < ORDER4_SINGULAR_TOL * H3:
        return wn, True
    return -G1 * (H * H - 0.5 * G1 * G3) / denom, False


@numba.njit(cache=True)
def weight_kernel(G1, G2, G3, G4, lam, order, cubic_mode, trust_alpha, formula):
    """Configured-order weight. Returns (weight, fallback_used, newton_weight)."""
    H = G2 + lam
    if not H > 0.0:
        raise ValueError("degenerate denominator: G2 + lambda <= 0")
    wn = -G1 / H
    if order == 2:
        return wn, False, wn
    if order == 3:
        if cubic_mode == EXACT_ROOT:
            w, fb = cubic_exact_kernel(G1, H, G3)
        elif cubic_mode == SERIES:
            w, fb = cubic_series_kernel(G1, H, G3, trust_alpha)
        else:
            w, fb = halley_kernel(G1, H, G3, trust_alpha)
        return w, fb, wn
    w, fb = order4_kernel(G1, H, G3, G4, trust_alpha, formula)
    return w, fb, wn


@numba.njit(cache=True)
def surrogate_gain(w, G1, H, G3, G4, order):
    """Negated Taylor model truncated at ``order``, evaluated at ``w``."""
    c3 = G3 / 6.0 if order >= 3 else 0.0
    c4 = G4 / 24.0 if order >= 4 else 0.0
    return -(w * (G1 + w * (0.5 * H + w * (c3 + w * c4))))


@numba.njit(cache=True)
def score_kernel(G1, G2, G3, G4, lam, order, cubic_mode, trust_alpha, formula):
    """Returns (score, weight, fallback_used).

    The configured weight is replaced by the Newton weight whenever the
    Newton weight scores higher under the same truncated model.
    """
    w, fb, wn = weight_kernel(G1, G2, G3, G4, lam, order, cubic_mode, trust_alpha, formula)
    H = G2 + lam
    s = surrogate_gain(w, G1, H, G3, G4, order)
    if order > 2 and not fb:
        sn = surrogate_gain(wn, G1, H, G3, G4, order)
        if s < sn:
            return sn, wn, True
    return s, w, fb


# ---------------------------------------------------------------- public API


def _denominator(stats: GradStats, lam: float) -> float:
    H = stats.G2 + lam
    if not H > 0:
        raise DegenerateDenominatorError(
            f"G2 + lambda = {H!r} is not positive; use lambda > 0 or a convex loss"
        )
    return H


def _diag(stats: GradStats, H: float, fallback: bool) -> SolverDiagnostics:
    return SolverDiagnostics(
        alpha=stats.G1 * stats.G3 / (H * H),
        fallback_used=bool(fallback),
        newton_weight=-stats.G1 / H,
    )


def weight_order2(stats: GradStats, lam: float) -> float:
    return float(newton_kernel(stats.G1, _denominator(stats, lam)))


def weight_cubic_exact(stats: GradStats, lam: float):
    H = _denominator(stats, lam)
    w, fb = cubic_exact_kernel(stats.G1, H, stats.G3)
    return float(w), _diag(stats, H, fb)


def weight_cubic_series(stats: GradStats, lam: float, trust_alpha: float = 1.0):
    H = _denominator(stats, lam)
    w, fb = cubic_series_kernel(stats.G1, H, stats.G3, trust_alpha)
    return float(w), _diag(stats, H, fb)


def weight_halley(stats: GradStats, lam: float, trust_alpha: float = 1.0):
    H = _denominator(stats, lam)
    w, fb = halley_kernel(stats.G1, H, stats.G3, trust_alpha)
    return float(w), _diag(stats, H, fb)


def weight_order4(
    stats: GradStats, lam: float, formula: str = "classical", trust_alpha: float = 1.0
):
    H = _denominator(stats, lam)
    code = FOURTH_ORDER_FORMULAS.index(formula)
    w, fb = order4_kernel(stats.G1, H, stats.G3, stats.G4, trust_alpha, code)
    return float(w), _diag(stats, H, fb)


def solve_leaf(stats: GradStats, config: SolverConfig):
    """Weight, score and diagnostics for one leaf under ``config``."""
    H = _denominator(stats, config.lam)
    s, w, fb = score_kernel(stats.G1, stats.G2, stats.G3, stats.G4, *config.codes)
    return float(w), float(s), _diag(stats, H, fb)


def leaf_score(stats: GradStats, config: SolverConfig) -> float:
    """Objective decrease achieved by the leaf's weight; higher is better.

    At order 2 this equals ``G1^2 / (2 (G2 + lambda))``.
    """
    return solve_leaf(stats, config)[1]
