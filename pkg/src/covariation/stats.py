"""Classical tests for the classification and correlation stages.

Everything here works on plain sequences or numpy arrays. Distribution
tails come from ``scipy.special``; the test statistics themselves are
computed locally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np
from scipy import special

from .inventory import Variable

_NORMAL = NormalDist()


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    method: str
    df: int | None = None
    effect_size: float | None = None
    valid: bool = True

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            object.__setattr__(self, "p_value", min(1.0, max(0.0, self.p_value)))

    def to_dict(self) -> dict:
        return {"method": self.method, "statistic": self.statistic, "df": self.df,
                "p_value": self.p_value, "effect_size": self.effect_size, "valid": self.valid}


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray
    row_labels: tuple = ()
    col_labels: tuple = ()

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] < 2 or counts.shape[1] < 2:
            raise StatsError(f"contingency table must be at least 2x2, got shape {counts.shape}")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise StatsError("contingency counts must be non-negative integers")
        if counts.sum() < 1:
            raise StatsError("contingency table is empty")
        object.__setattr__(self, "counts", counts.astype(np.int64))
        if not self.row_labels:
            object.__setattr__(self, "row_labels", tuple(range(counts.shape[0])))
        if not self.col_labels:
            object.__setattr__(self, "col_labels", tuple(range(counts.shape[1])))

    @classmethod
    def from_pairs(cls, rows: Sequence, cols: Sequence) -> "ContingencyTable":
        """Cross-tabulate two label sequences of equal length."""
        if len(rows) != len(cols):
            raise StatsError("label sequences differ in length")
        rl = tuple(sorted(set(rows), key=str))
        cl = tuple(sorted(set(cols), key=str))
        counts = np.zeros((len(rl), len(cl)), dtype=np.int64)
        ri = {v: i for i, v in enumerate(rl)}
        ci = {v: i for i, v in enumerate(cl)}
        for r, c in zip(rows, cols):
            counts[ri[r], ci[c]] += 1
        return cls(counts, rl, cl)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _as_table(t) -> ContingencyTable:
    return t if isinstance(t, ContingencyTable) else ContingencyTable(np.asarray(t))


# --- normality -------------------------------------------------------------

def _poly(coefs: Sequence[float], x: float) -> float:
    # coefficients in increasing order of power
    return sum(c * x ** i for i, c in enumerate(coefs))


def _swilk_coefficients(n: int) -> np.ndarray:
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    m = np.array([_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    summ2 = float(m @ m)
    u = 1.0 / math.sqrt(n)
    c = m / math.sqrt(summ2)
    a = np.empty(n)
    an = c[-1] + _poly([0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], u)
    if n > 5:
        an1 = c[-2] + _poly([0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], u)
        phi = (summ2 - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an ** 2 - 2 * an1 ** 2)
        a[2:-2] = m[2:-2] / math.sqrt(phi)
        a[0], a[1], a[-2], a[-1] = -an, -an1, an1, an
    else:
        phi = (summ2 - 2 * m[-1] ** 2) / (1 - 2 * an ** 2)
        a[1:-1] = m[1:-1] / math.sqrt(phi)
        a[0], a[-1] = -an, an
    return a


def shapiro_wilk(x: Sequence[float]) -> TestResult:
    """Shapiro-Wilk W with Royston's (1995) normalizing transform for the p-value."""
    xs = np.sort(np.asarray(x, dtype=float))
    n = xs.size
    if not 3 <= n <= 5000:
        raise StatsError(f"Shapiro-Wilk needs 3 <= n <= 5000, got n={n}")
    if not np.all(np.isfinite(xs)):
        raise StatsError("non-finite value in sample")
    if xs[-1] - xs[0] < 1e-19 * max(1.0, abs(xs[0])):
        raise StatsError("degenerate sample: all values identical")
    a = _swilk_coefficients(n)
    centred = xs - xs.mean()
    w = float((a @ xs) ** 2 / (centred @ centred))
    w = min(w, 1.0)
    if n == 3:
        w = max(w, 0.75)
        p = (6 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return TestResult(w, max(p, 0.0), "shapiro-wilk")
    w1 = math.log1p(-w) if w < 1 else -math.inf
    if n <= 11:
        gamma = _poly([-2.273, 0.459], n)
        if w1 >= gamma:
            return TestResult(w, 1e-99, "shapiro-wilk")
        y = -math.log(gamma - w1)
        mean = _poly([0.5440, -0.39978, 0.025054, -0.0006714], n)
        sd = math.exp(_poly([1.3822, -0.77857, 0.062767, -0.0020322], n))
    else:
        ln = math.log(n)
        y = w1
        mean = _poly([-1.5861, -0.31082, -0.083751, 0.0038915], ln)
        sd = math.exp(_poly([-0.4803, -0.082676, 0.0030302], ln))
    if y == -math.inf:
        return TestResult(w, 1.0, "shapiro-wilk")
    p = 1.0 - _NORMAL.cdf((y - mean) / sd)
    return TestResult(w, p, "shapiro-wilk")


# --- rank correlation ------------------------------------------------------

def rankdata(x: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties given their average rank."""
    arr = np.asarray(x, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    sorted_vals = arr[order]
    ranks = np.empty(arr.size)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    return float(da @ db) / denom


def _t_pvalue(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    return float(2.0 * special.stdtr(df, -abs(t)))


def spearman(x: Sequence[float], y: Sequence[float], permutations: int | None = None,
             seed: int = 0) -> TestResult:
    """Spearman's rho with a two-sided p-value.

    The p-value uses the t approximation (df = n - 2) unless
    ``permutations`` is given, in which case it is the seeded Monte Carlo
    estimate (count + 1) / (permutations + 1).
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise StatsError("spearman needs two 1-d sequences of equal length")
    n = xa.size
    if n < 4:
        raise StatsError(f"spearman needs n >= 4, got {n}")
    if np.all(xa == xa[0]) or np.all(ya == ya[0]):
        raise StatsError("undefined correlation: constant input")
    rx, ry = rankdata(xa), rankdata(ya)
    rho = max(-1.0, min(1.0, _pearson(rx, ry)))
    if permutations is None:
        return TestResult(rho, _t_pvalue(rho, n), "spearman", df=n - 2)
    if permutations < 1:
        raise StatsError("permutations must be positive")
    rng = np.random.default_rng(seed)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    norm = math.sqrt(float(dx @ dx) * float(dy @ dy))
    hits = 0
    for _ in range(permutations):
        if abs(float(dx @ rng.permutation(dy))) / norm >= abs(rho) - 1e-12:
            hits += 1
    return TestResult(rho, (hits + 1) / (permutations + 1), "spearman-permutation", df=n - 2)


def holm_adjust(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, in the input order."""
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p_values[i]))
        adjusted[i] = running
    return adjusted


# --- association -----------------------------------------------------------

def _expected(counts: np.ndarray) -> np.ndarray:
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise StatsError("contingency table has an empty row or column margin")
    return np.outer(rows, cols) / counts.sum()


def chi_square(t) -> TestResult:
    """Pearson chi-square test of independence (no continuity correction).

    ``valid`` is False when any expected count is below 5; callers should
    fall back to Fisher's exact test on 2x2 tables in that case.
    """
    table = _as_table(t)
    counts = table.counts.astype(float)
    expected = _expected(counts)
    x2 = float(((counts - expected) ** 2 / expected).sum())
    r, c = table.shape
    df = (r - 1) * (c - 1)
    p = float(special.gammaincc(df / 2.0, x2 / 2.0))
    v = math.sqrt(x2 / (counts.sum() * (min(r, c) - 1)))
    return TestResult(x2, p, "chi-square", df=df, effect_size=min(v, 1.0),
                      valid=bool(np.all(expected >= 5)))


def fisher_exact_2x2(t) -> TestResult:
    """Two-sided Fisher exact test; statistic is the sample odds ratio."""
    table = _as_table(t)
    if table.shape != (2, 2):
        raise StatsError(f"Fisher's exact test needs a 2x2 table, got {table.shape}")
    a, b, c, d = (int(v) for v in table.counts.ravel())
    r1, c1, n = a + b, a + c, a + b + c + d
    if r1 == 0 or c + d == 0 or c1 == 0 or b + d == 0:
        raise StatsError("contingency table has an empty row or column margin")
    lo, hi = max(0, r1 + c1 - n), min(r1, c1)
    # exact integer weights C(c1, x) * C(n - c1, r1 - x); the common denominator is C(n, r1)
    weights = [math.comb(c1, x) * math.comb(n - c1, r1 - x) for x in range(lo, hi + 1)]
    observed = weights[a - lo]
    p = sum(w for w in weights if w <= observed) / math.comb(n, r1)
    odds = (a * d) / (b * c) if b * c else math.inf
    return TestResult(odds, min(1.0, p), "fisher-exact")


def cramers_v(t, squared: bool = False) -> float:
    table = _as_table(t)
    v = chi_square(table).effect_size
    return v * v if squared else v


def association_test(t) -> TestResult:
    """Chi-square, or Fisher's exact test for 2x2 tables failing the expected-count rule."""
    table = _as_table(t)
    result = chi_square(table)
    if not result.valid and table.shape == (2, 2):
        fisher = fisher_exact_2x2(table)
        return TestResult(fisher.statistic, fisher.p_value, fisher.method,
                          effect_size=result.effect_size)
    return result


# --- logistic regression ---------------------------------------------------

@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    slope: float
    std_errors: tuple[float, float]
    p_values: tuple[float, float]
    log_likelihood: float
    iterations: int

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.intercept, self.slope])


def _loglik(beta, X, y):
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_fit(y: Sequence[int], x: Sequence[float], max_iter: int = 50,
                 tol: float = 1e-10) -> LogisticFit:
    """Maximum-likelihood logit of a binary outcome on one predictor (IRLS)."""
    ya = np.asarray(y, dtype=float)
    xa = np.asarray(x, dtype=float)
    if ya.shape != xa.shape or ya.ndim != 1:
        raise StatsError("y and x must be 1-d and of equal length")
    if ya.size < 10:
        raise StatsError(f"logistic regression needs n >= 10, got {ya.size}")
    if not np.all((ya == 0) | (ya == 1)):
        raise StatsError("y must be binary (0/1)")
    if ya.min() == ya.max():
        raise StatsError("y has a single class; both outcomes must be present")
    x0, x1 = xa[ya == 0], xa[ya == 1]
    if x0.max() <= x1.min() or x1.max() <= x0.min():
        raise StatsError("perfect separation: the predictor separates the two classes, "
                         "so the maximum-likelihood estimate does not exist")
    X = np.column_stack([np.ones_like(xa), xa])
    beta = np.zeros(2)
    ll = _loglik(beta, X, ya)
    it = 0
    for it in range(1, max_iter + 1):
        p = special.expit(X @ beta)
        w = p * (1 - p)
        info = X.T @ (X * w[:, None])
        beta = beta + np.linalg.solve(info, X.T @ (ya - p))
        new_ll = _loglik(beta, X, ya)
        done = abs(new_ll - ll) <= tol * abs(ll)
        ll = new_ll
        if done:
            break
    p = special.expit(X @ beta)
    info = X.T @ (X * (p * (1 - p))[:, None])
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    z = beta / se
    pv = 2.0 * special.ndtr(-np.abs(z))
    return LogisticFit(float(beta[0]), float(beta[1]), (float(se[0]), float(se[1])),
                       (float(pv[0]), float(pv[1])), ll, it)


# --- correlation matrix ----------------------------------------------------

@dataclass
class CorrelationMatrix:
    measure: str
    variables: tuple[Variable, ...]
    n: int
    cells: list[list[TestResult]]
    normality: dict[Variable, TestResult | None] = field(default_factory=dict)

    def rho(self) -> np.ndarray:
        return np.array([[c.statistic for c in row] for row in self.cells])

    def p_values(self) -> np.ndarray:
        return np.array([[c.p_value for c in row] for row in self.cells])

    def cell(self, a: Variable, b: Variable) -> TestResult:
        return self.cells[self.variables.index(a)][self.variables.index(b)]

    def to_dict(self, alpha: float = 0.05) -> dict:
        return {
            "measure": self.measure,
            "n": self.n,
            "variables": [v.label for v in self.variables],
            "normality": {v.label: (r.to_dict() if r else None) for v, r in self.normality.items()},
            "cells": [
                {"a": a.label, "b": b.label, "rho": self.cells[i][j].statistic,
                 "p_value": self.cells[i][j].p_value,
                 "significant": i != j and self.cells[i][j].p_value < alpha}
                for i, a in enumerate(self.variables) for j, b in enumerate(self.variables) if i < j
            ],
        }


def correlation_matrix(profiles, measure: str = "rate", holm: bool = False,
                       permutations: int | None = None, seed: int = 0) -> CorrelationMatrix:
    """Pairwise Spearman correlations of the four per-speaker measures."""
    profiles = list(profiles)
    if len(profiles) < 4:
        raise StatsError(f"correlation needs at least 4 speakers, got {len(profiles)}")
    variables = tuple(Variable)
    cols = {v: np.array([p.value(v, measure) for p in profiles]) for v in variables}
    k = len(variables)
    cells: list[list[TestResult | None]] = [[None] * k for _ in range(k)]
    for i, a in enumerate(variables):
        cells[i][i] = TestResult(1.0, 0.0, "spearman", df=len(profiles) - 2)
        for j in range(i + 1, k):
            res = spearman(cols[a], cols[variables[j]], permutations=permutations, seed=seed)
            cells[i][j] = cells[j][i] = res
    if holm:
        pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
        adjusted = holm_adjust([cells[i][j].p_value for i, j in pairs])
        for (i, j), p in zip(pairs, adjusted):
            old = cells[i][j]
            cells[i][j] = cells[j][i] = TestResult(old.statistic, p, old.method + "+holm", old.df)
    normality = {}
    for v in variables:
        try:
            normality[v] = shapiro_wilk(cols[v])
        except StatsError:
            normality[v] = None
    return CorrelationMatrix(measure, variables, len(profiles), cells, normality)
