"""Evaluation metrics: precision/recall/F1 on the positive class, paired
prediction comparison via McNemar's test, and a serializable report."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence


class McNemarUndefined(ValueError):
    """Both classifiers got exactly the same items right; the test's
    discordant-pair count is zero and the statistic is undefined."""


@dataclass
class MetricsReport:
    n: int
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"examples   {self.n}",
            f"tp/fp/fn/tn  {self.tp}/{self.fp}/{self.fn}/{self.tn}",
            f"precision  {self.precision:.4f}",
            f"recall     {self.recall:.4f}",
            f"f1         {self.f1:.4f}",
        ]
        return "\n".join(lines)


def _check_labels(values: Sequence[int], name: str) -> None:
    for v in values:
        if v not in (0, 1):
            raise ValueError(f"{name} must contain only 0/1, got {v!r}")


def prf1(y_true: Sequence[int], y_pred: Sequence[int]) -> MetricsReport:
    """Precision, recall, F1 for class 1.  Zero denominators score 0.0 and
    emit a warning instead of raising."""
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} labels, {len(y_pred)} predictions")
    if not y_true:
        raise ValueError("cannot score an empty prediction set")
    _check_labels(y_true, "y_true")
    _check_labels(y_pred, "y_pred")
    tp = sum(1 for t, p in zip(y_true, y_pred) if t == 1 and p == 1)
    fp = sum(1 for t, p in zip(y_true, y_pred) if t == 0 and p == 1)
    fn = sum(1 for t, p in zip(y_true, y_pred) if t == 1 and p == 0)
    tn = len(y_true) - tp - fp - fn
    if tp + fp == 0:
        warnings.warn("no positive predictions; precision set to 0.0")
        precision = 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        warnings.warn("no positive labels; recall set to 0.0")
        recall = 0.0
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        warnings.warn("precision and recall both zero; f1 set to 0.0")
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(n=len(y_true), tp=tp, fp=fp, fn=fn, tn=tn,
                         precision=precision, recall=recall, f1=f1)


def relative_improvement(new: float, base: float) -> float:
    """Percent change of new over base."""
    if base == 0.0:
        raise ValueError("relative improvement undefined for a zero base")
    return (new - base) / base * 100.0


# ---------------------------------------------------------------------------
# regularized incomplete gamma, for the chi-square survival function
# ---------------------------------------------------------------------------

_GAMMA_EPS = 1e-12
_GAMMA_MAX_ITER = 500


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by power series, for x < a + 1."""
    term = 1.0 / a
    total = term
    for n in range(1, _GAMMA_MAX_ITER):
        term *= x / (a + n)
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    else:
        raise ArithmeticError("gamma series did not converge")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by continued fraction (modified
    Lentz), for x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    else:
        raise ArithmeticError("gamma continued fraction did not converge")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammq(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x)."""
    if a <= 0.0 or x < 0.0:
        raise ValueError(f"gammq requires a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chi2_sf(x: float, dof: int = 1) -> float:
    """Survival function of the chi-square distribution."""
    if x < 0.0:
        raise ValueError("chi-square statistic must be non-negative")
    return gammq(dof / 2.0, x / 2.0)


@dataclass
class McNemarResult:
    chi2: float
    p_value: float
    only_a_correct: int
    only_b_correct: int


def mcnemar(y_true: Sequence[int], pred_a: Sequence[int],
            pred_b: Sequence[int]) -> McNemarResult:
    """Continuity-corrected McNemar test on paired predictions.

    The statistic is (|b - c| - 1)^2 / (b + c) over the discordant counts,
    with the p-value from the chi-square survival function at one degree
    of freedom.  Raises McNemarUndefined when there are no discordant
    pairs.  Symmetric in the two prediction vectors.
    """
    if not len(y_true) == len(pred_a) == len(pred_b):
        raise ValueError("paired test needs equal-length label and prediction vectors")
    _check_labels(y_true, "y_true")
    _check_labels(pred_a, "pred_a")
    _check_labels(pred_b, "pred_b")
    only_a = sum(1 for t, a, b in zip(y_true, pred_a, pred_b) if a == t and b != t)
    only_b = sum(1 for t, a, b in zip(y_true, pred_a, pred_b) if a != t and b == t)
    if only_a + only_b == 0:
        raise McNemarUndefined("no discordant pairs between the two prediction sets")
    chi2 = (abs(only_a - only_b) - 1.0) ** 2 / (only_a + only_b)
    return McNemarResult(chi2=chi2, p_value=chi2_sf(chi2, dof=1),
                         only_a_correct=only_a, only_b_correct=only_b)
