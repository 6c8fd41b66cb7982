"""Assessment criteria: anthropomorphism, intent accuracy, success rate, duration."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrials, InputError, ZeroReferenceVariance
from .gesture import eval_gesture


@dataclass(frozen=True, eq=False)
class AnthropomorphismReport:
    r2_per_dof: np.ndarray
    rmse_per_dof: np.ndarray

    @property
    def r2_mean(self):
        return float(np.mean(self.r2_per_dof))

    @property
    def rmse_mean(self):
        return float(np.mean(self.rmse_per_dof))


@dataclass(frozen=True)
class TrialRecord:
    intended_target: str
    estimated_target: str
    grasp_success: bool
    duration: float
    object_spacing: float = None

    @property
    def intent_ok(self):
        return self.intended_target == self.estimated_target


def anthropomorphism(distances, angles, reference) -> AnthropomorphismReport:
    """Per-DOF R^2 and RMSE of executed angles against a gesture function.

    The R^2 denominator is the spread of the reference values over the
    sampled distances.
    """
    d = np.asarray(distances, dtype=float)
    a = np.asarray(angles, dtype=float)
    if len(d) < 2:
        raise InputError("anthropomorphism needs at least two samples")
    ref = eval_gesture(reference, d)
    resid = a - ref
    spread = ((ref - ref.mean(axis=0)) ** 2).sum(axis=0)
    if np.any(spread == 0):
        raise ZeroReferenceVariance("reference is constant over the sampled distances")
    r2 = 1.0 - (resid ** 2).sum(axis=0) / spread
    rmse = np.sqrt((resid ** 2).mean(axis=0))
    return AnthropomorphismReport(r2, rmse)


def _check(trials):
    trials = list(trials)
    if not trials:
        raise EmptyTrials("no trials to evaluate")
    return trials


def intent_accuracy(trials) -> float:
    trials = _check(trials)
    return 100.0 * sum(t.intent_ok for t in trials) / len(trials)


def grasp_success_rate(trials) -> float:
    """Share of successful grasps; a wrong intent always counts as a failure."""
    trials = _check(trials)
    return 100.0 * sum(t.grasp_success and t.intent_ok for t in trials) / len(trials)


def mean_std(values):
    """Arithmetic mean and sample (n-1) standard deviation; std is 0 for one value."""
    v = np.asarray(list(values), dtype=float)
    if len(v) == 0:
        raise EmptyTrials("no values")
    std = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    return float(np.mean(v)), std


def duration_stats(trials):
    return mean_std(t.duration for t in _check(trials))


def format_mean_std(mean, std, digits=2):
    return f"{mean:.{digits}f}±{std:.{digits}f}"


def by_spacing(trials):
    """Trials grouped by spacing, largest spacing first."""
    groups = defaultdict(list)
    for t in trials:
        groups[t.object_spacing].append(t)
    return dict(sorted(groups.items(),
                       key=lambda kv: -np.inf if kv[0] is None else -kv[0]))


def rounds(trials, round_size=40):
    trials = list(trials)
    return [trials[i:i + round_size] for i in range(0, len(trials), round_size)]


def per_round(metric, trials, round_size=40):
    """``metric`` evaluated per consecutive round, as (mean, std) over rounds."""
    return mean_std(metric(r) for r in rounds(_check(trials), round_size))
