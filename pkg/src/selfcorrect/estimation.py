"""Estimating per-question probabilities and dataset CL/CS from observed data.

Generation tasks are estimated from repeated sampling: M independent
(round t, round t+1) correctness pairs per question.  Classification tasks
use a label-distribution snapshot: the prior over K labels and the
post-correction label distribution for each label fed back.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DegenerateWeights, RoundOutOfRange

ROW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LabelSnapshot:
    """Label probabilities before and after one self-correction step.

    ``transition[j]`` is the label distribution produced when label ``j`` is
    fed back for correction.
    """

    correct_label: int
    prior: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        prior = np.array(self.prior, dtype=float)
        transition = np.array(self.transition, dtype=float)
        k = prior.size
        problems = []
        if prior.ndim != 1 or k < 2:
            problems.append("prior must be a vector over at least 2 labels")
        elif transition.shape != (k, k):
            problems.append(f"transition must be {k}x{k}, got {transition.shape}")
        if not 0 <= int(self.correct_label) < max(k, 1):
            problems.append(f"correct_label {self.correct_label} not in [0, {k})")
        if np.any(~((prior >= 0) & (prior <= 1))) or np.any(~((transition >= 0) & (transition <= 1))):
            problems.append("all probabilities must lie in [0, 1]")
        if abs(prior.sum() - 1.0) > ROW_TOL:
            problems.append(f"prior sums to {prior.sum()!r}, not 1")
        if transition.ndim == 2 and np.any(np.abs(transition.sum(axis=1) - 1.0) > ROW_TOL):
            problems.append("every transition row must sum to 1")
        if problems:
            raise ValueError("; ".join(problems))
        prior.setflags(write=False)
        transition.setflags(write=False)
        object.__setattr__(self, "correct_label", int(self.correct_label))
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "transition", transition)


@dataclass(frozen=True)
class QuestionEstimate:
    """Estimated P(a_t), P(a_{t+1} | a_t) and P(a_{t+1} | not a_t) for one question.

    A conditional is None when its conditioning set is empty; the support
    counts say how many observations (or labels) backed each conditional.
    """

    p_hat: float
    p_con_hat: Optional[float]
    p_cri_hat: Optional[float]
    n_correct_support: int = 1
    n_wrong_support: int = 1

    def __post_init__(self):
        if (self.p_con_hat is None) != (self.n_correct_support == 0):
            raise ValueError("p_con_hat must be defined exactly when n_correct_support > 0")
        if (self.p_cri_hat is None) != (self.n_wrong_support == 0):
            raise ValueError("p_cri_hat must be defined exactly when n_wrong_support > 0")
        for name in ("p_hat", "p_con_hat", "p_cri_hat"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")


@dataclass(frozen=True)
class RoundMetrics:
    """Aggregated CL/CS for the transition t -> t+1; None where weight is zero."""

    round: int
    cl_hat: Optional[float]
    cs_hat: Optional[float]
    cl_weight: float
    cs_weight: float


@dataclass(frozen=True)
class EstimatedMetrics:
    per_round: tuple

    def cl(self):
        return [r.cl_hat for r in self.per_round]

    def cs(self):
        return [r.cs_hat for r in self.per_round]


def _check_round(transcript, t):
    if not 0 <= t < transcript.n_rounds:
        raise RoundOutOfRange(
            f"round {t} needs rounds {t} and {t + 1}; transcript has rounds 0..{transcript.n_rounds}"
        )


def _from_counts(n_samples, n_right, n_keep, n_wrong, n_fix):
    return QuestionEstimate(
        p_hat=n_right / n_samples,
        p_con_hat=n_keep / n_right if n_right else None,
        p_cri_hat=n_fix / n_wrong if n_wrong else None,
        n_correct_support=int(n_right),
        n_wrong_support=int(n_wrong),
    )


def estimate_generation(transcript, question, t):
    """Sample-frequency estimates for ``question`` from its round-t/t+1 pairs."""
    _check_round(transcript, t)
    if not 0 <= question < transcript.n_questions:
        raise IndexError(f"question {question} out of range")
    before = transcript.correctness[question, :, t]
    after = transcript.correctness[question, :, t + 1]
    n_right = int(before.sum())
    return _from_counts(
        before.size,
        n_right,
        int((before & after).sum()),
        before.size - n_right,
        int((~before & after).sum()),
    )


def estimate_round(transcript, t):
    """:func:`estimate_generation` for every question at round ``t``."""
    _check_round(transcript, t)
    before = transcript.correctness[:, :, t]
    after = transcript.correctness[:, :, t + 1]
    m = before.shape[1]
    right = before.sum(axis=1)
    keep = (before & after).sum(axis=1)
    fix = (~before & after).sum(axis=1)
    return [
        _from_counts(m, int(r), int(k), m - int(r), int(f)) for r, k, f in zip(right, keep, fix)
    ]


def estimate_pooled(transcript):
    """Per-question estimates with all adjacent-round transitions merged.

    Valid only if CL and CS stay constant over rounds; trades round
    resolution for variance.
    """
    if transcript.n_rounds < 1:
        raise RoundOutOfRange("pooling needs at least rounds 0 and 1")
    before = transcript.correctness[:, :, :-1]
    after = transcript.correctness[:, :, 1:]
    trials = before.shape[1] * before.shape[2]
    right = before.sum(axis=(1, 2))
    keep = (before & after).sum(axis=(1, 2))
    fix = (~before & after).sum(axis=(1, 2))
    return [
        _from_counts(trials, int(r), int(k), trials - int(r), int(f))
        for r, k, f in zip(right, keep, fix)
    ]


def estimate_classification(snapshot, literal=False):
    """Estimates from a label snapshot.

    By default the wrong-to-right probability is a proper conditional:
    the prior-weighted chance of moving to the correct label, divided by
    the prior mass on wrong labels.  ``literal=True`` skips that division.
    """
    c = snapshot.correct_label
    prior = snapshot.prior
    wrong = np.arange(prior.size) != c
    mass = float(prior[wrong].sum())
    fixed = float(np.dot(snapshot.transition[wrong, c], prior[wrong]))
    if literal:
        p_cri = fixed
    else:
        if mass == 0.0:
            raise DegenerateWeights("no prior mass on wrong labels; conditional undefined")
        p_cri = fixed / mass
    return QuestionEstimate(
        p_hat=float(prior[c]),
        p_con_hat=float(snapshot.transition[c, c]),
        p_cri_hat=min(max(p_cri, 0.0), 1.0),
        n_correct_support=1,
        n_wrong_support=int(wrong.sum()),
    )


def _side(weights, values):
    w = np.asarray(weights, dtype=float)
    total = float(w.sum())
    if total <= 0.0:
        return None, total
    # rescale first so subnormal weights do not underflow in the products
    w = w / w.max()
    return min(float(np.dot(w, values) / w.sum()), 1.0), total


def _weighted(estimates):
    right = [(e.p_hat, e.p_con_hat) for e in estimates if e.p_con_hat is not None]
    wrong = [(1.0 - e.p_hat, e.p_cri_hat) for e in estimates if e.p_cri_hat is not None]
    cl, cl_den = _side(*zip(*right)) if right else (None, 0.0)
    cs, cs_den = _side(*zip(*wrong)) if wrong else (None, 0.0)
    return cl, cs, cl_den, cs_den


def aggregate_metrics(estimates):
    """Plug-in CL and CS: ``p_hat``-weighted mean of the per-question conditionals.

    Questions whose conditional is undefined drop out of that side's sums.
    """
    cl, cs, cl_w, cs_w = _weighted(estimates)
    if cl is None:
        raise DegenerateWeights(f"CL undefined: total correct weight {cl_w}")
    if cs is None:
        raise DegenerateWeights(f"CS undefined: total wrong weight {cs_w}")
    return cl, cs


def stability_report(transcript):
    """CL/CS estimated separately for every transition t -> t+1."""
    if transcript.n_rounds < 1:
        raise RoundOutOfRange("stability report needs at least rounds 0 and 1")
    rows: List[RoundMetrics] = []
    for t in range(transcript.n_rounds):
        cl, cs, cl_w, cs_w = _weighted(estimate_round(transcript, t))
        rows.append(RoundMetrics(t, cl, cs, cl_w, cs_w))
    return EstimatedMetrics(tuple(rows))


def pooled_metrics(transcript):
    """CL/CS from :func:`estimate_pooled`; raises DegenerateWeights like aggregate_metrics."""
    return aggregate_metrics(estimate_pooled(transcript))
