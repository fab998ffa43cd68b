"""Closed-form accuracy dynamics of multi-round self-correction.

Each question is a two-state (correct / wrong) Markov chain with a
per-question probability of keeping a correct answer (``p_con``) and of
repairing a wrong one (``p_cri``).  At the dataset level the same recursion
holds with the confidence level ``CL`` and critique score ``CS``::

    Acc_t = Acc_{t-1} * CL + (1 - Acc_{t-1}) * CS
          = Upp - alpha**t * (Upp - Acc_0)

with ``Upp = CS / (1 - CL + CS)`` and ``alpha = CL - CS``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateWeights,
    InvalidProbability,
    NonConvergent,
    NumericalDomain,
)

# |1 - cl + cs| below this is treated as the alpha == 1 identity recursion.
DEGENERATE_TOL = 1e-12
# Closed-form values may overshoot [0, 1] by at most this much before erroring.
CLAMP_TOL = 1e-12


def check_probability(value, name="probability"):
    """Return ``value`` as float, raising InvalidProbability if not in [0, 1]."""
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise InvalidProbability(f"{name}={value!r} is not a number") from None
    if not (0.0 <= x <= 1.0):  # also rejects NaN
        raise InvalidProbability(f"{name}={value!r} is outside [0, 1]")
    return x


def _clamp(value, what="accuracy"):
    if value < 0.0:
        if value < -CLAMP_TOL:
            raise NumericalDomain(f"{what}={value!r} below 0 beyond tolerance")
        return 0.0
    if value > 1.0:
        if value > 1.0 + CLAMP_TOL:
            raise NumericalDomain(f"{what}={value!r} above 1 beyond tolerance")
        return 1.0
    return value


def _clamp_array(values, what="accuracy"):
    values = np.asarray(values, dtype=float)
    if np.any(values < -CLAMP_TOL) or np.any(values > 1.0 + CLAMP_TOL):
        raise NumericalDomain(f"{what} leaves [0, 1] beyond tolerance: {values}")
    return np.clip(values, 0.0, 1.0)


@dataclass(frozen=True)
class QuestionProfile:
    """Ground-truth chain parameters for one question."""

    p0: float
    p_con: float
    p_cri: float

    def __post_init__(self):
        for name in ("p0", "p_con", "p_cri"):
            object.__setattr__(self, name, check_probability(getattr(self, name), name))


@dataclass(frozen=True)
class DatasetProfile:
    """An ordered, non-empty collection of question profiles.

    ``ids`` are optional string labels used when profiles and transcripts
    are written to disk; they default to ``q0, q1, ...``.
    """

    questions: tuple
    ids: Optional[tuple] = None

    def __post_init__(self):
        questions = tuple(self.questions)
        if not questions:
            raise ValueError("a dataset needs at least one question")
        for q in questions:
            if not isinstance(q, QuestionProfile):
                raise TypeError(f"expected QuestionProfile, got {type(q).__name__}")
        object.__setattr__(self, "questions", questions)
        if self.ids is None:
            object.__setattr__(self, "ids", tuple(f"q{i}" for i in range(len(questions))))
        else:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != len(questions):
                raise ValueError("ids and questions differ in length")
            if len(set(ids)) != len(ids):
                raise ValueError("question ids must be unique")
            object.__setattr__(self, "ids", ids)

    @classmethod
    def homogeneous(cls, n, p0, p_con, p_cri):
        """``n`` copies of the same question profile."""
        return cls(tuple(QuestionProfile(p0, p_con, p_cri) for _ in range(n)))

    def __len__(self):
        return len(self.questions)

    def arrays(self):
        """Return ``(p0, p_con, p_cri)`` as float arrays of length n."""
        table = np.array([(q.p0, q.p_con, q.p_cri) for q in self.questions], dtype=float)
        return table[:, 0], table[:, 1], table[:, 2]

    def with_p0(self, p0):
        """Copy with initial correctness replaced; ``p0`` is a scalar or length-n sequence."""
        p0 = np.broadcast_to(np.asarray(p0, dtype=float), (len(self),))
        return DatasetProfile(
            tuple(QuestionProfile(float(a), q.p_con, q.p_cri) for a, q in zip(p0, self.questions)),
            self.ids,
        )


@dataclass(frozen=True)
class TheoryParams:
    """Dataset-level (CL, CS, Acc_0) together with the derived Upp and alpha.

    ``upp`` is None when ``1 - cl + cs`` vanishes (cl == 1 and cs == 0); the
    recursion is then the identity and the curve stays at ``acc0``.
    """

    cl: float
    cs: float
    acc0: float
    upp: Optional[float]
    alpha: float

    @property
    def degenerate(self):
        return self.upp is None

    @property
    def descending(self):
        """True in the failure regime where accuracy falls toward Upp."""
        return self.upp is not None and self.upp < self.acc0


@dataclass(frozen=True, eq=False)
class AccuracyCurve:
    """Accuracy values for rounds 0..T with optional per-round standard errors."""

    values: np.ndarray
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("curve values must be a non-empty 1-d sequence")
        if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
            raise InvalidProbability(f"curve values outside [0, 1]: {values}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            stderr = np.array(self.stderr, dtype=float)
            if stderr.shape != values.shape:
                raise ValueError("stderr must have the same length as values")
            if np.any(~(stderr >= 0.0)):
                raise ValueError("stderr must be nonnegative")
            stderr.setflags(write=False)
            object.__setattr__(self, "stderr", stderr)

    def __len__(self):
        return self.values.size

    def __getitem__(self, t):
        return self.values[t]

    @property
    def rounds(self):
        return self.values.size - 1


def derive_params(cl, cs, acc0):
    """Compute Upp and alpha from (CL, CS, Acc_0).

    >>> p = derive_params(0.9, 0.3, 0.5)
    >>> round(p.upp, 12), round(p.alpha, 12)
    (0.75, 0.6)
    """
    cl = check_probability(cl, "cl")
    cs = check_probability(cs, "cs")
    acc0 = check_probability(acc0, "acc0")
    denom = (1.0 - cl) + cs
    upp = None if abs(denom) < DEGENERATE_TOL else min(cs / denom, 1.0)
    return TheoryParams(cl=cl, cs=cs, acc0=acc0, upp=upp, alpha=cl - cs)


def _geometric(upp, alpha, start, t):
    # round 0 is returned as given: upp - (upp - start) can cancel away a tiny start
    values = upp - np.power(alpha, t) * (upp - start)
    return np.where(np.asarray(t) == 0, start, values)


def closed_form_accuracy(params, t):
    """Acc_t from the closed form; constant at ``acc0`` in the degenerate case."""
    t = int(t)
    if t < 0:
        raise ValueError(f"round must be nonnegative, got {t}")
    if params.degenerate:
        return params.acc0
    return _clamp(float(_geometric(params.upp, params.alpha, params.acc0, t)))


def closed_form_curve(params, rounds):
    """Closed-form accuracy for rounds 0..``rounds`` as an AccuracyCurve."""
    if rounds < 0:
        raise ValueError(f"rounds must be nonnegative, got {rounds}")
    t = np.arange(rounds + 1)
    if params.degenerate:
        return AccuracyCurve(np.full(rounds + 1, params.acc0))
    values = _clamp_array(_geometric(params.upp, params.alpha, params.acc0, t))
    return AccuracyCurve(values)


def recursive_curve(params, rounds):
    """Iterate ``Acc_t = Acc_{t-1} CL + (1 - Acc_{t-1}) CS`` for ``rounds`` steps."""
    if rounds < 1:
        raise ValueError(f"rounds must be positive, got {rounds}")
    cl = check_probability(params.cl, "cl")
    cs = check_probability(params.cs, "cs")
    acc = check_probability(params.acc0, "acc0")
    values = [acc]
    for _ in range(rounds):
        acc = acc * cl + (1.0 - acc) * cs
        values.append(acc)
    return AccuracyCurve(_clamp_array(values))


def _question_upp_alpha(p_con, p_cri):
    denom = (1.0 - p_con) + p_cri
    if abs(denom) < DEGENERATE_TOL:
        return None, 1.0
    return min(p_cri / denom, 1.0), p_con - p_cri


def question_closed_form(profile, t):
    """P(a_{i,t}): probability that question ``profile`` is answered correctly at round t."""
    t = int(t)
    if t < 0:
        raise ValueError(f"round must be nonnegative, got {t}")
    upp, alpha = _question_upp_alpha(profile.p_con, profile.p_cri)
    if upp is None:
        return profile.p0
    return _clamp(float(_geometric(upp, alpha, profile.p0, t)), "P(a_t)")


def question_probabilities(dataset, t):
    """Vector of P(a_{i,t}) over every question of ``dataset``."""
    t = int(t)
    if t < 0:
        raise ValueError(f"round must be nonnegative, got {t}")
    p0, p_con, p_cri = dataset.arrays()
    denom = (1.0 - p_con) + p_cri
    flat = np.abs(denom) < DEGENERATE_TOL
    safe = np.where(flat, 1.0, denom)
    upp = np.minimum(p_cri / safe, 1.0)
    alpha = p_con - p_cri
    probs = np.where(flat, p0, _geometric(upp, alpha, p0, t))
    return _clamp_array(probs, "P(a_t)")


def dataset_curve(dataset, rounds):
    """Exact expected accuracy Acc_t = mean_i P(a_{i,t}) for t = 0..rounds.

    Unlike :func:`closed_form_curve` this needs no constant-CL/CS assumption,
    so it is the true curve of a heterogeneous dataset.
    """
    return AccuracyCurve([question_probabilities(dataset, t).mean() for t in range(rounds + 1)])


def _weighted_mean(weights, values):
    # rescale first so subnormal weights do not underflow in the products
    w = weights / weights.max()
    return float(np.dot(w, values) / w.sum())


def metrics_at_round(dataset, t):
    """Exact round-t confidence level and critique score of a dataset.

    CL_t averages ``p_con`` weighted by P(a_{i,t}); CS_t averages ``p_cri``
    weighted by 1 - P(a_{i,t}).  For heterogeneous datasets these drift
    with t.
    """
    _, p_con, p_cri = dataset.arrays()
    probs = question_probabilities(dataset, t)
    right = probs.sum()
    wrong = (1.0 - probs).sum()
    if right == 0.0:
        raise DegenerateWeights(f"CL_{t} undefined: every question is certainly wrong")
    if wrong == 0.0:
        raise DegenerateWeights(f"CS_{t} undefined: every question is certainly right")
    cl = _weighted_mean(probs, p_con)
    cs = _weighted_mean(1.0 - probs, p_cri)
    return min(cl, 1.0), min(cs, 1.0)


def dataset_params(dataset, t=0):
    """TheoryParams for ``dataset`` from its round-t metrics and accuracy.

    A side whose weight is zero (no question can be right, or none can be
    wrong, at round t) falls back to the plain mean of ``p_con`` or
    ``p_cri``; that value is exact for homogeneous datasets.
    """
    _, p_con, p_cri = dataset.arrays()
    probs = question_probabilities(dataset, t)
    right, wrong = probs.sum(), (1.0 - probs).sum()
    cl = _weighted_mean(probs, p_con) if right > 0 else p_con.mean()
    cs = _weighted_mean(1.0 - probs, p_cri) if wrong > 0 else p_cri.mean()
    return derive_params(min(float(cl), 1.0), min(float(cs), 1.0), min(float(probs.mean()), 1.0))


def oracle_verifier_curve(cs, acc0, rounds):
    """Accuracy with correct answers made absorbing: ``1 - (1 - cs)**t (1 - acc0)``."""
    cs = check_probability(cs, "cs")
    acc0 = check_probability(acc0, "acc0")
    if rounds < 1:
        raise ValueError(f"rounds must be positive, got {rounds}")
    t = np.arange(rounds + 1)
    return AccuracyCurve(_clamp_array(1.0 - np.power(1.0 - cs, t) * (1.0 - acc0)))


def rounds_to_converge(params, epsilon):
    """Smallest t with ``|alpha|**t * |upp - acc0| < epsilon``.

    Raises NonConvergent when the gap never shrinks (|alpha| >= 1 or Upp
    undefined) and is not already below ``epsilon``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if params.degenerate:
        raise NonConvergent("Upp is undefined (cl=1, cs=0); the curve never moves")
    gap = abs(params.upp - params.acc0)
    if gap < epsilon:
        return 0
    rate = abs(params.alpha)
    if rate >= 1.0:
        raise NonConvergent(f"|alpha|={rate} >= 1 with gap {gap} >= epsilon")
    if rate == 0.0:
        return 1
    # log estimate, then settle the boundary exactly against the defining inequality
    t = max(0, math.ceil(math.log(epsilon / gap) / math.log(rate)))
    while t > 0 and rate ** (t - 1) * gap < epsilon:
        t -= 1
    while not rate**t * gap < epsilon:
        t += 1
    return t
