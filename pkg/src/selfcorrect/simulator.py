"""Seeded Monte Carlo simulation of multi-round self-correction.

Every (question, sample) pair is an independent first-order two-state
chain: round 0 is correct with probability ``p0``; afterwards a correct
answer stays correct with probability ``p_con`` and a wrong answer is
repaired with probability ``p_cri``.  Random draws come from the
counter-based streams in :mod:`selfcorrect.rng`, so a transcript depends
only on the dataset and the config, never on how work is split up.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .theory import AccuracyCurve, DatasetProfile, check_probability


@dataclass(frozen=True)
class SimulationConfig:
    """Rounds, samples per question, master seed and oracle-verifier flag.

    Defaults mirror a five-round run with five sampled responses per question.
    """

    rounds: int = 5
    samples_per_question: int = 5
    master_seed: int = 0
    oracle_verifier: bool = False

    def __post_init__(self):
        if int(self.rounds) < 0:
            raise ValueError(f"rounds must be nonnegative, got {self.rounds}")
        if int(self.samples_per_question) < 1:
            raise ValueError(
                f"samples_per_question must be at least 1, got {self.samples_per_question}"
            )
        object.__setattr__(self, "rounds", int(self.rounds))
        object.__setattr__(self, "samples_per_question", int(self.samples_per_question))
        object.__setattr__(self, "master_seed", rng.check_seed(self.master_seed))
        object.__setattr__(self, "oracle_verifier", bool(self.oracle_verifier))


@dataclass(frozen=True, eq=False)
class Transcript:
    """Correctness outcomes indexed ``[question, sample, round]`` (rounds 0..T)."""

    correctness: np.ndarray
    question_ids: Optional[tuple] = None

    def __post_init__(self):
        c = np.array(self.correctness, dtype=bool)
        if c.ndim != 3:
            raise ValueError(f"correctness must be 3-d, got shape {c.shape}")
        if c.shape[0] < 1 or c.shape[1] < 1 or c.shape[2] < 1:
            raise ValueError(f"transcript needs >= 1 question, sample and round: {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "correctness", c)
        if self.question_ids is None:
            ids = tuple(f"q{i}" for i in range(c.shape[0]))
        else:
            ids = tuple(str(i) for i in self.question_ids)
            if len(ids) != c.shape[0]:
                raise ValueError("question_ids length does not match n_questions")
            if len(set(ids)) != len(ids):
                raise ValueError("question ids must be unique")
        object.__setattr__(self, "question_ids", ids)

    @property
    def n_questions(self):
        return self.correctness.shape[0]

    @property
    def n_samples(self):
        return self.correctness.shape[1]

    @property
    def n_rounds(self):
        """T, the index of the last round (round 0 is always present)."""
        return self.correctness.shape[2] - 1

    def __eq__(self, other):
        if not isinstance(other, Transcript):
            return NotImplemented
        return self.question_ids == other.question_ids and np.array_equal(
            self.correctness, other.correctness
        )


def _simulate_block(question_index, p0, p_con, p_cri, config):
    keys = rng.stream_keys(config.master_seed, question_index, config.samples_per_question)
    out = np.empty(keys.shape + (config.rounds + 1,), dtype=bool)
    state = rng.uniforms(keys, 0) < p0[:, None]
    out[..., 0] = state
    for t in range(1, config.rounds + 1):
        threshold = np.where(state, p_con[:, None], p_cri[:, None])
        state_next = rng.uniforms(keys, t) < threshold
        if config.oracle_verifier:
            state_next |= state
        state = state_next
        out[..., t] = state
    return out


def simulate(dataset, config, workers=1, block_size=None):
    """Simulate ``config.samples_per_question`` chains per question.

    ``workers`` > 1 fans the questions out over a thread pool in blocks of
    ``block_size``; the returned transcript is bit-identical for any choice.
    With ``config.oracle_verifier`` set, a chain that reaches the correct
    state stays there for the remaining rounds.
    """
    if not isinstance(dataset, DatasetProfile):
        raise TypeError("dataset must be a DatasetProfile")
    p0, p_con, p_cri = dataset.arrays()
    for name, arr in (("p0", p0), ("p_con", p_con), ("p_cri", p_cri)):
        for v in arr:
            check_probability(v, name)
    n = len(dataset)
    index = np.arange(n, dtype=np.uint64)
    if workers <= 1 and block_size is None:
        correctness = _simulate_block(index, p0, p_con, p_cri, config)
    else:
        size = block_size or max(1, math.ceil(n / workers))
        blocks = [slice(s, min(s + size, n)) for s in range(0, n, size)]
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            parts = list(
                pool.map(
                    lambda b: _simulate_block(index[b], p0[b], p_con[b], p_cri[b], config),
                    blocks,
                )
            )
        correctness = np.concatenate(parts, axis=0)
    return Transcript(correctness, dataset.ids)


def empirical_curve(transcript):
    """Per-round accuracy over all (question, sample) pairs with binomial SEs."""
    c = transcript.correctness
    trials = c.shape[0] * c.shape[1]
    values = c.mean(axis=(0, 1))
    stderr = np.sqrt(values * (1.0 - values) / trials)
    return AccuracyCurve(values, stderr)


def per_question_curve(transcript):
    """Fraction of samples correct, shape ``(n_questions, T + 1)``."""
    return transcript.correctness.mean(axis=1)


def force_initial_accuracy_classification(dataset, acc_target, k_classes):
    """Give every question initial correctness ``acc_target``.

    With K labels the remaining ``1 - acc_target`` mass would sit evenly on
    the K - 1 wrong labels; at the correct/wrong level only ``p0`` changes.
    """
    acc_target = check_probability(acc_target, "acc_target")
    if int(k_classes) < 2:
        raise ValueError(f"k_classes must be at least 2, got {k_classes}")
    return dataset.with_p0(acc_target)


def wrong_label_mass(acc_target, k_classes):
    """Initial probability placed on each incorrect label."""
    acc_target = check_probability(acc_target, "acc_target")
    if int(k_classes) < 2:
        raise ValueError(f"k_classes must be at least 2, got {k_classes}")
    return (1.0 - acc_target) / (int(k_classes) - 1)


def select_questions(n, k, seed):
    """``k`` distinct indices out of ``range(n)``, uniformly at random.

    Each index is ranked by ``mix64(seed XOR mix64(index))`` and the ``k``
    smallest are kept, so the choice is frozen for a given seed.
    """
    seed = rng.check_seed(seed)
    scores = rng.mix64_array(np.uint64(seed) ^ rng.mix64_array(np.arange(n, dtype=np.uint64)))
    return np.sort(np.argsort(scores, kind="stable")[:k])


def force_initial_accuracy_generation(dataset, acc_target, seed):
    """Make floor(acc_target * n) randomly chosen questions start correct, the rest wrong."""
    acc_target = check_probability(acc_target, "acc_target")
    n = len(dataset)
    k = math.floor(acc_target * n)
    p0 = np.zeros(n)
    p0[select_questions(n, k, seed)] = 1.0
    return dataset.with_p0(p0)


def run_corollary1(dataset, targets, config, mode="classification", k_classes=4):
    """One empirical curve per forced initial accuracy in ``targets``.

    All runs share ``config`` (and hence the random streams), so differences
    between curves come only from the starting accuracy.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("targets must be non-empty")
    curves = []
    for target in targets:
        if mode == "classification":
            forced = force_initial_accuracy_classification(dataset, target, k_classes)
        elif mode == "generation":
            forced = force_initial_accuracy_generation(dataset, target, config.master_seed)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        curves.append(empirical_curve(simulate(forced, config)))
    return curves


def run_corollary3(dataset, config):
    """Empirical curve with an oracle verifier making correct answers absorbing."""
    if not config.oracle_verifier:
        config = dataclasses.replace(config, oracle_verifier=True)
    return empirical_curve(simulate(dataset, config))


def oracle_verifier_profile(dataset):
    """The dataset with ``p_con`` set to 1, the chain an oracle verifier induces."""
    return DatasetProfile(
        tuple(dataclasses.replace(q, p_con=1.0) for q in dataset.questions), dataset.ids
    )
