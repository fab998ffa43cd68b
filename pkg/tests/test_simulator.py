import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import binomial_se
from selfcorrect.simulator import (
    SimulationConfig,
    Transcript,
    empirical_curve,
    force_initial_accuracy_classification,
    force_initial_accuracy_generation,
    oracle_verifier_profile,
    per_question_curve,
    run_corollary1,
    run_corollary3,
    select_questions,
    simulate,
    wrong_label_mass,
)
from selfcorrect.theory import (
    DatasetProfile,
    QuestionProfile,
    closed_form_curve,
    dataset_curve,
    derive_params,
    oracle_verifier_curve,
    question_closed_form,
)


@pytest.fixture
def homogeneous():
    return DatasetProfile.homogeneous(500, 0.5, 0.9, 0.3)


class TestSimulate:
    def test_absorbing_correct(self):
        data = DatasetProfile.homogeneous(7, 1.0, 1.0, 0.4)
        tr = simulate(data, SimulationConfig(rounds=6, samples_per_question=3, master_seed=11))
        assert tr.correctness.shape == (7, 3, 7)
        assert tr.correctness.all()

    def test_absorbing_wrong(self):
        data = DatasetProfile.homogeneous(7, 0.0, 0.6, 0.0)
        tr = simulate(data, SimulationConfig(rounds=6, samples_per_question=3, master_seed=11))
        assert not tr.correctness.any()

    def test_rounds_zero(self, homogeneous):
        tr = simulate(homogeneous, SimulationConfig(rounds=0))
        assert tr.n_rounds == 0 and tr.correctness.shape == (500, 5, 1)

    def test_statistical_agreement(self, homogeneous):
        config = SimulationConfig(rounds=5, samples_per_question=20, master_seed=0)
        curve = empirical_curve(simulate(homogeneous, config))
        theory = closed_form_curve(derive_params(0.9, 0.3, 0.5), 5).values
        se = binomial_se(theory, 500 * 20)
        assert np.all(np.abs(curve.values - theory) < 3 * se)

    def test_parallel_is_bit_identical(self, homogeneous):
        config = SimulationConfig(rounds=5, samples_per_question=4, master_seed=2**64 - 1)
        serial = simulate(homogeneous, config)
        for workers, block in [(4, None), (3, 7), (1, 1)]:
            assert simulate(homogeneous, config, workers=workers, block_size=block) == serial

    def test_seed_changes_output(self, homogeneous):
        a = simulate(homogeneous, SimulationConfig(master_seed=1))
        b = simulate(homogeneous, SimulationConfig(master_seed=2))
        assert a != b

    def test_prefix_stability(self):
        # a question's chains depend only on its index, not on how many questions follow
        big = DatasetProfile.homogeneous(30, 0.4, 0.7, 0.2)
        small = DatasetProfile(big.questions[:10])
        config = SimulationConfig(rounds=4, samples_per_question=6, master_seed=3)
        np.testing.assert_array_equal(
            simulate(big, config).correctness[:10], simulate(small, config).correctness
        )

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**64 - 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_oracle_verifier_monotone(self, seed, p0, p_con, p_cri):
        data = DatasetProfile.homogeneous(5, p0, p_con, p_cri)
        tr = simulate(data, SimulationConfig(6, 4, seed, oracle_verifier=True))
        assert np.all(np.diff(tr.correctness.astype(int), axis=2) >= 0)

    def test_marginal_law(self):
        profiles = [QuestionProfile(0.2, 0.8, 0.35), QuestionProfile(0.9, 0.55, 0.1)]
        data = DatasetProfile(tuple(profiles))
        tr = simulate(data, SimulationConfig(rounds=6, samples_per_question=10_000, master_seed=17))
        freq = per_question_curve(tr)
        for i, q in enumerate(profiles):
            for t in range(7):
                p = question_closed_form(q, t)
                assert abs(freq[i, t] - p) < 3 * binomial_se(p, 10_000)

    def test_heterogeneous_matches_exact_dataset_curve(self):
        data = DatasetProfile(
            (QuestionProfile(0.8, 0.95, 0.6),) * 200 + (QuestionProfile(0.1, 0.6, 0.05),) * 200
        )
        curve = empirical_curve(simulate(data, SimulationConfig(5, 25, 8)))
        exact = dataset_curve(data, 5).values
        # per-question draws are independent so the pooled SE is at most the binomial one
        assert np.all(np.abs(curve.values - exact) < 3 * binomial_se(exact, 400 * 25))


class TestEmpiricalCurve:
    def test_all_true(self):
        curve = empirical_curve(Transcript(np.ones((3, 2, 4), dtype=bool)))
        np.testing.assert_array_equal(curve.values, 1.0)
        np.testing.assert_array_equal(curve.stderr, 0.0)

    def test_direct_count(self):
        c = np.array([[[True]], [[False]]])
        assert empirical_curve(Transcript(c)).values[0] == 0.5

    def test_stderr_formula(self):
        c = np.zeros((2, 2, 1), dtype=bool)
        c[0, 0, 0] = True
        curve = empirical_curve(Transcript(c))
        assert curve.stderr[0] == pytest.approx((0.25 * 0.75 / 4) ** 0.5)


class TestForcing:
    def test_classification(self, homogeneous):
        forced = force_initial_accuracy_classification(homogeneous, 0.4, 4)
        assert {q.p0 for q in forced.questions} == {0.4}
        assert {(q.p_con, q.p_cri) for q in forced.questions} == {(0.9, 0.3)}
        assert wrong_label_mass(0.4, 4) == pytest.approx(0.2)

    @pytest.mark.parametrize("target", [0.0, 1.0])
    def test_classification_extremes(self, homogeneous, target):
        forced = force_initial_accuracy_classification(homogeneous, target, 2)
        assert {q.p0 for q in forced.questions} == {target}

    def test_classification_needs_two_classes(self, homogeneous):
        with pytest.raises(ValueError):
            force_initial_accuracy_classification(homogeneous, 0.5, 1)

    def test_generation_floor(self):
        data = DatasetProfile.homogeneous(10, 0.5, 0.9, 0.3)
        forced = force_initial_accuracy_generation(data, 0.42, seed=5)
        p0 = [q.p0 for q in forced.questions]
        assert sorted(set(p0)) == [0.0, 1.0] and sum(p0) == 4

    def test_generation_extremes(self):
        data = DatasetProfile.homogeneous(5, 0.5, 0.9, 0.3)
        assert sum(q.p0 for q in force_initial_accuracy_generation(data, 0.0, 1).questions) == 0
        assert all(q.p0 == 1 for q in force_initial_accuracy_generation(data, 1.0, 1).questions)

    def test_selection_is_seeded_and_uniformish(self):
        np.testing.assert_array_equal(select_questions(50, 10, 3), select_questions(50, 10, 3))
        assert not np.array_equal(select_questions(50, 10, 3), select_questions(50, 10, 4))
        hits = np.zeros(20)
        for seed in range(2000):
            hits[select_questions(20, 5, seed)] += 1
        # each index is chosen with probability 1/4
        assert np.all(np.abs(hits / 2000 - 0.25) < 4 * binomial_se(0.25, 2000))


class TestCorollaries:
    def test_corollary1_converges(self, homogeneous):
        targets = [0, 0.2, 0.4, 0.6, 0.8, 1.0]
        curves = run_corollary1(homogeneous, targets, SimulationConfig(10, 20, 0))
        finals = np.array([c.values[-1] for c in curves])
        assert np.all(np.abs(finals - 0.75) < 0.02)
        assert [c.values[0] for c in curves] == pytest.approx(targets, abs=0.02)

    def test_corollary1_generation_mode(self, homogeneous):
        curves = run_corollary1(homogeneous, [0.0, 1.0], SimulationConfig(10, 20, 0), mode="generation")
        assert curves[0].values[0] == 0.0 and curves[1].values[0] == 1.0
        assert abs(curves[0].values[-1] - curves[1].values[-1]) < 0.02

    def test_corollary1_fixed_point(self, homogeneous):
        (curve,) = run_corollary1(homogeneous, [0.75], SimulationConfig(5, 20, 0))
        assert np.all(np.abs(curve.values - 0.75) < 3 * binomial_se(0.75, 10_000))

    def test_corollary1_deterministic(self, homogeneous):
        a, b = run_corollary1(homogeneous, [0.3, 0.3], SimulationConfig(5, 5, 9))
        np.testing.assert_array_equal(a.values, b.values)

    def test_corollary3_curve(self):
        data = DatasetProfile.homogeneous(500, 0.0, 0.7, 0.5)
        curve = run_corollary3(data, SimulationConfig(3, 20, 4))
        theory = oracle_verifier_curve(0.5, 0.0, 3).values
        assert np.all(np.abs(curve.values - theory) <= 3 * binomial_se(theory, 10_000))

    def test_corollary3_no_critique(self):
        data = DatasetProfile.homogeneous(50, 0.3, 0.7, 0.0)
        curve = run_corollary3(data, SimulationConfig(5, 4, 4))
        assert np.all(curve.values == curve.values[0])

    def test_corollary3_all_right(self):
        data = DatasetProfile.homogeneous(50, 1.0, 0.2, 0.3)
        np.testing.assert_array_equal(run_corollary3(data, SimulationConfig(5, 4, 4)).values, 1.0)

    def test_oracle_profile_is_cl_one(self):
        data = oracle_verifier_profile(DatasetProfile.homogeneous(3, 0.2, 0.4, 0.6))
        assert {(q.p0, q.p_con, q.p_cri) for q in data.questions} == {(0.2, 1.0, 0.6)}
