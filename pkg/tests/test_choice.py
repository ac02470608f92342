"""Choice model: empirical optimality, softmax probabilities, MLE, bootstrap."""

import numpy as np
import pytest

from rationlab.model import DomainError
from rationlab.choice import (
    ChoiceParams,
    ObservationSet,
    choice_probabilities,
    empirically_optimal_set,
    fit_mle,
    log_likelihood,
    load_observations_csv,
    make_synthetic,
    predicted_peak_rate,
    score,
)


def obs(peak, seen, final=None, cluster="s0"):
    return ObservationSet(peak, frozenset(seen), peak if final is None else final,
                          cluster)


def test_empirically_optimal_set():
    assert empirically_optimal_set(obs(5, {16})) == {5}
    assert empirically_optimal_set(obs(3, {10})) == frozenset(range(21))
    with pytest.raises(DomainError):
        ObservationSet(5, frozenset(), 5)
    # always contains the peak
    rng = np.random.default_rng(0)
    for _ in range(200):
        peak = int(rng.integers(0, 21))
        seen = frozenset(int(v) for v in rng.integers(0, 21, size=rng.integers(1, 6)))
        assert peak in empirically_optimal_set(obs(peak, seen))


def test_empirical_optimality_antitone():
    rng = np.random.default_rng(1)
    for _ in range(100):
        peak = int(rng.integers(0, 21))
        seen = set(int(v) for v in rng.integers(0, 21, size=3))
        bigger = seen | {int(rng.integers(0, 21))}
        small = empirically_optimal_set(obs(peak, seen))
        large = empirically_optimal_set(obs(peak, bigger))
        assert large <= small


def test_choice_probabilities_basics():
    o = obs(5, {16})
    p = choice_probabilities(o, ChoiceParams(0.0, 0.0))
    assert np.allclose(p, 1 / 21)
    p = choice_probabilities(o, ChoiceParams(50.0, 0.0))
    assert p[5] > 0.999  # singleton E-set concentrates on the peak
    for params in [ChoiceParams(0, 0), ChoiceParams(2, 1), ChoiceParams(-1, 3)]:
        p = choice_probabilities(o, params)
        assert abs(p.sum() - 1) < 1e-12
        assert (p > 0).all()


def test_peak_prob_dominates_at_published_estimates():
    # with both sensitivities positive the peak beats every other report
    for params in [ChoiceParams(0.734, 2.352), ChoiceParams(1.85, 1.656),
                   ChoiceParams(1.41, 1.79)]:
        for seen in [{16}, {10, 16}, {3}]:
            p = choice_probabilities(obs(5, seen), params)
            assert p[5] == p.max()
            assert all(p[5] > p[x] for x in range(21) if x != 5)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    data = make_synthetic(300, ChoiceParams(1.2, 0.7), seed=5)
    for _ in range(10):
        le, ld = rng.normal(scale=1.5, size=2)
        params = ChoiceParams(le, ld)
        g = score(data, params)
        h = 1e-5
        fd = np.array([
            (log_likelihood(data, ChoiceParams(le + h, ld))
             - log_likelihood(data, ChoiceParams(le - h, ld))) / (2 * h),
            (log_likelihood(data, ChoiceParams(le, ld + h))
             - log_likelihood(data, ChoiceParams(le, ld - h))) / (2 * h),
        ])
        denom = max(1.0, float(np.linalg.norm(fd)))
        assert np.linalg.norm(g - fd) / denom < 1e-6


def test_parameter_recovery():
    data = make_synthetic(5000, ChoiceParams(1.85, 1.66), seed=7)
    fit = fit_mle(data, bootstrap=0)
    assert fit.converged and not fit.boundary
    assert abs(fit.params.lambda_e - 1.85) < 0.1
    assert abs(fit.params.lambda_d - 1.66) < 0.1
    # fitted likelihood weakly beats the origin
    assert fit.log_likelihood >= log_likelihood(data, ChoiceParams(0, 0))


def test_uniform_random_finals_fit_near_zero():
    rng = np.random.default_rng(11)
    data = []
    for i in range(3000):
        peak = int(rng.integers(0, 21))
        seen = frozenset(int(v) for v in rng.integers(0, 21, size=2))
        data.append(ObservationSet(peak, seen, int(rng.integers(0, 21)), f"c{i % 6}"))
    fit = fit_mle(data, bootstrap=0)
    assert abs(fit.params.lambda_e) < 0.15
    assert abs(fit.params.lambda_d) < 0.35


def test_bootstrap_standard_errors():
    data = make_synthetic(800, ChoiceParams(1.0, 1.0), seed=9, n_clusters=6)
    fit = fit_mle(data, bootstrap=60, seed=3)
    assert fit.std_errors is not None
    assert all(0 < se < 1 for se in fit.std_errors)
    # same seed, same answer
    again = fit_mle(data, bootstrap=60, seed=3)
    assert again.std_errors == fit.std_errors


def test_single_cluster_flagged():
    data = make_synthetic(300, ChoiceParams(1.0, 1.0), seed=4, n_clusters=1)
    fit = fit_mle(data, bootstrap=50)
    assert fit.single_cluster and fit.std_errors is None


def test_degenerate_data_reports_boundary():
    data = [obs(5, {16}, 5, "c1") for _ in range(60)]
    fit = fit_mle(data, bootstrap=0)
    assert fit.boundary and not fit.converged
    # all-miss direction too
    data = [obs(5, {16}, 9, "c1") for _ in range(60)]
    assert fit_mle(data, bootstrap=0).boundary


def test_predicted_peak_rate():
    data = [obs(p, {p + 1 if p < 20 else p - 1}) for p in range(21)]
    assert abs(predicted_peak_rate(data, ChoiceParams(0, 0)) - 1 / 21) < 1e-12
    # richer empirical evidence for the peak raises its predicted rate
    params = ChoiceParams(1.41, 1.79)
    rng = np.random.default_rng(13)

    def mixture(singleton_share):
        rows = []
        for i in range(1000):
            peak = int(rng.integers(0, 21))
            if i < singleton_share * 1000:
                seen = {20 - peak if peak < 10 else max(0, 19 - peak)}  # forces {peak}
                row = obs(peak, {16 if peak < 6 else 3}, peak)
                if len(empirically_optimal_set(row)) != 1:
                    row = obs(peak, {16, 3}, peak)
                rows.append(row)
            else:
                rows.append(obs(peak, {10}, peak))  # E-set is everything
        return rows

    high = predicted_peak_rate(mixture(0.73), params)
    low = predicted_peak_rate(mixture(0.13), params)
    assert high > low


def test_high_peak_share_plateaus_under_softmax():
    # all-peak finals diverge, so fit on near-deterministic data instead
    data = make_synthetic(2000, ChoiceParams(4.0, 4.0), seed=21)
    fit = fit_mle(data, bootstrap=0)
    rate = predicted_peak_rate(data, fit.params)
    assert 0.5 < rate < 1.0


def test_observations_from_session_log():
    from rationlab.choice import observations_from_log
    from rationlab.dynamics import BotPolicy, run_pfu_sim
    from rationlab.model import VALUATIONS

    val = VALUATIONS[5]  # peaks (5, 17)
    events = run_pfu_sim(val, (obs_policy := BotPolicy("truthful"),
                               BotPolicy("myopic-best-responder")),
                         ticks=20, seed=3)
    rows = observations_from_log(events, own_peak=17, agent=1, cluster_id="sx")
    assert len(rows) == 1
    row = rows[0]
    assert 5 in row.observed_partner_reports  # partner settles at their peak
    assert row.final_report == 15  # best response to 5 for a peak-17 agent
    assert row.cluster_id == "sx"
    # sealed-report periods yield no observations and are excluded
    from rationlab.engine import MechanismSpec, PeriodRecorder
    rec = PeriodRecorder(MechanismSpec("DRU", reporting_seconds=1.0), (3, 4))
    rec.tentative(0, 3, 100)
    rec.tentative(1, 4, 100)
    rec.finalize(0, 1000)
    rec.finalize(1, 1000)
    rec.assign(1000)
    assert observations_from_log(rec.events, own_peak=3, agent=0) == []


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text(
        "# peak, observed, final, cluster\n"
        "5,16,5,s1\n"
        "3,10 12,7,s2\n"
    )
    rows = load_observations_csv(path)
    assert rows == [
        ObservationSet(5, frozenset({16}), 5, "s1"),
        ObservationSet(3, frozenset({10, 12}), 7, "s2"),
    ]
