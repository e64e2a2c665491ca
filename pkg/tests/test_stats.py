import math

import numpy as np
import pytest

from hardrods.stats import (ReplicaError, ReplicaStats, chi2_test, fit_rate, normality_verdicts, run_replicas,
                            test_against, variance_interval, z_test)


def _const(seed):
    return [3.0, -1.0]


def _normal(seed):
    return np.random.default_rng(seed).normal()


def _boom(seed):
    if seed.spawn_key == (3,):
        raise RuntimeError("bad replica")
    return 0.0


def test_constant_statistic():
    st = run_replicas(_const, 40, 1)
    assert st.variance.tolist() == [0.0, 0.0]
    assert st.mean.tolist() == [3.0, -1.0]


def test_normal_calibration():
    n = 10_000
    st = run_replicas(_normal, n, 7)
    assert abs(st.mean[0]) <= 4 / math.sqrt(n)
    lo, hi = variance_interval(st.variance[0], n)
    assert lo <= 1.0 <= hi
    assert test_against(st, 0.0).passed
    assert test_against(st, 1.0, kind="variance").passed


def test_determinism_and_parallelism():
    a = run_replicas(_normal, 200, 11)
    b = run_replicas(_normal, 200, 11)
    c = run_replicas(_normal, 200, 11, threads=2)
    assert a.samples.tobytes() == b.samples.tobytes() == c.samples.tobytes()
    assert a.mean.tobytes() == c.mean.tobytes()
    assert a.covariance.tobytes() == c.covariance.tobytes()


def test_aggregation_is_permutation_invariant():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1000, 3)) * [1.0, 1e8, 1e-8]
    a = ReplicaStats.from_samples(x)
    b = ReplicaStats.from_samples(x[rng.permutation(1000)])
    assert a.mean.tobytes() == b.mean.tobytes()
    assert a.covariance.tobytes() == b.covariance.tobytes()


def test_failure_names_seed():
    with pytest.raises(ReplicaError) as err:
        run_replicas(_boom, 10, 5)
    assert err.value.spawn_key == (3,)
    assert "spawn_key=(3,)" in str(err.value)
    with pytest.raises(ValueError):
        run_replicas(_const, 1, 0)


def test_test_against_examples():
    st = ReplicaStats.from_samples(np.random.default_rng(1).normal(size=100))
    v = test_against(st, st.mean[0])
    assert v.passed and v.z_or_chi2 == 0.0
    assert not test_against(st, st.mean[0] + 10 * st.stderr[0]).passed
    with pytest.raises(ValueError):
        test_against(ReplicaStats.from_samples(np.zeros(10)), 0.0)
    with pytest.raises(ValueError):
        test_against(st, 0.0, kind="median")


def test_pass_rate_on_calibrated_mock():
    # 4-sigma two-sided test has a nominal false-alarm rate of 6.3e-5
    rng = np.random.default_rng(3)
    samples = rng.normal(size=(5000, 30))
    passes = sum(test_against(ReplicaStats.from_samples(s), 0.0).passed for s in samples)
    assert passes >= 4998


def test_chi2_and_verdict_serialization():
    v = chi2_test("var", 1.02, 10_000, 1.0)
    assert v.passed and isinstance(v.stderr_or_ci, tuple)
    d = v.to_dict()
    assert set(d) >= {"test_id", "statistic", "target", "stderr_or_ci", "z_or_chi2", "pass"}
    assert '"pass": true' in v.to_json()
    assert z_test("z", 1.0, 0.0, 1.0).passed
    assert not z_test("z", 1.0, 0.0, 2.0).passed


def test_normality_on_gaussian_and_exponential():
    rng = np.random.default_rng(4)
    st = ReplicaStats.from_samples(np.column_stack([rng.normal(size=10_000), rng.exponential(size=10_000)]))
    v = normality_verdicts(st)
    assert [x.passed for x in v] == [True, True, False, False]


@pytest.mark.parametrize("power", [0.5, 1.0])
def test_fit_rate_power_laws(power):
    eps = [0.1, 0.01, 0.001]
    fit = fit_rate([(e, 2.0 + 3.0 * e**power) for e in eps], 2.0)
    assert abs(fit.fitted_rate - power) < 0.05
    assert fit.r_squared > 0.999


def test_fit_rate_edge_cases():
    fit = fit_rate([(0.1, 5.0), (0.01, 5.0), (0.001, 5.0)], 2.0)
    assert abs(fit.fitted_rate) < 1e-12
    fit = fit_rate([(0.1, 2.1), (0.01, 2.0), (0.001, 2.001)], 2.0)
    assert fit.excluded == (0.01,)
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.01, 1.0)], 0.0)
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.1, 1.0), (0.01, 2.0)], 0.0)
