import math

import numpy as np
import pytest

from doubly_scenery.limit import (
    hurst,
    limit_B_sample,
    limit_B_values,
    limit_cf,
    local_time_field,
    local_time_fields,
)
from doubly_scenery.stable import ParameterError, SimParams
from doubly_scenery.streams import make_stream

DESK = SimParams(1.0, 2.0, 2.0, 1.1)


def rng(*keys):
    return make_stream(31337, "tests", *keys)


def test_occupation_mass_identity():
    f = local_time_field(2.0, 4096, [0.5, 1.0, 2.0], 10.0, rng("mass"))
    assert f.mass(0) == pytest.approx(0.5, abs=1e-12)
    assert f.mass(1) == pytest.approx(1.0, abs=1e-12)
    assert f.mass(2) == pytest.approx(2.0, abs=1e-12)
    assert f.dx == pytest.approx(1 / 64)


def test_local_time_monotone_in_t():
    for f in local_time_fields(1.5, 2000, [0.5, 1.0, 1.7], 10.0, 20, rng("mono")):
        assert np.all(f.values >= 0)
        assert np.all(np.diff(f.values, axis=0) >= 0)


def test_local_time_at_zero_self_converges():
    means = {}
    for n in (2 ** 10, 2 ** 12, 2 ** 14):
        fields = local_time_fields(2.0, n, [1.0], 10.0, 1000, rng("l0", n))
        means[n] = np.mean([f.values[0][f.sites == 0].sum() for f in fields])
    # the discretization error of E L_1(0) decays like n**-1/2
    trend = 2 * means[2 ** 14] - means[2 ** 12]
    assert means[2 ** 14] == pytest.approx(trend, rel=0.15)
    # a simple walk's visits to 0 average sqrt(2 n / pi)
    assert means[2 ** 14] == pytest.approx(math.sqrt(2 / math.pi), rel=0.1)


def test_field_preconditions():
    with pytest.raises(ParameterError):
        local_time_field(2.0, 3, [1.0], 10.0, rng("small"))
    with pytest.raises(ParameterError):
        local_time_field(2.0, 100, [1.0], 0.0, rng("k0"))


def test_B_zero_thetas():
    f = local_time_field(2.0, 1024, [1.0, 2.0], 10.0, rng("b0"))
    assert limit_B_sample(DESK, [0.0, 0.0], [1.0, 2.0], f, rng("b0s")).value == 0.0


def test_B_homogeneity_per_draw():
    f = local_time_field(2.0, 1024, [1.0], 10.0, rng("hom"))
    b1 = limit_B_sample(DESK, [1.0], [1.0], f, rng("hom-s")).value
    for c in (0.5, 2.0, -3.0):
        bc = limit_B_sample(DESK, [c], [1.0], f, rng("hom-s")).value
        assert bc == pytest.approx(abs(c) ** DESK.alpha * b1, rel=1e-12)
    p = SimParams(1.5, 1.5, 1.8, 1.1)
    f = local_time_field(1.5, 1024, [1.0, 2.0], 10.0, rng("hom2"))
    a = limit_B_values(p, [[1.0, -0.5], [2.0, -1.0]], f, rng("hom2-s"))
    assert a[1] == pytest.approx(2 ** 1.5 * a[0], rel=1e-12)


def test_B_argument_checks():
    f = local_time_field(2.0, 1024, [1.0], 10.0, rng("args"))
    with pytest.raises(ParameterError):
        limit_B_sample(DESK, [1.0, 2.0], [1.0], f, rng("x"))
    with pytest.raises(ParameterError):
        limit_B_sample(DESK, [1.0], [2.0], f, rng("x"))


def test_B_monotone_in_truncation():
    p = SimParams(1.2, 1.3, 1.6, 1.1)
    for i in range(30):
        vals = []
        for K in (0.2, 1.0, 5.0):
            f = local_time_field(1.3, 1024, [1.0], K, rng("trunc", i))
            vals.append(limit_B_sample(p, [1.0], [1.0], f, rng("trunc-s", i)).value)
        assert vals[0] <= vals[1] <= vals[2]


def test_E_B_self_converges_across_resolution():
    a = limit_cf(DESK, [[1.0]], [1.0], 2000, 2 ** 12, root_seed=1)
    b = limit_cf(DESK, [[1.0]], [1.0], 2000, 2 ** 14, root_seed=2)
    assert abs(a.neg_log_cf[0] / b.neg_log_cf[0] - 1) <= 0.10


def test_limit_cf_zero_vector_and_homogeneity():
    est = limit_cf(DESK, [[0.0], [0.5], [1.0], [2.0]], [1.0], 200, 1024, root_seed=3)
    assert est.neg_log_cf[0] == 0.0
    scaled = est.samples[:, 1:] / np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(scaled, scaled[:, [1]].repeat(3, axis=1), rtol=1e-12)


def test_limit_cf_stationary_increments():
    est = limit_cf(DESK, [[1.0, 0.0], [-1.0, 1.0], [1.0, -1.0]], [1.0, 2.0], 2000, 4096,
                   root_seed=4)
    assert est.neg_log_cf[1] > 0 and est.neg_log_cf[0] > 0
    d = est.samples[:, 1] - est.samples[:, 0]
    assert abs(d.mean()) <= 3 * d.std(ddof=1) / math.sqrt(d.size)
    assert est.neg_log_cf[1] == est.neg_log_cf[2]


@pytest.mark.parametrize("params", [DESK, SimParams(1.2, 1.5, 1.8, 1.1)])
def test_limit_cf_self_similarity(params):
    H = hurst(params)
    est = limit_cf(params, [[0.0, 1.0], [2 ** H, 0.0]], [1.0, 2.0], 2000, 4096, root_seed=5)
    d = est.samples[:, 0] - est.samples[:, 1]
    assert abs(d.mean()) <= 3 * d.std(ddof=1) / math.sqrt(d.size)


def test_limit_cf_needs_replicas():
    with pytest.raises(ParameterError):
        limit_cf(DESK, [[1.0]], [1.0], 50, 1024)


def test_hurst_values():
    assert hurst(DESK) == pytest.approx(0.75, abs=1e-15)
    assert hurst((1.0, 2.0, 2.0)) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(ParameterError):
        hurst((1.5, 2.0, 1.5))
    p = SimParams(0.7, 1.3, 1.9, 1.2)
    assert abs(hurst(p) - p.r_exponent) <= 1e-12
