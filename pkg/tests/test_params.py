import numpy as np
import pytest
from scipy.special import logit

from irtmpt import (
    GaugeShift,
    IrtParams,
    ModelDims,
    additive_decompose,
    build_psi_table,
    canonicalize,
    from_canonical_coords,
    gauge_shift,
    link,
    param_count,
    to_canonical_coords,
)
from irtmpt.errors import DimensionMismatchError, DomainError, NonCanonicalError
from irtmpt.params import params_from_obj, params_to_obj, read_params, write_params

from conftest import random_canonical_params

# logistic(1), frozen from a 40-digit evaluation of e/(1+e)
LOGISTIC_ONE = 0.7310585786300049


def test_link_values():
    assert link(0.0, 0.0, 0.0) == 0.5
    assert link(1.0, 0.5, 0.5) == pytest.approx(LOGISTIC_ONE, rel=1e-15)
    # translation invariance of the difference
    assert link(1.3 + 0.7, 0.2 + 0.7, -0.1) == pytest.approx(link(1.3, 0.2, -0.1), rel=1e-12)


def test_link_is_logit_inverse():
    # Exact inversion holds while both tails are well represented; once the
    # upper tail 1-p nears the double spacing at 1.0 (x above ~10), recovered
    # precision degrades to ~eps/(2*expit(-|x|)) and that bound is asserted.
    rng = np.random.default_rng(3)
    for _ in range(400):
        x = rng.uniform(-30, 30)
        err = abs(logit(link(x, 0.0, 0.0)) - x)
        if abs(x) <= 9:
            assert err <= 1e-12
        else:
            from scipy.special import expit
            assert err <= 1e-12 + 2e-16 / expit(-abs(x))


def test_link_saturates_strictly_inside():
    hi = link(800.0, 0.0, 0.0)
    lo = link(-800.0, 0.0, 0.0)
    assert 0.0 < lo < hi < 1.0


def test_build_psi_table_zero_point():
    params = IrtParams(
        theta=np.zeros((2, 5)), delta=np.zeros((3, 5)), beta=np.zeros(5),
        psi2=np.full(2, 0.5), psi7=np.full(3, 0.5), psi8=0.5,
    )
    table = build_psi_table(params)
    for name in ("psi1", "psi3", "psi4", "psi5", "psi6"):
        assert np.all(getattr(table, name) == 0.5)


def test_build_psi_table_single_cell():
    params = IrtParams(
        theta=np.array([[1.0, 0, 0, 0, 0]]), delta=np.array([[0.5, 0, 0, 0, 0]]),
        beta=np.array([0.5, 0, 0, 0, 0]),
        psi2=np.array([0.5]), psi7=np.array([0.5]), psi8=0.5,
    )
    assert build_psi_table(params).psi1[0, 0] == pytest.approx(LOGISTIC_ONE, rel=1e-15)


def test_gauge_shift_identity_and_beta():
    rng = np.random.default_rng(4)
    p = random_canonical_params(rng, 3, 4)
    same = gauge_shift(p, GaugeShift(np.zeros(5), np.zeros(5)))
    assert np.array_equal(same.theta, p.theta) and np.array_equal(same.beta, p.beta)

    u = np.array([1.0, 0, 0, 0, 0])
    v = np.array([2.0, 0, 0, 0, 0])
    shifted = gauge_shift(p, GaugeShift(u, v))
    assert shifted.beta[0] == pytest.approx(p.beta[0] + 1.0, rel=1e-15)


def test_gauge_invariance_of_table():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = random_canonical_params(rng, 3, 4)
        g = GaugeShift(rng.normal(0, 2, 5), rng.normal(0, 2, 5))
        a = build_psi_table(p).cells()
        b = build_psi_table(gauge_shift(p, g)).cells()
        assert np.max(np.abs(a - b)) <= 1e-14


def test_canonicalize():
    rng = np.random.default_rng(6)
    p = gauge_shift(random_canonical_params(rng, 3, 4),
                    GaugeShift(rng.normal(0, 3, 5), rng.normal(0, 3, 5)))
    c = canonicalize(p)
    assert np.max(np.abs(c.theta.sum(axis=0))) <= 1e-12
    assert np.max(np.abs(c.delta.sum(axis=0))) <= 1e-12
    assert np.max(np.abs(build_psi_table(c).cells() - build_psi_table(p).cells())) <= 1e-14
    again = canonicalize(c)
    assert np.max(np.abs(again.theta - c.theta)) <= 1e-15
    assert np.max(np.abs(again.beta - c.beta)) <= 1e-15


def test_canonicalize_absorbs_constant_column():
    theta = np.zeros((3, 5))
    theta[:, 0] = 0.7
    p = IrtParams(theta=theta, delta=np.zeros((2, 5)), beta=np.zeros(5),
                  psi2=np.full(3, 0.5), psi7=np.full(2, 0.5), psi8=0.5)
    c = canonicalize(p)
    assert np.max(np.abs(c.theta[:, 0])) <= 1e-15
    assert c.beta[0] == pytest.approx(0.7, rel=1e-15)


def test_canonicalize_commutes_with_shift():
    rng = np.random.default_rng(7)
    p = random_canonical_params(rng, 4, 3)
    g = GaugeShift(rng.normal(0, 2, 5), rng.normal(0, 2, 5))
    a = canonicalize(gauge_shift(p, g))
    b = canonicalize(p)
    assert np.max(np.abs(a.theta - b.theta)) <= 1e-12
    assert np.max(np.abs(a.delta - b.delta)) <= 1e-12
    assert np.max(np.abs(a.beta - b.beta)) <= 1e-12


@pytest.mark.parametrize("dims,expected", [((2, 3), 26), ((3, 4), 38), ((2, 2), 20)])
def test_param_count_values(dims, expected):
    assert param_count(ModelDims(*dims)) == expected


def test_param_count_matches_coords_length():
    rng = np.random.default_rng(8)
    for T in range(2, 11):
        for K in range(2, 11):
            p = random_canonical_params(rng, T, K)
            assert len(to_canonical_coords(p)) == param_count(ModelDims(T, K))


def test_coords_round_trip():
    rng = np.random.default_rng(9)
    p = random_canonical_params(rng, 3, 5)
    x = to_canonical_coords(p)
    q = from_canonical_coords(x, ModelDims(3, 5))
    assert np.max(np.abs(q.theta - p.theta)) <= 1e-12
    assert np.max(np.abs(q.delta - p.delta)) <= 1e-12
    assert np.max(np.abs(q.beta - p.beta)) <= 1e-12
    assert np.max(np.abs(q.psi2 - p.psi2)) <= 1e-12
    assert np.max(np.abs(q.psi7 - p.psi7)) <= 1e-12
    assert abs(q.psi8 - p.psi8) <= 1e-12


def test_zero_coords_give_half_probabilities():
    dims = ModelDims(2, 3)
    p = from_canonical_coords(np.zeros(param_count(dims)), dims)
    table = build_psi_table(p)
    assert np.all(table.cells() == 0.5)


def test_coords_errors():
    rng = np.random.default_rng(10)
    p = random_canonical_params(rng, 2, 3)
    with pytest.raises(NonCanonicalError):
        to_canonical_coords(gauge_shift(p, GaugeShift(np.ones(5), np.zeros(5))))
    with pytest.raises(DimensionMismatchError):
        from_canonical_coords(np.zeros(5), ModelDims(2, 3))
    with pytest.raises(DomainError):
        param_count(ModelDims(1, 3))


def test_additive_decompose_recovers_exact():
    rng = np.random.default_rng(11)
    theta = rng.normal(0, 1, 4)
    theta -= theta.mean()
    delta = rng.normal(0, 1, 6)
    delta -= delta.mean()
    beta = 0.37
    L = theta[:, None] - delta[None, :] + beta
    fit = additive_decompose(L)
    assert fit.ok
    assert np.max(np.abs(fit.theta - theta)) <= 1e-12
    assert np.max(np.abs(fit.delta - delta)) <= 1e-12
    assert fit.beta == pytest.approx(beta, abs=1e-12)


def test_additive_decompose_failure_residual():
    fit = additive_decompose(np.array([[0.0, 0.0], [0.0, 1.0]]))
    assert not fit.ok
    assert fit.max_residual == pytest.approx(0.25, rel=1e-15)


def test_additive_decompose_constant():
    fit = additive_decompose(np.full((3, 4), 2.5))
    assert fit.ok
    assert np.max(np.abs(fit.theta)) == 0.0
    assert np.max(np.abs(fit.delta)) == 0.0
    assert fit.beta == 2.5


def test_built_tables_are_additive():
    rng = np.random.default_rng(12)
    p = random_canonical_params(rng, 3, 4)
    table = build_psi_table(p)
    for arr in (table.psi1, table.psi3, table.psi4, table.psi5, table.psi6):
        assert additive_decompose(logit(arr), tol=1e-12).ok


def test_params_json_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    p = random_canonical_params(rng, 3, 4)
    q = params_from_obj(params_to_obj(p))
    assert np.array_equal(q.theta, p.theta)
    assert np.array_equal(q.psi2, p.psi2)

    path = str(tmp_path / "params.json")
    write_params(path, p)
    r = read_params(path)
    assert np.max(np.abs(r.theta - p.theta)) == 0.0
    assert np.max(np.abs(r.delta - p.delta)) == 0.0
    assert r.psi8 == p.psi8
