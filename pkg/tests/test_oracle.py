import numpy as np
import pytest

from purityopt import (
    DimensionError,
    KrausChannel,
    OracleConfig,
    ParameterError,
    builtin_channel,
    builtin_encoder,
    codespace_omega,
    tensor_power,
    worst_case_purity,
)
from purityopt.zoo import make_bit_flip


BF2 = builtin_channel("bitflip2", p=0.1)


def test_golden_encoder_a():
    res = worst_case_purity(BF2, builtin_encoder("a"))
    assert abs(res.min_purity - 0.82) < 1e-6


def test_golden_encoder_c():
    res = worst_case_purity(BF2, builtin_encoder("c"))
    assert abs(res.min_purity - 0.7048) < 1e-6


def test_golden_repetition():
    # exact value is (p^2 + q^2)^2 = 0.82^2
    res = worst_case_purity(BF2, builtin_encoder("repetition"))
    assert abs(res.min_purity - 0.6724) < 1e-6
    assert abs(res.min_purity - 0.82 ** 2) < 1e-9


def test_identity_channel_any_isometry():
    ident = KrausChannel(kraus=(np.eye(4),))
    rng = np.random.default_rng(1)
    g = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    q = np.linalg.qr(g)[0]
    res = worst_case_purity(ident, q, OracleConfig(input_model="complex_qubit"))
    assert abs(res.min_purity - 1.0) < 1e-10


def test_monotone_grid_refinement():
    # a finer grid can only find a lower or equal minimum
    minima = []
    for resolution in (90, 360, 720):
        cfg = OracleConfig(resolution=resolution)
        res = worst_case_purity(BF2, builtin_encoder("c"), cfg)
        minima.append(res.grid_min)
    assert minima[1] <= minima[0] + 1e-15
    assert minima[2] <= minima[1] + 1e-15
    # refinement reaches the same point from any of these grids
    assert max(minima) - min(minima) < 1e-4


def test_alpha_invariance_of_family_a():
    values = [
        worst_case_purity(BF2, builtin_encoder("a", alpha=a)).min_purity
        for a in (0.0, 0.3, 0.7, 1.1, 2.5)
    ]
    assert max(values) - min(values) < 1e-9


def test_family_d_minimum_under_ad2():
    ad2 = builtin_channel("ad2", p=0.1)
    for alpha in (0.0, np.pi / 3):
        res = worst_case_purity(ad2, builtin_encoder("d", alpha=alpha))
        assert abs(res.min_purity - 0.82) < 1e-9


def test_cross_validation_runs_at_argmin():
    res = worst_case_purity(BF2, builtin_encoder("a"))
    assert res.kraus_check_dev < 1e-10


def test_complex_model_never_above_real():
    # the real-input minimum is over a subset of the complex-input states
    enc = builtin_encoder("c").kraus
    real = worst_case_purity(BF2, enc, OracleConfig(input_model="real_qubit"))
    cplx = worst_case_purity(BF2, enc, OracleConfig(input_model="complex_qubit",
                                                    resolution=360))
    assert cplx.min_purity <= real.min_purity + 1e-9


def test_general_r_three_dims():
    ch3 = tensor_power(make_bit_flip(0.1), 3)
    rng = np.random.default_rng(7)
    g = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    q = np.linalg.qr(g)[0]
    cfg = OracleConfig(input_model="general_r", resolution=720)
    res = worst_case_purity(ch3, q, cfg)
    assert 0.0 < res.min_purity <= 1.0
    assert res.min_purity <= res.grid_min + 1e-12
    # sanity: specific states cannot beat the reported minimum
    omega = codespace_omega(ch3, q)
    for seed in range(20):
        rng2 = np.random.default_rng(seed)
        phi = rng2.standard_normal(3) + 1j * rng2.standard_normal(3)
        phi /= np.linalg.norm(phi)
        pair = np.kron(phi, phi)
        val = float(np.real(pair.conj() @ omega @ pair))
        assert val >= res.min_purity - 1e-9


def test_codespace_omega_shape_and_hermiticity():
    omega = codespace_omega(BF2, builtin_encoder("a").kraus)
    assert omega.shape == (4, 4)
    assert np.abs(omega - omega.conj().T).max() < 1e-12


def test_resolution_guard():
    with pytest.raises(ParameterError):
        OracleConfig(resolution=4)
    with pytest.raises(ParameterError):
        OracleConfig(input_model="bloch")


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        worst_case_purity(BF2, np.eye(3)[:, :2])


def test_analytic_purity_values():
    from purityopt.oracle import analytic_purity

    # cosine factor vanishes at phi + alpha = pi/4
    val = analytic_purity("bf_a", {"p": 0.1, "alpha": 0.1},
                          {"phi": np.pi / 4 - 0.1})
    assert abs(val - 1.0) < 1e-12
    val = analytic_purity("ad_f", {"p": 0.1, "alpha": 0.0, "beta": 0.3},
                          {"x1": 0.0})
    assert abs(val - 0.82) < 1e-12
    val = analytic_purity("ad_f", {"p": 0.1, "alpha": np.pi / 2, "beta": 0.3},
                          {"x1": 1.0})
    assert abs(val - 0.6724) < 1e-12
    with pytest.raises(ParameterError):
        analytic_purity("bf_z", {"p": 0.1}, {"phi": 0.0})


def test_cross_validate_bit_flip_families():
    from purityopt.oracle import cross_validate

    for alpha in (0.0, 1.1):
        rep = cross_validate(BF2, builtin_encoder("a", alpha=alpha), p=0.1)
        assert rep.passed
        assert rep.analytic_family == "bf_a"
        assert rep.points_checked == 100
        assert rep.max_deviation < 1e-8
        assert abs(rep.min_purity_grid - 0.82) < 1e-8
        assert abs(rep.min_purity_analytic - 0.82) < 1e-8


def test_cross_validate_ad_family_d():
    from purityopt.oracle import cross_validate

    ad2 = builtin_channel("ad2", p=0.1)
    for alpha in (0.0, np.pi / 3):
        rep = cross_validate(ad2, builtin_encoder("d", alpha=alpha), p=0.1)
        assert rep.passed
        assert abs(rep.min_purity_grid - 0.82) < 1e-8
        assert abs(rep.min_purity_analytic - 0.82) < 1e-8


def test_cross_validate_without_closed_form():
    from purityopt.oracle import cross_validate

    ident = KrausChannel(kraus=(np.eye(4),))
    rng = np.random.default_rng(3)
    g = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    q = np.linalg.qr(g)[0]
    rep = cross_validate(ident, q)
    assert rep.passed
    assert rep.analytic_family is None
    assert "no closed form" in rep.notes
    assert abs(rep.min_purity_grid - 1.0) < 1e-9
