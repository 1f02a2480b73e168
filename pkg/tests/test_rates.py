"""Rate calculus: frozen substitution values, provenance guards, small-scale
empirical validation.  Full-horizon sweeps live in test_acceptance."""

import math

import numpy as np
import pytest

from ratecert import (
    ConsistencyError,
    EuclideanSpace,
    RateCertificate,
    bound_constants,
    ceil_log,
    check_envelope,
    companion_gap_rate,
    custom_schedule,
    empirical_certificate,
    empirical_rate_table,
    harmonic_schedule,
    linear_envelopes,
    linked_start,
    make_operator,
    mh_fixed_point_rate,
    mh_psi,
    mh_rates_from_tm,
    mh_step_rate_div,
    mh_step_rate_prod,
    mh_tail_index,
    modified_halpern_run,
    sabach_schedule,
    sabach_shtern_check,
    tikhonov_mann_run,
    tm_rates_from_mh,
    transfer_rate,
    verify_certificate,
)
from ratecert.rates import FIXED_POINT, STEP, SUBJECT_MH, SUBJECT_TM
from ratecert.schedules import ScheduleModuli

E1 = EuclideanSpace(1)
NEG = make_operator("negation", {}, E1)


def ident_moduli(lambda_floor=1, lambda_floor_from=0, product=None):
    ident = lambda k: k
    return ScheduleModuli(
        beta_sum_divergence=ident,
        beta_product_decay=product or ident,
        beta_diff_cauchy=ident,
        lambda_diff_cauchy=ident,
        beta_to_one=ident,
        lambda_floor=lambda_floor,
        lambda_floor_from=lambda_floor_from,
    )


def step_cert(fn, mh_bound=None, subject=SUBJECT_MH):
    prov = {} if mh_bound is None else {"mh_bound": mh_bound}
    return RateCertificate("stub", STEP, subject, fn, prov)


def test_ceil_log_values():
    assert ceil_log(1) == 0
    assert ceil_log(2) == 1
    assert ceil_log(3) == 2
    assert ceil_log(18) == 3
    assert ceil_log(math.e ** 4 + 1) == 5
    with pytest.raises(ValueError):
        ceil_log(0)


def test_companion_gap_rate_substitution():
    assert companion_gap_rate(ident_moduli(), 1)(0) == 1  # 2*1*1 - 1
    assert companion_gap_rate(ident_moduli(), 2)(4) == 19  # 2*2*5 - 1


def test_transfer_substitution():
    gap = RateCertificate("gap", "companion-gap", SUBJECT_TM, lambda k: 2 * k, {})
    phi = step_cert(lambda k: k, subject=SUBJECT_TM)
    moved = transfer_rate(phi, gap)
    assert moved.subject == SUBJECT_MH
    for k in range(6):
        assert moved(k) == 6 * k + 4  # max{2(3k+2), 3k+2}
        assert moved(k) >= phi(3 * k + 2) and moved(k) >= gap(3 * k + 2)

    zero_gap = RateCertificate("gap", "companion-gap", SUBJECT_TM, lambda k: 0, {})
    zero_phi = step_cert(lambda k: 0, subject=SUBJECT_TM)
    assert transfer_rate(zero_phi, zero_gap)(5) == 0


def test_transfer_rejects_non_gap():
    phi = step_cert(lambda k: k, subject=SUBJECT_TM)
    with pytest.raises(ConsistencyError):
        transfer_rate(phi, phi)


def test_mh_step_divergence_substitution():
    cert = mh_step_rate_div(ident_moduli(), 1)
    assert cert(0) == 9  # gamma = max{7, 3}, ceil ln 1 = 0
    cert2 = mh_step_rate_div(ident_moduli(), 2)
    assert cert2(0) == 18  # gamma = max{15, 7}, ceil ln 2 = 1


def test_mh_step_product_substitution():
    moduli = ident_moduli(product=lambda k: 2 * k)
    cert = mh_step_rate_prod(moduli, 1, psi=lambda k: 2)
    assert cert(0) == 3  # 2*(1*2*1 - 1) + 1


def test_mh_step_product_monotone_in_psi():
    moduli = ident_moduli(product=lambda k: 2 * k)
    small = mh_step_rate_prod(moduli, 1, psi=lambda k: k + 2)
    large = mh_step_rate_prod(moduli, 1, psi=lambda k: 2 * (k + 2))
    for k in range(10):
        assert large(k) >= small(k)


def test_mh_fixed_point_substitution():
    cert = mh_fixed_point_rate(step_cert(lambda k: k, mh_bound=1), ident_moduli(), 1)
    assert cert(0) == 1  # max{0, 1, 1}


def test_mh_fixed_point_halpern_specialization():
    # lambda = 1 gives floor 1 from index 0, so the formula collapses
    sched, moduli = harmonic_schedule(1.0)
    assert moduli.lambda_floor == 1 and moduli.lambda_floor_from == 0
    sigma = step_cert(lambda k: 3 * k + 1, mh_bound=2)
    cert = mh_fixed_point_rate(sigma, moduli, 2)
    s4 = moduli.beta_to_one
    for k in range(40):
        assert cert(k) == max(sigma(2 * (k + 1) - 1), s4(2 * 2 * (k + 1) - 1))


def test_tm_from_mh_substitution():
    step, fixed = tm_rates_from_mh(ident_moduli(), 1, step_cert(lambda k: k, mh_bound=4))
    assert step(0) == 5  # max{5, 2}
    step2, fixed2 = tm_rates_from_mh(
        ident_moduli(lambda_floor=2), 1, step_cert(lambda k: k, mh_bound=4)
    )
    assert fixed2(0) == 47  # max{5, 0, 11, 47}
    assert step.subject == SUBJECT_TM and fixed.kind == FIXED_POINT


def test_tm_from_mh_rejects_wrong_coupling():
    with pytest.raises(ConsistencyError):
        tm_rates_from_mh(ident_moduli(), 1, step_cert(lambda k: k, mh_bound=3))
    with pytest.raises(ConsistencyError):
        tm_rates_from_mh(ident_moduli(), 1, step_cert(lambda k: k))  # no bound recorded


def test_mh_from_tm_divergence_substitution():
    # chi(0) = 7, theta(0) = 5; step(0) = max{5, id(chi(8) + 2 + ceil_log(18)) + 1}
    rates = mh_rates_from_tm(ident_moduli(), 1)
    assert rates.step_div(0) == max(5, (71 + 2 + 3) + 1)  # = 77
    # fixed-point upgrade with floor 1: max{theta, 0, step(6k+5), s4(12K(k+1)-1)}
    assert rates.fixed_div(0) == max(5, 0, rates.step_div(5), 11)


def test_mh_from_tm_product_substitution():
    # beta_1 = 1/2 and all other betas 1 give psi == 2 everywhere
    betas = [1.0, 0.5] + [1.0] * 98
    sched, _ = custom_schedule(betas, [1.0] * 100)
    moduli = ident_moduli(product=lambda k: 2 * k)
    rates = mh_rates_from_tm(moduli, 1, sched)
    # psi*(0) = 18 * psi(2) = 36; terms: theta 5, s1*(35)+1 = 71, chi(8)+2 = 73
    assert rates.step_prod is not None
    assert rates.step_prod(0) == 73


def test_mh_from_tm_product_unavailable_on_vanishing_coefficients():
    sched, moduli = sabach_schedule(0.5)  # beta_2 = 0 kills the product
    rates = mh_rates_from_tm(moduli, 1, sched)
    assert rates.step_prod is None and rates.fixed_prod is None
    assert rates.step_div is not None


def test_linear_envelope_values():
    sab, _ = sabach_schedule(0.5)
    mh = linear_envelopes("mh", 4, sab)
    assert mh.step_bound(7) == 1.0  # 2*4/8
    assert mh.fixed_point_bound(7) == 4.0  # 4*4/(0.5*8)
    sab1, _ = sabach_schedule(1.0)
    tm = linear_envelopes("tm", 1, sab1)
    assert tm.step_bound(4) == 1.0  # 4*1/4
    assert tm.fixed_point_bound(4) == 2.0  # 8/4


def test_linear_envelope_reciprocal_shape():
    # bound * n constant: the linear rate eventually beats any fixed
    # quadratic certificate's reciprocal envelope
    sab, _ = sabach_schedule(0.5)
    for kind, idx_shift in (("tm", 0), ("tm-from-mh", 0), ("mh-from-tm", 0), ("mh", 1)):
        env = linear_envelopes(kind, 2, sab)
        vals = {n: env.step_bound(n) * (n + idx_shift) for n in range(1, 50)}
        assert len({round(v, 12) for v in vals.values()}) == 1
        fp = {n: env.fixed_point_bound(n) * (n + idx_shift) for n in range(1, 50)}
        assert len({round(v, 12) for v in fp.values()}) == 1


def test_linear_envelope_rejects_wrong_family():
    sched, _ = harmonic_schedule(0.5)
    with pytest.raises(ConsistencyError):
        linear_envelopes("mh", 4, sched)
    sab, _ = sabach_schedule(0.5)
    with pytest.raises(ConsistencyError):
        linear_envelopes("anderson", 4, sab)


def test_verify_certificate_trivial_cases():
    sched, moduli = harmonic_schedule(0.5)
    p = NEG.fixed_point
    const = tikhonov_mann_run(E1, NEG, u=p, x0=p, schedule=sched, n_steps=50)
    cert = RateCertificate("zero", STEP, SUBJECT_TM, lambda k: 0, {})
    report = verify_certificate(const, cert, k_max=5)
    assert report.passed and all(r.status == "pass" for r in report.rows)

    moving = tikhonov_mann_run(E1, NEG, u=(1.0,), x0=(1.0,), schedule=sched.with_beta0(1.0),
                               n_steps=50)
    assert moving.step_residuals[0] > 0.5
    bad = verify_certificate(moving, cert, k_max=1)
    assert not bad.passed
    assert bad.rows[1].witness["n"] == 0


def test_verify_certificate_skips_beyond_horizon():
    sched, _ = harmonic_schedule(0.5)
    traj = tikhonov_mann_run(E1, NEG, u=(0.5,), x0=(1.0,), schedule=sched, n_steps=100)
    cert = RateCertificate("far", STEP, SUBJECT_TM, lambda k: 10_000 * (k + 1), {})
    report = verify_certificate(traj, cert, k_max=3)
    assert all(r.status == "skipped" for r in report.rows)
    assert report.passed and report.checked == 0


def test_empirical_rate_table_is_least_index():
    series = np.array([1.1, 0.6, 0.4, 0.3, 0.05, 0.04, 0.03])
    table = empirical_rate_table(series, 3)
    assert table[0] == 1   # <= 1 from index 1
    assert table[1] == 2   # <= 1/2 from index 2
    assert table[2] == 3   # <= 1/3
    assert table[3] == 4   # <= 1/4


@pytest.fixture(scope="module")
def tight_instance():
    op = NEG
    u, x0 = (0.1,), (0.2,)
    sched, moduli = harmonic_schedule(0.5)
    y0 = linked_start(E1, u, x0, sched)
    bc = bound_constants(op, u, x0, y0)
    tm = tikhonov_mann_run(E1, op, u, x0, sched, 25_000)
    mh = modified_halpern_run(E1, op, u, y0, sched, 25_000)
    return op, u, x0, sched, moduli, bc, tm, mh


def test_companion_gap_certificate_validates(tight_instance):
    op, u, x0, sched, moduli, bc, tm, mh = tight_instance
    gap = companion_gap_rate(moduli, bc.tm_bound)
    report = verify_certificate(tm, gap, k_max=50)
    assert report.passed and report.checked == 51


def test_mh_product_certificate_validates(tight_instance):
    op, u, x0, sched, moduli, bc, tm, mh = tight_instance
    psi = mh_psi(sched, moduli, bc.mh_bound)
    cert = mh_step_rate_prod(moduli, bc.mh_bound, psi)
    report = verify_certificate(mh, cert, k_max=10)
    assert report.passed and report.checked >= 8
    fp = mh_fixed_point_rate(cert, moduli, bc.mh_bound)
    fp_report = verify_certificate(mh, fp, k_max=10)
    assert fp_report.passed and fp_report.checked >= 4


def test_mh_divergence_certificate_validates(tight_instance):
    op, u, x0, sched, moduli, bc, tm, mh = tight_instance
    cert = mh_step_rate_div(moduli, bc.mh_bound)
    report = verify_certificate(mh, cert, k_max=1)
    assert report.passed
    assert report.rows[0].status == "pass"  # exp(9)+2 ~ 8105 fits the run


def test_tm_certificates_from_mh_validate(tight_instance):
    op, u, x0, sched, moduli, bc, tm, mh = tight_instance
    psi = mh_psi(sched, moduli, 4 * bc.tm_bound)
    mh_cert = mh_step_rate_prod(moduli, 4 * bc.tm_bound, psi)
    step, fixed = tm_rates_from_mh(moduli, bc.tm_bound, mh_cert)
    assert verify_certificate(tm, step, k_max=8).passed
    assert verify_certificate(tm, fixed, k_max=8).passed


def test_mh_certificates_from_tm_validate(tight_instance):
    op, u, x0, sched, moduli, bc, tm, mh = tight_instance
    rates = mh_rates_from_tm(moduli, bc.tm_bound, sched)
    assert verify_certificate(mh, rates.step_prod, k_max=6).passed
    assert verify_certificate(mh, rates.fixed_prod, k_max=3).passed
    # the certificates equally audit the companion sequence of the linked run
    assert verify_certificate(tm, rates.step_prod, k_max=6).passed


def test_transferred_empirical_rate_validates(tight_instance):
    # read a rate off the companion sequence, move it across the linkage,
    # check it on the main sequence
    op, u, x0, sched, moduli, bc, tm, mh = tight_instance
    phi = empirical_certificate(tm, STEP, SUBJECT_MH, k_max=92)
    gap = companion_gap_rate(moduli, bc.tm_bound)
    moved = transfer_rate(phi, gap)
    assert moved.subject == SUBJECT_TM
    report = verify_certificate(tm, moved, k_max=30)
    assert report.passed and report.checked == 31


def test_sabach_shtern_equality_rollout():
    # equality in the recurrence with c = L = 1 stays within 2L/n
    horizon = 1000
    a = [0.0] * (horizon + 2)
    a[1] = 1.0
    c = [1.0] * (horizon + 2)
    b = lambda n: min(2.0 / n, 1.0)
    for n in range(1, horizon + 1):
        a[n + 1] = (1 - b(n + 1)) * a[n] + (b(n) - b(n + 1)) * c[n]
    report = sabach_shtern_check(a, c, L=1.0, horizon=horizon)
    assert report.passed


def test_sabach_shtern_zero_sequence():
    a = [0.0] * 102
    c = [0.0] * 102
    assert sabach_shtern_check(a, c, L=1.0, horizon=100).passed


def test_sabach_shtern_flags_hypothesis_break():
    a = [0.0] * 102
    a[1] = 5.0  # exceeds L
    report = sabach_shtern_check(a, [0.0] * 102, L=1.0, horizon=100)
    assert not report.hypothesis_ok
    assert report.hypothesis_witness["what"] == "a_1 > L"


def test_sabach_shtern_flags_conclusion_break():
    # inadmissible jump at n = 10: hypothesis broken there, conclusion too
    horizon = 50
    a = [0.0] * (horizon + 2)
    c = [0.0] * (horizon + 2)
    a[10] = 3.0
    report = sabach_shtern_check(a, c, L=1.0, horizon=horizon)
    assert not report.conclusion_ok
    assert report.conclusion_witness["n"] == 10
    assert not report.hypothesis_ok


def test_linear_envelopes_validate_on_negation_run():
    sched, _ = sabach_schedule(0.5)
    u, x0 = (0.5,), (1.0,)
    y0 = linked_start(E1, u, x0, sched)
    bc = bound_constants(NEG, u, x0, y0)
    mh = modified_halpern_run(E1, NEG, u, y0, sched, 10_000)
    env = linear_envelopes("mh", bc.mh_bound, sched)
    slack, witness = check_envelope(mh, env)
    assert witness is None and slack >= -1e-9
