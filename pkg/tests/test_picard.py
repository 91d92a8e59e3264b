"""Monotone iteration, barrier certificates, extremal bracketing, and the
principal eigenpair."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import betainc

from fracsing.core import ConvergenceError, ProblemParams, RegimeError
from fracsing.green import dirac_profile, dirac_smooth_remainder, measured_c2, radial_kernel
from fracsing.picard import (
    KStarBracket,
    barrier_certificate,
    extremal_solution,
    find_kstar,
    first_eigenpair,
    iterate_minimal,
)


def test_zero_source_gives_zero_solution(params0, op400):
    report = iterate_minimal(params0, op400, tol=1e-10)
    assert report.status == "Converged"
    assert report.sup_residual == 0.0
    assert np.all(report.profile.total == 0.0)
    assert report.profile.singular_coeff == 0.0


def test_small_source_converges_with_certificate(params0, op400):
    params = params0.with_k(0.05)
    report = iterate_minimal(params, op400, tol=1e-10)
    assert report.status == "Converged"
    assert report.barrier_certified
    assert report.sup_residual <= 1e-10
    assert report.profile.is_nonnegative()
    assert report.profile.singular_coeff == pytest.approx(
        0.05 * params.constants.c_fund, rel=1e-14
    )
    assert report.profile.singular_exponent == params.singular_exponent


def test_converged_profile_is_a_fixed_point(params0, op400):
    # Independent restatement of the iteration map: the smooth part must
    # reproduce source remainder + G[u_total^p] to the stop tolerance.
    params = params0.with_k(0.05)
    report = iterate_minimal(params, op400, tol=1e-10)
    u = report.profile
    source = params.k * dirac_smooth_remainder(op400.grid, params)
    mapped = source + op400.apply(u.total**params.p)
    assert np.max(np.abs(u.values - mapped)) <= 1e-9


def test_first_correction_matches_direct_quadrature(params0, op400):
    # Oracle route: adaptive radial quadrature of the kernel against the
    # squared source column, split at the kernel cusp.
    params = params0.with_k(0.05)
    g = dirac_profile(op400.grid, params)
    correction = op400.apply((params.k * g) ** params.p)

    a = params.alpha
    b = params.dim / 2.0 - a
    c_fund = params.constants.c_fund

    def g_exact(s):
        frac = 1.0 - betainc(b, a, s * s)
        return c_fund * s ** params.singular_exponent * frac

    def oracle(r):
        def integrand(s):
            density = (params.k * g_exact(s)) ** params.p
            return radial_kernel(r, s, params) * density * s ** (params.dim - 1)

        lo, _ = quad(integrand, 0.0, r, limit=400)
        hi, _ = quad(integrand, r, 1.0, limit=400)
        return lo + hi

    for i in (40, 200, 360):
        r = op400.grid.nodes[i]
        assert correction[i] == pytest.approx(oracle(r), rel=1e-5)


def test_iterates_increase_with_source_strength(params0, op400, bracket400):
    low = iterate_minimal(params0.with_k(0.5 * bracket400.k_lo), op400)
    high = iterate_minimal(params0.with_k(0.9 * bracket400.k_lo), op400)
    assert low.status == high.status == "Converged"
    assert np.all(high.profile.total >= low.profile.total - 1e-12)


def test_divergence_beyond_bracket(params0, op400, bracket400):
    report = iterate_minimal(
        params0.with_k(1.5 * bracket400.k_hi), op400, tol=1e-9, max_iter=3000
    )
    assert report.status in ("Diverged", "MaxIterations")


def test_barrier_certificate_threshold(params0, op400):
    c2 = measured_c2(params0, op400)
    k_edge = 0.25 / c2  # p = 2: certified iff c2 * k <= 1/4
    ok = barrier_certificate(params0.with_k(0.9 * k_edge), op400, c2)
    assert ok["certified"] and ok["t_star"] == pytest.approx(4.0)
    bad = barrier_certificate(params0.with_k(1.1 * k_edge), op400, c2)
    assert not bad["certified"]
    with pytest.raises(RegimeError):
        barrier_certificate(
            ProblemParams(dim=2, alpha=0.6, p=6.0, k=0.01), op400, c2
        )


def test_bracket_invariants(params0, op400, bracket400):
    br = bracket400
    assert isinstance(br, KStarBracket)
    assert br.k_lo < br.k_hi
    assert br.k_hi - br.k_lo <= 1e-3 * br.k_lo
    c2 = measured_c2(params0, op400)
    p = params0.p
    k_p = (1.0 / (c2 * p)) ** (1.0 / (p - 1.0)) * (p - 1.0) / p
    assert br.k_lo >= k_p
    assert br.profile_lo.is_nonnegative()


def test_bracket_edges_behave_as_recorded(params0, op400, bracket400):
    # The lower edge converges under the probe settings, the upper edge
    # does not; this re-runs the probes independently of the bisection.
    lo = iterate_minimal(
        params0.with_k(bracket400.k_lo), op400, tol=1e-9, max_iter=3000
    )
    assert lo.status == "Converged"
    hi = iterate_minimal(
        params0.with_k(bracket400.k_hi), op400, tol=1e-9, max_iter=3000
    )
    assert hi.status != "Converged"


def test_wider_tolerance_gives_enclosing_bracket(params0, op400, bracket400):
    wide = find_kstar(params0, op400, bracket_tol=1e-2)
    assert wide.k_lo <= bracket400.k_lo + 1e-12
    assert wide.k_hi >= bracket400.k_hi - 1e-12
    assert wide.k_hi - wide.k_lo <= 1e-2 * wide.k_lo


def test_bracket_rejects_supercritical(op400):
    with pytest.raises(RegimeError):
        find_kstar(ProblemParams(dim=2, alpha=0.6, p=6.0, k=0.0), op400)


def test_extremal_solution_at_lower_edge(params0, op400, bracket400):
    profile = extremal_solution(params0, op400, bracket400)
    assert profile.is_nonnegative()
    mid = iterate_minimal(params0.with_k(0.5 * bracket400.k_lo), op400).profile
    assert np.all(profile.total >= mid.total - 1e-12)


def test_extremal_solution_rejects_bogus_bracket(params0, op400, bracket400):
    fake = KStarBracket(
        k_lo=2.0 * bracket400.k_hi,
        k_hi=2.1 * bracket400.k_hi,
        profile_lo=bracket400.profile_lo,
    )
    with pytest.raises(ConvergenceError):
        extremal_solution(params0, op400, fake)


def _dense_lambda1(op):
    sym = op.symmetrized()
    mu = np.linalg.eigvalsh(0.5 * (sym + sym.T)).max()
    return 1.0 / mu


def test_first_eigenpair_matches_dense_solve(op400, ophalf):
    for op in (op400, ophalf):
        pair = first_eigenpair(op)
        lam = pair["lambda1"]
        assert lam == pytest.approx(_dense_lambda1(op), rel=1e-8)
        phi = pair["phi1"].values
        assert np.all(phi > 0.0)
        assert op.grid.weights @ phi**2 == pytest.approx(1.0, rel=1e-10)
        # eigen-residual of the inverse operator formulation
        assert np.max(np.abs(lam * op.apply(phi) - phi)) <= 1e-8 * np.max(phi)


def test_eigenvalue_decreases_with_order(op400, ophalf):
    # weaker diffusion (smaller alpha) relaxes the exterior constraint
    # less, and the ball eigenvalue of the inverse operator drops.
    lam_high = first_eigenpair(op400)["lambda1"]
    lam_low = first_eigenpair(ophalf)["lambda1"]
    assert lam_low < lam_high
