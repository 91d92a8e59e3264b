"""Monotone iteration for the minimal solution and the extremal source bound.

The minimal solution of (-Delta)^alpha u = u^p + k delta_0 on the unit
ball is the increasing limit of the iterates

    v_0 = k G_alpha[delta_0],    v_{n+1} = G_alpha[v_n^p] + k G_alpha[delta_0],

which converge exactly for source strengths k up to an extremal value k*.
With g = G_alpha[delta_0] and the measured comparison constant
c2 = sup G_alpha[g^p]/g, the profile w_t = t k^p G_alpha[g^p] + k g is a
supersolution barrier whenever (c2 t k^(p-1) + 1)^p <= t, which a simple
threshold on c2 k^(p-1) guarantees at t = (p/(p-1))^p; certified runs are
checked against the barrier nodewise.  Bisection on the convergence
indicator brackets k*, and power iteration on the Green matrix supplies
the principal Dirichlet eigenpair used by the stability analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConvergenceError, RadialFunction, RegimeError
from .green import dirac_smooth_remainder, measured_c2

_CEILING_FACTOR = 1e6
_GROWTH_WINDOW = 10
_GROWTH_FACTOR = 2.0
_GROWTH_MIN_ITER = 15
_MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class SolveReport:
    """Outcome of the monotone iteration.

    status is "Converged", "Diverged", or "MaxIterations"; sup_residual
    is the final sup-norm step between consecutive total profiles (for a
    diverged run, the last finite step); profile is the final iterate
    (for a diverged run, the last iterate before blow-up was detected).
    """

    status: str
    iterations: int
    sup_residual: float
    barrier_certified: bool
    profile: RadialFunction


@dataclass(frozen=True)
class KStarBracket:
    """Bisection bracket for the extremal source strength k*.

    k_lo is the largest tested k whose iteration converged, k_hi the
    smallest tested k that failed to converge; profile_lo is the minimal
    solution at k_lo.
    """

    k_lo: float
    k_hi: float
    profile_lo: RadialFunction


def barrier_certificate(params, op, c2_measured):
    """Decide whether the closed supersolution barrier applies.

    Parameters
    ----------
    params : ProblemParams
        Problem data; must be subcritical.
    op : GreenOperator
        Assembled operator (unused beyond validation; kept so callers
        can certify against the same discretization that measured c2).
    c2_measured : float
        Measured comparison constant sup G_alpha[g^p]/g.

    Returns
    -------
    dict
        {"certified": bool, "t_star": float} with t_star = (p/(p-1))^p.
        Certified means c2 k^(p-1) <= (1/p)((p-1)/p)^(p-1), which closes
        the barrier inequality (c2 t k^(p-1) + 1)^p <= t at t = t_star.
    """
    if not params.subcritical:
        raise RegimeError(
            f"barrier requires p < {params.critical_p:.6g}, got {params.p}"
        )
    p, k = params.p, params.k
    t_star = (p / (p - 1.0)) ** p
    threshold = (1.0 / p) * ((p - 1.0) / p) ** (p - 1.0)
    certified = bool(c2_measured * k ** (p - 1.0) <= threshold)
    if certified and k > 0.0:
        # Closure of the barrier inequality at t_star; fails only on a
        # genuine numerical fault, not at the threshold boundary.
        closure = (c2_measured * t_star * k ** (p - 1.0) + 1.0) ** p
        if closure > t_star * (1.0 + 1e-9):
            raise ConvergenceError(
                f"barrier closure violated: {closure:.12g} > {t_star:.12g}"
            )
    return {"certified": certified, "t_star": t_star}


def _source_parts(params, op):
    """Smooth samples and singular data of k * G_alpha[delta_0]."""
    k = params.k
    source = k * dirac_smooth_remainder(op.grid, params)
    if k > 0.0:
        return source, k * params.constants.c_fund, params.singular_exponent
    return source, 0.0, 0.0


def iterate_minimal(params, op, tol=1e-10, max_iter=2000):
    """Run the monotone iteration for the minimal solution.

    Parameters
    ----------
    params : ProblemParams
        Problem data with the source strength k >= 0.
    op : GreenOperator
        Assembled Green operator on a compatible grid.
    tol : float
        Sup-norm step tolerance on total profiles.
    max_iter : int
        Iteration budget.

    Returns
    -------
    SolveReport
        Converged when the step drops to tol; Diverged when the smooth
        part exceeds a ceiling of 1e6 times the source scale or grows by
        more than a factor 2 across 10 consecutive iterations; otherwise
        MaxIterations.

    Raises
    ------
    ParameterError
        If k < 0 or the grid does not match the operator's.
    ConvergenceError
        If an iterate loses nodewise monotonicity or, on a certified
        run, escapes the supersolution barrier: both indicate a
        quadrature fault rather than a mathematical outcome.
    """
    if params.dim != op.dim:
        raise RegimeError(
            f"params.dim {params.dim} does not match operator dim {op.dim}"
        )
    k = params.k
    grid = op.grid
    g = op.dirac_column
    source, sing_coeff, sing_exp = _source_parts(params, op)

    certified = False
    barrier = None
    if params.subcritical:
        cert = barrier_certificate(params, op, measured_c2(params, op))
        certified = cert["certified"]
        if certified and k > 0.0:
            barrier = (
                cert["t_star"] * k**params.p * op.apply(g**params.p) + k * g
            )

    ceiling = _CEILING_FACTOR * k * float(np.max(g)) if k > 0.0 else np.inf
    sing = sing_coeff * grid.nodes**sing_exp if sing_coeff > 0.0 else 0.0

    vals = source.copy()
    history = []
    status = "MaxIterations"
    iterations = 0
    last_step = np.inf
    for n in range(1, max_iter + 1):
        total = vals + sing
        with np.errstate(over="ignore", invalid="ignore"):
            new_vals = op.apply(total**params.p) + source
        if not np.all(np.isfinite(new_vals)):
            status = "Diverged"
            iterations = n
            break
        step = float(np.max(np.abs(new_vals - vals)))
        scale = 1.0 + float(np.max(np.abs(new_vals)))
        if float(np.min(new_vals - vals)) < -_MONOTONE_SLACK * scale:
            raise ConvergenceError(
                f"monotonicity lost at iteration {n}: quadrature fault"
            )
        if barrier is not None:
            excess = float(np.max(new_vals + sing - barrier))
            if excess > 1e-10 * (1.0 + float(np.max(barrier))):
                raise ConvergenceError(
                    f"certified iterate escaped the barrier by {excess:.3e}"
                )
        vals = new_vals
        last_step = step
        iterations = n
        if step <= tol:
            status = "Converged"
            break
        history.append(float(np.max(np.abs(vals))))
        if history[-1] > ceiling:
            status = "Diverged"
            break
        if n >= _GROWTH_MIN_ITER and len(history) > _GROWTH_WINDOW:
            window = history[-_GROWTH_WINDOW - 1 :]
            increasing = all(b > a for a, b in zip(window, window[1:]))
            if increasing and window[-1] > _GROWTH_FACTOR * window[0]:
                status = "Diverged"
                break

    profile = RadialFunction(grid, vals, sing_coeff, sing_exp)
    return SolveReport(
        status=status,
        iterations=iterations,
        sup_residual=float(last_step) if np.isfinite(last_step) else 0.0,
        barrier_certified=certified,
        profile=profile,
    )


def find_kstar(params_without_k, op, bracket_tol=1e-3, tol=1e-9, max_iter=3000):
    """Bracket the extremal source strength k* by bisection.

    Parameters
    ----------
    params_without_k : ProblemParams
        Problem data; the k field is ignored.
    op : GreenOperator
        Assembled operator.
    bracket_tol : float
        Relative stop: the bracket is refined until
        k_hi - k_lo <= bracket_tol * k_lo.
    tol, max_iter : float, int
        Settings forwarded to each convergence probe.

    Returns
    -------
    KStarBracket

    Raises
    ------
    RegimeError
        For supercritical exponents (k* = 0: no positive k admits a
        solution).
    ConvergenceError
        If the probe at the certified lower bound k_p fails, no
        divergence is found under repeated doubling, or the recorded
        probes are not monotone in k (all indicate numerical faults).
    """
    params = params_without_k
    if not params.subcritical:
        raise RegimeError(
            f"extremal bracketing requires p < {params.critical_p:.6g}, "
            f"got {params.p}"
        )
    p = params.p
    c2 = measured_c2(params, op)
    k_p = (1.0 / (c2 * p)) ** (1.0 / (p - 1.0)) * (p - 1.0) / p

    probes = []

    def probe(k):
        report = iterate_minimal(params.with_k(k), op, tol=tol, max_iter=max_iter)
        ok = report.status == "Converged"
        probes.append((k, ok))
        return ok, report

    ok, report = probe(k_p)
    if not ok:
        raise ConvergenceError(
            f"iteration failed at the certified bound k_p = {k_p:.6g}"
        )
    k_lo, profile_lo = k_p, report.profile

    k_hi = None
    k = k_p
    for _ in range(60):
        k *= 2.0
        ok, report = probe(k)
        if ok:
            k_lo, profile_lo = k, report.profile
        else:
            k_hi = k
            break
    if k_hi is None:
        raise ConvergenceError("no divergence found while doubling k")

    while k_hi - k_lo > bracket_tol * k_lo:
        mid = 0.5 * (k_lo + k_hi)
        ok, report = probe(mid)
        if ok:
            k_lo, profile_lo = mid, report.profile
        else:
            k_hi = mid

    converged_ks = [q for q, okq in probes if okq]
    diverged_ks = [q for q, okq in probes if not okq]
    if diverged_ks and max(converged_ks) >= min(diverged_ks):
        raise ConvergenceError(
            "convergence indicator is not monotone in k across probes"
        )
    return KStarBracket(k_lo=k_lo, k_hi=k_hi, profile_lo=profile_lo)


def extremal_solution(params_without_k, op, bracket, tol=1e-10, max_iter=8000):
    """Minimal solution at the convergent bracket edge k_lo.

    Re-solves at bracket.k_lo with a tightened tolerance and returns the
    profile; raises ConvergenceError if the re-solve fails (k_lo was
    observed convergent when the bracket was built, so a failure here
    indicates an inconsistent operator or tolerance).
    """
    report = iterate_minimal(
        params_without_k.with_k(bracket.k_lo), op, tol=tol, max_iter=max_iter
    )
    if report.status != "Converged":
        raise ConvergenceError(
            f"re-solve at bracket edge k_lo = {bracket.k_lo:.6g} did not "
            f"converge ({report.status})"
        )
    return report.profile


def first_eigenpair(op, tol=1e-12, max_iter=100000):
    """Principal Dirichlet eigenpair via power iteration on the Green matrix.

    Parameters
    ----------
    op : GreenOperator
    tol : float
        Relative weighted-residual stop for the power iteration.
    max_iter : int
        Iteration cap.

    Returns
    -------
    dict
        {"lambda1": float, "phi1": RadialFunction} where lambda1 is the
        reciprocal of the largest Green eigenvalue and phi1 the positive
        eigenfunction with unit weighted L2 norm.
    """
    w = op.grid.weights
    x = np.ones(op.n)
    x /= np.sqrt(w @ x**2)
    mu = 0.0
    for _ in range(max_iter):
        y = op.apply(x)
        mu = float(w @ (x * y))
        resid = float(np.sqrt(w @ (y - mu * x) ** 2))
        if resid <= tol * mu:
            break
        x = y / np.sqrt(w @ y**2)
    else:
        raise ConvergenceError(
            f"power iteration did not reach tolerance {tol} in {max_iter} steps"
        )
    if float(np.min(x)) <= 0.0:
        raise ConvergenceError("principal eigenfunction lost positivity")
    phi = RadialFunction(op.grid, x / np.sqrt(w @ x**2))
    return {"lambda1": 1.0 / mu, "phi1": phi}
