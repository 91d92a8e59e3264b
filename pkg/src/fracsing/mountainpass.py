"""Second solution above the minimal one via a mountain-pass search.

For k below the extremal value the problem admits a second solution
w = u + v where u is the minimal solution and v >= 0 solves the shifted
problem

    (-Delta)^alpha v = (u + v_+)^p - u^p.

Critical points of the energy

    E(v) = 1/2 ||v||_alpha^2 - int F(u, v_+),
    F(s,t) = [(s+t)^(p+1) - s^(p+1) - (p+1) s^p t] / (p+1),

are exactly such solutions.  The discrete quadratic form ||v||_alpha^2 is
realized as v' A v with A the inverse of the weighted Green matrix, which
makes the A-gradient of E equal to the fixed-point residual
v - G_alpha[(u+v_+)^p - u^p]: descent steps need no linear solves.  The
search runs a maximize-then-descend path deformation with a Newton
polish, cross-checked by a deflated Newton iteration that removes the
trivial root v = 0, and certifies the mountain-pass geometry by sampling
the energy on an A-sphere of verified radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import (
    ConvergenceError,
    ParameterError,
    RadialFunction,
    RegimeError,
    SecondSolutionNotFound,
)
from .stability import sigma1

_SERIES_CUTOFF = 1e-3


@dataclass(frozen=True)
class DiscreteHAlphaForm:
    """Discrete realization of the fractional Dirichlet quadratic form.

    stiffness is the dense symmetric positive definite matrix A with
    v' A v approximating ||v||_alpha^2 for nodal samples v; mass is the
    quadrature weight vector of the radial volume measure.
    """

    stiffness: np.ndarray
    mass: np.ndarray

    def inner(self, a, b):
        """A-inner product of two nodal vectors."""
        return float(a @ self.stiffness @ b)

    def norm(self, a):
        """A-norm of a nodal vector."""
        return float(np.sqrt(max(a @ self.stiffness @ a, 0.0)))


def build_form(op, cond_cap=1e12):
    """Invert the weighted Green matrix into a discrete energy form.

    A = W^(1/2) S^(-1) W^(1/2) with S the symmetrized Green matrix and
    W the quadrature weights; then A * (Green matrix) = W exactly in
    exact arithmetic, so the form is consistent with the operator by
    construction.

    Parameters
    ----------
    op : GreenOperator
    cond_cap : float
        Reject matrices with spectral condition number beyond this cap
        (the grid grading has outrun double precision).

    Returns
    -------
    DiscreteHAlphaForm

    Raises
    ------
    ConvergenceError
        If S is numerically indefinite or too ill-conditioned.
    """
    s_mat = op.symmetrized()
    s_mat = 0.5 * (s_mat + s_mat.T)
    eigs = np.linalg.eigvalsh(s_mat)
    if eigs[0] <= 0.0:
        raise ConvergenceError(
            f"symmetrized Green matrix is not positive definite "
            f"(min eigenvalue {eigs[0]:.3e})"
        )
    cond = eigs[-1] / eigs[0]
    if cond > cond_cap:
        raise ConvergenceError(
            f"Green matrix condition number {cond:.3e} exceeds {cond_cap:.1e}; "
            f"grid grading too aggressive for the energy form"
        )
    sqrt_w = np.sqrt(op.grid.weights)
    factor = linalg.cho_factor(s_mat)
    inv_sw = linalg.cho_solve(factor, np.diag(sqrt_w))
    stiffness = sqrt_w[:, None] * inv_sw
    stiffness = 0.5 * (stiffness + stiffness.T)
    return DiscreteHAlphaForm(stiffness=stiffness, mass=op.grid.weights.copy())


def power_increment(s, t, p):
    """Stable (s + t)^p - s^p for s >= 0 and t >= 0 elementwise.

    Uses s^p * expm1(p * log1p(t/s)) to avoid cancellation when t << s
    (the relevant regime near the singular axis of the minimal
    solution).
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    out = np.zeros(s.shape)
    zero_s = s == 0.0
    pos = (t > 0.0) & ~zero_s
    out[pos] = s[pos] ** p * np.expm1(p * np.log1p(t[pos] / s[pos]))
    out[zero_s & (t > 0.0)] = t[zero_s & (t > 0.0)] ** p
    return out


def increment_primitive(s, t, p):
    """Stable F(s,t) = [(s+t)^(p+1) - s^(p+1) - (p+1) s^p t] / (p+1).

    The primitive of power_increment in t; for t/s below 1e-3 the
    leading cancellation is evaluated by its Taylor series in t/s.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    out = np.zeros(s.shape)
    tp = np.where(t > 0.0, t, 0.0)
    zero_s = s == 0.0
    out[zero_s] = tp[zero_s] ** (p + 1.0) / (p + 1.0)
    pos = ~zero_s & (tp > 0.0)
    if np.any(pos):
        sv, tv = s[pos], tp[pos]
        tau = tv / sv
        small = tau < _SERIES_CUTOFF
        res = np.empty(sv.shape)
        if np.any(small):
            ta = tau[small]
            series = (
                p / 2.0
                + p * (p - 1.0) / 6.0 * ta
                + p * (p - 1.0) * (p - 2.0) / 24.0 * ta**2
            )
            res[small] = sv[small] ** (p + 1.0) * ta**2 * series
        big = ~small
        if np.any(big):
            tb = tau[big]
            res[big] = (
                sv[big] ** (p + 1.0)
                * (np.expm1((p + 1.0) * np.log1p(tb)) - (p + 1.0) * tb)
                / (p + 1.0)
            )
        out[pos] = res
    return out


def superlinearity_margin(s, t, p, c_p):
    """Margin of f(s,t) t - (2 + c_p) F(s,t) >= -(c_p p / 2) s^(p-1) t^2.

    Returns the left side minus the right side (nonnegative when the
    inequality holds); at p = 2 with c_p = 1 the margin vanishes
    identically, the sharp case.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    lhs = power_increment(s, tp, p) * tp - (2.0 + c_p) * increment_primitive(s, tp, p)
    return lhs + (c_p * p / 2.0) * s ** (p - 1.0) * tp**2


def energy(v, u_min, form, params):
    """Shifted-problem energy E(v) at a bounded perturbation profile.

    Parameters
    ----------
    v : RadialFunction
        Perturbation; must carry no singular part.
    u_min : RadialFunction
        Converged minimal solution for the same params.
    form : DiscreteHAlphaForm
    params : ProblemParams

    Returns
    -------
    float
        E(v); exactly 0.0 at v = 0.
    """
    if v.singular_coeff != 0.0:
        raise ParameterError("energy perturbations must be bounded profiles")
    return _energy_values(v.values, u_min.total, form, params)


def _energy_values(vals, u_total, form, params):
    quad = 0.5 * float(vals @ form.stiffness @ vals)
    bulk = float(
        form.mass @ increment_primitive(u_total, np.maximum(vals, 0.0), params.p)
    )
    return quad - bulk


def _gradient_values(vals, u_total, op, params):
    """A-gradient of E: the fixed-point residual v - G_alpha[f(u, v_+)]."""
    f = power_increment(u_total, np.maximum(vals, 0.0), params.p)
    return vals - op.apply(f)


@dataclass(frozen=True)
class MountainPassResult:
    """Nontrivial critical point of the shifted energy.

    v is the perturbation, energy its E-level, level_lower_bound the
    certified pass level beta, second_solution the profile u + v; trace
    rows record (step, energy, gradient A-norm) along the search.
    """

    v: RadialFunction
    energy: float
    level_lower_bound: float
    second_solution: RadialFunction
    trace: tuple


def _direction_ensemble(op, form, rng, extra=()):
    """A-unit directions for the geometry scan.

    Mixes the shapes that stress the superlinear remainder: compactly
    supported bumps of graded widths, the first eigenfunction, the
    smooth ray direction, Green-smoothed noise, raw noise, and any
    caller-supplied profiles (e.g. the found critical direction).
    Plain Gaussian noise alone is useless here: A-unit noise is
    pointwise tiny, so every radius would pass the scan vacuously.
    """
    from .picard import first_eigenpair

    r = op.grid.nodes
    dirs = []
    for width in np.linspace(0.08, 0.98, 16):
        x = np.zeros(op.n)
        inside = r < width
        x[inside] = np.exp(-1.0 / (1.0 - (r[inside] / width) ** 2))
        dirs.append(x)
    dirs.append(first_eigenpair(op)["phi1"].values.copy())
    dirs.append(op.apply(np.ones(op.n)))
    for _ in range(17):
        dirs.append(op.apply(rng.standard_normal(op.n)))
    for _ in range(15):
        dirs.append(rng.standard_normal(op.n))
    dirs.extend(np.asarray(x, dtype=float) for x in extra)
    out = []
    for x in dirs:
        nx = form.norm(x)
        if nx > 0.0:
            out.append(x / nx)
    return out


def _pass_geometry(u_total, form, params, c24, dirs, e_norm):
    """Verified mountain-pass radius and level.

    Splits E(sigma d) = sigma^2/2 - int F(u, sigma d_+) into the
    quadratic part, bounded for every direction through the stability
    eigenvalue (p int u^(p-1) xi^2 <= ||xi||_A^2 / sigma1), and the
    superlinear remainder, which is sampled over the direction
    ensemble.  On the largest grid radius sigma0 where the sampled
    remainder stays below (c24/4) sigma0^2,

        E(sigma0 d) >= (c24/2) sigma0^2 - rem >= (c24/4) sigma0^2 = beta

    holds for each sampled direction, so beta is a certified-by-
    sampling lower bound for the pass level.
    """
    p = params.p
    quad_coeff = 0.5 * p * u_total ** (p - 1.0)
    sigma = 0.5 * e_norm
    for _ in range(48):
        target = 0.25 * c24 * sigma**2
        ok = True
        for d in dirs:
            dp = np.maximum(sigma * d, 0.0)
            rem = float(
                form.mass @ (increment_primitive(u_total, dp, p) - quad_coeff * dp**2)
            )
            if rem > target:
                ok = False
                break
        if ok:
            return sigma, target
        sigma *= 0.5
    raise SecondSolutionNotFound(
        "no radius with a certified positive pass level was found"
    )


def _newton_polish(vals, u_total, op, params, fp_tol, budget=60):
    """Newton iteration on the fixed-point residual from a warm start."""
    v = vals.copy()
    n = v.size
    trace = []
    for it in range(budget):
        resid = _gradient_values(v, u_total, op, params)
        rnorm = float(np.max(np.abs(resid)))
        trace.append((it, rnorm))
        if rnorm <= fp_tol:
            return v, trace
        vp = np.maximum(v, 0.0)
        fprime = params.p * (u_total + vp) ** (params.p - 1.0) * (v > 0.0)
        jac = np.eye(n) - op.matrix * fprime[None, :]
        delta = np.linalg.solve(jac, -resid)
        # Backtrack on the residual norm to stay in the basin.
        step = 1.0
        for _ in range(40):
            trial = v + step * delta
            tnorm = float(
                np.max(np.abs(_gradient_values(trial, u_total, op, params)))
            )
            if tnorm < rnorm:
                v = trial
                break
            step *= 0.5
        else:
            raise SecondSolutionNotFound(
                f"Newton polish stagnated at residual {rnorm:.3e}", trace
            )
    raise SecondSolutionNotFound(
        f"Newton polish exhausted {budget} steps", trace
    )


def _redistribute(path, form):
    """Resample a polyline to equal A-arc-length spacing.

    Keeps the discrete path an honest approximation of a continuous
    curve between its fixed endpoints; without this the moving maximum
    leapfrogs the energy barrier and the deformation collapses onto the
    trivial critical point.
    """
    m = len(path) - 1
    seg = np.empty(m)
    for i in range(m):
        seg[i] = form.norm(path[i + 1] - path[i])
    arcs = np.concatenate(([0.0], np.cumsum(seg)))
    total = arcs[-1]
    if total <= 0.0:
        return path
    targets = np.linspace(0.0, total, m + 1)
    new_path = [path[0]]
    for j in range(1, m):
        i = int(np.searchsorted(arcs, targets[j], side="right") - 1)
        i = min(i, m - 1)
        frac = 0.0 if seg[i] == 0.0 else (targets[j] - arcs[i]) / seg[i]
        new_path.append(path[i] + frac * (path[i + 1] - path[i]))
    new_path.append(path[m])
    return new_path


def _negative_endpoint(u_total, op, form, params):
    """A-unit ray direction and a ray length with nonpositive energy."""
    base = op.apply(np.ones(op.n))
    e_dir = base / form.norm(base)
    t0 = 1.0
    for _ in range(80):
        if _energy_values(t0 * e_dir, u_total, form, params) <= 0.0:
            return e_dir, t0
        t0 *= 2.0
    raise SecondSolutionNotFound("no negative-energy endpoint found on the ray")


def _run_mountain_pass(
    u_total, op, form, params, fp_tol, grad_tol, m_segments, max_steps
):
    """Maximize-then-descend path deformation from 0 to a negative-energy
    endpoint, followed by a Newton polish of the path maximum."""
    e_dir, t0 = _negative_endpoint(u_total, op, form, params)
    path = [s * t0 * e_dir for s in np.linspace(0.0, 1.0, m_segments + 1)]
    trace = []
    v = path[1]
    best = np.inf
    stall = 0
    for step_idx in range(max_steps):
        energies = [
            _energy_values(path[j], u_total, form, params)
            for j in range(1, m_segments)
        ]
        j = int(np.argmax(energies)) + 1
        v = path[j]
        e_here = energies[j - 1]
        grad = _gradient_values(v, u_total, op, params)
        gnorm = form.norm(grad)
        trace.append((step_idx, e_here, gnorm))
        # The maximum of a continuous path stays above the pass level;
        # a small gradient at nonpositive energy means the discrete
        # maximum slid off the barrier, so keep deforming.
        if gnorm <= grad_tol and e_here > 0.0:
            break
        if e_here < best - 1e-9 * (1.0 + abs(best)):
            best = e_here
            stall = 0
        else:
            # The moving maximum has hit the resolution limit of the
            # discrete path; hand the endgame to the Newton polish.
            stall += 1
            if stall >= 15:
                break
        step = 1.0
        armijo_ok = False
        for _ in range(50):
            trial = v - step * grad
            if (
                _energy_values(trial, u_total, form, params)
                <= e_here - 1e-4 * step * gnorm**2
            ):
                path[j] = trial
                armijo_ok = True
                break
            step *= 0.5
        if not armijo_ok:
            break
        path = _redistribute(path, form)
    v, polish_trace = _newton_polish(v, u_total, op, params, fp_tol)
    trace.extend(
        (len(trace) + i, None, r) for i, r in enumerate(t[1] for t in polish_trace)
    )
    return v, trace


def _run_deflated_newton(u_total, op, form, params, u_start, fp_tol, max_steps):
    """Newton iteration with the trivial root deflated away.

    The deflated residual is m(v) R(v) with m(v) = 1 + 1/||v||_w^2; the
    deflated Newton step is the plain step rescaled by
    1/(1 - grad(m).delta/m), which repels the iteration from v = 0.
    """
    w = form.mass
    v = u_start.copy()
    n = v.size
    trace = []
    for it in range(max_steps):
        resid = _gradient_values(v, u_total, op, params)
        rnorm = float(np.max(np.abs(resid)))
        nv2 = float(w @ v**2)
        trace.append((it, rnorm, np.sqrt(nv2)))
        if rnorm <= fp_tol:
            if nv2 <= 1e-16:
                raise SecondSolutionNotFound(
                    "deflated iteration collapsed onto the trivial root", trace
                )
            return v, trace
        vp = np.maximum(v, 0.0)
        fprime = params.p * (u_total + vp) ** (params.p - 1.0) * (v > 0.0)
        jac = np.eye(n) - op.matrix * fprime[None, :]
        delta = np.linalg.solve(jac, -resid)
        if nv2 > 0.0:
            m_defl = 1.0 + 1.0 / nv2
            grad_m = -2.0 / nv2**2 * (w * v)
            denom = 1.0 - float(grad_m @ delta) / m_defl
            if abs(denom) > 1e-12:
                delta = delta / denom
        step = 1.0
        for _ in range(40):
            trial = v + step * delta
            tnv2 = float(w @ trial**2)
            tm = 1.0 + (1.0 / tnv2 if tnv2 > 0.0 else np.inf)
            tnorm = float(
                np.max(np.abs(_gradient_values(trial, u_total, op, params)))
            )
            if tm * tnorm < (1.0 + 1.0 / nv2 if nv2 > 0 else np.inf) * rnorm:
                v = trial
                break
            step *= 0.5
        else:
            raise SecondSolutionNotFound(
                f"deflated Newton stagnated at residual {rnorm:.3e}", trace
            )
    raise SecondSolutionNotFound(
        f"deflated Newton exhausted {max_steps} steps", trace
    )


def find_second_solution(
    params,
    op,
    form,
    u_min,
    method="MountainPassAlgorithm",
    seed=0,
    fp_tol=1e-10,
    grad_tol=1e-3,
    m_segments=20,
    max_steps=2000,
):
    """Locate the second solution above the minimal one.

    Parameters
    ----------
    params : ProblemParams
        Must have 0 < k strictly below the extremal value (enforced
        through strict stability of u_min).
    op : GreenOperator
    form : DiscreteHAlphaForm
    u_min : RadialFunction
        Converged minimal solution at params.
    method : str
        "MountainPassAlgorithm" (path deformation + Newton polish) or
        "DeflatedNewton" (deflated root search started from 10 * u_min).
    seed : int
        Seed for the geometry-certification directions.
    fp_tol : float
        Fixed-point residual target for the returned critical point.
    grad_tol : float
        Gradient norm at which the path deformation hands over to the
        Newton polish.
    m_segments, max_steps : int
        Path resolution and deformation budget.

    Returns
    -------
    MountainPassResult

    Raises
    ------
    RegimeError
        If k <= 0 or u_min is not strictly stable (k at or beyond the
        extremal value: no second solution exists).
    SecondSolutionNotFound
        If the search budget is exhausted; carries the search trace.
    """
    if params.k <= 0.0:
        raise RegimeError("second solutions require k > 0")
    stab = sigma1(u_min, params, op)
    if not stab.sigma1 > 1.0:
        raise RegimeError(
            f"minimal solution is not strictly stable (sigma1 = "
            f"{stab.sigma1:.6g}); k is at or beyond the extremal value"
        )
    c24 = 1.0 - 1.0 / stab.sigma1
    u_total = u_min.total

    if method == "MountainPassAlgorithm":
        vals, trace = _run_mountain_pass(
            u_total, op, form, params, fp_tol, grad_tol, m_segments, max_steps
        )
    elif method == "DeflatedNewton":
        vals, trace = _run_deflated_newton(
            u_total, op, form, params, 10.0 * u_total, fp_tol, max_steps
        )
    else:
        raise ParameterError(f"unknown method {method!r}")

    scale = float(np.max(np.abs(vals)))
    if scale <= 1e-10:
        raise SecondSolutionNotFound(
            "search converged to the trivial critical point", trace
        )
    if float(np.min(vals)) < -1e-8 * scale:
        raise SecondSolutionNotFound(
            f"critical point lost nonnegativity (min {np.min(vals):.3e})", trace
        )

    _, t0 = _negative_endpoint(u_total, op, form, params)
    rng = np.random.default_rng(seed)
    dirs = _direction_ensemble(op, form, rng, extra=(vals,))
    sigma0, beta = _pass_geometry(u_total, form, params, c24, dirs, t0)
    e_val = _energy_values(vals, u_total, form, params)
    if e_val < beta * (1.0 - 1e-9):
        raise SecondSolutionNotFound(
            f"critical level {e_val:.6g} fell below the certified pass "
            f"level {beta:.6g}",
            trace,
        )
    v_prof = RadialFunction(op.grid, np.maximum(vals, 0.0))
    return MountainPassResult(
        v=v_prof,
        energy=e_val,
        level_lower_bound=beta,
        second_solution=u_min + v_prof,
        trace=tuple(trace),
    )


@dataclass(frozen=True)
class WeakIdentityReport:
    """Residuals of the distributional identity against a test battery.

    Each row is (support, pairing_value, k_times_xi0, residual); the
    pairing of a true solution equals k xi(0) for every test function.
    """

    max_residual: float
    rows: tuple


def verify_weak_identity(w, params, op):
    """Check int u (-Delta)^alpha xi - int u^p xi = k xi(0) on a battery.

    Parameters
    ----------
    w : RadialFunction
        Candidate solution (minimal, second, or externally supplied).
    params : ProblemParams
    op : GreenOperator

    Returns
    -------
    WeakIdentityReport
    """
    from .classify import pairing, standard_battery

    rows = []
    worst = 0.0
    for xi in standard_battery(op):
        val = pairing(w, xi, params, op)
        target = params.k * xi.value_at_origin
        resid = val - target
        worst = max(worst, abs(resid))
        rows.append((xi.support, val, target, resid))
    return WeakIdentityReport(max_residual=worst, rows=tuple(rows))
