"""Entropy-regularized forward OT via Sinkhorn matrix scaling.

Two execution modes are provided: direct scaling on u = e^{alpha/eps},
v = e^{beta/eps}, and a log-domain variant that updates the potentials with
log-sum-exp. ``mode="auto"`` starts direct and switches to the log domain when
any exponent magnitude exceeds 500 or a scaling vector under/overflows.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, NotConverged, NumericalOverflow
from .types import (
    CostMatrix,
    DualPotentials,
    ProbabilityVector,
    SolveReport,
    SolverConfig,
    TransportPlan,
    as_matrix,
    validate_plan,
)

_LOG_SWITCH = 500.0


def _lse(z, axis):
    m = np.max(z, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(z - m), axis=axis))


@dataclass(frozen=True)
class SinkhornResult:
    duals: DualPotentials
    plan: TransportPlan
    dual_objective: float
    report: SolveReport


def plan_from_duals(duals: DualPotentials, cost) -> np.ndarray:
    """Raw closed-form plan pi_ij = e^{(alpha_i + beta_j - c_ij)/eps}.

    No marginal feasibility is implied; run validate_plan on the result if a
    proper TransportPlan is needed.
    """
    c = as_matrix(cost)
    z = (duals.alpha[:, None] + duals.beta[None, :] - c) / duals.epsilon
    if np.max(z) > 700:
        i, j = np.unravel_index(int(np.argmax(z)), z.shape)
        raise NumericalOverflow(f"exponent {z[i, j]:.1f} at ({i}, {j}) exceeds 700")
    return np.exp(z)


def dual_objective(duals: DualPotentials, cost, mu: ProbabilityVector,
                   nu: ProbabilityVector) -> float:
    """<alpha, mu> + <beta, nu> - eps * sum e^{(alpha_i + beta_j - c_ij)/eps}."""
    c = as_matrix(cost)
    eps = duals.epsilon
    z = (duals.alpha[:, None] + duals.beta[None, :] - c) / eps
    with np.errstate(over="raise"):
        try:
            expsum = float(np.exp(z).sum())
        except FloatingPointError:
            raise NumericalOverflow("exponential sum overflows in dual objective")
    return float(duals.alpha @ mu.values + duals.beta @ nu.values - eps * expsum)


def sinkhorn_solve(cost, mu: ProbabilityVector, nu: ProbabilityVector,
                   config: SolverConfig, mode: str = "auto") -> SinkhornResult:
    """Solve entropy-regularized OT; returns duals, feasible plan, and report.

    Convergence is declared when both L1 marginal residuals of the current
    plan fall below config.tol. Raises NotConverged (with the best iterate
    attached) when the iteration budget runs out.
    """
    if mode not in ("auto", "direct", "log"):
        raise ValueError(f"unknown mode {mode!r}")
    c = as_matrix(cost)
    m, n = c.shape
    if mu.dim != m or nu.dim != n:
        raise DimMismatch(
            f"cost shape {c.shape} incompatible with marginals ({mu.dim}, {nu.dim})")
    if not (mu.strictly_positive() and nu.strictly_positive()):
        raise ValueError("marginals must be strictly positive")
    eps = config.epsilon
    t0 = time.perf_counter()

    use_log = mode == "log" or (mode == "auto" and np.max(np.abs(c)) / eps > _LOG_SWITCH)
    alpha = np.zeros(m)
    beta = np.zeros(n)
    u = np.ones(m)
    v = np.ones(n)
    log_mu = np.log(mu.values)
    log_nu = np.log(nu.values)

    obj_trace = []
    res_trace = []
    residual = np.inf
    converged = False
    it = 0
    K = None if use_log else np.exp(-c / eps)

    while it < config.max_iter:
        it += 1
        if not use_log:
            Kv = K @ v
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                u = mu.values / Kv
                Ktu = K.T @ u
                v = nu.values / Ktu
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))
                    and np.all(u > 0) and np.all(v > 0)):
                if mode == "direct":
                    raise NumericalOverflow(
                        "scaling vector under/overflow; enable log-domain mode")
                use_log = True
                alpha = np.zeros(m)
                beta = np.zeros(n)
                continue
            row = u * (K @ v)
            col = v * (K.T @ u)
        else:
            alpha = eps * (log_mu - _lse((beta[None, :] - c) / eps, axis=1))
            beta = eps * (log_nu - _lse((alpha[:, None] - c) / eps, axis=0))
            logp = (alpha[:, None] + beta[None, :] - c) / eps
            row = np.exp(_lse(logp, axis=1))
            col = np.exp(_lse(logp, axis=0))
        row_res = float(np.abs(row - mu.values).sum())
        col_res = float(np.abs(col - nu.values).sum())
        residual = max(row_res, col_res)
        if it % config.log_every == 0 or residual <= config.tol:
            if not use_log:
                alpha = eps * np.log(u)
                beta = eps * np.log(v)
            duals = DualPotentials(alpha=alpha, beta=beta, epsilon=eps)
            obj_trace.append(dual_objective(duals, c, mu, nu))
            res_trace.append(residual)
        if residual <= config.tol:
            converged = True
            break

    if not use_log:
        alpha = eps * np.log(u)
        beta = eps * np.log(v)
    duals = DualPotentials(alpha=alpha, beta=beta, epsilon=eps)
    plan_matrix = plan_from_duals(duals, c)
    report = SolveReport(
        iterations=it,
        objective_trace=np.asarray(obj_trace),
        rel_err_trace=None,
        feasibility_residual=residual,
        converged=converged,
        wall_clock_seconds=time.perf_counter() - t0,
        extras={"log_domain": use_log, "residual_trace": np.asarray(res_trace)},
    )
    if not converged:
        plan = validate_plan(plan_matrix, mu, nu, feas_tol=max(2 * residual, config.tol))
        best = SinkhornResult(duals=duals, plan=plan,
                              dual_objective=dual_objective(duals, c, mu, nu),
                              report=report)
        raise NotConverged(
            f"marginal residual {residual:.3e} above {config.tol:.3e} after "
            f"{it} iterations", result=best)
    plan = validate_plan(plan_matrix, mu, nu, feas_tol=max(residual * 1.01, config.tol))
    return SinkhornResult(duals=duals, plan=plan,
                          dual_objective=dual_objective(duals, c, mu, nu),
                          report=report)
