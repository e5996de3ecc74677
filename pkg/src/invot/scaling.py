"""Matrix-scaling recovery of the cost matrix from an observed plan.

One outer iteration alternates a single Sinkhorn sweep on the scalings with a
proximal update of the cost:

    K <- e^{-c/eps};  u <- mu/(Kv);  v <- nu/(K^T u);
    K <- pihat/(u v^T);  c <- prox_{gamma R}(-eps log K)

Only c/eps is identifiable, so solving at eps = 1 recovers c/eps_true.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import Constraint, LinearAffinity, NoConstraint
from .errors import BadBounds, NumericalOverflow, ZeroObservation
from .types import (
    CostMatrix,
    DualPotentials,
    ProbabilityVector,
    SolveReport,
    SolverConfig,
    TransportPlan,
    as_matrix,
    relative_error,
)

_ZERO_SMOOTH_DELTA = 1e-12


@dataclass(frozen=True)
class InverseProblem:
    """An observed plan plus the constraint and solver configuration."""

    observed: TransportPlan
    constraint: Constraint
    config: SolverConfig
    gamma: float = 1.0
    smoothed: bool = False

    def __post_init__(self):
        if self.gamma <= 0:
            raise BadBounds("gamma must be positive")
        if not self.observed.strictly_positive():
            raise ZeroObservation(
                "observed plan contains zero entries, which destroy "
                "identifiability; use smooth_observed_zeros() to opt in to "
                "delta-smoothing")


def smooth_observed_zeros(matrix, mu: ProbabilityVector, nu: ProbabilityVector,
                          feas_tol: float = 1e-6) -> TransportPlan:
    """Replace zero plan entries with 1e-12 and renormalize.

    Opt-in repair for plans with empty cells; the result is flagged by the
    solver report. Marginals are recomputed from the smoothed matrix.
    """
    mat = np.array(as_matrix(matrix), dtype=float)
    mat[mat == 0] = _ZERO_SMOOTH_DELTA
    mat /= mat.sum()
    mu_s = ProbabilityVector(mat.sum(axis=1) / mat.sum())
    nu_s = ProbabilityVector(mat.sum(axis=0) / mat.sum())
    return TransportPlan(mat, mu_s, nu_s, feas_tol=max(feas_tol, 1e-6))


@dataclass(frozen=True)
class InverseSolution:
    cost: CostMatrix
    duals: DualPotentials
    affinity: Optional[np.ndarray]
    report: SolveReport


def objective_E(alpha, beta, cost, problem: InverseProblem) -> float:
    """-<alpha,mu> - <beta,nu> + <c,pihat> + eps * sum e^{(alpha_i+beta_j-c_ij)/eps}."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    c = as_matrix(cost)
    eps = problem.config.epsilon
    pihat = problem.observed.matrix
    mu = problem.observed.row_marginal.values
    nu = problem.observed.col_marginal.values
    z = (alpha[:, None] + beta[None, :] - c) / eps
    with np.errstate(over="ignore"):
        s = eps * float(np.exp(z).sum())
    value = float(-alpha @ mu - beta @ nu + (c * pihat).sum() + s)
    if not np.isfinite(value):
        raise NumericalOverflow("objective value is not finite")
    return value


def set_epsilon_one(problem: InverseProblem) -> InverseProblem:
    """Return the same problem with eps = 1; the result is read as c/eps_true."""
    config = dataclasses.replace(problem.config, epsilon=1.0)
    return dataclasses.replace(problem, config=config)


def learn_cost(problem: InverseProblem, c_init=None, truth=None,
               target_rel_err=None) -> InverseSolution:
    """Run the matrix-scaling cost-learning loop until the cost stabilizes.

    Converged means the Frobenius change of c between outer iterations fell
    below config.tol. When ``truth`` is given, a relative-error trace against
    it is recorded in the report; ``target_rel_err`` additionally stops the
    loop once that error drops to the target (time-to-target benchmarking).
    """
    if target_rel_err is not None and truth is None:
        raise BadBounds("target_rel_err requires a reference cost")
    pihat = problem.observed.matrix
    mu = problem.observed.row_marginal.values
    nu = problem.observed.col_marginal.values
    eps = problem.config.epsilon
    m, n = pihat.shape
    c = np.zeros((m, n)) if c_init is None else np.array(as_matrix(c_init), dtype=float)
    u = np.ones(m)
    v = np.ones(n)
    truth_mat = None if truth is None else as_matrix(truth)

    obj_trace = []
    err_trace = []
    converged = False
    it = 0
    t0 = time.perf_counter()
    while it < problem.config.max_iter:
        it += 1
        with np.errstate(over="ignore", under="ignore"):
            K = np.exp(-c / eps)
            u = mu / (K @ v)
            v = nu / (K.T @ u)
            K = pihat / np.outer(u, v)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(K > 0)):
            raise NumericalOverflow(f"scaling vectors degenerated at iteration {it}")
        chat = -eps * np.log(K)
        c_new = problem.constraint.prox(chat, problem.gamma)
        delta = float(np.linalg.norm(c_new - c))
        c = c_new
        if it % problem.config.log_every == 0 or delta <= problem.config.tol:
            alpha = eps * np.log(u)
            beta = eps * np.log(v)
            obj_trace.append(objective_E(alpha, beta, c, problem))
            if truth_mat is not None:
                err_trace.append(relative_error(c, truth_mat))
                if target_rel_err is not None and err_trace[-1] <= target_rel_err:
                    converged = True
                    break
        if delta <= problem.config.tol:
            converged = True
            break

    alpha = eps * np.log(u)
    beta = eps * np.log(v)
    duals = DualPotentials(alpha=alpha, beta=beta, epsilon=eps)
    affinity = None
    if isinstance(problem.constraint, LinearAffinity):
        affinity = problem.constraint.affinity(-eps * np.log(pihat / np.outer(u, v)))
    with np.errstate(over="ignore", under="ignore"):
        plan_res = float(
            np.abs(np.exp((alpha[:, None] + beta[None, :] - c) / eps).sum(axis=1)
                   - mu).sum())
    report = SolveReport(
        iterations=it,
        objective_trace=np.asarray(obj_trace),
        rel_err_trace=np.asarray(err_trace) if truth_mat is not None else None,
        feasibility_residual=plan_res,
        converged=converged,
        wall_clock_seconds=time.perf_counter() - t0,
        extras={"smoothed_zeros": problem.smoothed},
    )
    return InverseSolution(cost=CostMatrix(c), duals=duals, affinity=affinity,
                           report=report)
