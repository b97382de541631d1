"""Test-problem corpus with machine-precision reference solutions.

Reference solutions are produced by oracle solvers that are independent of
the flow code: FISTA warm starts polished by an active-set KKT solve for
l1+quadratic problems, and a Condat-Vu run polished the same way for the
structured primal-dual problem.  Every shipped solution is gated by a
first-order residual check.
"""

from __future__ import annotations

import dataclasses
import functools

import numpy as np

from .errors import SolverError
from .nonconvex import NonconvexProblem, critical_residual
from .operators import (MonotoneMap, SingleValuedMap, affine_prox, box_prox,
                        difference_matrix, gradient_map, l1_prox, least_squares_fn,
                        matrix_linear_map, matrix_operator, one_minus_cos_fn,
                        quadratic_fn, resolvent_eval, rotation_map, soft_threshold,
                        subdifferential_map, zero_operator)
from .primal_dual import PDState, StructuredProblem, saddle_residuals

Array = np.ndarray


@dataclasses.dataclass(frozen=True)
class ProblemDef:
    name: str
    kind: str  # fixed-point | inclusion | convex-composite | nonconvex-composite | structured-pd | saddle
    components: dict
    known_solution: object
    default_start: object
    horizon: float
    note: str = ""


# ---------------------------------------------------------------------------
# oracle solvers (independent of the flow machinery)


def _fista_l1_quadratic(Q: Array, b: Array, mu: float, iters: int) -> Array:
    L = float(np.linalg.norm(Q, 2))
    step = 1.0 / L
    x = np.zeros(len(b))
    z = x.copy()
    t_acc = 1.0
    for _ in range(iters):
        x_next = soft_threshold(z - step * (Q @ z - b), step * mu)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc ** 2))
        z = x_next + ((t_acc - 1.0) / t_next) * (x_next - x)
        x, t_acc = x_next, t_next
    return x


def solve_l1_quadratic(Q: Array, b: Array, mu: float, iters: int = 4000,
                       pattern_tol: float = 1e-7) -> Array:
    """argmin x^T Q x / 2 - b^T x + mu*||x||_1 to machine precision.

    FISTA locates the active pattern, then the KKT system on the support is
    solved exactly and the complementary inclusions are verified.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    b = np.asarray(b, dtype=float)
    x = _fista_l1_quadratic(Q, b, mu, iters)
    support = np.nonzero(np.abs(x) > pattern_tol)[0]
    signs = np.sign(x[support])
    x_exact = np.zeros_like(x)
    if support.size:
        rhs = b[support] - mu * signs
        x_exact[support] = np.linalg.solve(Q[np.ix_(support, support)], rhs)
    grad = Q @ x_exact - b
    off = np.setdiff1d(np.arange(len(b)), support)
    if support.size and np.any(np.sign(x_exact[support]) != signs):
        raise SolverError("active-set polish produced inconsistent signs")
    if off.size and np.max(np.abs(grad[off])) > mu + 1e-10:
        raise SolverError("active-set polish violates the off-support inclusion")
    if support.size and np.max(np.abs(grad[support] + mu * signs)) > 1e-10:
        raise SolverError("stationarity residual too large after polish")
    return x_exact


def solve_pd_saddle(prob: StructuredProblem, mu: float, nu: float,
                    iters: int = 20000, pattern_tol: float = 1e-6) -> PDState:
    """Saddle point of f + h + g(A.) for f = mu*||.||_1, h = ||x-b||^2/2, g = nu*||.||_1.

    Runs Condat-Vu to locate the active pattern, then solves the KKT system
    exactly on that pattern.  b is read off grad h at the origin.
    """
    n, m = prob.n, prob.m
    A = np.array([prob.A(e) for e in np.eye(n)]).T
    b = -prob.h.gradient(np.zeros(n))
    sigma = 1.0
    tau = 1.0 / (sigma * prob.A.norm_estimate ** 2 + 0.5 * prob.h.grad_lipschitz + 0.1)
    x = np.zeros(n)
    y = np.zeros(m)
    for _ in range(iters):
        x_next = soft_threshold(x - tau * ((x - b) + A.T @ y), tau * mu)
        w = y + sigma * (A @ (2.0 * x_next - x))
        y = np.clip(w, -nu, nu)
        x = x_next
    z = A @ x
    support = np.nonzero(np.abs(x) > pattern_tol)[0]
    sx = np.sign(x[support])
    free = np.nonzero(np.abs(z) <= pattern_tol)[0]       # rows with z_j = 0
    active = np.setdiff1d(np.arange(m), free)
    sz = np.sign(z[active])

    # unknowns: x on the support, y on the free rows
    k1, k2 = support.size, free.size
    size = k1 + k2
    mat = np.zeros((size, size))
    rhs = np.zeros(size)
    mat[:k1, :k1] = np.eye(k1)
    mat[:k1, k1:] = A[np.ix_(free, support)].T
    rhs[:k1] = b[support] - mu * sx - A[np.ix_(active, support)].T @ (nu * sz)
    mat[k1:, :k1] = A[np.ix_(free, support)]
    sol = np.linalg.lstsq(mat, rhs, rcond=None)[0] if size else np.zeros(0)
    x_exact = np.zeros(n)
    x_exact[support] = sol[:k1]
    y_exact = np.zeros(m)
    y_exact[free] = sol[k1:]
    y_exact[active] = nu * sz
    z_exact = A @ x_exact

    state = PDState(x=x_exact, z=z_exact, y=y_exact)
    res = saddle_residuals(prob, state)
    if max(res.values()) > 1e-9:
        raise SolverError("pattern polish failed, residuals %r" % res)
    return state


# ---------------------------------------------------------------------------
# corpus


def _seeded_orthogonal(rng, n: int) -> Array:
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q


def affine_monotone_map(M: Array, q: Array, modulus: float = 0.0) -> MonotoneMap:
    """A(x) = Mx + q with M + M^T PSD; resolvent solves (I + gamma*M)p = x - gamma*q."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    q = np.asarray(q, dtype=float)
    eye = np.eye(M.shape[0])
    return MonotoneMap(
        resolvent=lambda gamma, x: np.linalg.solve(eye + gamma * M,
                                                   np.asarray(x, dtype=float) - gamma * q),
        modulus=modulus)


def _lasso_problem(name: str, A_mat: Array, b: Array, mu: float, horizon: float,
                   note: str) -> ProblemDef:
    g = least_squares_fn(A_mat, b)
    f = l1_prox(mu)
    xstar = solve_l1_quadratic(A_mat.T @ A_mat, A_mat.T @ b, mu)
    return ProblemDef(
        name=name, kind="convex-composite",
        components={"f": f, "g": g, "A": subdifferential_map(f), "B": gradient_map(g),
                    "beta": 1.0 / g.grad_lipschitz, "mu": mu},
        known_solution=xstar,
        default_start=np.ones(A_mat.shape[1]),
        horizon=horizon, note=note)


@functools.lru_cache(maxsize=4)
def corpus(seed: int = 0):
    """The shipped problem corpus (>= 8 problems, each with a solvable flow)."""
    rng = np.random.default_rng(seed)
    problems = []

    problems.append(ProblemDef(
        name="rotation2d", kind="fixed-point",
        components={"T": rotation_map(np.pi / 2.0)},
        known_solution=np.zeros(2), default_start=np.array([1.0, 0.0]),
        horizon=50.0, note="plane rotation by pi/2; unique fixed point at the origin"))

    problems.append(ProblemDef(
        name="neg_identity", kind="fixed-point",
        components={"T": SingleValuedMap(fn=lambda x: -np.asarray(x, dtype=float),
                                         lipschitz_L=1.0)},
        known_solution=np.zeros(1), default_start=np.array([1.0]),
        horizon=20.0, note="T = -Id; the discrete iteration with lam=1 oscillates"))

    # 1-D lasso; the solution is the soft threshold soft(b, mu)
    problems.append(_lasso_problem("lasso1d", np.array([[1.0]]), np.array([1.5]), 0.4,
                                   horizon=100.0, note="soft-threshold closed form"))

    U = _seeded_orthogonal(rng, 10)
    V = _seeded_orthogonal(rng, 10)
    svals = np.linspace(1.0, 2.0, 10)
    A10 = U @ np.diag(svals) @ V.T
    b10 = rng.standard_normal(10) * 2.0
    problems.append(_lasso_problem("lasso10", A10, b10, 0.5, horizon=200.0,
                                   note="well-conditioned 10-D lasso, oracle-polished solution"))

    c_box = np.array([3.0, -1.0])
    g_box = least_squares_fn(np.eye(2), c_box)
    f_box = box_prox(0.0, 2.0)
    problems.append(ProblemDef(
        name="constrained_quadratic", kind="convex-composite",
        components={"f": f_box, "g": g_box, "A": subdifferential_map(f_box),
                    "B": gradient_map(g_box), "beta": 1.0, "mu": 0.0},
        known_solution=np.clip(c_box, 0.0, 2.0),
        default_start=np.array([1.0, 1.0]),
        horizon=60.0, note="projection of the unconstrained minimizer onto the box"))

    R = _seeded_orthogonal(rng, 5)
    Q5 = R @ np.diag(np.linspace(1.0, 3.0, 5)) @ R.T
    b5 = rng.standard_normal(5) * 3.0
    g5 = quadratic_fn(Q5, b5)
    f5 = l1_prox(0.5)
    x5 = solve_l1_quadratic(Q5, b5, 0.5)
    problems.append(ProblemDef(
        name="strongcvx_l1", kind="convex-composite",
        components={"f": f5, "g": g5, "A": subdifferential_map(f5),
                    "B": gradient_map(g5), "beta": 1.0 / g5.grad_lipschitz, "mu": 0.5},
        known_solution=x5, default_start=np.ones(5),
        horizon=120.0, note="strongly convex quadratic + l1; exponential flow regime"))

    K = np.array([[0.0, 1.0], [-1.0, 0.0]])
    problems.append(ProblemDef(
        name="bilinear_saddle", kind="saddle",
        components={"A": zero_operator(), "B": matrix_operator(K), "K": K},
        known_solution=np.zeros(2), default_start=np.array([1.0, 0.0]),
        horizon=200.0,
        note="monotone Lipschitz saddle operator; not cocoercive, norms are conserved "
             "by the plain flow"))

    problems.append(ProblemDef(
        name="nonconvex_cos", kind="nonconvex-composite",
        components={"problem": NonconvexProblem(f=l1_prox(0.1), g=one_minus_cos_fn(),
                                                eta=0.25)},
        known_solution=np.zeros(1), default_start=np.array([2.5]),
        horizon=200.0, note="1 - cos + 0.1|x|; the origin is the attracting critical point"))

    problems.append(_banana_box_problem())

    n_pd = 4
    b_pd = np.array([1.0, 3.0, 0.5, 2.0])
    mu_pd, nu_pd = 0.1, 0.5
    D = difference_matrix(n_pd)
    structured = StructuredProblem(
        f=l1_prox(mu_pd), h=least_squares_fn(np.eye(n_pd), b_pd), g=l1_prox(nu_pd),
        A=matrix_linear_map(D), n=n_pd, m=n_pd - 1)
    problems.append(ProblemDef(
        name="pd_lasso_analysis", kind="structured-pd",
        components={"structured": structured, "mu": mu_pd, "nu": nu_pd},
        known_solution=solve_pd_saddle(structured, mu_pd, nu_pd),
        default_start=PDState(x=np.zeros(n_pd), z=np.zeros(n_pd - 1), y=np.zeros(n_pd - 1)),
        horizon=500.0, note="difference-analysis lasso; saddle point oracle-polished"))

    # two-line feasibility: A = normal cone of {x2 = 0}, B = Id - proj onto {x1 + x2 = 2}
    line1 = np.array([[0.0, 1.0]])
    nrm = np.array([1.0, 1.0]) / np.sqrt(2.0)
    p0 = np.array([1.0, 1.0])  # a point on the second line
    N = np.outer(nrm, nrm)

    def b_two_lines(x):
        return N @ (np.asarray(x, dtype=float) - p0)

    problems.append(ProblemDef(
        name="two_lines", kind="inclusion",
        components={
            "A": subdifferential_map(affine_prox(line1, np.array([0.0]))),
            "B": SingleValuedMap(fn=b_two_lines, cocoercivity_beta=1.0, lipschitz_L=1.0),
            "B_mono": affine_monotone_map(N, -N @ p0),
            "beta": 1.0,
        },
        known_solution=np.array([2.0, 0.0]), default_start=np.array([-1.0, 3.0]),
        horizon=40.0, note="feasibility of two lines; B is the gradient of half the "
                           "squared distance to the second line"))

    return tuple(problems)


def _banana_box_problem() -> ProblemDef:
    """Curved-valley quadratic-coupling objective restricted to a box.

    g(x) = (1-x0)^2 + 2*(x1 - x0^2)^2 on [-1.5, 1.5]^2; the gradient Lipschitz
    bound is the max Hessian norm over the box (attained at a corner).
    """
    c = 2.0
    lo, hi = -1.5, 1.5

    def val(x):
        x = np.asarray(x, dtype=float)
        return float((1.0 - x[0]) ** 2 + c * (x[1] - x[0] ** 2) ** 2)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.array([-2.0 * (1.0 - x[0]) - 4.0 * c * x[0] * (x[1] - x[0] ** 2),
                         2.0 * c * (x[1] - x[0] ** 2)])

    corner = np.array([[2.0 - 4.0 * c * lo + 12.0 * c * hi ** 2, -4.0 * c * hi],
                       [-4.0 * c * hi, 2.0 * c]])
    beta = float(np.linalg.norm(corner, 2))
    from .operators import SmoothFunction
    g = SmoothFunction(value=val, gradient=grad, grad_lipschitz=beta, convex=False)
    eta = 0.25 / beta  # eta*beta*(3 + eta*beta) = 0.8125
    return ProblemDef(
        name="banana_box", kind="nonconvex-composite",
        components={"problem": NonconvexProblem(f=box_prox(lo, hi), g=g, eta=eta)},
        known_solution=np.array([1.0, 1.0]), default_start=np.array([-1.0, 1.0]),
        horizon=20000.0,
        note="curved valley in a box; slow flow, run with coarse dt (the field is "
             "1-Lipschitz-scale)")


def get_problem(name: str, seed: int = 0) -> ProblemDef:
    for p in corpus(seed):
        if p.name == name:
            return p
    raise KeyError("unknown problem %r; known: %s"
                   % (name, ", ".join(p.name for p in corpus(seed))))


def state_residual(p: ProblemDef, state) -> float:
    """First-order residual of a candidate solution, by problem kind."""
    if p.kind == "fixed-point":
        T = p.components["T"]
        return float(np.linalg.norm(T(state) - state))
    if p.kind in ("inclusion", "convex-composite"):
        A, B = p.components["A"], p.components["B"]
        beta = p.components.get("beta", 1.0)
        gamma = min(1.0, beta)
        y = resolvent_eval(A, gamma, np.asarray(state) - gamma * B(state))
        return float(np.linalg.norm(y - np.asarray(state)))
    if p.kind == "saddle":
        B = p.components["B"]
        return float(np.linalg.norm(B(state)))
    if p.kind == "nonconvex-composite":
        return critical_residual(p.components["problem"], np.asarray(state))
    if p.kind == "structured-pd":
        return max(saddle_residuals(p.components["structured"], state).values())
    raise ValueError("unknown problem kind %r" % p.kind)


def solution_residual(p: ProblemDef) -> float:
    """Residual of the shipped reference solution (nan when none is shipped)."""
    if p.known_solution is None:
        return np.nan
    return state_residual(p, p.known_solution)
