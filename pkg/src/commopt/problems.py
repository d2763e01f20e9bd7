"""Synthetic distributed problems, reference optima, and gradient oracles.

An instance is a picklable bag of per-worker data plus the constants the
schedules consume (L, mu, f_star, G_star, Delta_x, Delta_f). Behavior is
dispatched on the ``kind`` string through a registry so other modules (the
lower-bound chain constructions) can add families without touching this file.

Constants are chosen to hold per worker, which is what the smoothness and
strong-convexity assumptions require:
  * least squares:  L = lambda_max(A^T A)/n  (dominates every worker block),
                    mu = min_i lambda_min(A_i^T A_i)/n  (the aggregate
                    lambda_min(A^T A)/n can overstate a single worker's
                    curvature by up to a factor n)
  * logistic:       L = max_i lambda_max(A_i^T A_i)/(4M), mu = 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lstsq, svd
from scipy.special import expit

from .core import RandomStream, as_vector, derive_stream

REFERENCE_TOL = 1e-10
_GD_MAX_ITER = 500_000


@dataclass(frozen=True)
class ProblemOps:
    """Per-kind behavior table."""

    value: Callable  # (problem, x) -> f(x)
    worker_value: Callable  # (problem, i, x) -> f_i(x)
    worker_grad: Callable  # (problem, i, x) -> grad f_i(x)
    worker_grads: Callable  # (problem, x) -> (n, d) all workers at once
    solve: Callable  # (problem, tol) -> (x_star, f_star, f_i_star)


REGISTRY: dict[str, ProblemOps] = {}


def register_kind(kind: str, ops: ProblemOps) -> None:
    if kind in REGISTRY:
        raise ValueError(f"problem kind {kind!r} already registered")
    REGISTRY[kind] = ops


@dataclass(frozen=True)
class ProblemInstance:
    """One distributed problem: n workers, dimension d, shared constants.

    ``data`` holds the kind-specific payload (all ndarrays, so instances
    pickle cleanly into worker processes). ``spec_key`` reconstructs the
    instance: (generator name, sorted parameter tuple, seed).
    """

    kind: str
    n: int
    d: int
    data: dict = field(repr=False)
    L: float = 0.0
    mu: float = 0.0
    x_star: np.ndarray | None = None
    f_star: float | None = None
    f_i_star: np.ndarray | None = None
    G_star: float | None = None
    Delta_x: float | None = None
    Delta_f: float | None = None
    spec_key: tuple = ()

    def _ops(self) -> ProblemOps:
        return REGISTRY[self.kind]

    def value(self, x) -> float:
        return self._ops().value(self, np.asarray(x, dtype=np.float64))

    def worker_value(self, i: int, x) -> float:
        return self._ops().worker_value(self, i, np.asarray(x, dtype=np.float64))

    def worker_grad(self, i: int, x) -> np.ndarray:
        return self._ops().worker_grad(self, i, np.asarray(x, dtype=np.float64))

    def worker_grads(self, x) -> np.ndarray:
        return self._ops().worker_grads(self, np.asarray(x, dtype=np.float64))

    def grad(self, x) -> np.ndarray:
        return self.worker_grads(x).mean(axis=0)

    def gap(self, x) -> float:
        return self.value(x) - self.f_star


# -- stochastic oracle --------------------------------------------------------


@dataclass(frozen=True)
class OracleConfig:
    """Additive-Gaussian first-order oracle with E||noise||^2 = sigma^2.

    sigma absorbs the dimension: noise = (sigma/sqrt(d)) * N(0, I_d), so the
    per-coordinate scale of the experiment sections maps to sigma = scale*sqrt(d).
    """

    sigma: float = 0.0
    mode: str = "AdditiveGaussian"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.mode != "AdditiveGaussian":
            raise ValueError(f"unknown oracle mode {self.mode!r}")


def oracle_query(
    problem: ProblemInstance, i: int, x, cfg: OracleConfig, rng: RandomStream | None = None
) -> np.ndarray:
    """One stochastic gradient sample for worker i.

    sigma=0 returns the exact gradient and never touches the stream, so
    noiseless runs are draw-free and bitwise reproducible without streams.
    """
    g = problem.worker_grad(i, x)
    if cfg.sigma == 0.0:
        return g
    scale = cfg.sigma / math.sqrt(problem.d)
    return g + scale * rng.normal(problem.d)


def oracle_round_average(
    problem: ProblemInstance, x, cfg: OracleConfig, R: int, streams
) -> np.ndarray:
    """(n, d) matrix of R-averaged oracle samples, one row per worker.

    The mean of R i.i.d. N(0, s^2 I) draws is N(0, (s^2/R) I), so the average
    is drawn directly with one normal block per worker instead of R; this is
    distribution-identical and keeps the inner loop O(d) per round.
    """
    G = problem.worker_grads(x)
    if cfg.sigma == 0.0:
        return G
    scale = cfg.sigma / math.sqrt(problem.d * R)
    for i in range(problem.n):
        G[i] += scale * streams[i].normal(problem.d)
    return G


# -- shared generation helpers --------------------------------------------------


def _condition_surgery(A: np.ndarray, cond: float) -> np.ndarray:
    """Replace A's singular values by a log-spaced spectrum spanning sqrt(cond).

    Keeps the leading singular value, so kappa(A^T A) = cond exactly.
    """
    if cond < 1.0:
        raise ValueError("cond must be >= 1")
    d = A.shape[1]
    if d == 1:
        if cond != 1.0:
            raise ValueError("cond > 1 is unachievable at d = 1")
        return A
    U, s, Vt = svd(A, full_matrices=False)
    s_new = s[0] * np.geomspace(1.0, cond**-0.5, d)
    assert np.all(s_new > 0), "rank deficiency after spectrum surgery"
    return (U * s_new) @ Vt


def _spec_key(name: str, seed: int, **params) -> tuple:
    return (name, tuple(sorted(params.items())), int(seed))


def _finalize(inst: ProblemInstance, tol: float = REFERENCE_TOL) -> ProblemInstance:
    """Fill the reference-solution fields via solve_reference."""
    x_star, f_star, f_i_star = solve_reference(inst, tol)
    f_i_star = np.asarray(f_i_star, dtype=np.float64)
    # minima of parts cannot exceed the minimum of the mean; clamp fp residue
    g_star = max(f_star - float(f_i_star.mean()), 0.0)
    x0 = np.zeros(inst.d)
    return ProblemInstance(
        kind=inst.kind,
        n=inst.n,
        d=inst.d,
        data=inst.data,
        L=inst.L,
        mu=inst.mu,
        x_star=x_star,
        f_star=f_star,
        f_i_star=f_i_star,
        G_star=g_star,
        Delta_x=float(np.dot(x_star - x0, x_star - x0)),
        Delta_f=REGISTRY[inst.kind].value(inst, x0) - f_star,
        spec_key=inst.spec_key,
    )


# -- least squares ---------------------------------------------------------------


def _ls_residual(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return problem.data["A"] @ x - problem.data["b"]  # (n, M)


def _ls_value(problem, x):
    r = _ls_residual(problem, x)
    return float(np.einsum("nm,nm->", r, r) / (2.0 * problem.n * problem.n))


def _ls_worker_value(problem, i, x):
    r = problem.data["A"][i] @ x - problem.data["b"][i]
    return float(np.dot(r, r) / (2.0 * problem.n))


def _ls_worker_grad(problem, i, x):
    r = problem.data["A"][i] @ x - problem.data["b"][i]
    return (problem.data["A"][i].T @ r) / problem.n


def _ls_worker_grads(problem, x):
    r = _ls_residual(problem, x)
    return np.einsum("nmd,nm->nd", problem.data["A"], r) / problem.n


def _ls_solve(problem, tol):
    A = problem.data["A"].reshape(-1, problem.d)
    b = problem.data["b"].reshape(-1)
    x_star = lstsq(A, b)[0]
    f_star = _ls_value(problem, x_star)
    f_i = np.empty(problem.n)
    for i in range(problem.n):
        xi = lstsq(problem.data["A"][i], problem.data["b"][i])[0]
        f_i[i] = _ls_worker_value(problem, i, xi)
    return x_star, f_star, f_i


register_kind(
    "least_squares",
    ProblemOps(
        value=_ls_value,
        worker_value=_ls_worker_value,
        worker_grad=_ls_worker_grad,
        worker_grads=_ls_worker_grads,
        solve=_ls_solve,
    ),
)


def least_squares_from_data(A: np.ndarray, b: np.ndarray, spec_key: tuple = ()) -> ProblemInstance:
    """Build an instance from explicit blocks A (n, M, d) and b (n, M)."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, M, d = A.shape
    L = max(float(np.linalg.eigvalsh(A[i].T @ A[i])[-1]) for i in range(n)) / n
    mu = min(float(np.linalg.eigvalsh(A[i].T @ A[i])[0]) for i in range(n)) / n
    mu = max(mu, 0.0)  # eigvalsh can round tiny positives below zero
    inst = ProblemInstance(
        kind="least_squares", n=n, d=d, data={"A": A, "b": b}, L=L, mu=mu, spec_key=spec_key
    )
    return _finalize(inst)


def gen_least_squares(
    n: int, M: int, d: int, cond: float, het_scale: float, noise_b: float, seed: int
) -> ProblemInstance:
    """Random-design least squares with controlled conditioning.

    Draw order (one generation stream): the nM x d design, the shared optimum
    x0_star, the per-worker shifts e_i, the label noise.
    """
    if n * M < d:
        raise ValueError("need n*M >= d rows")
    rng = derive_stream(seed, (0, 0, 0, "gen/least-squares")).gen
    A = _condition_surgery(rng.standard_normal((n * M, d)), cond)
    x0_star = rng.standard_normal(d)
    shifts = het_scale * rng.standard_normal((n, d))
    A = np.ascontiguousarray(A.reshape(n, M, d))
    b = (
        np.einsum("nmd,nd->nm", A, x0_star[None, :] + shifts)
        + noise_b * rng.standard_normal((n, M))
    )
    key = _spec_key(
        "least_squares", seed, n=n, M=M, d=d, cond=cond, het_scale=het_scale, noise_b=noise_b
    )
    return least_squares_from_data(A, b, spec_key=key)


# -- logistic regression ----------------------------------------------------------


def _logit_margins(problem, x):
    return problem.data["labels"] * (problem.data["A"] @ x)  # (n, M)


def _logit_value(problem, x):
    m = _logit_margins(problem, x)
    return float(np.logaddexp(0.0, -m).mean())


def _logit_worker_value(problem, i, x):
    m = problem.data["labels"][i] * (problem.data["A"][i] @ x)
    return float(np.logaddexp(0.0, -m).mean())


def _logit_worker_grad(problem, i, x):
    A, lab = problem.data["A"][i], problem.data["labels"][i]
    w = -lab * expit(-lab * (A @ x))
    return (A.T @ w) / A.shape[0]


def _logit_worker_grads(problem, x):
    m = _logit_margins(problem, x)
    w = -problem.data["labels"] * expit(-m)
    return np.einsum("nmd,nm->nd", problem.data["A"], w) / problem.data["A"].shape[1]


def _gd_minimize(value, grad, x0, tol, max_iter=_GD_MAX_ITER, what="objective"):
    """Full-gradient descent with backtracking line search.

    The sufficient-decrease test runs on f while its signal exceeds float64
    resolution; past that point (the local quadratic basin) acceptance
    switches to strict gradient-norm descent, which keeps ~1e-14 of signal
    and carries the iterate down to tight gradient tolerances. Fails loudly
    when tol is not reached: a silent approximate optimum would poison every
    f - f_star curve downstream.
    """
    eps = float(np.finfo(np.float64).eps)
    x = np.array(x0, dtype=np.float64)
    fx = value(x)
    g = grad(x)
    t = 1.0
    for _ in range(max_iter):
        gn2 = float(np.dot(g, g))
        if math.sqrt(gn2) <= tol:
            return x, fx
        t = min(t * 2.0, 1e12)
        if 0.5 * t * gn2 >= 64.0 * eps * max(abs(fx), 1e-300):
            while True:
                y = x - t * g
                fy = value(y)
                if fy <= fx - 0.5 * t * gn2:
                    break
                t *= 0.5
                if 0.5 * t * gn2 < 64.0 * eps * abs(fx):
                    y = x - t * g  # decrease below f resolution; take the step
                    fy = value(y)
                    break
            x, fx, g = y, fy, grad(y)
        else:
            while True:
                y = x - t * g
                gy = grad(y)
                if float(np.dot(gy, gy)) < gn2:
                    break
                t *= 0.5
                if t < 1e-30:
                    raise RuntimeError(f"line search collapsed while solving {what}")
            x, fx, g = y, value(y), gy
    raise RuntimeError(
        f"reference solve of {what} did not reach grad norm {tol} in {max_iter} iterations"
    )


def _logit_solve(problem, tol):
    x_star, _ = _gd_minimize(
        lambda x: _logit_value(problem, x),
        lambda x: _logit_worker_grads(problem, x).mean(axis=0),
        np.zeros(problem.d),
        tol,
        what="logistic f",
    )
    f_star = _logit_value(problem, x_star)
    f_i = np.empty(problem.n)
    for i in range(problem.n):
        xi, _ = _gd_minimize(
            lambda x, i=i: _logit_worker_value(problem, i, x),
            lambda x, i=i: _logit_worker_grad(problem, i, x),
            np.zeros(problem.d),
            tol,
            what=f"logistic f_{i}",
        )
        f_i[i] = _logit_worker_value(problem, i, xi)
    return x_star, f_star, f_i


register_kind(
    "logistic",
    ProblemOps(
        value=_logit_value,
        worker_value=_logit_worker_value,
        worker_grad=_logit_worker_grad,
        worker_grads=_logit_worker_grads,
        solve=_logit_solve,
    ),
)


def logistic_from_data(A: np.ndarray, labels: np.ndarray, spec_key: tuple = ()) -> ProblemInstance:
    """Build an instance from explicit features A (n, M, d) and labels (n, M) in {-1, +1}."""
    A = np.asarray(A, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all(np.abs(labels) == 1.0):
        raise ValueError("labels must be +-1")
    n, M, d = A.shape
    L = max(float(np.linalg.eigvalsh(A[i].T @ A[i])[-1]) for i in range(n)) / (4.0 * M)
    inst = ProblemInstance(
        kind="logistic", n=n, d=d, data={"A": A, "labels": labels}, L=L, mu=0.0, spec_key=spec_key
    )
    return _finalize(inst)


def gen_logistic(
    n: int, M: int, d: int, het_scale: float, seed: int, cond: float = 1000.0
) -> ProblemInstance:
    """Logistic regression with planted per-worker optima.

    Features get the same conditioning surgery as least squares (applied with
    the cond keyword); labels are +1 with probability sigmoid(a^T x_i_star).
    """
    rng = derive_stream(seed, (0, 0, 0, "gen/logistic")).gen
    A = _condition_surgery(rng.standard_normal((n * M, d)), cond)
    x0_star = rng.standard_normal(d)
    shifts = het_scale * rng.standard_normal((n, d))
    A = np.ascontiguousarray(A.reshape(n, M, d))
    z = np.einsum("nmd,nd->nm", A, x0_star[None, :] + shifts)
    labels = np.where(rng.random((n, M)) < expit(z), 1.0, -1.0)
    key = _spec_key("logistic", seed, n=n, M=M, d=d, het_scale=het_scale, cond=cond)
    return logistic_from_data(A, labels, spec_key=key)


# -- reference solver -------------------------------------------------------------


def solve_reference(problem: ProblemInstance, tol: float = REFERENCE_TOL):
    """(x_star, f_star, per-worker minima) at tolerance tol; loud on failure."""
    return REGISTRY[problem.kind].solve(problem, tol)


GENERATORS: dict[str, Callable] = {
    "least_squares": gen_least_squares,
    "logistic": gen_logistic,
}


def generate(generator: str, params: dict, seed: int) -> ProblemInstance:
    """Reconstruct an instance from (generator name, parameters, seed)."""
    if generator not in GENERATORS:
        raise ValueError(f"unknown problem generator {generator!r}")
    return GENERATORS[generator](seed=seed, **params)
