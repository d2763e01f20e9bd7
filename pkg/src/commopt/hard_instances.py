"""Worst-case problem families and zero-coordinate progress diagnostics.

Three chain families split across two worker groups (E1 = first n/2 workers,
E2 = the rest) so that either group can only extend the set of non-zero
coordinates at alternating parities:

  * SC_Chain      strongly convex tridiagonal quadratic, optimum lam*q^j
  * GC_Nesterov   convex tridiagonal quadratic, optimum lam*(1 - j/(d+1))
  * NC_PsiPhi     smooth non-convex chain built from the psi/phi units

plus the shared-randomness sparsifier that defeats progress with probability
omega/(1+omega) per round, a two-point scalar family whose Bernoulli oracle
saturates the variance budget, and traced_run, which replays a baseline run
bitwise while recording the progress of every message the server receives.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc

from ._kernels import pairwise_sum
from .algorithms.baselines import BASELINES, _round_update
from .algorithms.common import as_schedule, normalize_specs
from .compressors import SHARED_SPARSIFIER, CompressorSpec, shared_sparsifier
from .core import RandomStream, StreamContext
from .problems import (
    OracleConfig,
    ProblemInstance,
    ProblemOps,
    oracle_round_average,
    register_kind,
)

__all__ = [
    "GRAD_INF_BOUND",
    "SC_CHAIN",
    "GC_CHAIN",
    "NC_CHAIN",
    "UNIT_RANGE",
    "UNIT_SMOOTHNESS",
    "ProgTrace",
    "adversarial_sparsifier",
    "bernoulli_oracle",
    "build_bernoulli_pair",
    "build_chain",
    "gc_truncated_min",
    "h_grad",
    "h_value",
    "prog",
    "prog_set",
    "progress_bound_frequency",
    "psi_phi",
    "traced_run",
]

SC_CHAIN = "SC_Chain"
GC_CHAIN = "GC_Nesterov"
NC_CHAIN = "NC_PsiPhi"
_BERNOULLI = "BernoulliScalar"

# bounds of the non-convex chain unit h: smoothness, value range per
# coordinate, and the sup-norm of its gradient. The split halves double
# every link, so they are 2*UNIT_SMOOTHNESS-smooth, not UNIT_SMOOTHNESS.
UNIT_SMOOTHNESS = 152.0
UNIT_RANGE = 12.0
GRAD_INF_BOUND = 23.0

_SQRT_E = math.sqrt(math.e)
_TAIL_REL = 1e-16  # truncation tail budget of the SC chain, relative to Delta_x


# -- progress measure ------------------------------------------------------------


def prog(x) -> int:
    """Highest 1-based index of a non-zero coordinate; 0 for the zero vector."""
    nz = np.nonzero(np.asarray(x))[-1]
    return int(nz[-1]) + 1 if nz.size else 0


def prog_set(X) -> int:
    """prog of a set of vectors: the max over rows."""
    X = np.atleast_2d(np.asarray(X))
    nz = np.nonzero((X != 0.0).any(axis=0))[0]
    return int(nz[-1]) + 1 if nz.size else 0


# -- psi/phi chain units -----------------------------------------------------------


def _psi(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    m = z > 0.5
    t = 2.0 * z[m] - 1.0
    out[m] = np.exp(1.0 - 1.0 / (t * t))
    return out


def _dpsi(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    m = z > 0.5
    t = 2.0 * z[m] - 1.0
    out[m] = np.exp(1.0 - 1.0 / (t * t)) * 4.0 / (t * t * t)
    return out


def _phi(z: np.ndarray) -> np.ndarray:
    # sqrt(e) * integral of exp(-t^2/2) up to z, through erfc; <= 1e-15 rel err
    return math.sqrt(math.pi * math.e / 2.0) * erfc(-z / math.sqrt(2.0))


def _dphi(z: np.ndarray) -> np.ndarray:
    return _SQRT_E * np.exp(-0.5 * z * z)


def psi_phi(z):
    """(psi, psi', phi, phi') at z; psi vanishes identically below 1/2."""
    arr = np.asarray(z, dtype=np.float64)
    parts = (_psi(arr), _dpsi(arr), _phi(arr), _dphi(arr))
    if np.ndim(z) == 0:
        return tuple(float(p) for p in parts)
    return parts


def _unit_weights(d: int, component: int) -> tuple[np.ndarray, float]:
    """Link weights w[j] for the d-1 chain terms and the head weight w0.

    Component 0 is the mean chain (every link once, head once); components 1
    and 2 take the even/odd 1-based links doubled, with the head on 1 only.
    psi(1) = 1, so the head term is just -w0 * phi([x]_1).
    """
    if component not in (0, 1, 2):
        raise ValueError("component must be 0 (mean), 1, or 2")
    if component == 0:
        return np.ones(d - 1), 1.0
    w = np.zeros(d - 1)
    # component 1 doubles the even 1-based links (odd 0-based), 2 the odd ones
    w[component % 2 :: 2] = 2.0
    return w, 2.0 if component == 1 else 0.0


def h_value(x, component: int = 0) -> float:
    """The chain unit h (component 0) or its split halves (1 and 2)."""
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    if d < 2:
        raise ValueError("the chain unit needs d >= 2")
    w, w0 = _unit_weights(d, component)
    psi_p, psi_m = _psi(x), _psi(-x)
    phi_p, phi_m = _phi(x), _phi(-x)
    links = psi_m[:-1] * phi_m[1:] - psi_p[:-1] * phi_p[1:]
    return float(-w0 * phi_p[0] + np.dot(w, links))


def h_grad(x, component: int = 0) -> np.ndarray:
    """Analytic gradient of h_value; exact zeros beyond the progress frontier."""
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    if d < 2:
        raise ValueError("the chain unit needs d >= 2")
    w, w0 = _unit_weights(d, component)
    psi_p, psi_m = _psi(x), _psi(-x)
    dpsi_p, dpsi_m = _dpsi(x), _dpsi(-x)
    phi_p, phi_m = _phi(x), _phi(-x)
    dphi = _dphi(x)  # phi' is even
    g = np.zeros(d)
    j = np.arange(d - 1)
    g[j] += w * (-dpsi_m[:-1] * phi_m[1:] - dpsi_p[:-1] * phi_p[1:])
    g[j + 1] += w * (-(psi_m[:-1] + psi_p[:-1]) * dphi[1:])
    g[0] -= w0 * dphi[0]
    return g


# -- quadratic chains (SC and GC) ----------------------------------------------------


def _quad_coeff(problem: ProblemInstance) -> float:
    return (problem.L - problem.mu) / 4.0


def _quad_side_value(problem: ProblemInstance, side: int, x: np.ndarray) -> float:
    lam = problem.data["lam"]
    xp = np.append(x, 0.0)
    start = 1 if side == 0 else 0  # side 0 pairs start at even 1-based indices
    diffs = xp[start : problem.d : 2] - xp[start + 1 : problem.d + 1 : 2]
    extra = float(np.dot(diffs, diffs))
    if side == 0:
        extra += x[0] * x[0] - 2.0 * lam * x[0]
    return 0.5 * problem.mu * float(np.dot(x, x)) + _quad_coeff(problem) * extra


def _quad_side_grad(problem: ProblemInstance, side: int, x: np.ndarray) -> np.ndarray:
    lam = problem.data["lam"]
    d = problem.d
    c = _quad_coeff(problem)
    xp = np.append(x, 0.0)
    g = problem.mu * x
    start = 1 if side == 0 else 0
    a = np.arange(start, d, 2)
    diff = xp[a] - xp[a + 1]
    g[a] += 2.0 * c * diff
    interior = a + 1 < d
    g[a[interior] + 1] -= 2.0 * c * diff[interior]
    if side == 0:
        g[0] += c * (2.0 * x[0] - 2.0 * lam)
    return g


def _quad_value(problem: ProblemInstance, x: np.ndarray) -> float:
    return 0.5 * (
        _quad_side_value(problem, 0, x) + _quad_side_value(problem, 1, x)
    )


def _quad_worker_value(problem: ProblemInstance, i: int, x: np.ndarray) -> float:
    return _quad_side_value(problem, 0 if i < problem.n // 2 else 1, x)


def _quad_worker_grad(problem: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    return _quad_side_grad(problem, 0 if i < problem.n // 2 else 1, x)


def _quad_worker_grads(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    half = problem.n // 2
    g0 = _quad_side_grad(problem, 0, x)
    g1 = _quad_side_grad(problem, 1, x)
    return np.concatenate([np.tile(g0, (half, 1)), np.tile(g1, (problem.n - half, 1))])


def _quad_hessian(problem: ProblemInstance) -> np.ndarray:
    d = problem.d
    M = 2.0 * np.eye(d)
    off = np.arange(d - 1)
    M[off, off + 1] = -1.0
    M[off + 1, off] = -1.0
    return problem.mu * np.eye(d) + 0.25 * (problem.L - problem.mu) * M


def _quad_solve(problem: ProblemInstance, tol: float):
    lam = problem.data["lam"]
    c = _quad_coeff(problem)
    rhs = np.zeros(problem.d)
    rhs[0] = c * lam
    x_star = np.linalg.solve(_quad_hessian(problem), rhs)
    f_star = _quad_value(problem, x_star)
    # side minima: side 1 has no linear term, so its minimum is 0 at the origin
    d = problem.d
    H0 = problem.mu * np.eye(d)
    H0[0, 0] += 2.0 * c
    a = np.arange(1, d - 1, 2)
    H0[a, a] += 2.0 * c
    H0[a + 1, a + 1] += 2.0 * c
    H0[a, a + 1] -= 2.0 * c
    H0[a + 1, a] -= 2.0 * c
    if d % 2 == 0:
        H0[d - 1, d - 1] += 2.0 * c  # closing pair (d, 0) of the even side
    rhs0 = np.zeros(d)
    rhs0[0] = 2.0 * c * lam
    x0_star = np.linalg.lstsq(H0, rhs0, rcond=None)[0]
    f0_star = _quad_side_value(problem, 0, x0_star)
    half = problem.n // 2
    f_i = np.concatenate([np.full(half, f0_star), np.zeros(problem.n - half)])
    return x_star, f_star, f_i


register_kind(
    SC_CHAIN,
    ProblemOps(
        value=_quad_value,
        worker_value=_quad_worker_value,
        worker_grad=_quad_worker_grad,
        worker_grads=_quad_worker_grads,
        solve=_quad_solve,
    ),
)

register_kind(
    GC_CHAIN,
    ProblemOps(
        value=_quad_value,
        worker_value=_quad_worker_value,
        worker_grad=_quad_worker_grad,
        worker_grads=_quad_worker_grads,
        solve=_quad_solve,
    ),
)


# -- psi/phi chain as a distributed problem ----------------------------------------


def _nc_scale(problem: ProblemInstance) -> tuple[float, float]:
    lam = problem.data["lam"]
    return lam, problem.L * lam * lam / UNIT_SMOOTHNESS


def _nc_value(problem: ProblemInstance, x: np.ndarray) -> float:
    lam, scale = _nc_scale(problem)
    return scale * h_value(x / lam, 0)


def _nc_worker_value(problem: ProblemInstance, i: int, x: np.ndarray) -> float:
    lam, scale = _nc_scale(problem)
    return scale * h_value(x / lam, 1 if i < problem.n // 2 else 2)


def _nc_worker_grad(problem: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    lam, scale = _nc_scale(problem)
    return (scale / lam) * h_grad(x / lam, 1 if i < problem.n // 2 else 2)


def _nc_worker_grads(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    lam, scale = _nc_scale(problem)
    half = problem.n // 2
    g1 = (scale / lam) * h_grad(x / lam, 1)
    g2 = (scale / lam) * h_grad(x / lam, 2)
    return np.concatenate([np.tile(g1, (half, 1)), np.tile(g2, (problem.n - half, 1))])


def _nc_solve(problem: ProblemInstance, tol: float):
    raise NotImplementedError("the non-convex chain has no reference solution")


register_kind(
    NC_CHAIN,
    ProblemOps(
        value=_nc_value,
        worker_value=_nc_worker_value,
        worker_grad=_nc_worker_grad,
        worker_grads=_nc_worker_grads,
        solve=_nc_solve,
    ),
)


# -- builders ----------------------------------------------------------------------


def _check_chain_args(n: int, d, kind: str):
    if n < 2 or n % 2:
        raise ValueError(f"{kind} needs an even worker count n >= 2, got {n}")
    if d is not None and (not isinstance(d, int) or isinstance(d, bool) or d < 2):
        raise ValueError(f"{kind} needs integer dimension d >= 2, got {d!r}")


def build_chain(
    kind: str,
    *,
    n: int,
    L: float,
    d: int | None = None,
    mu: float | None = None,
    Delta_x: float | None = None,
    Delta_f: float | None = None,
) -> ProblemInstance:
    """One of the worst-case chain families, calibrated to its target.

    SC_Chain takes mu and Delta_x; d defaults to the smallest even dimension
    whose dropped tail is below 1e-16 * Delta_x. GC_Nesterov takes Delta_x
    and d (lam = sqrt(3*Delta_x/d)). NC_PsiPhi takes Delta_f and d; its
    Delta_f field is the calibrated upper bound on f(0) - inf f, and f_star
    is unknown, so only gradient-norm metrics apply.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    _check_chain_args(n, d, kind)
    if kind == SC_CHAIN:
        if mu is None or Delta_x is None:
            raise ValueError("SC_Chain needs mu and Delta_x")
        if mu <= 0 or Delta_x <= 0:
            raise ValueError("mu and Delta_x must be positive")
        if mu >= L:
            raise ValueError("the chain needs a condition number above 1 (mu < L)")
        kappa = L / mu
        q = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
        lam = math.sqrt((1.0 - q * q) * Delta_x / (q * q))
        if d is None:
            d = max(math.ceil(math.log(_TAIL_REL) / (2.0 * math.log(q))), 2)
            d += d % 2
        inst = ProblemInstance(
            kind=kind,
            n=n,
            d=d,
            data={"lam": lam, "q": q},
            L=L,
            mu=mu,
            spec_key=("chain", kind, (("L", L), ("mu", mu), ("d", d), ("n", n))),
        )
        x_star, f_star, f_i = _quad_solve(inst, 0.0)
    elif kind == GC_CHAIN:
        if Delta_x is None or Delta_x <= 0:
            raise ValueError("GC_Nesterov needs Delta_x > 0")
        if d is None:
            raise ValueError("GC_Nesterov needs an explicit dimension d")
        if mu not in (None, 0, 0.0):
            raise ValueError("GC_Nesterov is not strongly convex; leave mu unset")
        lam = math.sqrt(3.0 * Delta_x / d)
        inst = ProblemInstance(
            kind=kind,
            n=n,
            d=d,
            data={"lam": lam},
            L=L,
            mu=0.0,
            spec_key=("chain", kind, (("L", L), ("d", d), ("n", n))),
        )
        x_star = lam * (1.0 - np.arange(1, d + 1) / (d + 1.0))
        f_star = -lam * lam * L * d / (8.0 * (d + 1.0))
        half = n // 2
        f_i = np.concatenate([np.full(half, -0.25 * L * lam * lam), np.zeros(n - half)])
    elif kind == NC_CHAIN:
        if Delta_f is None or Delta_f <= 0:
            raise ValueError("NC_PsiPhi needs Delta_f > 0")
        if d is None:
            raise ValueError("NC_PsiPhi needs an explicit dimension d")
        if mu not in (None, 0, 0.0):
            raise ValueError("NC_PsiPhi is non-convex; leave mu unset")
        lam = math.sqrt(UNIT_SMOOTHNESS * Delta_f / (L * UNIT_RANGE * d))
        return ProblemInstance(
            kind=kind,
            n=n,
            d=d,
            data={"lam": lam},
            L=L,
            mu=0.0,
            Delta_f=float(Delta_f),
            spec_key=("chain", kind, (("L", L), ("d", d), ("n", n))),
        )
    else:
        raise ValueError(f"unknown chain kind {kind!r}")
    x0 = np.zeros(d)
    return ProblemInstance(
        kind=kind,
        n=n,
        d=d,
        data=inst.data,
        L=L,
        mu=inst.mu,
        x_star=np.asarray(x_star, dtype=np.float64),
        f_star=float(f_star),
        f_i_star=np.asarray(f_i, dtype=np.float64),
        G_star=max(float(f_star - np.mean(f_i)), 0.0),
        Delta_x=float(np.dot(x_star - x0, x_star - x0)),
        Delta_f=float(_quad_value(inst, x0) - f_star),
        spec_key=inst.spec_key,
    )


def gc_truncated_min(problem: ProblemInstance, k: int) -> float:
    """min of the convex chain over {x: prog(x) <= k}: -lam^2*L*k/(8(k+1))."""
    if problem.kind != GC_CHAIN:
        raise ValueError("truncated optimum is a property of the GC_Nesterov chain")
    if not 0 <= k <= problem.d:
        raise ValueError(f"k must lie in [0, {problem.d}], got {k}")
    lam = problem.data["lam"]
    return -lam * lam * problem.L * k / (8.0 * (k + 1.0))


# -- adversarial compressor ---------------------------------------------------------


def adversarial_sparsifier(omega: float, *, contractive: bool = False) -> CompressorSpec:
    """Shared-randomness sparsifier keeping coordinates with prob 1/(1+omega).

    The scaled form is unbiased with variance omega; dropping the scaling
    (contractive=True) gives the omega/(1+omega)-contractive variant. All
    workers draw the same mask in a round, so one unlucky draw stalls every
    worker's progress at once.
    """
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return shared_sparsifier(float(omega), scaled=not contractive)


def _spec_omega(spec: CompressorSpec, d: int) -> float:
    """Variance parameter giving the per-round progress probability 1/(1+omega)."""
    if spec.kind == SHARED_SPARSIFIER:
        return float(spec.omega)
    omega = spec.claimed_omega(d)
    if omega is not None:
        return float(omega)
    delta = spec.claimed_delta(d)
    return 1.0 / delta - 1.0


# -- traced runs ---------------------------------------------------------------------


@dataclass
class ProgTrace:
    """Progress record of one run: B[t] is the running max prog over all
    messages the server has received through round t (B[0] = 0)."""

    B: np.ndarray  # (T+1,) int64
    query_prog: np.ndarray  # (T, n) prog of each worker's query point per round
    omega: float
    x_final: np.ndarray

    @property
    def rounds(self) -> int:
        return len(self.B) - 1

    def bound(self) -> np.ndarray:
        """The e*t/(1+omega) progress bound, per round."""
        return math.e * np.arange(len(self.B)) / (1.0 + self.omega)

    def exceeds_bound(self) -> bool:
        return bool(self.B[-1] > math.e * self.rounds / (1.0 + self.omega))

    def to_csv_text(self) -> str:
        lines = ["round,B_t,bound_ept"]
        bound = self.bound()
        for t in range(len(self.B)):
            lines.append(f"{t},{int(self.B[t])},{bound[t]:.17g}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())


def traced_run(
    name: str,
    problem: ProblemInstance,
    specs,
    lr,
    T: int,
    ctx: StreamContext,
    *,
    sigma: float = 0.0,
) -> ProgTrace:
    """Replay a baseline run bitwise while recording coordinate progress.

    Mirrors the baseline loop exactly (same streams, same arithmetic, same
    reduction order); the instrumentation only reads the decoded messages and
    query points, so x_final matches the plain run bit for bit.
    """
    if name not in BASELINES:
        raise ValueError(f"unknown baseline {name!r}; expected one of {BASELINES}")
    if T < 0:
        raise ValueError("T must be non-negative")
    specs = normalize_specs(specs, problem.n)
    n, d = problem.n, problem.d
    oracle_cfg = OracleConfig(sigma=sigma)
    sched = as_schedule(lr)

    x = np.zeros(d)
    M = np.zeros((n, d))
    oracle_streams = [ctx.worker(i, "oracle") for i in range(n)]
    private = [
        ctx.worker(i, "compress") if specs[i].randomness == "Private" else None
        for i in range(n)
    ]
    B = np.zeros(T + 1, dtype=np.int64)
    query_prog = np.zeros((T, n), dtype=np.int64)
    for t in range(T):
        eta = sched(t)
        query_prog[t, :] = prog(x)  # every worker queries at the broadcast iterate
        G = oracle_round_average(problem, x, oracle_cfg, 1, oracle_streams)
        streams = [
            ctx.shared(t, "shared-sparsifier")
            if specs[i].randomness == "SharedPerRound"
            else private[i]
            for i in range(n)
        ]
        rows, coeff, counts, M = _round_update(name, G, M, eta, specs, streams)
        B[t + 1] = max(int(B[t]), prog_set(rows))
        x = x - pairwise_sum(coeff * rows) / n
    return ProgTrace(
        B=B, query_prog=query_prog, omega=_spec_omega(specs[0], d), x_final=x
    )


def progress_bound_frequency(
    problem: ProblemInstance,
    spec: CompressorSpec,
    lr,
    T: int,
    runs: int,
    master_seed: int,
    *,
    name: str = "QSGD",
) -> float:
    """Fraction of independent runs whose final progress exceeds e*T/(1+omega)."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    hits = 0
    for r in range(runs):
        ctx = StreamContext(master_seed, r, "prog-bound-mc")
        if traced_run(name, problem, spec, lr, T, ctx).exceeds_bound():
            hits += 1
    return hits / runs


# -- two-point scalar family with a Bernoulli oracle ---------------------------------


def _bern_params(problem: ProblemInstance) -> tuple[float, float, float]:
    data = problem.data
    return data["v"], data["x_opt"], data["edge"]  # sign, optimum, sigma*p/L


def _bern_value(problem: ProblemInstance, x: np.ndarray) -> float:
    v, x_opt, edge = _bern_params(problem)
    L = problem.L
    t = float(x[0]) - x_opt
    if t > edge:
        return L * edge * t - 0.5 * L * edge * edge
    if t < -edge:
        return -L * edge * t - 0.5 * L * edge * edge
    return 0.5 * L * t * t


def _bern_worker_value(problem: ProblemInstance, i: int, x: np.ndarray) -> float:
    return _bern_value(problem, x)


def _bern_worker_grad(problem: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    v, x_opt, edge = _bern_params(problem)
    L = problem.L
    t = float(x[0]) - x_opt
    return np.array([L * np.clip(t, -edge, edge)])


def _bern_worker_grads(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return np.tile(_bern_worker_grad(problem, 0, x), (problem.n, 1))


def _bern_solve(problem: ProblemInstance, tol: float):
    v, x_opt, edge = _bern_params(problem)
    return np.array([x_opt]), 0.0, np.zeros(problem.n)


register_kind(
    _BERNOULLI,
    ProblemOps(
        value=_bern_value,
        worker_value=_bern_worker_value,
        worker_grad=_bern_worker_grad,
        worker_grads=_bern_worker_grads,
        solve=_bern_solve,
    ),
)


def build_bernoulli_pair(
    L: float, Delta_x: float, sigma: float, p_param: float, *, n: int = 2
) -> tuple[ProblemInstance, ProblemInstance]:
    """The two indistinguishable scalar instances (optima at +/- sqrt(Delta_x)).

    Each is quadratic within sigma*p/L of its optimum and linear with slope
    +/- sigma*p outside, so gradients never exceed sigma*p and the paired
    Bernoulli oracle stays well defined.
    """
    if L <= 0 or Delta_x <= 0 or sigma <= 0:
        raise ValueError("L, Delta_x, and sigma must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    cap = min(0.8, L * math.sqrt(Delta_x) / (2.0 * sigma))
    if not 0.0 <= p_param <= cap:
        raise ValueError(f"p_param must lie in [0, {cap}], got {p_param}")
    out = []
    for v in (1.0, -1.0):
        x_opt = v * math.sqrt(Delta_x)
        inst = ProblemInstance(
            kind=_BERNOULLI,
            n=n,
            d=1,
            data={"v": v, "x_opt": x_opt, "edge": sigma * p_param / L, "p": p_param,
                  "sigma": sigma},
            L=L,
            mu=0.0,
            x_star=np.array([x_opt]),
            f_star=0.0,
            f_i_star=np.zeros(n),
            G_star=0.0,
            Delta_x=float(Delta_x),
            spec_key=("bernoulli", (("L", L), ("Delta_x", Delta_x), ("sigma", sigma),
                                    ("p", p_param), ("v", v))),
        )
        out.append(replace(inst, Delta_f=float(_bern_value(inst, np.zeros(1)))))
    return out[0], out[1]


def bernoulli_oracle(problem: ProblemInstance, x, stream: RandomStream) -> float:
    """One +/-sigma draw with mean grad f(x) and variance sigma^2 - grad^2."""
    if problem.kind != _BERNOULLI:
        raise ValueError("the Bernoulli oracle belongs to the two-point scalar family")
    sigma = problem.data["sigma"]
    g = float(problem.worker_grad(0, np.asarray(x, dtype=np.float64).reshape(1))[0])
    p_plus = 0.5 + g / (2.0 * sigma)
    return sigma if float(stream.uniform()) < p_plus else -sigma
