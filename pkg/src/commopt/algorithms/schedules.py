"""Hyperparameter builders: the closed forms the convergence guarantees
prescribe for each problem class, plus the multi-stage plan constructor.

All builders are pure functions of their numeric inputs. Formulas that take a
logarithm of an expression divided by sigma^2 (or sigma^4) substitute a floor
for sigma^2 inside those log arguments when sigma = 0, so noiseless runs
still produce finite hyperparameters; additive sigma^2 terms outside logs use
the true value and simply vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .common import NeolithicHyper, StagePlan

__all__ = [
    "SIGMA_FLOOR",
    "HarmonicGamma",
    "LrSchedule",
    "PowerGamma",
    "build_multistage_plan",
    "lr_schedule",
    "make_lr",
    "schedule_gc",
    "schedule_nc",
    "schedule_sc_single",
]

SIGMA_FLOOR = 1e-12  # substituted for sigma^2 inside log arguments only

_CLASSES = ("contractive", "unbiased")


def lr_schedule(c1: float, L: float, eta0: float, c2: float, t: int) -> float:
    """min{c1/L, eta0*(t+1)^(-c2)}; the baseline step-size rule."""
    if c1 <= 0 or eta0 <= 0:
        raise ValueError("c1 and eta0 must be positive")
    if c2 < 0:
        raise ValueError("c2 must be non-negative")
    return min(c1 / L, eta0 * (t + 1) ** (-c2))


@dataclass(frozen=True)
class LrSchedule:
    """min{c1/L, eta0*(t+1)^(-c2)} as a picklable callable of the round index."""

    c1: float
    L: float
    eta0: float
    c2: float

    def __call__(self, t: int) -> float:
        return lr_schedule(self.c1, self.L, self.eta0, self.c2, t)


@dataclass(frozen=True)
class HarmonicGamma:
    """a/(k+b); the convex momentum-weight rule."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("a and b must be positive")

    def __call__(self, k: int) -> float:
        return self.a / (k + self.b)


@dataclass(frozen=True)
class PowerGamma:
    """g0*(k+1)^(-c2); the tuned momentum-weight form of the experiments."""

    g0: float
    c2: float

    def __post_init__(self):
        if self.g0 <= 0:
            raise ValueError("g0 must be positive")
        if self.c2 < 0:
            raise ValueError("c2 must be non-negative")

    def __call__(self, k: int) -> float:
        return self.g0 * (k + 1.0) ** (-self.c2)


def make_lr(c1: float, L: float, eta0: float, c2: float) -> LrSchedule:
    """The same rule as a callable of the round index."""
    lr_schedule(c1, L, eta0, c2, 0)
    return LrSchedule(c1, L, eta0, c2)


def _check_class(klass: str):
    if klass not in _CLASSES:
        raise ValueError(f"unknown compressor class {klass!r}; expected one of {_CLASSES}")


def _check_quality(klass: str, value: float):
    if klass == "contractive":
        if not 0.0 < value <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {value}")
    elif value < 0.0:
        raise ValueError(f"omega must be non-negative, got {value}")


def _log_sq(sigma: float, floor: float) -> float:
    return max(sigma * sigma, floor)


def schedule_nc(
    L: float,
    Delta_f: float,
    sigma: float,
    n: int,
    G_star: float,
    T_budget: int,
    klass: str,
    delta_or_omega: float,
    *,
    sigma_floor: float = SIGMA_FLOOR,
) -> NeolithicHyper:
    """Non-convex hyperparameters: gamma = p = 1, R from the class's closed
    form, K = floor(T/R), and eta the minimum of the class's branch terms
    (branches whose denominators vanish drop out as +inf)."""
    _check_class(klass)
    _check_quality(klass, delta_or_omega)
    if L <= 0 or Delta_f <= 0 or n < 1 or G_star < 0 or T_budget < 1:
        raise ValueError("need L > 0, Delta_f > 0, n >= 1, G_star >= 0, T_budget >= 1")

    if klass == "contractive":
        delta = delta_or_omega
        arg = (L * (G_star + Delta_f) + sigma**2) * delta * T_budget / (L * Delta_f)
        R = max(math.ceil((1.0 / delta) * max(math.log(arg), 1.0)), 1)
    else:
        omega = delta_or_omega
        s2 = _log_sq(sigma, sigma_floor)
        term = max(
            math.log(n**2 * L**2 * (G_star + Delta_f) ** 2 * (1.0 + omega) / s2**2),
            math.log((1.0 + omega) / n),
        )
        R = max(math.ceil((1.0 + omega) * term), 1)
    if R > T_budget:
        raise ValueError(f"budget T={T_budget} is below the required MSC rounds R={R}")
    K = T_budget // R

    if klass == "contractive":
        delta_eff = 1.0 - (1.0 - delta) ** R
        branches = [1.0 / (4.0 * L)]
        if sigma > 0.0:
            branches.append(math.sqrt(R * n * Delta_f / ((K + 1) * L * sigma**2)))
        if delta_eff < 1.0:
            branches.append(1.0 / (2.0 * (1.0 - delta_eff) * (K + 1) * L))
    else:
        omega_eff = (1.0 + omega) * (omega / (1.0 + omega)) ** R if omega > 0.0 else 0.0
        noise = omega_eff * (L * G_star + sigma**2 / R) + sigma**2 / (R * n)
        branches = [1.0 / L]
        if noise > 0.0:
            branches.append(math.sqrt(Delta_f / ((K + 1) * L * noise)))
        if omega_eff > 0.0:
            branches.append(1.0 / (math.sqrt(omega_eff * (K + 1)) * L))
    return NeolithicHyper(eta=min(branches), p=1.0, gamma=1.0, R=R, K=K)


def schedule_gc(
    L: float,
    Delta_x: float,
    sigma: float,
    n: int,
    G_star: float,
    K: int,
    klass: str,
    delta_or_omega: float,
    *,
    sigma_floor: float = SIGMA_FLOOR,
) -> NeolithicHyper:
    """Generally-convex hyperparameters for a fixed outer count K.

    Contractive: p = 5, gamma_k = 10/(k+2). Unbiased: p = 2,
    gamma_k = 6/(k+3). R and eta come from the class's closed forms with
    sigma~^2 = sigma^2/R and the residual compression factor after R rounds.
    """
    _check_class(klass)
    _check_quality(klass, delta_or_omega)
    if L <= 0 or Delta_x <= 0 or n < 1 or G_star < 0 or K < 1:
        raise ValueError("need L > 0, Delta_x > 0, n >= 1, G_star >= 0, K >= 1")
    s2 = _log_sq(sigma, sigma_floor)

    if klass == "unbiased":
        omega = delta_or_omega
        w1 = 1.0 + omega
        arg = w1 * (n + 2) + 4.0 * w1**2 * (n * L * G_star) ** 2 / s2**2
        arg += 729.0 * w1**2 * n * L**2 * Delta_x / (8.0 * s2)
        R = max(math.ceil(w1 * max(4.0 * math.log(4.0 * w1), math.log(arg))), 1)
        omega_eff = w1 * (omega / w1) ** R if omega > 0.0 else 0.0
        st2 = sigma**2 / R
        root = math.sqrt(4.0 * omega_eff * L * G_star + (omega_eff + 1.0 / n) * st2)
        eta = (27.0 * math.sqrt(Delta_x)) / (
            2.0 * math.sqrt(2.0) * (K + 2) ** 1.5 * root + 27.0 * L * math.sqrt(Delta_x)
        )
        return NeolithicHyper(eta=eta, p=2.0, gamma=HarmonicGamma(6.0, 3.0), R=R, K=K)

    delta = delta_or_omega
    arg = 24.0 * K**3 + 100.0 * n**2 * K**3 * (L * G_star) ** 2 / s2**2 + 5.0 * n * K**1.5
    R = max(
        math.ceil(max((4.0 / delta) * math.log(4.0 / delta), (1.0 / delta) * math.log(arg))), 1
    )
    omega_eff = (1.0 - delta) ** R
    st2 = sigma**2 / R
    root = math.sqrt(
        20.0 * K**1.5 * omega_eff * L * G_star + (1.0 / n + 5.0 * K**1.5 * omega_eff) * st2
    )
    eta = (25.0 * math.sqrt(2.0 * Delta_x)) / (
        (K + 1) ** 1.5 * root + 25.0 * L * math.sqrt(2.0 * Delta_x)
    )
    return NeolithicHyper(eta=eta, p=5.0, gamma=HarmonicGamma(10.0, 2.0), R=R, K=K)


def _sc_rounds(delta: float, gamma: float, sigma: float, n: int, L: float, G_star: float, K: int, floor: float) -> int:
    s2 = _log_sq(sigma, floor)
    arg = 4.0 * n**2 * K**2 * (L * G_star) ** 2 / s2**2 + n * K + 96.0 / gamma**2
    R = math.ceil(max((4.0 / delta) * math.log(4.0 / delta), (1.0 / delta) * math.log(arg)))
    return max(R, 1)


def _fixed_point_K(T: int, R_of_K) -> tuple[int, int]:
    """Solve K = floor(T / R(K)); on a cycle keep the smallest K (largest R)."""
    K = T
    seen = set()
    while True:
        R = R_of_K(K)
        if R > T:
            raise ValueError(f"budget T={T} is below the required MSC rounds R={R}")
        K_next = T // R
        if K_next == K:
            return K, R
        if K_next in seen:
            K = min(K, K_next)
            return K, R_of_K(K)
        seen.add(K)
        K = K_next


def schedule_sc_single(
    L: float,
    mu: float,
    delta_or_omega: float,
    sigma: float,
    n: int,
    G_star: float,
    T_budget: int,
    *,
    g0: float,
    sigma_floor: float = SIGMA_FLOOR,
) -> NeolithicHyper:
    """Strongly-convex single-run hyperparameters: eta = 1/L,
    gamma = sqrt(mu/L), R from the closed form (solved jointly with
    K = floor(T/R)), and p = max{5, gamma*T / (4R ln(n mu g0 T / sigma^2))}.

    delta_or_omega is the contraction factor delta; an unbiased compressor is
    first recast as contractive by scaled decoding, so pass 1/(1+omega) and
    wrap the spec with scale_to_contractive. g0 is the Lyapunov value
    f(x0) - f* + (25/81) mu ||x0 - x*||^2 at the start point.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if L < mu or n < 1 or G_star < 0 or T_budget < 1 or g0 <= 0.0:
        raise ValueError("need L >= mu, n >= 1, G_star >= 0, T_budget >= 1, g0 > 0")
    _check_quality("contractive", delta_or_omega)
    delta = delta_or_omega
    gamma = math.sqrt(mu / L)

    K, R = _fixed_point_K(
        T_budget, lambda K: _sc_rounds(delta, gamma, sigma, n, L, G_star, max(K, 1), sigma_floor)
    )
    s2 = _log_sq(sigma, sigma_floor)
    log_term = max(math.log(n * mu * g0 * T_budget / s2), 1.0)
    p = max(5.0, gamma * T_budget / (4.0 * R * log_term))
    return NeolithicHyper(eta=1.0 / L, p=p, gamma=gamma, R=R, K=K)


def build_multistage_plan(
    L: float,
    mu: float,
    delta_or_omega: float,
    sigma: float,
    n: int,
    G_star: float,
    g0: float,
    epsilon: float,
    Delta_x: float,
    *,
    sigma_floor: float = SIGMA_FLOOR,
) -> StagePlan:
    """Stage count and per-stage hyperparameters for the restarted variant.

    S = ceil(log2(L*Delta_x/epsilon)) stages; stage s must drive the expected
    gap below 2^-(s+1) g0. Stage length comes from the single-run guarantee:
    the entry Lyapunov value carries a 131/81 factor over the previous
    stage's gap target, the contraction term decays like exp(-gamma*K/20)
    under the p = 5 branch, and with noise the stage target is split evenly
    between the contraction and the sigma^2/(mu n T) terms.
    """
    if epsilon <= 0.0 or Delta_x <= 0.0 or g0 <= 0.0:
        raise ValueError("need epsilon > 0, Delta_x > 0, g0 > 0")
    if mu <= 0.0 or L < mu:
        raise ValueError("need 0 < mu <= L")
    _check_quality("contractive", delta_or_omega)
    delta = delta_or_omega
    gamma = math.sqrt(mu / L)
    eta = 1.0 / L

    S = max(math.ceil(math.log2(L * Delta_x / epsilon)), 1)
    Ks, Rs, etas, ps, gammas = [], [], [], [], []
    for s in range(S):
        target = 2.0 ** -(s + 1) * g0
        carry = (131.0 / 81.0) * 2.0**-s * g0  # Lyapunov bound entering stage s
        det_share = 1.0 if sigma == 0.0 else 0.5
        K = math.ceil((20.0 / gamma) * math.log(carry / (det_share * target)))
        K = max(K, 1)
        R = _sc_rounds(delta, gamma, sigma, n, L, G_star, K, sigma_floor)
        if sigma > 0.0:
            for _ in range(32):
                T = K * R
                log_term = max(math.log(n * mu * g0 * T / _log_sq(sigma, sigma_floor)), 1.0)
                T_noise = (77.0 + 34.0 * log_term) * sigma**2 / (mu * n * (0.5 * target))
                K_req = max(K, math.ceil(T_noise / R))
                if K_req == K:
                    break
                K = K_req
                R = _sc_rounds(delta, gamma, sigma, n, L, G_star, K, sigma_floor)
        T = K * R
        log_term = max(math.log(n * mu * carry * T / _log_sq(sigma, sigma_floor)), 1.0)
        p = max(5.0, gamma * T / (4.0 * R * log_term))
        Ks.append(K)
        Rs.append(R)
        etas.append(eta)
        ps.append(p)
        gammas.append(gamma)
    return StagePlan(K=tuple(Ks), R=tuple(Rs), eta=tuple(etas), p=tuple(ps), gamma=tuple(gammas))
