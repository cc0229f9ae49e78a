"""Closed-form analysis of periodic and bounded cookie environments.

The central object is the failure chain: the cookie slot (mod M) that is
active right after each failed trial when Bernoulli cookies are consumed
in order.  Its transition matrix, stationary law and per-state expected
success-run lengths all have closed forms; together they give the drift
mu of the embedded crossing chain, and in the critical case (mean cookie
1/2) the limiting centered drift rho, the diffusion coefficient nu and
the ratio theta = 2*rho/nu that decides recurrence versus transience.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .environments import CookieEnvironment, EnvKind

CRITICAL_TOL = 1e-12

# Above this period length, cyclic cookie products are accumulated in
# log space to avoid gradual underflow.
_LOG_SPACE_PERIOD = 64


class Classification(enum.Enum):
    RECURRENT = "Recurrent"
    TRANSIENT_RIGHT = "TransientRight"
    TRANSIENT_LEFT = "TransientLeft"


class InternalConsistencyError(RuntimeError):
    """Closed form and independent numerical route disagree."""


@dataclass(frozen=True)
class FailureChain:
    """Failure chain of a periodic environment.

    ``matrix[j, k]`` is the probability that the state after the next
    failure is k+1 given the current state is j+1 (states are 1-based in
    formulas, 0-based in arrays).  ``stationary`` is its invariant law
    and ``expected_runs[j]`` the expected success-run length from state
    j+1.
    """

    matrix: np.ndarray
    stationary: np.ndarray
    expected_runs: np.ndarray

    @property
    def period(self) -> int:
        return self.matrix.shape[0]

    def mean_run(self) -> float:
        """Stationary expected run length; equals mu of the environment."""
        return float(self.stationary @ self.expected_runs)


def _require_periodic(env: CookieEnvironment) -> None:
    if env.kind is not EnvKind.PERIODIC:
        raise ValueError("operation requires a periodic environment")


def _require_elliptic(env: CookieEnvironment) -> None:
    if not env.predicates().elliptic:
        raise ValueError("operation requires an elliptic environment")


def _cyclic_products(params: tuple[float, ...]) -> np.ndarray:
    """prods[j, d] = product of d consecutive cookies starting at slot j.

    d ranges over 0..M (inclusive); prods[j, 0] = 1 and prods[j, M] is
    the full-period product, identical for every j up to rounding.
    """
    m = len(params)
    p = np.asarray(params, dtype=float)
    prods = np.empty((m, m + 1))
    if m > _LOG_SPACE_PERIOD:
        logs = np.log(p)
        acc = np.zeros(m)
        prods[:, 0] = 1.0
        for d in range(1, m + 1):
            acc = acc + logs[(np.arange(m) + d - 1) % m]
            prods[:, d] = np.exp(acc)
        return prods
    prods[:, 0] = 1.0
    for d in range(1, m + 1):
        prods[:, d] = prods[:, d - 1] * p[(np.arange(m) + d - 1) % m]
    return prods


def prefix_drifts(env: CookieEnvironment) -> tuple[float, ...]:
    """Partial sums of (2*p_i - 1) over the period prefix, i = 1..M."""
    _require_periodic(env)
    out = []
    acc = 0.0
    for p in env.params:
        one_minus = 1.0 - p
        acc += p - one_minus
        out.append(acc)
    return tuple(out)


def mu_periodic(env: CookieEnvironment) -> float:
    """Drift of the crossing chain: pbar / (1 - pbar).

    Returns ``inf`` for the degenerate all-ones pattern.  Agrees with the
    stationary mean run length of :func:`failure_chain` for elliptic
    environments.
    """
    _require_periodic(env)
    pbar = env.mean_cookie()
    if pbar >= 1.0:
        return math.inf
    return pbar / (1.0 - pbar)


def failure_chain(env: CookieEnvironment) -> FailureChain:
    """Build the failure chain with its stationary law and run lengths.

    The stationary law has the closed form pi_j proportional to
    (1 - p_{j-1}) with indices mod M.  It is cross-checked against the
    dominant left eigenvector of the transition matrix obtained by power
    iteration; disagreement raises :class:`InternalConsistencyError`.
    """
    _require_periodic(env)
    _require_elliptic(env)
    m = env.period
    p = np.asarray(env.params, dtype=float)
    q = 1.0 - p
    prods = _cyclic_products(env.params)
    full = float(np.prod(p)) if m <= _LOG_SPACE_PERIOD else float(np.exp(np.sum(np.log(p))))
    denom = 1.0 - full

    # matrix[j, k]: run of length d = (k - j - 1) mod M, any number of
    # extra full wraps, then a failure on slot k (0-based slots).
    matrix = np.empty((m, m))
    for j in range(m):
        for k in range(m):
            # forward distance from state j to state k, in 1..M
            d = (k - j - 1) % m + 1
            matrix[j, k] = prods[j, d - 1] * q[(j + d - 1) % m] / denom
    # The 1/denom factor sums runs of length d-1, d-1+M, d-1+2M, ...;
    # rows sum to 1 by the telescoping identity
    # sum_d prods[j, d-1] * q_{j+d-1} = 1 - full.

    stationary = q[np.roll(np.arange(m), 1)]  # pi_j ~ 1 - p_{j-1}
    stationary = stationary / stationary.sum()

    expected_runs = prods[:, 1 : m + 1].sum(axis=1) / denom

    _verify_stationary(matrix, stationary)
    return FailureChain(matrix, stationary, expected_runs)


def _verify_stationary(matrix: np.ndarray, closed_form: np.ndarray, tol: float = 1e-10) -> None:
    pi = power_iteration_stationary(matrix)
    if np.max(np.abs(pi - closed_form)) > tol:
        raise InternalConsistencyError(
            "closed-form stationary law disagrees with power iteration"
        )
    resid = np.max(np.abs(closed_form @ matrix - closed_form))
    if resid > tol:
        raise InternalConsistencyError(
            f"closed-form stationary law is not invariant (residual {resid:g})"
        )


def power_iteration_stationary(matrix: np.ndarray, tol: float = 1e-13, max_iter: int = 100000) -> np.ndarray:
    """Dominant left eigenvector of a stochastic matrix, normalized."""
    m = matrix.shape[0]
    pi = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        nxt = pi @ matrix
        nxt = nxt / nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise InternalConsistencyError("power iteration did not converge")


def rho_periodic(env: CookieEnvironment) -> float:
    """Limiting centered drift of the crossing chain (critical case).

    Equals (2/M) * sum_i (1 - p_i) * delta_i with delta_i the prefix
    drift sums.  Requires an elliptic periodic environment whose mean
    cookie is 1/2.
    """
    _require_critical(env)
    deltas = prefix_drifts(env)
    m = env.period
    return 2.0 / m * math.fsum((1.0 - p) * d for p, d in zip(env.params, deltas))


def nu_periodic(env: CookieEnvironment) -> float:
    """Limiting diffusion coefficient 8*A, A = mean of p_i(1-p_i)."""
    _require_periodic(env)
    _require_elliptic(env)
    m = env.period
    return 8.0 / m * math.fsum(p * (1.0 - p) for p in env.params)


def theta_periodic(env: CookieEnvironment) -> float:
    """Ratio 2*rho/nu deciding the critical classification.

    Identical to sum_i delta_i (1 - p_i) / (2 * sum_j p_j (1 - p_j)).
    """
    return 2.0 * rho_periodic(env) / nu_periodic(env)


def _require_critical(env: CookieEnvironment) -> None:
    _require_periodic(env)
    _require_elliptic(env)
    if not env.is_critical(CRITICAL_TOL):
        raise ValueError("operation requires mean cookie exactly 1/2")


@dataclass(frozen=True)
class PeriodicDiagnostics:
    """Everything the classifier looks at, in one bundle."""

    p_bar: float
    delta: tuple[float, ...]
    mu: float
    rho: Optional[float]
    nu: float
    theta_right: Optional[float]
    theta_left: Optional[float]
    classification: Classification


def classify_periodic(env: CookieEnvironment) -> Classification:
    """Recurrence/transience trichotomy for elliptic periodic piles.

    Mean cookie above 1/2 gives right transience, below 1/2 left
    transience.  At exactly 1/2 the sign is decided by theta: above 1
    for the environment itself means right transience, above 1 for the
    mirrored environment left transience, otherwise the walk is
    recurrent (theta equal to 1 included).
    """
    _require_periodic(env)
    _require_elliptic(env)
    if not env.is_critical(CRITICAL_TOL):
        pbar = env.mean_cookie()
        return (
            Classification.TRANSIENT_RIGHT
            if pbar > 0.5
            else Classification.TRANSIENT_LEFT
        )
    if theta_periodic(env) > 1.0:
        return Classification.TRANSIENT_RIGHT
    if theta_periodic(env.mirror()) > 1.0:
        return Classification.TRANSIENT_LEFT
    return Classification.RECURRENT


def diagnostics(env: CookieEnvironment) -> PeriodicDiagnostics:
    """Classification together with every intermediate quantity."""
    _require_periodic(env)
    _require_elliptic(env)
    critical = env.is_critical(CRITICAL_TOL)
    rho = rho_periodic(env) if critical else None
    nu = nu_periodic(env)
    theta_r = theta_periodic(env) if critical else None
    theta_l = theta_periodic(env.mirror()) if critical else None
    return PeriodicDiagnostics(
        p_bar=env.mean_cookie(),
        delta=prefix_drifts(env),
        mu=mu_periodic(env),
        rho=rho,
        nu=nu,
        theta_right=theta_r,
        theta_left=theta_l,
        classification=classify_periodic(env),
    )


def half_half_threshold(p: float) -> float:
    """Period length above which the half-p, half-(1-p) pile is right
    transient: (8p - 8p^2 + 2) / (2p - 1), for p in (1/2, 1)."""
    if not 0.5 < p < 1.0:
        raise ValueError("threshold defined for p strictly between 1/2 and 1")
    return (8.0 * p - 8.0 * p * p + 2.0) / (2.0 * p - 1.0)


def classify_bounded(env: CookieEnvironment) -> Classification:
    """Classification of a bounded pile by its total drift.

    delta = sum over the prefix of (2*p_i - 1); above 1 right transient,
    below -1 left transient, otherwise recurrent.
    """
    if env.kind is EnvKind.PERIODIC or env.tail_value != 0.5:
        raise ValueError("operation requires an environment with fair tail")
    if not all(0.0 < p < 1.0 for p in env.params):
        raise ValueError("operation requires an elliptic prefix")
    delta = math.fsum(2.0 * p - 1.0 for p in env.params)
    if delta > 1.0:
        return Classification.TRANSIENT_RIGHT
    if delta < -1.0:
        return Classification.TRANSIENT_LEFT
    return Classification.RECURRENT


def bounded_delta(env: CookieEnvironment) -> float:
    """Total prefix drift of a bounded pile."""
    if env.kind is EnvKind.PERIODIC or env.tail_value != 0.5:
        raise ValueError("operation requires an environment with fair tail")
    return math.fsum(2.0 * p - 1.0 for p in env.params)


def classify_positive(delta: float) -> Classification:
    """Classification of a positive pile from its total drift.

    The caller supplies delta = sum_i (2*p_i - 1), possibly infinite.
    Positive piles never drift left; delta above 1 means right
    transience and anything else (including exactly 1) recurrence.
    """
    if math.isnan(delta) or delta < 0.0:
        raise ValueError("positive environments have nonnegative total drift")
    if delta > 1.0:
        return Classification.TRANSIENT_RIGHT
    return Classification.RECURRENT
