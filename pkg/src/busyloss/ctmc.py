"""Exact busy-period and stationary analysis of M/PH/m/n systems.

The chain state is ``(queue_length, phase_counts)`` where ``phase_counts``
is the unordered multiset of service phases currently occupied; homogeneous
servers make per-server identity irrelevant, which keeps the state space
small.  A busy-period model covers the transient states (occupancy >= 1)
with the empty state absorbing; the stationary model adds the empty state
and solves for the long-run distribution.

Losses are modeled as a reward at rate lambda on blocked states rather than
as explicit transitions, so the jump structure matches the queueing dynamics
exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .distributions import PhaseType
from .errors import CapacityError, ConfigError

#: Dense linear algebra below this state count, sparse at or above it.
DENSE_STATE_LIMIT = 2000

#: Default bound on the number of transient states.
DEFAULT_MAX_STATES = 10**6


@dataclass(frozen=True)
class OracleState:
    """``queue_length`` waiting customers plus a phase multiset in service."""

    queue_length: int
    phase_counts: tuple[int, ...]

    @property
    def in_service(self) -> int:
        return sum(self.phase_counts)

    @property
    def total(self) -> int:
        return self.queue_length + self.in_service


@dataclass
class CtmcModel:
    """Busy-period chain of an M/PH/m/n system, empty state absorbing."""

    lam: float
    service: PhaseType
    m: int
    n: int
    states: list[OracleState]
    index: dict[OracleState, int]
    generator: sp.csr_matrix  # transient-to-transient block
    absorption_rates: np.ndarray
    loss_rate_vector: np.ndarray
    initial_distribution: np.ndarray

    @property
    def state_count(self) -> int:
        return len(self.states)


def _phase_multisets(k: int, size: int):
    """All vectors of k nonnegative counts summing to ``size``."""
    if size == 0:
        yield (0,) * k
        return
    for cut in itertools.combinations_with_replacement(range(k), size):
        counts = [0] * k
        for j in cut:
            counts[j] += 1
        yield tuple(counts)


def _enumerate_states(k: int, m: int, n: int, include_empty: bool, max_states: int):
    states: list[OracleState] = []
    if include_empty:
        states.append(OracleState(0, (0,) * k))
    for total in range(1, m + n + 1):
        busy = min(total, m)
        queue = total - busy
        for counts in _phase_multisets(k, busy):
            states.append(OracleState(queue, counts))
            if len(states) > max_states:
                raise CapacityError(
                    f"state space exceeds the {max_states}-state bound"
                )
    return states


def _validate(lam: float, service: PhaseType, m: int, n: int):
    if not (lam > 0.0 and math.isfinite(lam)):
        raise ConfigError(f"arrival rate must be positive, got {lam}")
    if not (isinstance(m, int) and m >= 1):
        raise ConfigError(f"server count must be an integer >= 1, got {m}")
    if not (isinstance(n, int) and n >= 0):
        raise ConfigError(f"waiting places must be an integer >= 0, got {n}")
    if not isinstance(service, PhaseType):
        raise ConfigError("the oracle requires a phase-type service distribution")


def build_model(
    lam: float,
    service: PhaseType,
    m: int,
    n: int,
    max_states: int = DEFAULT_MAX_STATES,
) -> CtmcModel:
    """Enumerate the busy-period chain and assemble its generator."""
    _validate(lam, service, m, n)
    k = service.phases
    alpha = service.initial
    s = service.subgenerator
    exit_rates = service.exit_rates
    cap = m + n

    states = _enumerate_states(k, m, n, include_empty=False, max_states=max_states)
    index = {st: i for i, st in enumerate(states)}

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    absorption = np.zeros(len(states))
    loss_rates = np.zeros(len(states))

    def add(i: int, st: OracleState, rate: float):
        if rate <= 0.0:
            return
        rows.append(i)
        cols.append(index[st])
        vals.append(rate)

    for i, st in enumerate(states):
        counts = st.phase_counts
        q = st.queue_length
        total = st.total
        diag = 0.0

        # Arrival.
        if total < cap:
            if st.in_service < m:
                for j in range(k):
                    if alpha[j] > 0.0:
                        nxt = list(counts)
                        nxt[j] += 1
                        add(i, OracleState(q, tuple(nxt)), lam * alpha[j])
            else:
                add(i, OracleState(q + 1, counts), lam)
            diag += lam
        else:
            # Blocked: the arrival is lost without a state change.
            loss_rates[i] = lam

        for ph in range(k):
            c = counts[ph]
            if c == 0:
                continue
            # Phase change within one server.
            for j in range(k):
                if j != ph and s[ph, j] > 0.0:
                    nxt = list(counts)
                    nxt[ph] -= 1
                    nxt[j] += 1
                    add(i, OracleState(q, tuple(nxt)), c * s[ph, j])
                    diag += c * s[ph, j]
            # Service completion.
            rate = c * exit_rates[ph]
            if rate > 0.0:
                diag += rate
                if q > 0:
                    for j in range(k):
                        if alpha[j] > 0.0:
                            nxt = list(counts)
                            nxt[ph] -= 1
                            nxt[j] += 1
                            add(i, OracleState(q - 1, tuple(nxt)), rate * alpha[j])
                elif total > 1:
                    nxt = list(counts)
                    nxt[ph] -= 1
                    add(i, OracleState(0, tuple(nxt)), rate)
                else:
                    absorption[i] += rate

        rows.append(i)
        cols.append(i)
        vals.append(-diag)

    size = len(states)
    generator = sp.csr_matrix(
        sp.coo_matrix((vals, (rows, cols)), shape=(size, size))
    )

    initial = np.zeros(size)
    for j in range(k):
        if alpha[j] > 0.0:
            entry = [0] * k
            entry[j] = 1
            initial[index[OracleState(0, tuple(entry))]] = alpha[j]

    return CtmcModel(
        lam=lam,
        service=service,
        m=m,
        n=n,
        states=states,
        index=index,
        generator=generator,
        absorption_rates=absorption,
        loss_rate_vector=loss_rates,
        initial_distribution=initial,
    )


def _solve_transient(model: CtmcModel, rhs: np.ndarray) -> np.ndarray:
    """Solve Q x = -rhs on the transient block."""
    q = model.generator
    try:
        if model.state_count < DENSE_STATE_LIMIT:
            return np.linalg.solve(q.toarray(), -rhs)
        return spla.spsolve(q.tocsc(), -rhs)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise CapacityError("singular busy-period chain: absorption unreachable") from exc


def expected_busy_period_losses(model: CtmcModel) -> float:
    """Expected lost arrivals per busy period (reward before absorption)."""
    h = _solve_transient(model, model.loss_rate_vector)
    return float(model.initial_distribution @ h)


def expected_busy_period_length(model: CtmcModel) -> float:
    """Expected busy-period length (time to absorption)."""
    g = _solve_transient(model, np.ones(model.state_count))
    return float(model.initial_distribution @ g)


def expected_served(model: CtmcModel) -> float:
    """Expected customers served per busy period: the opener plus all
    accepted later arrivals, lam E[T] - E[L] + 1."""
    return model.lam * expected_busy_period_length(model) - expected_busy_period_losses(model) + 1.0


def stationary_loss_probability(
    lam: float,
    service: PhaseType,
    m: int,
    n: int,
    max_states: int = DEFAULT_MAX_STATES,
) -> float:
    """Long-run fraction of lost arrivals, from the stationary distribution.

    Poisson arrivals see time averages, so this equals the stationary mass
    on blocked states, and likewise E[L] / (E[L] + E[served]) from the
    busy-period model.
    """
    _validate(lam, service, m, n)
    k = service.phases
    alpha = service.initial
    s = service.subgenerator
    exit_rates = service.exit_rates
    cap = m + n

    states = _enumerate_states(k, m, n, include_empty=True, max_states=max_states)
    index = {st: i for i, st in enumerate(states)}
    size = len(states)

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    def add(i: int, st: OracleState, rate: float):
        if rate <= 0.0:
            return
        rows.append(i)
        cols.append(index[st])
        vals.append(rate)

    for i, st in enumerate(states):
        counts = st.phase_counts
        q = st.queue_length
        total = st.total
        diag = 0.0
        if total < cap:
            if st.in_service < m:
                for j in range(k):
                    if alpha[j] > 0.0:
                        nxt = list(counts)
                        nxt[j] += 1
                        add(i, OracleState(q, tuple(nxt)), lam * alpha[j])
            else:
                add(i, OracleState(q + 1, counts), lam)
            diag += lam
        for ph in range(k):
            c = counts[ph]
            if c == 0:
                continue
            for j in range(k):
                if j != ph and s[ph, j] > 0.0:
                    nxt = list(counts)
                    nxt[ph] -= 1
                    nxt[j] += 1
                    add(i, OracleState(q, tuple(nxt)), c * s[ph, j])
                    diag += c * s[ph, j]
            rate = c * exit_rates[ph]
            if rate > 0.0:
                diag += rate
                if q > 0:
                    for j in range(k):
                        if alpha[j] > 0.0:
                            nxt = list(counts)
                            nxt[ph] -= 1
                            nxt[j] += 1
                            add(i, OracleState(q - 1, tuple(nxt)), rate * alpha[j])
                else:
                    nxt = list(counts)
                    nxt[ph] -= 1
                    add(i, OracleState(0, tuple(nxt)), rate)
        rows.append(i)
        cols.append(i)
        vals.append(-diag)

    q_full = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()

    # pi Q = 0 with sum(pi) = 1: replace the last balance equation by the
    # normalization row.
    a = q_full.T.tolil()
    a[size - 1, :] = 1.0
    rhs = np.zeros(size)
    rhs[size - 1] = 1.0
    try:
        if size < DENSE_STATE_LIMIT:
            pi = np.linalg.solve(a.toarray(), rhs)
        else:
            pi = spla.spsolve(a.tocsc(), rhs)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise CapacityError("stationary system is singular") from exc

    blocked = sum(pi[i] for i, st in enumerate(states) if st.total == cap)
    return float(blocked)


def oracle_summary(lam: float, service: PhaseType, m: int, n: int,
                   max_states: int = DEFAULT_MAX_STATES) -> dict:
    """State count plus the three headline quantities, JSON-ready."""
    model = build_model(lam, service, m, n, max_states=max_states)
    return {
        "lambda": lam,
        "m": m,
        "n": n,
        "transient_states": model.state_count,
        "expected_losses": expected_busy_period_losses(model),
        "expected_busy_period": expected_busy_period_length(model),
        "loss_probability": stationary_loss_probability(lam, service, m, n, max_states),
    }
