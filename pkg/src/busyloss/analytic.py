"""Closed-form busy-period quantities for the Markovian M/M/m/n loss system.

All functions are pure functions of a :class:`MarkovSpec`.  Level indices
follow the occupancy convention: ``expected_level_crossings(spec, j)`` is the
expected number of arrivals during one busy period that find exactly ``j``
customers present, for ``0 <= j <= m + n``; the value at ``j = m + n`` counts
lost arrivals.

State-time expectations are per busy *cycle*: the entry for occupancy 0 is
the expected idle time ``1/lambda``, while the simulator's per-record vector
covers the busy period only and is zero there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

#: Expected upward crossings of any fixed positive level during one excursion
#: of the symmetric +-1 random walk (independent of the level).
EXCURSION_CROSSINGS = 0.5

# Switch to log-domain evaluation once factorials or powers may overflow.
_LOG_DOMAIN_THRESHOLD = 20


@dataclass(frozen=True)
class MarkovSpec:
    """An M/M/m/n system: Poisson arrivals at ``lam``, ``m`` exponential
    servers at rate ``mu`` each, ``n`` waiting places."""

    lam: float
    mu: float
    m: int
    n: int

    def __post_init__(self):
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ConfigError(f"arrival rate must be positive, got {self.lam}")
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise ConfigError(f"service rate must be positive, got {self.mu}")
        if not (isinstance(self.m, int) and self.m >= 1):
            raise ConfigError(f"server count must be an integer >= 1, got {self.m}")
        if not (isinstance(self.n, int) and self.n >= 0):
            raise ConfigError(f"waiting places must be an integer >= 0, got {self.n}")

    @property
    def rho(self) -> float:
        """Traffic intensity lam / (m mu)."""
        return self.lam / (self.m * self.mu)

    @property
    def capacity(self) -> int:
        return self.m + self.n


def _ratio_power_over_factorial(lam: float, mu: float, j: int) -> float:
    """lam^j / (j! mu^j), evaluated in log domain for large j."""
    if j <= _LOG_DOMAIN_THRESHOLD:
        out = 1.0
        for i in range(1, j + 1):
            out *= lam / (i * mu)
        return out
    return math.exp(j * math.log(lam / mu) - math.lgamma(j + 1))


def _geometric_sum(rho: float, n: int) -> float:
    """sum_{j=0}^{n} rho^j with an exact branch at rho = 1."""
    if rho == 1.0:
        return float(n + 1)
    return (1.0 - rho ** (n + 1)) / (1.0 - rho)


def expected_level_crossings(spec: MarkovSpec, j: int) -> float:
    """Expected arrivals during a busy period that meet exactly ``j`` customers.

    Equals lam^j / (j! mu^j) below the server count and
    (lam^m / (m! mu^m)) rho^(j-m) from there up to full capacity.
    """
    if not (isinstance(j, int) and 0 <= j <= spec.capacity):
        raise ConfigError(f"occupancy level {j} outside [0, {spec.capacity}]")
    if j <= spec.m - 1:
        return _ratio_power_over_factorial(spec.lam, spec.mu, j)
    base = _ratio_power_over_factorial(spec.lam, spec.mu, spec.m)
    return base * spec.rho ** (j - spec.m)


def expected_losses(spec: MarkovSpec) -> float:
    """Expected lost arrivals per busy period: (lam^m/(m! mu^m)) rho^n.

    At critical load (rho = 1) this is m^m/m! for every queue size n.
    """
    base = _ratio_power_over_factorial(spec.lam, spec.mu, spec.m)
    return base * spec.rho ** spec.n


def expected_state_time(spec: MarkovSpec, j: int) -> float:
    """Expected time per busy cycle spent with exactly ``j`` customers."""
    return expected_level_crossings(spec, j) / spec.lam


def expected_busy_period(spec: MarkovSpec) -> float:
    """Expected busy-period length.

    sum_{j=1}^{m-1} lam^(j-1)/(j! mu^j) + (lam^(m-1)/(m! mu^m)) sum_{j=0}^{n} rho^j
    """
    head = sum(
        _ratio_power_over_factorial(spec.lam, spec.mu, j) / spec.lam
        for j in range(1, spec.m)
    )
    tail = _ratio_power_over_factorial(spec.lam, spec.mu, spec.m) / spec.lam
    return head + tail * _geometric_sum(spec.rho, spec.n)


def expected_orbital_busy_period(spec: MarkovSpec) -> float:
    """Expected orbital busy-period length: (1/(m mu)) sum_{j=0}^{n} rho^j."""
    return _geometric_sum(spec.rho, spec.n) / (spec.m * spec.mu)


def expected_orbital_count(spec: MarkovSpec) -> float:
    """Expected orbital busy periods per busy period: lam^(m-1)/((m-1)! mu^(m-1)).

    Independent of the queue size; equals m^m/m! at critical load.
    """
    return _ratio_power_over_factorial(spec.lam, spec.mu, spec.m - 1)


def expected_excursion_crossings(level: int) -> float:
    """Expected upward crossings of ``level`` per symmetric random-walk excursion.

    The constant 1/2 for every level >= 1; checked empirically by the
    simulator's excursion experiment.
    """
    if not (isinstance(level, int) and level >= 1):
        raise ConfigError(f"crossing level must be an integer >= 1, got {level}")
    return EXCURSION_CROSSINGS


def summary(spec: MarkovSpec) -> dict:
    """All closed-form quantities for one system, as a JSON-ready mapping."""
    return {
        "lambda": spec.lam,
        "mu": spec.mu,
        "m": spec.m,
        "n": spec.n,
        "rho": spec.rho,
        "expected_level_crossings": [
            expected_level_crossings(spec, j) for j in range(spec.capacity + 1)
        ],
        "expected_state_times": [
            expected_state_time(spec, j) for j in range(spec.capacity + 1)
        ],
        "expected_busy_period": expected_busy_period(spec),
        "expected_orbital_busy_period": expected_orbital_busy_period(spec),
        "expected_orbital_count": expected_orbital_count(spec),
        "expected_losses": expected_losses(spec),
    }
