"""Service-time distributions: sampling, analytic moments, ageing class, phase-type form.

Supported families are exponential, Erlang, deterministic, two-branch
hyperexponential, and general phase-type.  Values are immutable after
construction and safe to share between threads; every sampling consumer owns
its own random stream.

Variate generation is fixed per family so draw consumption is documented and
reproducible (all variants consume only uniform draws from the stream):

    exponential       1 uniform   inverse CDF, -ln(u)/rate
    erlang            k uniforms  sum of k exponentials
    deterministic     0 uniforms  point mass
    hyperexponential  2 uniforms  branch choice, then exponential
    phase-type        1 uniform for the entry phase, then 2 per sojourn
                      (holding time, jump target)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

from .errors import InvalidDistributionError, NotRepresentableError


class DistributionClass(enum.Enum):
    """Ageing class of a service-time law.

    NBU: survival satisfies S(x+y) <= S(x)S(y); NWU: the reverse inequality.
    Exponential laws satisfy both with equality (BOTH).  UNKNOWN is returned
    where no static test applies.
    """

    NBU = "NBU"
    NWU = "NWU"
    BOTH = "Both"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise InvalidDistributionError(f"exponential rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class Erlang:
    shape: int
    rate: float

    def __post_init__(self):
        if not (isinstance(self.shape, int) and self.shape >= 1):
            raise InvalidDistributionError(f"erlang shape must be an integer >= 1, got {self.shape}")
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise InvalidDistributionError(f"erlang rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if not (self.value > 0.0 and math.isfinite(self.value)):
            raise InvalidDistributionError(f"deterministic value must be positive, got {self.value}")


@dataclass(frozen=True)
class HyperExponential:
    """Mixture of two exponentials: rate1 with probability p, rate2 with 1-p."""

    p: float
    rate1: float
    rate2: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise InvalidDistributionError(f"mixing probability must lie in [0,1], got {self.p}")
        for r in (self.rate1, self.rate2):
            if not (r > 0.0 and math.isfinite(r)):
                raise InvalidDistributionError(f"hyperexponential rates must be positive, got {r}")


@dataclass(frozen=True, eq=False)
class PhaseType:
    """Absorption time of a transient CTMC with entry law ``initial``.

    ``subgenerator`` is the k x k transition-rate matrix restricted to the
    transient phases: strictly negative diagonal, nonnegative off-diagonal,
    row sums <= 0 with at least one strict deficit (the absorption rates).
    """

    initial: np.ndarray
    subgenerator: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.initial, dtype=float).reshape(-1).copy()
        s = np.asarray(self.subgenerator, dtype=float).copy()
        k = alpha.shape[0]
        if s.shape != (k, k):
            raise InvalidDistributionError(
                f"subgenerator shape {s.shape} does not match {k} phases"
            )
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-12:
            raise InvalidDistributionError("initial vector must be a probability distribution")
        if np.any(np.diag(s) >= 0):
            raise InvalidDistributionError("subgenerator diagonal must be strictly negative")
        off = s - np.diag(np.diag(s))
        if np.any(off < 0):
            raise InvalidDistributionError("subgenerator off-diagonals must be nonnegative")
        rowsum = s.sum(axis=1)
        if np.any(rowsum > 1e-12):
            raise InvalidDistributionError("subgenerator row sums must be <= 0")
        if not np.any(rowsum < -1e-12):
            raise InvalidDistributionError("no phase exits to absorption")
        alpha.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "initial", alpha)
        object.__setattr__(self, "subgenerator", s)

    @property
    def phases(self) -> int:
        return self.initial.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        """Per-phase absorption rates, -(row sums of the subgenerator)."""
        return -self.subgenerator.sum(axis=1)


ServiceDistribution = Union[Exponential, Erlang, Deterministic, HyperExponential, PhaseType]


def mean(dist: ServiceDistribution) -> float:
    """Analytic mean service time."""
    if isinstance(dist, Exponential):
        return 1.0 / dist.rate
    if isinstance(dist, Erlang):
        return dist.shape / dist.rate
    if isinstance(dist, Deterministic):
        return dist.value
    if isinstance(dist, HyperExponential):
        return dist.p / dist.rate1 + (1.0 - dist.p) / dist.rate2
    if isinstance(dist, PhaseType):
        try:
            moments = np.linalg.solve(-dist.subgenerator, np.ones(dist.phases))
        except np.linalg.LinAlgError as exc:
            raise InvalidDistributionError("subgenerator is singular: absorption unreachable") from exc
        value = float(dist.initial @ moments)
        if not (value > 0.0 and math.isfinite(value)):
            raise InvalidDistributionError("phase-type mean is not finite and positive")
        return value
    raise TypeError(f"not a service distribution: {dist!r}")


def sampler(dist: ServiceDistribution, rng: np.random.Generator) -> Callable[[], float]:
    """Bind ``dist`` to a stream and return a zero-argument draw function.

    Uniform draws of exactly 0 are rejected and redrawn so variates stay
    strictly positive (probability 2**-53 per draw).
    """
    if isinstance(dist, Deterministic):
        v = dist.value
        return lambda: v
    rand = rng.random
    if isinstance(dist, Exponential):
        inv = 1.0 / dist.rate

        def draw_exponential() -> float:
            u = rand()
            while u <= 0.0:
                u = rand()
            return -math.log(u) * inv

        return draw_exponential
    if isinstance(dist, Erlang):
        k, inv = dist.shape, 1.0 / dist.rate

        def draw_erlang() -> float:
            total = 0.0
            for _ in range(k):
                u = rand()
                while u <= 0.0:
                    u = rand()
                total -= math.log(u)
            return total * inv

        return draw_erlang
    if isinstance(dist, HyperExponential):
        p, inv1, inv2 = dist.p, 1.0 / dist.rate1, 1.0 / dist.rate2

        def draw_hyperexponential() -> float:
            branch = rand()
            u = rand()
            while u <= 0.0:
                u = rand()
            return -math.log(u) * (inv1 if branch < p else inv2)

        return draw_hyperexponential
    if isinstance(dist, PhaseType):
        alpha_cum = np.cumsum(dist.initial)
        s = dist.subgenerator
        k = dist.phases
        hold_inv = [-1.0 / s[i, i] for i in range(k)]
        # Per-phase jump table: cumulative probabilities over targets
        # 0..k-1 (other phases) with k standing for absorption.
        jump_cum = []
        jump_target = []
        for i in range(k):
            total = -s[i, i]
            targets = [j for j in range(k) if j != i and s[i, j] > 0.0]
            probs = [s[i, j] / total for j in targets]
            exit_p = 1.0 - sum(probs)
            targets.append(k)
            probs.append(exit_p)
            jump_target.append(targets)
            jump_cum.append(np.cumsum(probs))

        def draw_phase_type() -> float:
            u = rand()
            phase = int(np.searchsorted(alpha_cum, u, side="right"))
            if phase >= k:
                phase = k - 1
            total = 0.0
            while True:
                u = rand()
                while u <= 0.0:
                    u = rand()
                total -= math.log(u) * hold_inv[phase]
                v = rand()
                idx = int(np.searchsorted(jump_cum[phase], v, side="right"))
                if idx >= len(jump_target[phase]):
                    idx = len(jump_target[phase]) - 1
                nxt = jump_target[phase][idx]
                if nxt == k:
                    return total
                phase = nxt

        return draw_phase_type
    raise TypeError(f"not a service distribution: {dist!r}")


def sample(dist: ServiceDistribution, rng: np.random.Generator) -> float:
    """Draw one variate; deterministic given the stream state."""
    return sampler(dist, rng)()


def cdf(dist: ServiceDistribution, x: float) -> float:
    """Distribution function P(X <= x)."""
    if x < 0.0:
        return 0.0
    if isinstance(dist, Exponential):
        return -math.expm1(-dist.rate * x)
    if isinstance(dist, Erlang):
        # 1 - exp(-rx) * sum_{i<k} (rx)^i / i!
        rx = dist.rate * x
        term = 1.0
        acc = 1.0
        for i in range(1, dist.shape):
            term *= rx / i
            acc += term
        return 1.0 - math.exp(-rx) * acc if rx < 700 else 1.0
    if isinstance(dist, Deterministic):
        return 1.0 if x >= dist.value else 0.0
    if isinstance(dist, HyperExponential):
        return -(dist.p * math.expm1(-dist.rate1 * x)
                 + (1.0 - dist.p) * math.expm1(-dist.rate2 * x))
    if isinstance(dist, PhaseType):
        surv = float(dist.initial @ expm(dist.subgenerator * x) @ np.ones(dist.phases))
        return min(1.0, max(0.0, 1.0 - surv))
    raise TypeError(f"not a service distribution: {dist!r}")


def classify(dist: ServiceDistribution) -> DistributionClass:
    """Static ageing class of the family.

    Deterministic laws and Erlang laws with shape >= 2 have increasing
    failure rate (NBU); genuine two-rate hyperexponential mixtures have
    decreasing failure rate (NWU); exponential laws are both.  General
    phase-type laws get no static verdict.
    """
    if isinstance(dist, Deterministic):
        return DistributionClass.NBU
    if isinstance(dist, Erlang):
        return DistributionClass.NBU if dist.shape >= 2 else DistributionClass.BOTH
    if isinstance(dist, Exponential):
        return DistributionClass.BOTH
    if isinstance(dist, HyperExponential):
        degenerate = dist.rate1 == dist.rate2 or dist.p in (0.0, 1.0)
        return DistributionClass.BOTH if degenerate else DistributionClass.NWU
    if isinstance(dist, PhaseType):
        return DistributionClass.UNKNOWN
    raise TypeError(f"not a service distribution: {dist!r}")


def as_phase_type(dist: ServiceDistribution) -> PhaseType:
    """Exact phase-type representation, for the CTMC oracle.

    Deterministic laws are not phase-type; callers must fall back to
    simulation for those.
    """
    if isinstance(dist, PhaseType):
        return dist
    if isinstance(dist, Exponential):
        return PhaseType(np.array([1.0]), np.array([[-dist.rate]]))
    if isinstance(dist, Erlang):
        k, r = dist.shape, dist.rate
        s = np.zeros((k, k))
        for i in range(k):
            s[i, i] = -r
            if i + 1 < k:
                s[i, i + 1] = r
        alpha = np.zeros(k)
        alpha[0] = 1.0
        return PhaseType(alpha, s)
    if isinstance(dist, HyperExponential):
        alpha = np.array([dist.p, 1.0 - dist.p])
        s = np.diag([-dist.rate1, -dist.rate2])
        return PhaseType(alpha, s)
    if isinstance(dist, Deterministic):
        raise NotRepresentableError("deterministic service has no exact phase-type form")
    raise TypeError(f"not a service distribution: {dist!r}")


_CONFIG_TAGS = {
    "exp": "exp",
    "exponential": "exp",
    "erlang": "erlang",
    "det": "det",
    "deterministic": "det",
    "hyperexp": "hyperexp",
    "phase": "phase",
}


def from_config(record: dict) -> ServiceDistribution:
    """Build a distribution from its tagged-record form, e.g.
    ``{"type": "hyperexp", "p": 0.3, "rate1": 1.0, "rate2": 5.0}``."""
    try:
        tag = _CONFIG_TAGS[str(record["type"]).lower()]
    except KeyError as exc:
        raise InvalidDistributionError(f"unknown distribution record: {record!r}") from exc
    try:
        if tag == "exp":
            return Exponential(rate=float(record["rate"]))
        if tag == "erlang":
            return Erlang(shape=int(record["shape"]), rate=float(record["rate"]))
        if tag == "det":
            return Deterministic(value=float(record["value"]))
        if tag == "hyperexp":
            return HyperExponential(
                p=float(record["p"]), rate1=float(record["rate1"]), rate2=float(record["rate2"])
            )
        return PhaseType(
            np.asarray(record["initial"], dtype=float),
            np.asarray(record["subgenerator"], dtype=float),
        )
    except KeyError as exc:
        raise InvalidDistributionError(f"missing field {exc} in {record!r}") from exc


def to_config(dist: ServiceDistribution) -> dict:
    """Tagged-record form of a distribution (inverse of :func:`from_config`)."""
    if isinstance(dist, Exponential):
        return {"type": "exp", "rate": dist.rate}
    if isinstance(dist, Erlang):
        return {"type": "erlang", "shape": dist.shape, "rate": dist.rate}
    if isinstance(dist, Deterministic):
        return {"type": "det", "value": dist.value}
    if isinstance(dist, HyperExponential):
        return {"type": "hyperexp", "p": dist.p, "rate1": dist.rate1, "rate2": dist.rate2}
    if isinstance(dist, PhaseType):
        return {
            "type": "phase",
            "initial": dist.initial.tolist(),
            "subgenerator": dist.subgenerator.tolist(),
        }
    raise TypeError(f"not a service distribution: {dist!r}")


def parse_spec_string(text: str) -> ServiceDistribution:
    """Parse the compact CLI form, e.g. ``exp:1.0``, ``det:1.0``,
    ``erlang:3,3.0``, ``hyperexp:0.9,1.8,0.2``."""
    head, sep, tail = text.partition(":")
    if not sep:
        raise InvalidDistributionError(f"expected TYPE:PARAMS, got {text!r}")
    tag = _CONFIG_TAGS.get(head.strip().lower())
    parts = [p for p in tail.split(",") if p.strip()]
    try:
        if tag == "exp" and len(parts) == 1:
            return Exponential(rate=float(parts[0]))
        if tag == "det" and len(parts) == 1:
            return Deterministic(value=float(parts[0]))
        if tag == "erlang" and len(parts) == 2:
            return Erlang(shape=int(parts[0]), rate=float(parts[1]))
        if tag == "hyperexp" and len(parts) == 3:
            return HyperExponential(p=float(parts[0]), rate1=float(parts[1]), rate2=float(parts[2]))
    except ValueError as exc:
        raise InvalidDistributionError(f"bad distribution parameters in {text!r}") from exc
    raise InvalidDistributionError(f"cannot parse distribution {text!r}")
