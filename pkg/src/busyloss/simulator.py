"""Discrete-event simulation of M/GI/m/n busy periods.

One busy period runs from an arrival into an empty system until the system
next empties.  Each record carries the full set of occupancy observables:

* ``level_crossings[j]``: arrivals that met ``j - 1`` customers, for
  ``j = 1 .. m+n+1``; the top entry counts losses and entry 1 is always the
  opening arrival.
* ``time_in_state[j]``: total time with exactly ``j`` customers present
  (zero for ``j = 0``; a busy period has positive occupancy throughout).
* orbital busy periods: opened when an accepted arrival raises occupancy
  from ``m - 1`` to ``m``, closed at the first downward crossing back to
  ``m - 1``; losses are attributed to the enclosing orbital period.
* queueing periods: opened when an accepted arrival raises occupancy from
  ``m`` to ``m + 1``, closed at the first downward crossing back to ``m``.

Tie-breaking and determinism rules:

* A departure scheduled at the same instant as an arrival is processed
  first, so the arrival sees the freed capacity.
* Simultaneous departures are processed in server-index order; an arriving
  customer takes the lowest-indexed free server; waiting customers are
  served in arrival order.  None of these choices affect occupancy
  statistics; they pin hand traces and replay.
* A customer's service time is drawn when service starts.  Per busy period
  the draw order is: opening customer's service, first interarrival, then
  per event (service draw if one starts, then the next interarrival after
  each arrival).

Replication ``i`` of a batch draws from the stream ``(master_seed, salt, i)``,
so results are independent of execution order and worker count.

The module also hosts the symmetric random-walk excursion experiment used to
check the level-crossing constant 1/2.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from . import distributions
from .distributions import ServiceDistribution
from .errors import ConfigError, ExcursionTruncatedError, IncompleteBusyPeriodError
from .rng import stream

_INF = math.inf

#: Default bound on the length (in walk steps) of a single excursion.
DEFAULT_STEP_CAP = 10**9


@dataclass(frozen=True)
class SystemSpec:
    """An M/GI/m/n system: Poisson arrivals, general service, m servers,
    n waiting places."""

    arrival_rate: float
    service: ServiceDistribution
    servers: int
    waiting_places: int

    def __post_init__(self):
        if not (self.arrival_rate > 0.0 and math.isfinite(self.arrival_rate)):
            raise ConfigError(f"arrival rate must be positive, got {self.arrival_rate}")
        if not (isinstance(self.servers, int) and self.servers >= 1):
            raise ConfigError(f"server count must be an integer >= 1, got {self.servers}")
        if not (isinstance(self.waiting_places, int) and self.waiting_places >= 0):
            raise ConfigError(
                f"waiting places must be an integer >= 0, got {self.waiting_places}"
            )

    @property
    def capacity(self) -> int:
        return self.servers + self.waiting_places


@dataclass(frozen=True)
class PoissonArrivals:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ConfigError(f"Poisson rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class ScriptedArrivals:
    """Fixed arrival instants for hand-traceable tests.

    The first time is the busy-period opener.  The list must extend past the
    emptying instant, otherwise the busy period cannot be certified complete.
    """

    times: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ConfigError("scripted arrivals need at least the opening time")
        if times[0] < 0.0:
            raise ConfigError("arrival times must be nonnegative")
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ConfigError("scripted arrival times must be strictly increasing")
        object.__setattr__(self, "times", times)


ArrivalSource = Union[PoissonArrivals, ScriptedArrivals]


@dataclass
class BusyPeriodRecord:
    """All observables of one completed busy period."""

    duration: float
    losses: int
    served: int
    # level_crossings[j] = arrivals meeting j-1 customers; index 0 unused.
    level_crossings: list[int]
    # time_in_state[j] = time with exactly j customers, j = 0 .. m+n.
    time_in_state: list[float]
    orbital_count: int
    orbital_durations: list[float]
    orbital_losses: list[int]
    queueing_period_count: int
    # downward_crossings[j] = departures that left j-1 customers behind;
    # balances level_crossings for every completed record.
    downward_crossings: list[int] = field(default_factory=list)

    @property
    def arrivals(self) -> int:
        return self.served + self.losses


def simulate_busy_period(
    spec: SystemSpec,
    arrivals: Optional[ArrivalSource] = None,
    rng: Optional[np.random.Generator] = None,
) -> BusyPeriodRecord:
    """Run one busy period to completion and return its record.

    Raises :class:`IncompleteBusyPeriodError` if a scripted source is
    exhausted while the system is still busy.
    """
    if arrivals is None:
        arrivals = PoissonArrivals(spec.arrival_rate)
    if isinstance(arrivals, PoissonArrivals):
        if arrivals.rate != spec.arrival_rate:
            raise ConfigError(
                f"Poisson source rate {arrivals.rate} != system arrival rate {spec.arrival_rate}"
            )
        if rng is None:
            raise ConfigError("Poisson arrivals require a random stream")
        scripted = None
    else:
        scripted = arrivals.times

    m = spec.servers
    cap = spec.capacity
    lam = spec.arrival_rate
    needs_service_draws = not isinstance(spec.service, distributions.Deterministic)
    if rng is None and needs_service_draws:
        raise ConfigError("this service distribution requires a random stream")
    draw_service = distributions.sampler(spec.service, rng)
    rand = rng.random if rng is not None else None

    # Opening arrival: one customer enters the empty system.
    t0 = scripted[0] if scripted is not None else 0.0
    t = t0
    dep = [_INF] * m
    dep[0] = t0 + draw_service()
    occ = 1
    queue = 0

    f = [0] * (cap + 2)
    f[1] = 1
    down = [0] * (cap + 2)
    b = [0.0] * (cap + 1)
    b_c = [0.0] * (cap + 1)  # Kahan compensation per occupancy bucket
    served = 0
    losses = 0
    orbital_count = 0
    orbital_durations: list[float] = []
    orbital_losses: list[int] = []
    queueing_count = 0
    in_orbital = False
    orb_start = 0.0
    orb_losses = 0
    if m == 1:
        # The opener itself raises occupancy to the server count.
        in_orbital = True
        orb_start = t0
        orbital_count = 1

    if scripted is not None:
        ptr = 1
        next_arr = scripted[1] if len(scripted) > 1 else None
    else:
        u = rand()
        while u <= 0.0:
            u = rand()
        next_arr = t0 - math.log(u) / lam

    while True:
        nd = _INF
        di = -1
        for i in range(m):
            v = dep[i]
            if v < nd:
                nd = v
                di = i
        if next_arr is None:
            raise IncompleteBusyPeriodError(
                "scripted arrivals exhausted before the system emptied"
            )
        if nd <= next_arr:
            # Departure (wins ties so the arrival sees freed capacity).
            dt = nd - t
            y = dt - b_c[occ]
            s = b[occ] + y
            b_c[occ] = (s - b[occ]) - y
            b[occ] = s
            t = nd
            dep[di] = _INF
            served += 1
            old_occ = occ
            occ -= 1
            down[old_occ] += 1
            if queue:
                queue -= 1
                dep[di] = t + draw_service()
            if old_occ == m and in_orbital:
                orbital_durations.append(t - orb_start)
                orbital_losses.append(orb_losses)
                in_orbital = False
            if occ == 0:
                duration = t - t0
                break
        else:
            # Arrival.
            dt = next_arr - t
            y = dt - b_c[occ]
            s = b[occ] + y
            b_c[occ] = (s - b[occ]) - y
            b[occ] = s
            t = next_arr
            f[occ + 1] += 1
            if occ == cap:
                losses += 1
                orb_losses += 1
            else:
                if occ < m:
                    for i in range(m):
                        if dep[i] == _INF:
                            dep[i] = t + draw_service()
                            break
                else:
                    queue += 1
                occ += 1
                if occ == m:
                    in_orbital = True
                    orb_start = t
                    orb_losses = 0
                    orbital_count += 1
                elif occ == m + 1:
                    queueing_count += 1
            if scripted is not None:
                ptr += 1
                next_arr = scripted[ptr] if ptr < len(scripted) else None
            else:
                u = rand()
                while u <= 0.0:
                    u = rand()
                next_arr = t - math.log(u) / lam

    return BusyPeriodRecord(
        duration=duration,
        losses=losses,
        served=served,
        level_crossings=f,
        time_in_state=b,
        orbital_count=orbital_count,
        orbital_durations=orbital_durations,
        orbital_losses=orbital_losses,
        queueing_period_count=queueing_count,
        downward_crossings=down,
    )


def iter_replications(
    spec: SystemSpec,
    count: int,
    master_seed: int,
    salt: tuple[int, ...] = (),
    start: int = 0,
) -> Iterator[BusyPeriodRecord]:
    """Yield records ``start .. start+count-1``; record ``i`` uses stream
    ``(master_seed, salt, i)``."""
    for i in range(start, start + count):
        yield simulate_busy_period(spec, rng=stream(master_seed, i, salt))


def run_replications(
    spec: SystemSpec,
    count: int,
    master_seed: int,
    salt: tuple[int, ...] = (),
    workers: int = 1,
) -> list[BusyPeriodRecord]:
    """``count`` independent busy-period records in stream-index order.

    The result is identical for any ``workers`` value because each record is
    a pure function of ``(spec, master_seed, salt, index)``.
    """
    if count < 1:
        raise ConfigError(f"replication count must be >= 1, got {count}")
    if workers <= 1 or count < 4 * workers:
        return list(iter_replications(spec, count, master_seed, salt))
    ranges = _chunk_ranges(count, workers)
    args = [(spec, master_seed, salt, lo, hi) for lo, hi in ranges]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_replicate_range, args))
    out: list[BusyPeriodRecord] = []
    for part in parts:
        out.extend(part)
    return out


def _chunk_ranges(count: int, workers: int) -> list[tuple[int, int]]:
    size = (count + workers - 1) // workers
    return [(lo, min(lo + size, count)) for lo in range(0, count, size)]


def _replicate_range(args) -> list[BusyPeriodRecord]:
    spec, master_seed, salt, lo, hi = args
    return list(iter_replications(spec, hi - lo, master_seed, salt, start=lo))


def measure_state_m_minus_1(
    spec: SystemSpec,
    count: int,
    master_seed: int,
    salt: tuple[int, ...] = (),
    workers: int = 1,
) -> np.ndarray:
    """Per-record time spent with exactly m-1 customers present."""
    summary = collect_batch(spec, count, master_seed, salt=salt, workers=workers)
    return summary.state_time_m1


@dataclass
class BatchSummary:
    """Column-oriented per-record observables for a replication batch.

    Rows are in stream-index order; concatenating summaries of adjacent index
    ranges reproduces the full batch exactly.
    """

    count: int
    capacity: int
    servers: int
    losses: np.ndarray
    served: np.ndarray
    durations: np.ndarray
    state_time_m1: np.ndarray
    level_crossings: np.ndarray  # shape (count, capacity + 1): f(1) .. f(cap+1)
    orbital_counts: np.ndarray
    queueing_counts: np.ndarray
    orbital_losses: np.ndarray  # flattened over all orbital periods
    orbital_durations: np.ndarray

    @staticmethod
    def concat(parts: Sequence["BatchSummary"]) -> "BatchSummary":
        first = parts[0]
        return BatchSummary(
            count=sum(p.count for p in parts),
            capacity=first.capacity,
            servers=first.servers,
            losses=np.concatenate([p.losses for p in parts]),
            served=np.concatenate([p.served for p in parts]),
            durations=np.concatenate([p.durations for p in parts]),
            state_time_m1=np.concatenate([p.state_time_m1 for p in parts]),
            level_crossings=np.concatenate([p.level_crossings for p in parts]),
            orbital_counts=np.concatenate([p.orbital_counts for p in parts]),
            queueing_counts=np.concatenate([p.queueing_counts for p in parts]),
            orbital_losses=np.concatenate([p.orbital_losses for p in parts]),
            orbital_durations=np.concatenate([p.orbital_durations for p in parts]),
        )


def collect_batch(
    spec: SystemSpec,
    count: int,
    master_seed: int,
    salt: tuple[int, ...] = (),
    workers: int = 1,
) -> BatchSummary:
    """Run ``count`` replications, keeping per-record columns instead of
    record objects (memory-friendly at verification scale)."""
    if count < 1:
        raise ConfigError(f"replication count must be >= 1, got {count}")
    if workers <= 1 or count < 4 * workers:
        return _collect_range((spec, master_seed, salt, 0, count))
    ranges = _chunk_ranges(count, workers)
    args = [(spec, master_seed, salt, lo, hi) for lo, hi in ranges]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_collect_range, args))
    return BatchSummary.concat(parts)


def _collect_range(args) -> BatchSummary:
    spec, master_seed, salt, lo, hi = args
    n = hi - lo
    cap = spec.capacity
    m1 = spec.servers - 1
    losses = np.empty(n, dtype=np.int64)
    served = np.empty(n, dtype=np.int64)
    durations = np.empty(n, dtype=np.float64)
    state_m1 = np.empty(n, dtype=np.float64)
    crossings = np.empty((n, cap + 1), dtype=np.int64)
    orb_counts = np.empty(n, dtype=np.int64)
    q_counts = np.empty(n, dtype=np.int64)
    orb_losses: list[int] = []
    orb_durations: list[float] = []
    for k, rec in enumerate(iter_replications(spec, n, master_seed, salt, start=lo)):
        losses[k] = rec.losses
        served[k] = rec.served
        durations[k] = rec.duration
        state_m1[k] = rec.time_in_state[m1]
        crossings[k, :] = rec.level_crossings[1:]
        orb_counts[k] = rec.orbital_count
        q_counts[k] = rec.queueing_period_count
        orb_losses.extend(rec.orbital_losses)
        orb_durations.extend(rec.orbital_durations)
    return BatchSummary(
        count=n,
        capacity=cap,
        servers=spec.servers,
        losses=losses,
        served=served,
        durations=durations,
        state_time_m1=state_m1,
        level_crossings=crossings,
        orbital_counts=orb_counts,
        queueing_counts=q_counts,
        orbital_losses=np.asarray(orb_losses, dtype=np.int64),
        orbital_durations=np.asarray(orb_durations, dtype=np.float64),
    )


def simulate_excursion_crossings(
    level: int,
    rng: np.random.Generator,
    step_cap: int = DEFAULT_STEP_CAP,
) -> int:
    """Upward crossings of ``level`` during one excursion of the symmetric
    +-1 walk (from 0 until the first return to 0).

    Each uniform draw below 1/2 is a +1 step.  Two exact shortcuts bound the
    work without changing the count's law:

    * a negative excursion never visits positive levels, so its count is 0
      after the first step;
    * for level 1 the only entry into 1 from 0 is the first step (the walk
      cannot revisit 0 before the excursion ends);
    * while the walk sits at least two levels above ``level``, a block of
      ``pos - level`` steps can neither produce a crossing (the path stays
      at or above ``level``) nor end the excursion, so only the block's
      endpoint matters and it is drawn from the exact binomial law of a
      +-1 step sum.

    Raises :class:`ExcursionTruncatedError` once the excursion provably
    exceeds ``step_cap`` steps; the partial count rides on the exception.
    """
    if not (isinstance(level, int) and level >= 1):
        raise ConfigError(f"crossing level must be an integer >= 1, got {level}")
    if rng.random() >= 0.5:
        return 0
    if level == 1:
        return 1
    pos = 1
    steps = 1
    count = 0
    binomial = rng.binomial
    rand = rng.random
    while pos != 0:
        if pos >= level + 2:
            span = pos - level
            if steps + span > step_cap:
                raise ExcursionTruncatedError(count, steps, step_cap)
            pos += 2 * int(binomial(span, 0.5)) - span
            steps += span
        else:
            if steps >= step_cap:
                raise ExcursionTruncatedError(count, steps, step_cap)
            if rand() < 0.5:
                pos += 1
                if pos == level:
                    count += 1
            else:
                pos -= 1
            steps += 1
    return count


@dataclass(frozen=True)
class ExcursionBatch:
    """Crossing counts for a batch of excursions.

    Truncated excursions contribute their partial counts and are tallied in
    ``truncated``.
    """

    level: int
    counts: np.ndarray
    truncated: int
    step_cap: int

    @property
    def mean(self) -> float:
        return float(self.counts.mean())


def run_excursions(
    level: int,
    count: int,
    master_seed: int,
    step_cap: int = DEFAULT_STEP_CAP,
    salt: tuple[int, ...] = (),
) -> ExcursionBatch:
    """Simulate ``count`` excursions sequentially on stream
    ``(master_seed, salt, level)``."""
    if count < 1:
        raise ConfigError(f"excursion count must be >= 1, got {count}")
    rng = stream(master_seed, level, salt)
    counts = np.empty(count, dtype=np.int64)
    truncated = 0
    for i in range(count):
        try:
            counts[i] = simulate_excursion_crossings(level, rng, step_cap)
        except ExcursionTruncatedError as exc:
            counts[i] = exc.crossings
            truncated += 1
    return ExcursionBatch(level=level, counts=counts, truncated=truncated, step_cap=step_cap)
