"""Event-driven simulation: plain paths, conditioned estimates, particles.

Randomness is organized around one master seed: every trajectory, every
particle, and the resampling decisions each draw from their own counted
stream of a counter-based generator, so results are reproducible bit for
bit and independent of batching order.

Exponential waits use ``-log1p(-u) / rate`` and move selection walks the
model's canonical move enumeration with a single uniform, so a simulated
path is determined entirely by its stream.
"""

import bisect
import heapq
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (DomainError, NoSurvivorsError, NumericalError,
                     ValidationError)
from .model import Model, absorbed_marker, is_absorbed, is_interior
from .solver import QsdResult

_EVENT_BUDGET = 10 ** 7


@dataclass(frozen=True)
class RngPlan:
    """Counted family of independent random streams under one master seed.

    Stream k is a Philox generator keyed by ``(master_seed, k)``; separate
    keys give statistically independent streams without any state shared
    between them.
    """

    master_seed: int

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValidationError(
                f"master seed must fit in 64 bits, got {self.master_seed}")

    def stream(self, index: int) -> np.random.Generator:
        if index < 0:
            raise DomainError(f"stream index must be nonnegative, got {index}")
        key = np.array([self.master_seed, index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def _exponential(rng, rate: float) -> float:
    return -math.log1p(-rng.random()) / rate


def _pick_move(rng, targets, rates, total):
    u = rng.random() * total
    acc = 0.0
    for target, rate in zip(targets, rates):
        acc += rate
        if u < acc:
            return target
    return targets[-1]


# ---------------------------------------------------------------------------
# single paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """A single jump path: states and the times they were entered.

    ``times[0]`` is 0 and ``states[0]`` the initial state.  If the path was
    absorbed, the last entry is the absorption event and ``t_end`` its time;
    otherwise the path is alive at ``t_end`` (the horizon) in its last
    state.
    """

    times: tuple
    states: tuple
    t_end: float
    absorbed: bool

    @property
    def final_state(self):
        return self.states[-1]

    def state_at(self, t: float):
        """State occupied at time t (right-continuous)."""
        if not 0.0 <= t <= self.t_end:
            raise DomainError(f"t = {t} outside [0, {self.t_end}]")
        i = bisect.bisect_right(self.times, t) - 1
        return self.states[i]


def simulate_path(model: Model, initial, t_max: float,
                  rng: np.random.Generator) -> Trajectory:
    """One path of the jump chain from ``initial`` up to time ``t_max``.

    Stops early on absorption (any type extinct, or a catastrophe).  Event
    times and moves are drawn from ``rng`` alone.
    """
    n = tuple(int(v) for v in initial)
    if len(n) != model.r or not is_interior(n):
        raise DomainError(f"initial state {n} is not interior for r = {model.r}")
    if t_max <= 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    times = [0.0]
    states = [n]
    t = 0.0
    for _ in range(_EVENT_BUDGET):
        targets, rates, total = model.transition_table(n)
        if total <= 0.0:
            return Trajectory(tuple(times), tuple(states), t_max, False)
        t += _exponential(rng, total)
        if t >= t_max:
            return Trajectory(tuple(times), tuple(states), t_max, False)
        n = _pick_move(rng, targets, rates, total)
        times.append(t)
        states.append(n)
        if is_absorbed(n):
            return Trajectory(tuple(times), tuple(states), t, True)
    raise NumericalError(f"event budget {_EVENT_BUDGET} exhausted before "
                         f"t_max = {t_max}; the model may explode")


def validate_trajectory(model: Model, trajectory: Trajectory) -> None:
    """Re-verify a path against the model's move structure.

    Checks strictly increasing event times, that every step is a move the
    model allows with positive rate, and that absorption appears exactly
    where flagged.  Raises on the first violation.
    """
    times, states = trajectory.times, trajectory.states
    if len(times) != len(states) or not states:
        raise ValidationError("times and states must align and be non-empty")
    if times[0] != 0.0:
        raise ValidationError(f"paths must start at time 0, got {times[0]}")
    for i in range(1, len(times)):
        if not times[i] > times[i - 1]:
            raise ValidationError(f"event times not increasing at step {i}")
        prev, cur = states[i - 1], states[i]
        targets, rates, _ = model.transition_table(prev)
        legal = any(t == cur and rate > 0 for t, rate in zip(targets, rates))
        if not legal:
            raise ValidationError(f"step {i}: {prev} -> {cur} is not a move "
                                  "the model allows")
    for mid in states[:-1]:
        if is_absorbed(mid):
            raise ValidationError("path continues past an absorbed state")
    if trajectory.absorbed != is_absorbed(states[-1]):
        raise ValidationError("absorption flag disagrees with the final state")
    if trajectory.absorbed and trajectory.t_end != times[-1]:
        raise ValidationError("absorbed paths must end at their last event")
    if not trajectory.absorbed and trajectory.t_end < times[-1]:
        raise ValidationError("horizon precedes the last recorded event")


# ---------------------------------------------------------------------------
# empirical laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalLaw:
    """A probability law as a mapping from states to weights."""

    weights: dict

    def __post_init__(self):
        total = sum(self.weights.values())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValidationError(f"weights sum to {total}, not 1")

    @classmethod
    def from_counts(cls, counts) -> "EmpiricalLaw":
        total = sum(counts.values())
        if total <= 0:
            raise ValidationError("no mass to normalize")
        return cls({state: count / total for state, count in counts.items()
                    if count > 0})

    def mass_at(self, state) -> float:
        return self.weights.get(tuple(state), 0.0)

    def tv_against(self, other) -> float:
        """Total-variation distance to another law.

        ``other`` is either another empirical law or a solved result (its
        law read on its space); mass outside the other's support counts in
        full.
        """
        if isinstance(other, EmpiricalLaw):
            keys = set(self.weights) | set(other.weights)
            return 0.5 * sum(abs(self.weights.get(k, 0.0) -
                                 other.weights.get(k, 0.0)) for k in keys)
        space, law = other.space, other.law
        total = 0.0
        for i, state in enumerate(space.states):
            total += abs(self.weights.get(state, 0.0) - law[i])
        total += sum(w for state, w in self.weights.items()
                     if state not in space.index)
        return 0.5 * total


def occupation_measure(trajectory: Trajectory,
                       t_start: float = 0.0) -> EmpiricalLaw:
    """Time-weighted law of the states a path visits after a burn-in.

    Each visited interior state gets weight proportional to the time the
    path spent in it between ``t_start`` and the end of the path.
    """
    if not 0.0 <= t_start < trajectory.t_end:
        raise DomainError(f"t_start = {t_start} outside [0, {trajectory.t_end})")
    weights: Counter = Counter()
    times = list(trajectory.times) + [trajectory.t_end]
    for i, state in enumerate(trajectory.states):
        if is_absorbed(state):
            break
        lo = max(times[i], t_start)
        hi = times[i + 1]
        if hi > lo:
            weights[state] += hi - lo
    if not weights:
        raise ValidationError("no occupation time accumulated after t_start")
    return EmpiricalLaw.from_counts(weights)


# ---------------------------------------------------------------------------
# conditioned estimates by brute force
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionalEstimate:
    """Monte Carlo estimate of the conditioned law at a fixed time."""

    law: EmpiricalLaw
    survival: float
    trajectories: int
    survivors: int
    t: float


def estimate_conditional(model: Model, initial, t: float, trajectories: int,
                         plan: RngPlan, first_stream: int = 0) -> ConditionalEstimate:
    """Estimate the law at time t conditioned on survival, by many paths.

    Trajectory k draws from stream ``first_stream + k`` of the plan, so any
    contiguous batch of indices reproduces exactly.  Raises when every path
    was absorbed by t.
    """
    if trajectories < 1:
        raise DomainError(f"need at least one trajectory, got {trajectories}")
    counts: Counter = Counter()
    survivors = 0
    for k in range(trajectories):
        path = simulate_path(model, initial, t, plan.stream(first_stream + k))
        if not path.absorbed:
            counts[path.final_state] += 1
            survivors += 1
    if survivors == 0:
        raise NoSurvivorsError(
            f"all {trajectories} paths were absorbed before t = {t}",
            survival_estimate=0.0)
    return ConditionalEstimate(law=EmpiricalLaw.from_counts(counts),
                               survival=survivors / trajectories,
                               trajectories=trajectories,
                               survivors=survivors, t=t)


# ---------------------------------------------------------------------------
# particle approximation of the conditioned law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticleResult:
    """Final state of a particle approximation to the conditioned law."""

    law: EmpiricalLaw
    occupation: EmpiricalLaw
    particles: int
    deaths: int
    events: int
    t_max: float

    @property
    def death_rate(self) -> float:
        """Deaths per particle per unit time; estimates the decay rate."""
        return self.deaths / (self.particles * self.t_max)


def fleming_viot(model: Model, initial, particles: int, t_max: float,
                 plan: RngPlan, occupation_from: float | None = None) -> ParticleResult:
    """Particle system whose empirical law tracks the conditioned law.

    ``particles`` walkers move independently by the model's rates; a walker
    that would be absorbed instead teleports onto a uniformly chosen other
    walker.  Walker k draws from stream k; the teleport choices draw from
    stream ``particles``.  The occupation law time-averages all walkers from
    ``occupation_from`` (default ``t_max / 2``) to the horizon.
    """
    if particles < 2:
        raise DomainError(f"need at least two particles, got {particles}")
    if t_max <= 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    if occupation_from is None:
        occupation_from = t_max / 2.0
    if not 0.0 <= occupation_from < t_max:
        raise DomainError(f"occupation_from = {occupation_from} outside "
                          f"[0, {t_max})")
    start = tuple(int(v) for v in initial)
    if len(start) != model.r or not is_interior(start):
        raise DomainError(f"initial state {start} is not interior")

    states = [start] * particles
    streams = [plan.stream(i) for i in range(particles)]
    resampler = plan.stream(particles)
    tables = [None] * particles
    since = [0.0] * particles
    occupation: Counter = Counter()
    heap = []
    pushes = 0

    def schedule(i, now):
        nonlocal pushes
        table = model.transition_table(states[i])
        tables[i] = table
        if table[2] > 0.0:
            heapq.heappush(heap, (now + _exponential(streams[i], table[2]),
                                  pushes, i))
            pushes += 1

    def settle(i, now):
        lo = max(since[i], occupation_from)
        if now > lo:
            occupation[states[i]] += now - lo
        since[i] = now

    for i in range(particles):
        schedule(i, 0.0)
    deaths = 0
    events = 0
    for _ in range(_EVENT_BUDGET):
        if not heap or heap[0][0] >= t_max:
            break
        t, _, i = heapq.heappop(heap)
        targets, rates, total = tables[i]
        target = _pick_move(streams[i], targets, rates, total)
        events += 1
        settle(i, t)
        if is_absorbed(target):
            deaths += 1
            u = resampler.random()
            j = int(u * (particles - 1))
            if j >= i:
                j += 1
            states[i] = states[j]
        else:
            states[i] = target
        schedule(i, t)
    else:
        raise NumericalError(f"event budget {_EVENT_BUDGET} exhausted before "
                             f"t_max = {t_max}")
    for i in range(particles):
        settle(i, t_max)
    return ParticleResult(
        law=EmpiricalLaw.from_counts(Counter(states)),
        occupation=EmpiricalLaw.from_counts(occupation),
        particles=particles, deaths=deaths, events=events, t_max=t_max)


# ---------------------------------------------------------------------------
# the conditioned chain itself
# ---------------------------------------------------------------------------

def simulate_qprocess(model: Model, qsd: QsdResult, initial, t_max: float,
                      rng: np.random.Generator) -> Trajectory:
    """One path of the chain conditioned to never die.

    Moves inside the solved space are reweighted by the ratio of survival
    profiles between target and source; moves out of the space (absorption
    or truncation overflow) get weight zero.  The resulting path never
    absorbs.
    """
    space, h = qsd.space, qsd.survival_profile
    n = tuple(int(v) for v in initial)
    if n not in space.index:
        raise DomainError(f"initial state {n} is outside the solved space")
    if t_max <= 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    times = [0.0]
    states = [n]
    t = 0.0
    for _ in range(_EVENT_BUDGET):
        targets, rates, _ = model.transition_table(n)
        h_n = h[space.index[n]]
        new_targets = []
        new_rates = []
        total = 0.0
        for target, rate in zip(targets, rates):
            k = space.index.get(target)
            if k is None:
                continue
            w = rate * h[k] / h_n
            new_targets.append(target)
            new_rates.append(w)
            total += w
        if total <= 0.0:
            return Trajectory(tuple(times), tuple(states), t_max, False)
        t += _exponential(rng, total)
        if t >= t_max:
            return Trajectory(tuple(times), tuple(states), t_max, False)
        n = _pick_move(rng, new_targets, new_rates, total)
        times.append(t)
        states.append(n)
    raise NumericalError(f"event budget {_EVENT_BUDGET} exhausted before "
                         f"t_max = {t_max}")
