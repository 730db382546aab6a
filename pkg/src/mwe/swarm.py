"""Three population metaheuristics over bounded continuous spaces.

All three optimizers share the same skeleton: a fixed-slot population,
per-candidate counter-based RNG streams (Philox keyed by (seed, slot)),
clamping to bounds after every move, and a best-ever record that makes
the convergence trace monotone. Per-candidate streams make results
independent of fitness-evaluation order, so candidates could be scored
concurrently without changing a single bit of the trace.

The "improved grey wolf" variant replaces the linear control factor
with a cosine schedule rescaled into [a_min, a_max], drives its random
coefficients with a chaotic doubling map, initializes the population
from chaotic orbits, and greedily mutates the alpha wolf with a
shrinking Gaussian.

The fox-hunt optimizer alternates (fair coin) between an exploitation
move built from the best position scaled by random "time" draws and an
exploration move around the best position.

The modified gorilla-troop optimizer runs the classical three-case
exploration update with transition probability pp, then refines the
best solution by elite opposition, a Cauchy inverse-CDF step, and a
tangent-flight step, each kept only when fitter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ALGORITHMS = ("igwo", "fox", "mgto")

_TENT_EPS = 1e-12
_GRAVITY = 9.81


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray = None  # bool per dim; decode-time hint only

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be matching 1-D arrays")
        if not (lo < hi).all():
            bad = np.where(lo >= hi)[0]
            raise ValueError(f"lower >= upper at dimensions {bad.tolist()}")
        flags = (np.zeros(lo.shape, dtype=bool) if self.integer is None
                 else np.asarray(self.integer, dtype=bool))
        object.__setattr__(self, "integer", flags)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        return bool((x >= self.lower).all() and (x <= self.upper).all())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lower + rng.random(self.dim) * self.span


@dataclass(frozen=True)
class OptimizerParams:
    algorithm: str = "igwo"
    pop_size: int = 20
    max_iter: int = 100
    pp: float = 0.02      # mgto transition probability
    c1: float = 0.19      # fox jump coefficient, northward
    c2: float = 0.80      # fox jump coefficient, opposite
    a_min: float = 0.02   # igwo cosine-control floor
    a_max: float = 2.3    # igwo cosine-control ceiling

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, "
                             f"got '{self.algorithm}'")
        if self.pop_size < 1 or self.max_iter < 1:
            raise ValueError("pop_size and max_iter must be >= 1")


@dataclass
class Candidate:
    position: np.ndarray
    fitness: float
    stream: np.random.Generator
    tent: float = 0.5  # chaotic orbit state (igwo)


def candidate_stream(seed: int, slot: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, slot]))


# ---- micro-equations, kept as named functions so each is unit-testable ----

def tent_step(y: float) -> float:
    """Chaotic doubling map y -> 2y mod 1."""
    return (2.0 * y) % 1.0


def cosine_control(t: int, max_iter: int) -> float:
    """2*cos(pi/2 * t/T): 2 at t=0, 0 at t=T."""
    return 2.0 * np.cos(np.pi / 2.0 * t / max_iter)


def rescale_control(a_raw: float, a_min: float, a_max: float) -> float:
    """Affine map of [0, 2] onto [a_min, a_max]."""
    return a_min + (a_raw / 2.0) * (a_max - a_min)


def fox_jump(mean_time: float) -> float:
    return 0.5 * _GRAVITY * mean_time ** 2


def eobl_point(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Elite opposition: reflect x across the population span [y, z]."""
    return y + z - x


def cauchy_inverse(p: float) -> float:
    """Standard Cauchy quantile tan(pi*(p - 1/2))."""
    return np.tan(np.pi * (p - 0.5))


def tangent_flight(v: float) -> float:
    """tan(v*pi/2) for v in [0, 1): 0 at 0, unbounded near 1."""
    return np.tan(v * np.pi / 2.0)


class _TentOrbit:
    """Doubling-map orbit with degeneracy reset.

    In float64 the map loses one mantissa bit per step, so every orbit
    collapses to exactly 0 within ~52 steps; when that happens (or the
    state leaves (eps, 1-eps)) the orbit restarts from the candidate's
    own stream, keeping the sequence deterministic.
    """

    def __init__(self, stream: np.random.Generator):
        self.stream = stream
        self.y = stream.uniform(_TENT_EPS, 1.0 - _TENT_EPS)

    def next(self) -> float:
        y = tent_step(self.y)
        if y <= _TENT_EPS or y >= 1.0 - _TENT_EPS:
            y = self.stream.uniform(_TENT_EPS, 1.0 - _TENT_EPS)
        self.y = y
        return y

    def vector(self, n: int) -> np.ndarray:
        return np.array([self.next() for _ in range(n)])


# ---- the three steps ----

def _leader_indices(fitnesses, count=3):
    order = np.argsort(fitnesses, kind="stable")
    idx = list(order[:count])
    while len(idx) < count:  # tiny populations reuse the last leader
        idx.append(idx[-1])
    return idx


def igwo_step(pop, orbits, t, params: OptimizerParams, bounds: Bounds,
              objective, global_stream) -> None:
    """One improved-grey-wolf iteration, in place."""
    if not pop:
        raise ValueError("empty population")
    fit = [c.fitness for c in pop]
    ia, ib, ic = _leader_indices(fit)
    leaders = [pop[ia].position.copy(), pop[ib].position.copy(),
               pop[ic].position.copy()]
    a = rescale_control(cosine_control(t, params.max_iter),
                        params.a_min, params.a_max)
    dim = bounds.dim
    for cand, orbit in zip(pop, orbits):
        targets = []
        for leader in leaders:
            r1 = orbit.vector(dim)
            r2 = orbit.vector(dim)
            big_a = 2.0 * a * r1 - a
            big_c = 2.0 * r2
            dist = np.abs(big_c * leader - cand.position)
            targets.append(leader - big_a * dist)
        cand.position = bounds.clamp(sum(targets) / 3.0)
        cand.fitness = float(objective(cand.position))
    # shrinking Gaussian mutation of the alpha, greedy accept
    fit = [c.fitness for c in pop]
    alpha = pop[int(np.argmin(fit))]
    sigma = 0.1 * bounds.span * (1.0 - t / params.max_iter)
    mutant = bounds.clamp(alpha.position +
                          global_stream.standard_normal(dim) * sigma)
    mutant_fit = float(objective(mutant))
    if mutant_fit < alpha.fitness:
        alpha.position = mutant
        alpha.fitness = mutant_fit


def fox_step(pop, best_position, t, params: OptimizerParams, bounds: Bounds,
             objective) -> None:
    """One fox-hunt iteration, in place."""
    if not pop:
        raise ValueError("empty population")
    dim = bounds.dim
    # every fox draws its time vector first; MinT is a population statistic
    times = [1.0 - c.stream.random(dim) for c in pop]  # U(0, 1], elementwise
    mean_times = [tv.mean() for tv in times]
    min_t = min(mean_times)
    a = 2.0 * (1.0 - t / params.max_iter)
    for cand, time_vec, mean_time in zip(pop, times, mean_times):
        if cand.stream.random() >= 0.5:
            # exploitation: distance terms collapse around the best position
            sp = best_position / time_vec
            dist_s_t = sp * time_vec
            dist_fox_prey = 0.5 * dist_s_t
            jump = fox_jump(mean_time)
            c = params.c1 if cand.stream.random() < 0.5 else params.c2
            new = dist_fox_prey * jump * c
        else:
            new = best_position * cand.stream.random(dim) * min_t * a
        cand.position = bounds.clamp(new)
        cand.fitness = float(objective(cand.position))


def mgto_step(pop, t, params: OptimizerParams, bounds: Bounds,
              objective, global_stream) -> None:
    """One modified gorilla-troop iteration, in place (greedy accepts)."""
    if not pop:
        raise ValueError("empty population")
    dim = bounds.dim
    snapshot = [c.position.copy() for c in pop]
    decay = 1.0 - t / params.max_iter
    for slot, cand in enumerate(pop):
        s = cand.stream
        r_case = s.random()
        f = np.cos(2.0 * s.random()) + 1.0
        big_c = f * decay
        l_coef = big_c * s.uniform(-1.0, 1.0)
        if r_case < params.pp:
            new = bounds.lower + s.random(dim) * bounds.span
        elif r_case >= 0.5:
            z = s.uniform(-big_c, big_c, dim)
            h = z * cand.position
            peer = snapshot[int(s.integers(len(snapshot)))]
            new = (s.random() - big_c) * peer + l_coef * h
        else:
            peer = snapshot[int(s.integers(len(snapshot)))]
            diff = cand.position - peer
            new = cand.position - l_coef * (l_coef * diff + s.random() * diff)
        new = bounds.clamp(new)
        new_fit = float(objective(new))
        if new_fit < cand.fitness:
            cand.position = new
            cand.fitness = new_fit
    # leader refinement: EOBL, Cauchy step, tangent flight; greedy each
    fit = [c.fitness for c in pop]
    leader = pop[int(np.argmin(fit))]
    positions = np.array([c.position for c in pop])
    y = positions.min(axis=0)
    z = positions.max(axis=0)
    for proposal in _leader_proposals(leader.position, y, z, bounds,
                                      decay, global_stream):
        prop_fit = float(objective(proposal))
        if prop_fit < leader.fitness:
            leader.position = proposal
            leader.fitness = prop_fit


def _leader_proposals(best, y, z, bounds, decay, stream):
    dim = bounds.dim
    scale = 0.1 * bounds.span * decay + 1e-12
    yield bounds.clamp(eobl_point(best, y, z))
    cauchy = np.array([cauchy_inverse(u) for u in stream.random(dim)])
    yield bounds.clamp(best + scale * cauchy)
    v = stream.uniform(0.0, 1.0 - 1e-9, dim)
    flight = np.array([tangent_flight(x) for x in v])
    sign = np.where(stream.random(dim) < 0.5, -1.0, 1.0)
    yield bounds.clamp(best + scale * sign * flight)


# ---- driver ----

@dataclass
class OptimizeResult:
    position: np.ndarray
    fitness: float
    trace: list  # rows: (iteration, best_fitness, mean_fitness)
    evaluations: int


def optimize(objective, bounds: Bounds, params: OptimizerParams,
             seed: int = 0, warm_starts=None) -> OptimizeResult:
    """Run the configured algorithm; returns best-ever and the trace.

    The trace has max_iter + 1 rows; row 0 is the initialized population
    before any step. best_fitness is monotone non-increasing.
    warm_starts, when given, replaces the initial positions of slots
    0..len-1 (clamped); slot 0 is conventionally the incumbent config.
    """
    evals = 0

    def scored(x):
        nonlocal evals
        evals += 1
        return objective(x)

    warm_starts = list(warm_starts or [])
    if len(warm_starts) > params.pop_size:
        raise ValueError(f"{len(warm_starts)} warm starts exceed "
                         f"population size {params.pop_size}")
    pop = []
    orbits = []
    for slot in range(params.pop_size):
        stream = candidate_stream(seed, slot)
        orbit = _TentOrbit(stream)
        if slot < len(warm_starts):
            pos = bounds.clamp(np.asarray(warm_starts[slot], dtype=np.float64))
        elif params.algorithm == "igwo":
            pos = bounds.lower + orbit.vector(bounds.dim) * bounds.span
        else:
            pos = bounds.sample(stream)
        cand = Candidate(position=pos, fitness=float(scored(pos)), stream=stream)
        pop.append(cand)
        orbits.append(orbit)
    global_stream = candidate_stream(seed, params.pop_size)

    best_pos = None
    best_fit = np.inf

    def track():
        nonlocal best_pos, best_fit
        for c in pop:
            if c.fitness < best_fit:
                best_fit = c.fitness
                best_pos = c.position.copy()

    track()
    trace = [(0, best_fit, float(np.mean([c.fitness for c in pop])))]
    for t in range(params.max_iter):
        if params.algorithm == "igwo":
            igwo_step(pop, orbits, t, params, bounds, scored, global_stream)
        elif params.algorithm == "fox":
            fox_step(pop, best_pos, t, params, bounds, scored)
        else:
            mgto_step(pop, t, params, bounds, scored, global_stream)
        track()
        trace.append((t + 1, best_fit,
                      float(np.mean([c.fitness for c in pop]))))
    return OptimizeResult(position=best_pos, fitness=best_fit, trace=trace,
                          evaluations=evals)


def trace_to_csv(trace) -> str:
    lines = ["iteration,best_fitness,mean_fitness"]
    for it, best, mean in trace:
        lines.append(f"{it},{best!r},{mean!r}")
    return "\n".join(lines) + "\n"
