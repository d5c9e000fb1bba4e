"""Seed-reproducible black-box optimizers over the layout search space.

A solution is the flat vector [x_1..x_N, theta_1..theta_N, psi_1..psi_N]
(3N genes).  All methods share the same repair operator, so every vector
they ever evaluate decodes to a layout that passes validation.  Fitness is
the penalised joint score, while the returned "best" solution of a run is
re-ranked feasible-first, so a constraint-missing individual can steer the
search but never wins it.

Runs are fully determined by (method, config, scenario, seed): random
draws come from one ``numpy`` generator consumed in a fixed per-generation
order regardless of which branches are taken.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import Scenario
from .objective import BaselineCache, Evaluator
from .scene import WindowLayout
from .traces import OptimizerTrace, TraceStep


@dataclass(frozen=True)
class HeuristicConfig:
    population_size: int = 50
    generations: int = 1500
    crossover_prob: float = 0.7
    mutation_prob: float = 0.3
    elite_count: int = 2
    temp_high: float = 100.0
    temp_low: float = 5.0
    cooling: float = 0.98
    tournament_size: int = 2
    mutation_sigma_frac: float = 0.05    # of each gene's range
    stagnation_window: int = 200         # generations without improvement

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population must be >= 2")
        if not 0.0 <= self.crossover_prob <= 1.0 or not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.elite_count < 0 or self.elite_count >= self.population_size:
            raise ValueError("elite count must be in [0, population)")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HeuristicConfig":
        return cls(**data)


# ---------------------------------------------------------------------------
# Solution codec and repair
# ---------------------------------------------------------------------------

def solution_bounds(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Per-gene (lo, hi) for the 3N solution vector."""
    n = scenario.room.n_windows
    lo = np.concatenate([np.full(n, scenario.room.wall_lo),
                         np.zeros(n),
                         np.zeros(n)])
    hi = np.concatenate([np.full(n, scenario.room.wall_hi),
                         np.full(n, scenario.theta_steer_max),
                         np.full(n, 2.0 * math.pi)])
    return lo, hi


def layout_to_vector(layout: WindowLayout) -> np.ndarray:
    return np.concatenate([layout.xs, layout.thetas, layout.psis])


def vector_to_layout(vec: np.ndarray, n: int) -> WindowLayout:
    vec = np.asarray(vec, dtype=float)
    if vec.size != 3 * n:
        raise ValueError(f"solution vector must have length {3 * n}")
    return WindowLayout(xs=vec[:n], thetas=vec[n:2 * n], psis=vec[2 * n:])


def repair_population(pop: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Minimal-displacement sweep making every row decode to a valid layout.

    Abscissas are sorted, pushed right to open the required spacing, pulled
    back under the far wall bound and re-swept; elevations clamp to the
    steering cone and azimuths wrap.  Idempotent on feasible rows.
    """
    room = scenario.room
    n = room.n_windows
    lo, hi = room.wall_lo, room.wall_hi
    d_min = scenario.cfg.d_min
    if lo + (n - 1) * d_min > hi + 1e-12:
        raise ValueError(f"{n} windows with spacing {d_min} m cannot fit on a "
                         f"{room.length} m facade")
    out = np.array(pop, dtype=float, copy=True)
    if out.ndim == 1:
        out = out[None, :]
        squeeze = True
    else:
        squeeze = False

    xs = np.sort(out[:, :n], axis=1)
    xs[:, 0] = np.maximum(xs[:, 0], lo)
    for k in range(1, n):
        xs[:, k] = np.maximum(xs[:, k], xs[:, k - 1] + d_min)
    xs[:, n - 1] = np.minimum(xs[:, n - 1], hi)
    for k in range(n - 2, -1, -1):
        xs[:, k] = np.minimum(xs[:, k], xs[:, k + 1] - d_min)
    xs[:, 0] = np.maximum(xs[:, 0], lo)
    for k in range(1, n):
        xs[:, k] = np.maximum(xs[:, k], xs[:, k - 1] + d_min)
    out[:, :n] = xs

    out[:, n:2 * n] = np.clip(out[:, n:2 * n], 0.0, scenario.theta_steer_max)
    out[:, 2 * n:] = np.mod(out[:, 2 * n:], 2.0 * math.pi)
    return out[0] if squeeze else out


def repair(vec: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Repair one solution vector; see :func:`repair_population`."""
    return repair_population(np.asarray(vec, dtype=float), scenario)


# ---------------------------------------------------------------------------
# Objective bundles
# ---------------------------------------------------------------------------

@dataclass
class FitnessBatch:
    phi_o: np.ndarray
    phi_w: np.ndarray
    phi_d: np.ndarray
    feasible: np.ndarray


class ObjectiveBundle:
    """Pairs a population objective with the shared repair operator."""

    def __init__(self, scenario: Scenario,
                 evaluate_population: Callable[[np.ndarray], FitnessBatch]):
        self.scenario = scenario
        self.evaluate_population = evaluate_population
        self.n_evaluations = 0

    def __call__(self, pop: np.ndarray) -> FitnessBatch:
        self.n_evaluations += pop.shape[0]
        return self.evaluate_population(pop)

    def repair(self, pop: np.ndarray) -> np.ndarray:
        return repair_population(pop, self.scenario)


def simulator_objective(scenario: Scenario, evaluator: Optional[Evaluator] = None,
                        los_mode: str = "analytic") -> ObjectiveBundle:
    """Fitness = penalised joint score from the full simulator."""
    ev = evaluator if evaluator is not None else Evaluator(
        scenario, infeasible_mode="soft", los_mode=los_mode)
    n = scenario.room.n_windows

    def run(pop: np.ndarray) -> FitnessBatch:
        p = pop.shape[0]
        phi_o = np.empty(p)
        phi_w = np.empty(p)
        phi_d = np.empty(p)
        feas = np.empty(p, dtype=bool)
        for i in range(p):
            rep = ev.evaluate(vector_to_layout(pop[i], n))
            phi_o[i], phi_w[i], phi_d[i], feas[i] = (rep.phi_o, rep.phi_w,
                                                     rep.phi_d, rep.feasible)
        return FitnessBatch(phi_o, phi_w, phi_d, feas)

    return ObjectiveBundle(scenario, run)


def sphere_objective(scenario: Scenario) -> ObjectiveBundle:
    """Toy mode: maximise the negative sphere function in normalised gene space.

    The optimum sits at normalised coordinates spread over [0.2, 0.8],
    which decodes to a spacing-feasible layout, so the repaired optimum
    value is exactly 0.
    """
    lo, hi = solution_bounds(scenario)
    targets = np.linspace(0.2, 0.8, lo.size)

    def run(pop: np.ndarray) -> FitnessBatch:
        z = (pop - lo) / (hi - lo)
        f = ((z - targets) ** 2).sum(axis=1)
        p = pop.shape[0]
        return FitnessBatch(phi_o=-f, phi_w=np.zeros(p), phi_d=np.zeros(p),
                            feasible=np.ones(p, dtype=bool))

    return ObjectiveBundle(scenario, run)


def sphere_optimum(scenario: Scenario) -> np.ndarray:
    lo, hi = solution_bounds(scenario)
    return lo + (hi - lo) * np.linspace(0.2, 0.8, lo.size)


def make_objective(scenario: Scenario, objective: str,
                   evaluator: Optional[Evaluator] = None,
                   los_mode: str = "analytic") -> ObjectiveBundle:
    if objective == "simulator":
        return simulator_objective(scenario, evaluator, los_mode)
    if objective == "sphere":
        return sphere_objective(scenario)
    raise ValueError(f"unknown objective {objective!r}")


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class _RunState:
    """Best-so-far bookkeeping shared by all runners."""

    def __init__(self, deterministic_timing: bool):
        self.t0 = time.perf_counter()
        self.deterministic_timing = deterministic_timing
        self.best_fit = float("-inf")
        self.best_row: Optional[tuple[float, float, float, bool, np.ndarray]] = None
        self.lex_best_key = (-1, float("-inf"))
        self.lex_best_vec: Optional[np.ndarray] = None
        self.lex_best_fields: Optional[tuple[float, float, float, bool]] = None

    def elapsed_ms(self) -> int:
        if self.deterministic_timing:
            return 0
        return int((time.perf_counter() - self.t0) * 1000)

    def observe(self, pop: np.ndarray, batch: FitnessBatch) -> bool:
        """Fold a batch into the running bests; True if the fitness best improved."""
        i = int(np.argmax(batch.phi_o))
        improved = batch.phi_o[i] > self.best_fit or self.best_row is None
        if improved:
            self.best_fit = float(batch.phi_o[i])
            self.best_row = (float(batch.phi_o[i]), float(batch.phi_w[i]),
                             float(batch.phi_d[i]), bool(batch.feasible[i]),
                             pop[i].copy())
        for j in range(pop.shape[0]):
            key = (1 if batch.feasible[j] else 0, float(batch.phi_o[j]))
            if key > self.lex_best_key:
                self.lex_best_key = key
                self.lex_best_vec = pop[j].copy()
                self.lex_best_fields = (float(batch.phi_o[j]), float(batch.phi_w[j]),
                                        float(batch.phi_d[j]), bool(batch.feasible[j]))
        return bool(improved)

    def trace_step(self, step: int) -> TraceStep:
        phi_o, phi_w, phi_d, feas, vec = self.best_row
        return TraceStep(step=step, best_objective=phi_o, phi_w=phi_w,
                         phi_d=phi_d, feasible=feas,
                         elapsed_ms=self.elapsed_ms(), layout=vec)


def _tournament(rng: np.random.Generator, fitness: np.ndarray, size: int) -> np.ndarray:
    p = fitness.size
    cand = rng.integers(0, p, size=(p, size))
    return cand[np.arange(p), np.argmax(fitness[cand], axis=1)]


def _variation(rng: np.random.Generator, parents: np.ndarray,
               config: HeuristicConfig, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Uniform crossover plus per-gene Gaussian mutation.

    All random draws happen unconditionally so the generator stream does
    not depend on which pairs cross over or which genes mutate.
    """
    p, g = parents.shape
    half = p // 2
    pa, pb = parents[:half], parents[half:2 * half]
    do_cross = rng.random(half) < config.crossover_prob
    mask = rng.random((half, g)) < 0.5
    ca = np.where(do_cross[:, None] & mask, pb, pa)
    cb = np.where(do_cross[:, None] & mask, pa, pb)
    children = np.vstack([ca, cb] + ([parents[-1:]] if p % 2 else []))

    mut_mask = rng.random((p, g)) < config.mutation_prob
    noise = rng.normal(0.0, 1.0, size=(p, g)) * (config.mutation_sigma_frac * (hi - lo))
    return children + np.where(mut_mask, noise, 0.0)


def _replace_metropolis(rng: np.random.Generator, pop, fit, children, child_fit,
                        temperature: float, strict: bool):
    """Pairwise replacement; the acceptance uniforms are always drawn so a
    near-zero temperature run is stream-identical to a strict run."""
    u = rng.random(pop.shape[0])
    delta = child_fit - fit
    accept = delta >= 0
    if not strict and temperature > 0:
        accept = accept | (u < np.exp(np.minimum(delta / temperature, 0.0)))
    new_pop = np.where(accept[:, None], children, pop)
    new_fit = np.where(accept, child_fit, fit)
    return new_pop, new_fit, accept


def _apply_elitism(pop, fit, field_pairs, prev_pop, prev_fit, elite: int):
    """Guarantee the ``elite`` best of the previous generation survive.

    ``field_pairs`` is a list of (new_array, prev_array) companions updated
    alongside the population rows.  Arrays are modified in place.
    """
    if elite <= 0:
        return
    order_prev = np.argsort(prev_fit)[::-1][:elite]
    order_new = np.argsort(fit)
    for slot, idx in enumerate(order_prev):
        if prev_fit[idx] > fit[order_new[slot]]:
            tgt = order_new[slot]
            pop[tgt] = prev_pop[idx]
            fit[tgt] = prev_fit[idx]
            for arr, prev_arr in field_pairs:
                arr[tgt] = prev_arr[idx]


def evolve(bundle: ObjectiveBundle, config: HeuristicConfig,
           rng: np.random.Generator, replacement: str,
           trace: OptimizerTrace, state: _RunState,
           initial_pop: Optional[np.ndarray] = None,
           generations: Optional[int] = None,
           step_offset: int = 0) -> tuple[np.ndarray, np.ndarray, int]:
    """Shared evolutionary engine.

    ``replacement`` is "generational" (children inherit the slots, elites
    carried over), "metropolis" (pairwise annealed acceptance with the
    geometric temperature schedule) or "strict" (pairwise, improvements
    only).  Returns the final population, its fitness and the last step
    index written to the trace.
    """
    if replacement not in ("generational", "metropolis", "strict"):
        raise ValueError(f"unknown replacement {replacement!r}")
    lo, hi = solution_bounds(bundle.scenario)
    gens = config.generations if generations is None else generations

    if initial_pop is None:
        pop = bundle.repair(rng.uniform(lo, hi, size=(config.population_size, lo.size)))
    else:
        pop = bundle.repair(np.array(initial_pop, dtype=float))
    batch = bundle(pop)
    fit = batch.phi_o.copy()
    fields = FitnessBatch(fit, batch.phi_w.copy(), batch.phi_d.copy(),
                          batch.feasible.copy())
    state.observe(pop, batch)
    step = step_offset
    trace.append(state.trace_step(step))

    since_improved = 0
    for g in range(1, gens + 1):
        parents_idx = _tournament(rng, fit, config.tournament_size)
        children = _variation(rng, pop[parents_idx], config, lo, hi)
        children = bundle.repair(children)
        cbatch = bundle(children)

        if replacement == "generational":
            new_pop, new_fit = children, cbatch.phi_o.copy()
            new_fields = FitnessBatch(new_fit, cbatch.phi_w.copy(),
                                      cbatch.phi_d.copy(), cbatch.feasible.copy())
        else:
            schedule = config.temp_high * config.cooling ** (g - 1)
            strict = replacement == "strict" or schedule < config.temp_low
            temperature = max(config.temp_low, schedule)
            new_pop, new_fit, accept = _replace_metropolis(
                rng, pop, fit, children, cbatch.phi_o, temperature, strict)
            new_fields = FitnessBatch(
                new_fit,
                np.where(accept, cbatch.phi_w, fields.phi_w),
                np.where(accept, cbatch.phi_d, fields.phi_d),
                np.where(accept, cbatch.feasible, fields.feasible))

        pair_fields = [(new_fields.phi_w, fields.phi_w),
                       (new_fields.phi_d, fields.phi_d),
                       (new_fields.feasible, fields.feasible)]
        _apply_elitism(new_pop, new_fit, pair_fields, pop, fit, config.elite_count)
        pop, fit = new_pop, new_fit
        fields = FitnessBatch(fit, new_fields.phi_w, new_fields.phi_d,
                              new_fields.feasible)

        improved = state.observe(children, cbatch)
        step = step_offset + g
        trace.append(state.trace_step(step))
        since_improved = 0 if improved else since_improved + 1
        if since_improved >= config.stagnation_window:
            trace.metadata["stopped"] = f"stagnation after {g} generations"
            break
    return pop, fit, step


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _finish(trace: OptimizerTrace, state: _RunState, bundle: ObjectiveBundle,
            scenario: Scenario) -> OptimizerTrace:
    trace.metadata["n_evaluations"] = bundle.n_evaluations
    if state.lex_best_vec is not None:
        phi_o, phi_w, phi_d, feas = state.lex_best_fields
        trace.metadata["best"] = {
            "vector": [float(v) for v in state.lex_best_vec],
            "phi_o": phi_o, "phi_w": phi_w, "phi_d": phi_d, "feasible": feas,
        }
    return trace


def best_layout(trace: OptimizerTrace, scenario: Scenario) -> WindowLayout:
    """Decode the feasible-first best solution recorded in a trace."""
    vec = np.array(trace.metadata["best"]["vector"])
    return vector_to_layout(vec, scenario.room.n_windows)


def random_search(scenario: Scenario, budget: int, seed: int,
                  evaluator: Optional[Evaluator] = None,
                  objective: str = "simulator",
                  deterministic_timing: bool = False) -> OptimizerTrace:
    """Budget i.i.d. repaired uniform samples; the trace records best-so-far."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    bundle = make_objective(scenario, objective, evaluator)
    lo, hi = solution_bounds(scenario)
    trace = OptimizerTrace(method="rc", seed=seed, budget=budget)
    state = _RunState(deterministic_timing)

    step = 0
    chunk = 256
    while step < budget:
        k = min(chunk, budget - step)
        pop = bundle.repair(rng.uniform(lo, hi, size=(k, lo.size)))
        batch = bundle(pop)
        for i in range(k):
            row = FitnessBatch(batch.phi_o[i:i + 1], batch.phi_w[i:i + 1],
                               batch.phi_d[i:i + 1], batch.feasible[i:i + 1])
            state.observe(pop[i:i + 1], row)
            step += 1
            trace.append(state.trace_step(step))
    return _finish(trace, state, bundle, scenario)


def ga_run(scenario: Scenario, config: HeuristicConfig, seed: int,
           objective: str = "simulator", evaluator: Optional[Evaluator] = None,
           replacement: str = "generational",
           deterministic_timing: bool = False) -> OptimizerTrace:
    """Generational GA with tournament selection, uniform crossover,
    per-gene Gaussian mutation and elitism."""
    rng = np.random.default_rng(seed)
    bundle = make_objective(scenario, objective, evaluator)
    trace = OptimizerTrace(method="ga", seed=seed, budget=config.generations + 1,
                           metadata={"config": config.to_dict()})
    state = _RunState(deterministic_timing)
    evolve(bundle, config, rng, replacement, trace, state)
    return _finish(trace, state, bundle, scenario)


def saga_run(scenario: Scenario, config: HeuristicConfig, seed: int,
             objective: str = "simulator", evaluator: Optional[Evaluator] = None,
             deterministic_timing: bool = False) -> OptimizerTrace:
    """GA variations with Metropolis replacement on a geometric cooling
    schedule; below the low temperature it degenerates to strict
    improvement-only replacement."""
    rng = np.random.default_rng(seed)
    bundle = make_objective(scenario, objective, evaluator)
    trace = OptimizerTrace(method="saga", seed=seed, budget=config.generations + 1,
                           metadata={"config": config.to_dict()})
    state = _RunState(deterministic_timing)
    evolve(bundle, config, rng, "metropolis", trace, state)
    return _finish(trace, state, bundle, scenario)


def metropolis_acceptance(delta: float, temperature: float) -> float:
    """Probability of accepting a fitness change ``delta`` at ``temperature``."""
    if delta >= 0:
        return 1.0
    if temperature <= 0:
        return 0.0
    return math.exp(delta / temperature)
