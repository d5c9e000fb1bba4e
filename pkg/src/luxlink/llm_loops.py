"""Model-in-the-loop optimizers: direct proposal (LMWO) and guided search (LHS).

Both loops are sequential (one in-flight request per run), log every
exchange verbatim for audit, and never execute model output; responses are
parsed strictly as data.  With a scripted stub client the loops are fully
deterministic and run without any network access.
"""

from __future__ import annotations

import time
from collections import deque
from typing import Optional

import numpy as np

from .config import Scenario
from .heuristics import (FitnessBatch, HeuristicConfig, ObjectiveBundle,
                         _RunState, evolve, layout_to_vector, make_objective,
                         repair_population, solution_bounds, vector_to_layout)
from .llm_client import ChatClient, LlmExchange, LlmTransportError
from .llm_parsing import (SolutionConstraintError, SolutionParseError,
                          parse_injections, parse_search_directive,
                          parse_solution)
from .llm_prompts import (FeedbackPayload, PromptBundle, build_feedback_prompt,
                          build_init_prompt, build_lhs_init_prompt,
                          build_lhs_update_prompt, history_entry)
from .objective import Evaluator, PerformanceReport
from .traces import OptimizerTrace, TraceStep

RETRY_HINTS = {
    "parse-error": ("Your previous reply could not be parsed: {err}. "
                    "Reply again with exactly one JSON object in the "
                    "required format and nothing else."),
    "constraint-error": ("Your previous proposal violates the constraints: "
                         "{err}. Fix the violations and reply again in the "
                         "required format."),
    "threshold": ("Your previous proposal scored phi_o = {score:.4f}, which "
                  "does not exceed the required starting quality {thr}. "
                  "Propose a stronger layout in the required format."),
}


class _ExchangeLog:
    def __init__(self, client: ChatClient, deterministic_timing: bool):
        self.client = client
        self.deterministic_timing = deterministic_timing
        self.records: list[dict] = []

    def send(self, bundle: PromptBundle, kind: str, retry_index: int = 0,
             images: Optional[list[str]] = None) -> str:
        messages = bundle.render_messages()
        t0 = time.perf_counter()
        text = self.client.send(
            messages, images=images if self.client.supports_images else None,
            kind=kind)
        latency = 0 if self.deterministic_timing else int(
            (time.perf_counter() - t0) * 1000)
        self.records.append(LlmExchange(
            kind=kind, messages=messages, response=text, outcome="pending",
            retry_index=retry_index, latency_ms=latency).to_json_dict())
        return text

    def outcome(self, value: str, note: str = "") -> None:
        self.records[-1]["outcome"] = value
        if note:
            self.records[-1]["note"] = note


def _observe_report(state: _RunState, report: PerformanceReport) -> bool:
    vec = layout_to_vector(report.layout)
    batch = FitnessBatch(np.array([report.phi_o]), np.array([report.phi_w]),
                         np.array([report.phi_d]),
                         np.array([report.feasible]))
    return state.observe(vec[None, :], batch)


def lmwo_run(scenario: Scenario, client: ChatClient,
             evaluator: Optional[Evaluator] = None,
             threshold: Optional[float] = None,
             max_init_retries: int = 5, stall_window: int = 5,
             max_steps: int = 10, image_dir: Optional[str] = None,
             deterministic_timing: bool = False) -> OptimizerTrace:
    """Direct proposal loop.

    Phase 1 asks for an initial layout until its score exceeds
    ``threshold`` (default: the scenario's starting-quality bar) or the
    retry budget runs out, in which case the best attempt is kept and
    flagged.  Phase 2 iterates feedback prompts, stopping when the best
    score is unchanged for ``stall_window`` consecutive steps or after
    ``max_steps`` steps.  Transport failure aborts with the partial trace.
    """
    ev = evaluator if evaluator is not None else Evaluator(scenario)
    thr = scenario.cfg.t_i_init if threshold is None else threshold
    trace = OptimizerTrace(method="lmwo", seed=0, budget=1 + max_steps)
    state = _RunState(deterministic_timing)
    log = _ExchangeLog(client, deterministic_timing)
    trace.metadata["exchanges"] = log.records

    # phase 1: initialization
    best_init: Optional[PerformanceReport] = None
    bundle = build_init_prompt(scenario)
    accepted = False
    for attempt in range(max_init_retries):
        try:
            text = log.send(bundle, "init", retry_index=attempt)
        except LlmTransportError as err:
            trace.metadata["aborted"] = f"transport failure during init: {err}"
            return trace
        try:
            layout = parse_solution(text, scenario)
        except SolutionParseError as err:
            log.outcome("parse-error", str(err))
            bundle = _with_hint(build_init_prompt(scenario), "parse-error", err=err)
            continue
        except SolutionConstraintError as err:
            log.outcome("constraint-error", str(err))
            bundle = _with_hint(build_init_prompt(scenario), "constraint-error", err=err)
            continue
        report = ev.evaluate(layout)
        log.outcome("layout", f"phi_o={report.phi_o:.6f}")
        if best_init is None or report.phi_o > best_init.phi_o:
            best_init = report
        if report.phi_o > thr:
            accepted = True
            break
        bundle = _with_hint(build_init_prompt(scenario), "threshold",
                            score=report.phi_o, thr=thr)
    if best_init is None:
        trace.metadata["aborted"] = "initialization produced no parseable layout"
        return trace
    if not accepted:
        trace.metadata["init_flag"] = (
            f"threshold {thr} not met in {max_init_retries} attempts; "
            "best attempt kept")

    _observe_report(state, best_init)
    trace.append(state.trace_step(1))
    history: deque[str] = deque(maxlen=5)
    latest = best_init
    payload = FeedbackPayload.from_report(latest, scenario, image_dir, tag="init")
    history.append(history_entry(latest.layout, payload))

    # phase 2: optimization
    best_phi = latest.phi_o
    since_improved = 0
    for step_i in range(1, max_steps + 1):
        bundle = build_feedback_prompt(scenario, tuple(history), payload)
        layout = None
        for attempt in range(max_init_retries):
            try:
                text = log.send(bundle, "feedback", retry_index=attempt,
                                images=payload.image_paths())
            except LlmTransportError as err:
                trace.metadata["aborted"] = f"transport failure at step {step_i}: {err}"
                return trace
            try:
                layout = parse_solution(text, scenario)
                log.outcome("layout")
                break
            except SolutionParseError as err:
                log.outcome("parse-error", str(err))
                bundle = _with_hint(build_feedback_prompt(scenario, tuple(history),
                                                          payload),
                                    "parse-error", err=err)
            except SolutionConstraintError as err:
                log.outcome("constraint-error", str(err))
                bundle = _with_hint(build_feedback_prompt(scenario, tuple(history),
                                                          payload),
                                    "constraint-error", err=err)
        if layout is None:
            trace.metadata["aborted"] = f"no parseable reply at step {step_i}"
            break
        latest = ev.evaluate(layout)
        log.outcome("layout", f"phi_o={latest.phi_o:.6f}")
        _observe_report(state, latest)
        trace.append(state.trace_step(1 + step_i))
        payload = FeedbackPayload.from_report(latest, scenario, image_dir,
                                              tag=f"step{step_i}")
        history.append(history_entry(latest.layout, payload))
        if latest.phi_o > best_phi:
            best_phi = latest.phi_o
            since_improved = 0
        else:
            since_improved += 1
        if since_improved >= stall_window:
            trace.metadata["stopped"] = f"stalled for {stall_window} steps"
            break
    else:
        trace.metadata["stopped"] = f"step cap {max_steps} reached"

    _store_best(trace, state)
    return trace


def _with_hint(bundle: PromptBundle, kind: str, **kwargs) -> PromptBundle:
    hint = RETRY_HINTS[kind].format(**kwargs)
    return PromptBundle(task_description=hint + "\n\n" + bundle.task_description,
                        environment_info=bundle.environment_info,
                        io_format=bundle.io_format,
                        history=bundle.history,
                        instruction_knowledge=bundle.instruction_knowledge)


def _store_best(trace: OptimizerTrace, state: _RunState) -> None:
    if state.lex_best_vec is not None:
        phi_o, phi_w, phi_d, feas = state.lex_best_fields
        trace.metadata["best"] = {
            "vector": [float(v) for v in state.lex_best_vec],
            "phi_o": phi_o, "phi_w": phi_w, "phi_d": phi_d, "feasible": feas,
        }


def lhs_run(scenario: Scenario, client: ChatClient,
            pool: tuple[str, ...] = ("ga", "saga"),
            k_generations: int = 100, max_updates: int = 10, seed: int = 0,
            evaluator: Optional[Evaluator] = None,
            defaults: Optional[HeuristicConfig] = None,
            max_init_retries: int = 5, image_dir: Optional[str] = None,
            stall_rounds: int = 3,
            deterministic_timing: bool = False) -> OptimizerTrace:
    """Guided-search loop.

    Phase 1 asks the client to pick an algorithm from the registered pool,
    parameterize it and seed its population; on repeated failure the run
    falls back to annealed search with default parameters.  Phase 2
    alternates ``k_generations`` of the chosen heuristic with one
    population-refresh exchange, until ``max_updates`` refreshes happen or
    the best score stops moving for ``stall_rounds`` consecutive rounds.
    """
    if not pool:
        raise ValueError("algorithm pool must be nonempty")
    defaults = defaults if defaults is not None else HeuristicConfig()
    ev = evaluator if evaluator is not None else Evaluator(
        scenario, infeasible_mode="soft")
    bundle_obj = make_objective(scenario, "simulator", evaluator=ev)
    rng = np.random.default_rng(seed)
    budget = max_updates * (k_generations + 1) + 1
    trace = OptimizerTrace(method="lhs", seed=seed, budget=budget)
    state = _RunState(deterministic_timing)
    log = _ExchangeLog(client, deterministic_timing)
    trace.metadata["exchanges"] = log.records
    trace.metadata["notes"] = []
    trace.metadata["update_boundaries"] = []

    # phase 1: algorithm pick, hyper-parameters, starting population
    algo, config, seed_vectors = None, None, []
    prompt = build_lhs_init_prompt(scenario, pool, defaults.population_size)
    for attempt in range(max_init_retries):
        try:
            text = log.send(prompt, "lhs-init", retry_index=attempt)
        except LlmTransportError as err:
            trace.metadata["aborted"] = f"transport failure during init: {err}"
            return trace
        try:
            algo, config, seed_vectors, notes = parse_search_directive(
                text, scenario, pool, defaults)
            log.outcome("data", f"algorithm={algo}")
            trace.metadata["notes"].extend(notes)
            break
        except SolutionParseError as err:
            log.outcome("parse-error", str(err))
            prompt = _with_hint(build_lhs_init_prompt(scenario, pool,
                                                      defaults.population_size),
                                "parse-error", err=err)
        except SolutionConstraintError as err:
            log.outcome("constraint-error", str(err))
            prompt = _with_hint(build_lhs_init_prompt(scenario, pool,
                                                      defaults.population_size),
                                "constraint-error", err=err)
    if algo is None:
        algo, config = "saga", defaults
        trace.metadata["notes"].append(
            "initialization failed; falling back to saga with default parameters")

    lo, hi = solution_bounds(scenario)
    pop = np.array(seed_vectors, dtype=float) if seed_vectors else np.empty((0, lo.size))
    if pop.shape[0] < config.population_size:
        pad = config.population_size - pop.shape[0]
        base = layout_to_vector(scenario.udw)
        jitter = rng.normal(0.0, 0.05, size=(pad, lo.size)) * (hi - lo)
        pop = np.vstack([pop, base[None, :] + jitter])
    pop = repair_population(pop[:config.population_size], scenario)
    replacement = "generational" if algo == "ga" else "metropolis"
    trace.metadata["algorithm"] = algo
    trace.metadata["config"] = config.to_dict()

    # phase 2: heuristic chunks with population refreshes in between
    step = 0
    history: deque[str] = deque(maxlen=5)
    best_before = float("-inf")
    flat_rounds = 0
    for round_i in range(1, max_updates + 1):
        if round_i > 1:
            trace.metadata["update_boundaries"].append(step + 1)
        pop, fit, step = evolve(bundle_obj, config, rng, replacement, trace,
                                state, initial_pop=pop, generations=k_generations,
                                step_offset=step + (0 if round_i == 1 else 1))
        best_report = _best_report(state, scenario, ev)
        payload = FeedbackPayload.from_report(best_report, scenario, image_dir,
                                              tag=f"round{round_i}")
        history.append(history_entry(best_report.layout, payload))

        if state.best_fit <= best_before + 1e-12:
            flat_rounds += 1
            if flat_rounds >= stall_rounds:
                trace.metadata["stopped"] = (
                    f"converged: best unchanged for {stall_rounds} rounds")
                break
        else:
            flat_rounds = 0
        best_before = state.best_fit

        if round_i == max_updates:
            trace.metadata["stopped"] = f"update cap {max_updates} reached"
            break
        prompt = build_lhs_update_prompt(scenario, tuple(history), payload)
        injected: list[np.ndarray] = []
        for attempt in range(max_init_retries):
            try:
                text = log.send(prompt, "lhs-update", retry_index=attempt,
                                images=payload.image_paths())
            except LlmTransportError as err:
                trace.metadata["aborted"] = f"transport failure at round {round_i}: {err}"
                _store_best(trace, state)
                return trace
            try:
                injected, notes = parse_injections(text, scenario)
                log.outcome("data", f"{len(injected)} injections")
                trace.metadata["notes"].extend(notes)
                break
            except SolutionParseError as err:
                log.outcome("parse-error", str(err))
                prompt = _with_hint(build_lhs_update_prompt(scenario, tuple(history),
                                                            payload),
                                    "parse-error", err=err)
        if injected:
            worst = np.argsort(fit)[:len(injected)]
            for slot, vec in zip(worst, injected):
                pop[slot] = vec
            pop = repair_population(pop, scenario)

    trace.metadata["n_evaluations"] = bundle_obj.n_evaluations
    _store_best(trace, state)
    return trace


def _best_report(state: _RunState, scenario: Scenario,
                 ev: Evaluator) -> PerformanceReport:
    """Re-evaluate the fitness-best solution to obtain its full report."""
    vec = state.best_row[4]
    return ev.evaluate(vector_to_layout(vec, scenario.room.n_windows))
