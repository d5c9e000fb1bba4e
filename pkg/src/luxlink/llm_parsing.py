"""Strict extraction of layouts and search directives from model responses.

The parser scans the raw text for top-level JSON objects (prose and code
fences around them are fine), takes the first one matching the expected
schema and converts it to domain objects.  Failures are typed: a
:class:`SolutionParseError` means no usable JSON was found, while a
:class:`SolutionConstraintError` means the JSON was understood but the
proposed solution breaks a constraint; the two drive different retry
prompts.
"""

from __future__ import annotations

import json
import math
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .scene import Violation, WindowLayout, validate_layout

if TYPE_CHECKING:  # pragma: no cover
    from .config import Scenario


class SolutionParseError(ValueError):
    """No JSON object matching the schema could be extracted."""


class SolutionConstraintError(ValueError):
    """A structurally valid solution violates the problem constraints."""

    def __init__(self, message: str, violations: list[Violation] | None = None):
        super().__init__(message)
        self.violations = violations or []


def iter_json_objects(text: str) -> Iterator[dict]:
    """Yield every parseable top-level JSON object embedded in ``text``."""
    depth = 0
    start = -1
    in_string = False
    escape = False
    for i, ch in enumerate(text):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0 and start >= 0:
                try:
                    obj = json.loads(text[start:i + 1])
                except json.JSONDecodeError:
                    obj = None
                if isinstance(obj, dict):
                    yield obj
                start = -1


def _windows_to_layout(obj: dict, scenario: "Scenario") -> WindowLayout:
    windows = obj["windows"]
    n = scenario.room.n_windows
    if len(windows) != n:
        raise SolutionConstraintError(
            f"expected {n} windows, got {len(windows)}")
    try:
        rows = sorted(
            ((float(w["x"]), math.radians(float(w["theta_deg"])),
              math.radians(float(w["psi_deg"]))) for w in windows),
            key=lambda r: r[0])
    except (KeyError, TypeError, ValueError) as err:
        raise SolutionParseError(f"malformed window entry: {err}") from err
    xs, thetas, psis = (np.array(col) for col in zip(*rows))
    layout = WindowLayout(xs=xs, thetas=thetas, psis=psis % (2 * math.pi))
    violations = validate_layout(layout, scenario.room, scenario.cfg.d_min,
                                 scenario.theta_steer_max)
    if violations:
        raise SolutionConstraintError(
            "; ".join(v.message for v in violations), violations)
    return layout


def _looks_like_windows(obj: dict) -> bool:
    return isinstance(obj.get("windows"), list) and all(
        isinstance(w, dict) for w in obj["windows"])


def parse_solution(text: str, scenario: "Scenario") -> WindowLayout:
    """Extract the first schema-matching layout from a raw response."""
    for obj in iter_json_objects(text):
        if _looks_like_windows(obj):
            return _windows_to_layout(obj, scenario)
    raise SolutionParseError("no JSON object with a 'windows' list found")


def _clamp(value, lo, hi, notes: list[str], name: str):
    if value < lo or value > hi:
        notes.append(f"{name}={value} clamped to [{lo}, {hi}]")
    return min(max(value, lo), hi)


def parse_search_directive(text: str, scenario: "Scenario",
                           pool: tuple[str, ...], defaults) -> tuple:
    """Parse the algorithm pick, hyper-parameters and starting population.

    Returns (algorithm, HeuristicConfig, population_vectors, notes).
    Out-of-range hyper-parameters are clamped with a note; malformed
    population members are dropped with a note.
    """
    from .heuristics import HeuristicConfig, layout_to_vector

    chosen = None
    for obj in iter_json_objects(text):
        if "algorithm" in obj:
            chosen = obj
            break
    if chosen is None:
        raise SolutionParseError("no JSON object with an 'algorithm' key found")
    algo = str(chosen["algorithm"]).lower().strip()
    if algo not in pool:
        raise SolutionConstraintError(
            f"algorithm {algo!r} not in registered pool {list(pool)}")

    notes: list[str] = []
    hp = chosen.get("hyper_parameters") or {}
    base = defaults.to_dict()
    if isinstance(hp, dict):
        spec = {
            "population_size": (2, 500, int),
            "crossover_prob": (0.0, 1.0, float),
            "mutation_prob": (0.0, 1.0, float),
            "elite_count": (0, 10, int),
            "temp_high": (1e-9, 1e6, float),
            "temp_low": (1e-9, 1e6, float),
            "cooling": (1e-6, 0.999999, float),
        }
        for key, (lo, hi, cast) in spec.items():
            if key in hp:
                try:
                    base[key] = cast(_clamp(cast(hp[key]), lo, hi, notes, key))
                except (TypeError, ValueError):
                    notes.append(f"{key}={hp[key]!r} ignored")
        unknown = set(hp) - set(spec)
        if unknown:
            notes.append(f"ignored hyper-parameters: {sorted(unknown)}")
    base["elite_count"] = min(base["elite_count"], base["population_size"] - 1)
    config = HeuristicConfig.from_dict(base)

    vectors = []
    for k, member in enumerate(chosen.get("population") or []):
        try:
            if isinstance(member, dict) and _looks_like_windows(member):
                vectors.append(layout_to_vector(_windows_to_layout(member, scenario)))
            else:
                notes.append(f"population member {k} has no window list; dropped")
        except (SolutionParseError, SolutionConstraintError) as err:
            notes.append(f"population member {k} dropped: {err}")
    return algo, config, vectors, notes


def parse_injections(text: str, scenario: "Scenario") -> tuple[list[np.ndarray], list[str]]:
    """Parse replacement individuals from an update response."""
    from .heuristics import layout_to_vector

    chosen = None
    for obj in iter_json_objects(text):
        if "inject" in obj:
            chosen = obj
            break
    if chosen is None:
        raise SolutionParseError("no JSON object with an 'inject' list found")
    notes: list[str] = []
    vectors: list[np.ndarray] = []
    for k, member in enumerate(chosen.get("inject") or []):
        try:
            if isinstance(member, dict) and _looks_like_windows(member):
                vectors.append(layout_to_vector(_windows_to_layout(member, scenario)))
            else:
                notes.append(f"injection {k} has no window list; dropped")
        except (SolutionParseError, SolutionConstraintError) as err:
            notes.append(f"injection {k} dropped: {err}")
    return vectors, notes
