"""Run configuration: a line-oriented ``key = value`` format with sections.

Example::

    [problem]
    id = ex52
    e1 = const:1.0
    T = 6.283185307179586

    [grid]
    n = 128

    [solver]
    residual_tol = 1e-10
    seed = 42

    [domain]
    lambda_min = -20
    lambda_max = 20
    c1_ceiling = 50
    box = -1,1,-1,1

    [output]
    dir = out

Blank lines and lines starting with ``#`` or ``;`` are ignored.  Unknown
sections and keys are errors; missing keys take the defaults below.
Function-valued parameters use ``const:c``, ``sin:a,omega,phase`` or
``poly:c0,c1,...``.
"""

from __future__ import annotations

import math
import re
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .catalog import Example, ExampleParams, TimeFunction, make_example
from .continuation import DomainSpec, StepConfig
from .degree import Box
from .errors import ConfigError, MissingRequired, ParseError, UnknownKey
from .model import DEFAULT_NODES, MIN_NODES, PeriodicGrid
from .solver import Damping, SingularPolicy, SolverConfig

DEFAULT_SEED = 42
SEED_ENV = "PHIBRANCH_SEED"
PROBLEM_IDS = ("ex51", "ex52", "ex53", "linval")

# problem parameters accepted per problem id
PARAM_SCHEMA = {
    "ex51": ("T", "e1", "e2", "R", "G"),
    "ex52": ("T", "e1", "e2", "G", "sup_h1"),
    "ex53": ("T", "e1", "e2", "C0", "sigma", "R0", "delta"),
    "linval": ("T",),
}

_SECTION = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]$")
_ASSIGN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _positive_float(text):
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError("must be a positive finite number")
    return v


def _finite_float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int_at_least(lo, hi=None):
    def conv(text):
        v = int(text)
        if v < lo or (hi is not None and v > hi):
            raise ValueError(f"must be an integer in [{lo}, {hi if hi is not None else 'inf'}]")
        return v

    return conv


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError("seed must be in [0, 2^64)")
    return v


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text

    return conv


def _box(text):
    vals = [float(v) for v in text.split(",")]
    return Box.from_bounds(vals)


def _problem_id(text):
    if text not in PROBLEM_IDS:
        raise ValueError(f"unknown problem id (known: {', '.join(PROBLEM_IDS)})")
    return text


_PARAM_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "T": _positive_float,
    "e1": TimeFunction.parse,
    "e2": TimeFunction.parse,
    "R": _positive_float,
    "G": _choice("none", "quadratic"),
    "sup_h1": _positive_float,
    "C0": _positive_float,
    "sigma": _positive_float,
    "R0": _positive_float,
    "delta": _positive_float,
}

SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "problem": {"id": _problem_id, **_PARAM_CONVERTERS},
    "grid": {"n": _int_at_least(MIN_NODES), "grid_n": _int_at_least(MIN_NODES)},
    "solver": {
        "residual_tol": _positive_float,
        "max_newton_iters": _int_at_least(1),
        "fd_step": _positive_float,
        "damping": _choice("none", "linesearch"),
        "max_halvings": _int_at_least(0, 30),
        "singular": _choice("minnorm", "raise"),
        "seed": _seed,
    },
    "domain": {
        "lambda_min": _finite_float,
        "lambda_max": _finite_float,
        "c1_ceiling": _positive_float,
        "box": _box,
        "boundary_margin": _positive_float,
        "h0": _positive_float,
        "initial_step": _positive_float,
        "min_step": _positive_float,
        "max_step": _positive_float,
        "max_points": _int_at_least(1),
    },
    "output": {"dir": str},
}


@dataclass(frozen=True)
class RunConfig:
    problem_id: str
    params: dict[str, Any] = field(default_factory=dict)
    grid_n: int = DEFAULT_NODES
    solver: SolverConfig = field(default_factory=SolverConfig)
    lambda_window: tuple[float, float] = (-20.0, 20.0)
    c1_ceiling: float = 50.0
    box: Box | None = None
    boundary_margin: float = 0.02
    step: StepConfig = field(default_factory=StepConfig)
    seed: int = DEFAULT_SEED
    output_dir: Path = Path(".")

    def example_params(self) -> ExampleParams:
        return replace(ExampleParams(), **self.params)

    def example(self) -> Example:
        if self.problem_id == "linval":
            return make_example("linval", ExampleParams(T=self.params.get("T", 1.0)))
        return make_example(self.problem_id, self.example_params())

    def grid(self, period: float) -> PeriodicGrid:
        return PeriodicGrid(self.grid_n, period)

    def domain(self, example: Example) -> DomainSpec:
        return DomainSpec.for_problem(
            example.problem,
            start_box=self.box,
            window=self.lambda_window,
            c1_ceiling=self.c1_ceiling,
            boundary_margin=self.boundary_margin,
        )

    def with_environment(self, environ: Mapping[str, str]) -> RunConfig:
        """Apply the ``PHIBRANCH_SEED`` override."""
        if SEED_ENV not in environ:
            return self
        try:
            seed = _seed(environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}: {exc}") from None
        return replace(self, seed=seed)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; see the module docstring for the format."""
    values: dict[str, dict[str, Any]] = {name: {} for name in SCHEMA}
    lines: dict[tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                raise ParseError(lineno, f"unknown section [{section}]")
            continue
        m = _ASSIGN.match(line)
        if not m:
            raise ParseError(lineno, f"expected 'key = value' or '[section]', got {line!r}")
        key, value = m.group(1), m.group(2).strip()
        if section is None:
            raise ParseError(lineno, f"key {key!r} appears before any [section]")
        if key not in SCHEMA[section]:
            raise UnknownKey(f"{section}.{key}")
        if key in values[section] or (section == "grid" and values["grid"]):
            raise ParseError(lineno, f"duplicate key {section}.{key}")
        if value == "":
            raise ParseError(lineno, f"empty value for {section}.{key}")
        try:
            values[section][key] = SCHEMA[section][key](value)
        except (ValueError, TypeError) as exc:
            raise ParseError(lineno, f"{section}.{key} = {value!r}: {exc}") from None
        lines[(section, key)] = lineno

    problem = values["problem"]
    if "id" not in problem:
        raise MissingRequired("problem.id")
    pid = problem.pop("id")
    for key in problem:
        if key not in PARAM_SCHEMA[pid]:
            raise UnknownKey(f"problem.{key} (not a parameter of {pid})")

    grid_n = values["grid"].get("n", values["grid"].get("grid_n", DEFAULT_NODES))
    s = values["solver"]
    solver = SolverConfig(
        residual_tol=s.get("residual_tol", 1e-10),
        max_newton_iters=s.get("max_newton_iters", 50),
        fd_step=s.get("fd_step", 1e-7),
        damping=Damping(s.get("damping", "none")),
        max_halvings=s.get("max_halvings", 30),
        singular=SingularPolicy(s.get("singular", "minnorm")),
    )
    d = values["domain"]
    window = (d.get("lambda_min", -20.0), d.get("lambda_max", 20.0))
    if not window[0] <= 0.0 <= window[1] or window[0] == window[1]:
        raise ParseError(lines.get(("domain", "lambda_max"), lines.get(("domain", "lambda_min"), 0)),
                         "need lambda_min <= 0 <= lambda_max")
    step_defaults = StepConfig()
    try:
        step = StepConfig(
            h0=d.get("h0", step_defaults.h0),
            initial_step=d.get("initial_step", step_defaults.initial_step),
            min_step=d.get("min_step", step_defaults.min_step),
            max_step=d.get("max_step", step_defaults.max_step),
            max_points=d.get("max_points", step_defaults.max_points),
        )
    except ValueError as exc:
        line = max((v for (sec, _), v in lines.items() if sec == "domain"), default=0)
        raise ParseError(line, str(exc)) from None
    return RunConfig(
        problem_id=pid,
        params=problem,
        grid_n=grid_n,
        solver=solver,
        lambda_window=window,
        c1_ceiling=d.get("c1_ceiling", 50.0),
        box=d.get("box"),
        boundary_margin=d.get("boundary_margin", 0.02),
        step=step,
        seed=s.get("seed", DEFAULT_SEED),
        output_dir=Path(values["output"].get("dir", ".")),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


__all__ = ["PARAM_SCHEMA", "RunConfig", "load_config", "parse_config"]
