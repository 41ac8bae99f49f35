"""Problem files: JSON schema, loading into :class:`GpeProblem`, and the kinetics case study."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .errors import IsaError
from .expr import parse_many
from .interval import Interval, IntervalBox
from .oracle import closed_form_output
from .setinv import DEFAULT_BUDGET, ENGINES, GpeProblem, Measurement
from .staircase import DEFAULT_N_J_MAX

_NUM = {"type": "number"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["variables", "expressions", "domain", "measurements", "epsilon"],
    "properties": {
        "variables": {"type": "array", "minItems": 1, "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"}},
        "expressions": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "domain": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        },
        "measurements": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["output", "y", "eta"],
                "properties": {
                    "output": {"type": "integer", "minimum": 0},
                    "y": _NUM,
                    "eta": {"type": "number", "minimum": 0},
                },
            },
        },
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "engine": {"enum": list(ENGINES)},
        "N": {"type": "integer", "minimum": 1},
        "n_J_max": {"type": ["integer", "null"], "minimum": 1},
        "budget": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
    },
}


class ProblemError(IsaError, ValueError):
    """Invalid problem file; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def validate(doc) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as err:
        field = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ProblemError(err.message, field) from None
    n = len(doc["variables"])
    if len(doc["domain"]) != n:
        raise ProblemError(f"expected {n} intervals, one per variable", "domain")
    for i, (lo, hi) in enumerate(doc["domain"]):
        if not lo <= hi:
            raise ProblemError(f"lower bound {lo} exceeds upper bound {hi}", f"domain/{i}")
    for i, m in enumerate(doc["measurements"]):
        if m["output"] >= len(doc["expressions"]):
            raise ProblemError(f"no expression with index {m['output']}", f"measurements/{i}/output")


def problem_from_dict(doc, **overrides) -> GpeProblem:
    """Validate ``doc`` and build the problem; non-None ``overrides`` replace file values."""
    validate(doc)
    try:
        model = parse_many(doc["expressions"], variables=doc["variables"])
    except IsaError as err:
        raise ProblemError(str(err), "expressions") from None
    settings = {
        "epsilon": doc["epsilon"],
        "engine": doc.get("engine", "sivia"),
        "N": doc.get("N", 2),
        "n_J_max": doc.get("n_J_max", DEFAULT_N_J_MAX),
        "budget": doc.get("budget", DEFAULT_BUDGET),
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    measurements = [Measurement(m["output"], Interval(m["y"] - m["eta"], m["y"] + m["eta"])) for m in doc["measurements"]]
    lo, hi = zip(*doc["domain"])
    return GpeProblem(model=model, domain=IntervalBox.from_bounds(lo, hi), measurements=measurements, **settings)


def load_problem(path, **overrides) -> GpeProblem:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ProblemError(f"malformed JSON at line {err.lineno} column {err.colno}: {err.msg}", "<file>") from None
    return problem_from_dict(doc, **overrides)


# ---------------------------------------------------------------------------
# Kinetics case study
# ---------------------------------------------------------------------------

TRUE_PARAMETER = (0.6, 0.15, 0.35)
TIMES = tuple(range(1, 16))
ETA = 1e-3
SIGNIFICANT_DIGITS = 3
DEFAULT_CASE_DOMAIN = ((0.5, 0.7), (0.1, 0.2))


def kinetics_expression(t: float, x3: float = TRUE_PARAMETER[2]) -> str:
    """Output ``z2(t)`` as a function of ``x1, x2`` with ``x3`` fixed."""
    c = repr(float(x3))
    sigma = f"sqrt(x1^2 + x2^2 + {c}^2 + 2*x1*x2 + 2*x1*{c} - 2*x2*{c})"
    rho = f"(x1 + x2 + {c})"
    return f"exp(-{t}*{rho}/2) * x1 * (exp({t}*{sigma}/2) - exp(-{t}*{sigma}/2)) / {sigma}"


def round_significant(v: float, digits: int) -> float:
    return float(f"{v:.{digits}g}")


def case_study(
    digits: int = SIGNIFICANT_DIGITS,
    eta: float = ETA,
    domain=DEFAULT_CASE_DOMAIN,
    epsilon: float = 1e-2,
    engine: str = "sivia",
    N: int = 2,
) -> dict:
    """Problem document for the 15-measurement kinetics estimation."""
    measurements = [
        {"output": i, "y": round_significant(closed_form_output(TRUE_PARAMETER, t), digits), "eta": eta}
        for i, t in enumerate(TIMES)
    ]
    return {
        "variables": ["x1", "x2"],
        "expressions": [kinetics_expression(t) for t in TIMES],
        "domain": [list(map(float, d)) for d in domain],
        "measurements": measurements,
        "epsilon": epsilon,
        "engine": engine,
        "N": N,
        "n_J_max": DEFAULT_N_J_MAX,
        "budget": DEFAULT_BUDGET,
        "seed": 0,
    }
