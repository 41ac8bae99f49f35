"""Interval superposition arithmetic and guaranteed parameter estimation."""

from .errors import (
    ArityError,
    BudgetExceeded,
    CapExceeded,
    DomainViolation,
    GridMismatch,
    IsaError,
    NotNested,
    ParseError,
    PointOutsideDomain,
    UnknownIdentifier,
)
from .expr import Expr, ExprBuilder, eval_interval, eval_real, parse, parse_many, to_text
from .interval import EMPTY, ENTIRE, Interval, IntervalArray, IntervalBox
from .ism import (
    Grid,
    Ism,
    IsmVector,
    ism_add,
    ism_cell,
    ism_compose,
    ism_const,
    ism_eval,
    ism_mul,
    ism_neg,
    ism_of_expr,
    ism_pow,
    ism_range,
    ism_scale,
    ism_sub,
    ism_var,
)
from .setinv import GpeProblem, Measurement, Subpaving, Verdict, bisect, classify_box, ism_setinv, sivia, solve
from .staircase import build_staircases, cells_excluded, sort_rows, surviving_cells

__version__ = "0.1.0"
