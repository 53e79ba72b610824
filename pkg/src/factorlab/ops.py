"""Operator registry: one declarative spec per panel operator.

The pipeline interpreter validates recipe steps against these specs, and the
tool server derives its callable-tool descriptors from the same table, so
static validation and the wire schema cannot drift apart. Executors return
fully-provenanced panels; operators whose natural result is a per-date
scalar series come back as one-column panels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from . import ingest, portfolio, transforms
from .errors import EngineError
from .panel import FactorSeries, Panel


class ArgError(EngineError):
    """An operator argument failed validation; ``param`` names the field."""

    def __init__(self, message, param=None):
        self.param = param
        super().__init__(message)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str  # number | int | string | bool | number_list | map
    required: bool = False
    doc: str = ""
    default: object = None
    choices: tuple | None = None
    minimum: float | None = None
    maximum: float | None = None
    exclusive_min: bool = False
    exclusive_max: bool = False


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    description: str
    inputs_min: int
    inputs_max: int | None  # None = variadic
    input_doc: str
    params: tuple[ParamSpec, ...]
    returns: str  # "panel" or "series"
    fn: Callable
    cross_check: Callable | None = None

    def describe(self) -> dict:
        """Wire-format tool descriptor; deterministic field order by construction."""
        return {
            "name": self.name,
            "description": self.description,
            "inputs": {
                "min": self.inputs_min,
                "max": self.inputs_max,
                "doc": self.input_doc,
            },
            "parameters": [
                {
                    "name": p.name,
                    "type": p.type,
                    "required": p.required,
                    "doc": p.doc,
                }
                for p in self.params
            ],
            "returns": {"type": self.returns},
        }


def _check_type(p: ParamSpec, value):
    if p.type == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ArgError(f"{p.name}: expected a number, got {value!r}", p.name)
        return float(value)
    if p.type == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ArgError(f"{p.name}: expected an integer, got {value!r}", p.name)
        return int(value)
    if p.type == "string":
        if not isinstance(value, str):
            raise ArgError(f"{p.name}: expected a string, got {value!r}", p.name)
        return value
    if p.type == "bool":
        if not isinstance(value, bool):
            raise ArgError(f"{p.name}: expected a boolean, got {value!r}", p.name)
        return value
    if p.type == "number_list":
        if not isinstance(value, list) or not value or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ArgError(f"{p.name}: expected a non-empty list of numbers", p.name)
        return [float(v) for v in value]
    if p.type == "map":
        if not isinstance(value, dict) or any(not isinstance(k, str) for k in value):
            raise ArgError(f"{p.name}: expected an object with string keys", p.name)
        return dict(value)
    raise ArgError(f"{p.name}: unknown parameter type {p.type!r}", p.name)


def _check_range(p: ParamSpec, value):
    def out_of_range(v):
        if p.minimum is not None and (v < p.minimum or (p.exclusive_min and v == p.minimum)):
            return True
        if p.maximum is not None and (v > p.maximum or (p.exclusive_max and v == p.maximum)):
            return True
        return False

    lo = "(" if p.exclusive_min else "["
    hi = ")" if p.exclusive_max else "]"
    bounds = f"{lo}{p.minimum}, {p.maximum}{hi}"
    if p.type in ("number", "int") and out_of_range(value):
        raise ArgError(f"{p.name}: value {value} outside {bounds}", p.name)
    if p.type == "number_list":
        for v in value:
            if out_of_range(v):
                raise ArgError(f"{p.name}: element {v} outside {bounds}", p.name)


def validate_args(spec: OperatorSpec, args: dict, n_inputs: int) -> dict:
    """Type-check and normalize an argument map; raises ArgError naming the field."""
    if not isinstance(args, dict):
        raise ArgError("args must be an object")
    known = {p.name for p in spec.params}
    for key in args:
        if key not in known:
            raise ArgError(f"unknown argument {key!r} for op {spec.name!r}", key)
    if spec.inputs_max is not None and not spec.inputs_min <= n_inputs <= spec.inputs_max:
        expect = (str(spec.inputs_min) if spec.inputs_min == spec.inputs_max
                  else f"{spec.inputs_min}..{spec.inputs_max}")
        raise ArgError(f"op {spec.name!r} takes {expect} inputs, got {n_inputs}", "inputs")
    if spec.inputs_max is None and n_inputs < spec.inputs_min:
        raise ArgError(
            f"op {spec.name!r} takes at least {spec.inputs_min} inputs, got {n_inputs}",
            "inputs",
        )

    out = {}
    for p in spec.params:
        if p.name in args and args[p.name] is not None:
            value = _check_type(p, args[p.name])
            _check_range(p, value)
            if p.choices is not None and value not in p.choices:
                raise ArgError(
                    f"{p.name}: {value!r} not one of {sorted(p.choices)}", p.name
                )
            out[p.name] = value
        elif p.required:
            raise ArgError(f"missing required argument {p.name!r}", p.name)
        else:
            out[p.name] = p.default
    if spec.cross_check is not None:
        spec.cross_check(out, n_inputs)
    return out


def execute_operator(spec: OperatorSpec, inputs: Sequence[Panel], args: dict,
                     flags: list[str] | None = None) -> Panel:
    """Run a validated operator; always returns a provenance-complete Panel."""
    result = spec.fn(list(inputs), args, flags if flags is not None else [])
    if isinstance(result, FactorSeries):
        raise EngineError(f"op {spec.name!r} executor returned a bare series")
    return result


def _series_panel(series: FactorSeries, op_name: str, args: dict,
                  inputs: Sequence[Panel]) -> Panel:
    params = {k: v for k, v in args.items() if v is not None}
    return series.to_panel(op_name=op_name, params=params, inputs=inputs)


# -- executors ----------------------------------------------------------------


def _run_binary(inputs, args, flags):
    return transforms.binary_op(inputs[0], inputs[1], args["op"])


def _run_unary(inputs, args, flags):
    return transforms.unary_op(inputs[0], args["op"])


def _run_coalesce(inputs, args, flags):
    return transforms.coalesce(inputs)


def _run_winsorize(inputs, args, flags):
    universe = inputs[1] if len(inputs) > 1 else None
    return transforms.winsorize(inputs[0], lo_pct=args["lo_pct"], hi_pct=args["hi_pct"],
                                universe=universe, flags=flags)


def _run_standardize(inputs, args, flags):
    universe = inputs[1] if len(inputs) > 1 else None
    return transforms.standardize(inputs[0], universe=universe, flags=flags)


def _run_quantile_bins(inputs, args, flags):
    universe = inputs[1] if len(inputs) > 1 else None
    return transforms.quantile_bins(inputs[0], args["percentiles"],
                                    universe=universe, flags=flags)


def _run_mask(inputs, args, flags):
    return transforms.mask(inputs[0], inputs[1], keep_if=args["keep_if"])


def _run_compare(inputs, args, flags):
    threshold = args["threshold"] if len(inputs) == 1 else inputs[1]
    return transforms.compare(inputs[0], threshold, op=args["op"])


def _run_xs_percentile_row(inputs, args, flags):
    universe = inputs[1] if len(inputs) > 1 else None
    series = transforms.xs_percentile_row(inputs[0], args["pct"], universe=universe)
    return _series_panel(series, "xs_percentile_row", args, inputs)


def _run_lag(inputs, args, flags):
    return transforms.lag(inputs[0], args["k"])


def _run_rolling_compound(inputs, args, flags):
    return transforms.rolling_compound_return(
        inputs[0], args["window"], skip=args["skip"], min_obs=args["min_obs"]
    )


def _run_rolling_stat(inputs, args, flags):
    return transforms.rolling_stat(inputs[0], args["window"], args["stat"],
                                   min_obs=args["min_obs"])


def _run_ewma(inputs, args, flags):
    return transforms.ewma(inputs[0], args["alpha"], min_periods=args["min_periods"])


def _run_trend(inputs, args, flags):
    return transforms.trend(inputs[0], args["name"], params=args["params"])


def _run_annual_to_monthly(inputs, args, flags):
    return transforms.annual_to_monthly(
        inputs[0], args["placement_month"], args["offset"], args["valid_months"]
    )


def _run_book_equity(inputs, args, flags):
    return ingest.book_equity(*inputs)


def _run_book_to_market(inputs, args, flags):
    return ingest.book_to_market(inputs[0], inputs[1])


def _run_weights(inputs, args, flags):
    weight_by = inputs[1] if len(inputs) > 1 else None
    return portfolio.weights_from_membership(inputs[0], weight_by=weight_by, flags=flags)


def _run_portfolio_return(inputs, args, flags):
    series = portfolio.portfolio_return(inputs[0], inputs[1], flags=flags)
    return _series_panel(series, "portfolio_return", args, inputs)


def _run_sort_2x3(inputs, args, flags):
    panels = portfolio.independent_sort_2x3(inputs[0], inputs[1])
    return panels[args["cell"]]


def _run_spread_2x3(inputs, args, flags):
    legs = [p.to_series(name) for p, name in zip(inputs, portfolio.SORT_CELLS_2X3)]
    series = portfolio.spread_2x3(legs)
    return _series_panel(series, "spread_2x3", args, inputs)


def _run_spread_topbottom(inputs, args, flags):
    series = portfolio.spread_topbottom(inputs[0].to_series("top"),
                                        inputs[1].to_series("bottom"))
    return _series_panel(series, "spread_topbottom", args, inputs)


def _run_turnover(inputs, args, flags):
    series = portfolio.turnover(inputs[0])
    return _series_panel(series, "turnover", args, inputs)


# -- cross-field checks ---------------------------------------------------------


def _winsorize_check(args, n_inputs):
    lo, hi = args["lo_pct"], args["hi_pct"]
    if lo is None and hi is None:
        raise ArgError("winsorize needs lo_pct or hi_pct", "lo_pct")
    if lo is not None and hi is not None and not lo < hi:
        raise ArgError(f"lo_pct {lo} must be below hi_pct {hi}", "lo_pct")


def _compare_check(args, n_inputs):
    if n_inputs == 1 and args["threshold"] is None:
        raise ArgError("compare needs a threshold input panel or a scalar threshold",
                       "threshold")
    if n_inputs == 2 and args["threshold"] is not None:
        raise ArgError("compare takes either a threshold input or a scalar, not both",
                       "threshold")


def _rolling_compound_check(args, n_inputs):
    window, skip = args["window"], args["skip"]
    if not window > skip:
        raise ArgError(f"window {window} must exceed skip {skip}", "window")
    span = window - skip
    if args["min_obs"] is None:
        args["min_obs"] = span
    if not 1 <= args["min_obs"] <= span:
        raise ArgError(f"min_obs must lie in 1..{span}", "min_obs")


def _rolling_stat_check(args, n_inputs):
    if not 1 <= args["min_obs"] <= args["window"]:
        raise ArgError("min_obs must lie in 1..window", "min_obs")


def _quantile_check(args, n_inputs):
    pcts = args["percentiles"]
    if any(q <= p for p, q in zip(pcts, pcts[1:])):
        raise ArgError("percentiles must be strictly increasing", "percentiles")


def _trend_check(args, n_inputs):
    if args["name"] not in transforms.series_transform_names():
        raise ArgError(
            f"unknown series transform {args['name']!r}; "
            f"registered: {transforms.series_transform_names()}",
            "name",
        )


OPERATORS: dict[str, OperatorSpec] = {}


def _register(spec: OperatorSpec):
    OPERATORS[spec.name] = spec


_register(OperatorSpec(
    "binary_op", "Element-wise add/sub/mul/div of two aligned panels.",
    2, 2, "left panel, right panel",
    (ParamSpec("op", "string", required=True, choices=transforms.BINARY_OPS,
               doc="one of add, sub, mul, div"),),
    "panel", _run_binary,
))
_register(OperatorSpec(
    "unary_op", "Element-wise neg/abs/log/rank_sign_flip of a panel.",
    1, 1, "input panel",
    (ParamSpec("op", "string", required=True, choices=transforms.UNARY_OPS,
               doc="one of neg, abs, log, rank_sign_flip"),),
    "panel", _run_unary,
))
_register(OperatorSpec(
    "coalesce", "Per cell, first non-missing value across the input panels in order.",
    1, None, "panels in preference order",
    (),
    "panel", _run_coalesce,
))
_register(OperatorSpec(
    "winsorize", "Clip each date's values to universe percentile bounds.",
    1, 2, "input panel, optional boolean universe panel",
    (
        ParamSpec("lo_pct", "number", doc="lower percentile in [0, 100]",
                  minimum=0.0, maximum=100.0),
        ParamSpec("hi_pct", "number", doc="upper percentile in [0, 100]",
                  minimum=0.0, maximum=100.0),
    ),
    "panel", _run_winsorize, cross_check=_winsorize_check,
))
_register(OperatorSpec(
    "standardize", "Per date, demean and scale by the universe sample sd.",
    1, 2, "input panel, optional boolean universe panel",
    (),
    "panel", _run_standardize,
))
_register(OperatorSpec(
    "quantile_bins", "Integer bins 1..len(percentiles)+1 from universe breakpoints.",
    1, 2, "input panel, optional boolean universe panel",
    (ParamSpec("percentiles", "number_list", required=True,
               doc="strictly increasing breakpoint percentiles in (0, 100)",
               minimum=0.0, maximum=100.0, exclusive_min=True, exclusive_max=True),),
    "panel", _run_quantile_bins, cross_check=_quantile_check,
))
_register(OperatorSpec(
    "mask", "Blank out cells failing a condition panel.",
    2, 2, "input panel, condition panel",
    (ParamSpec("keep_if", "string", default="nonzero", choices=("nonzero", "zero"),
               doc="keep cells where the condition is nonzero (default) or zero"),),
    "panel", _run_mask,
))
_register(OperatorSpec(
    "compare", "Boolean panel comparing cells to a per-date threshold.",
    1, 2, "input panel, optional threshold series panel",
    (
        ParamSpec("op", "string", required=True, choices=transforms.COMPARE_OPS,
                  doc="lt (strict) or ge"),
        ParamSpec("threshold", "number", doc="scalar threshold when no series input"),
    ),
    "panel", _run_compare, cross_check=_compare_check,
))
_register(OperatorSpec(
    "xs_percentile_row", "Per-date percentile of universe values, as a series.",
    1, 2, "input panel, optional boolean universe panel",
    (ParamSpec("pct", "number", required=True, doc="percentile strictly in (0, 100)",
               minimum=0.0, maximum=100.0, exclusive_min=True, exclusive_max=True),),
    "series", _run_xs_percentile_row,
))
_register(OperatorSpec(
    "lag", "Shift values forward by k calendar months, per asset.",
    1, 1, "input panel",
    (ParamSpec("k", "int", required=True, doc="months to lag, k >= 1", minimum=1),),
    "panel", _run_lag,
))
_register(OperatorSpec(
    "rolling_compound_return",
    "Compound growth over calendar months t-window .. t-skip-1 per asset.",
    1, 1, "monthly return panel",
    (
        ParamSpec("window", "int", required=True, doc="trailing window length in months",
                  minimum=1),
        ParamSpec("skip", "int", default=0, doc="most recent months to skip", minimum=0),
        ParamSpec("min_obs", "int", doc="minimum non-missing returns; default window-skip",
                  minimum=1),
    ),
    "panel", _run_rolling_compound, cross_check=_rolling_compound_check,
))
_register(OperatorSpec(
    "rolling_stat", "Trailing-window mean/std/sum/min/max including the current month.",
    1, 1, "input panel",
    (
        ParamSpec("window", "int", required=True, doc="window length in months", minimum=1),
        ParamSpec("stat", "string", required=True, choices=transforms.ROLLING_STATS,
                  doc="one of mean, std, sum, min, max"),
        ParamSpec("min_obs", "int", default=1, doc="minimum non-missing observations",
                  minimum=1),
    ),
    "panel", _run_rolling_stat, cross_check=_rolling_stat_check,
))
_register(OperatorSpec(
    "ewma", "Recursive exponentially weighted mean over each asset's observations.",
    1, 1, "input panel",
    (
        ParamSpec("alpha", "number", required=True, doc="smoothing weight in (0, 1]",
                  minimum=0.0, maximum=1.0, exclusive_min=True),
        ParamSpec("min_periods", "int", default=1,
                  doc="observations required before output", minimum=1),
    ),
    "panel", _run_ewma,
))
_register(OperatorSpec(
    "trend", "Apply a named registered series transform independently per asset.",
    1, 1, "input panel",
    (
        ParamSpec("name", "string", required=True, doc="registered transform name"),
        ParamSpec("params", "map", doc="keyword parameters for the transform"),
    ),
    "panel", _run_trend, cross_check=_trend_check,
))
_register(OperatorSpec(
    "annual_to_monthly", "Carry annual placement-month values forward monthly.",
    1, 1, "panel with values at placement months",
    (
        ParamSpec("placement_month", "int", required=True, doc="calendar month 1..12",
                  minimum=1, maximum=12),
        ParamSpec("offset", "int", required=True,
                  doc="months after placement when validity starts", minimum=0),
        ParamSpec("valid_months", "int", required=True, doc="validity span in months",
                  minimum=1),
    ),
    "panel", _run_annual_to_monthly,
))
_register(OperatorSpec(
    "book_equity",
    "Stockholder equity minus preferred stock (redemption, liquidation, par order).",
    4, 4, "seq, pstkrv, pstkl, pstk panels",
    (),
    "panel", _run_book_equity,
))
_register(OperatorSpec(
    "book_to_market",
    "December book equity over December company cap, usable from the following June.",
    2, 2, "book equity panel, company market equity panel",
    (),
    "panel", _run_book_to_market,
))
_register(OperatorSpec(
    "weights_from_membership",
    "Long-only weights proportional to a weight basis over member cells.",
    1, 2, "boolean membership panel, optional weight basis panel",
    (),
    "panel", _run_weights,
))
_register(OperatorSpec(
    "portfolio_return", "Next-month renormalized portfolio returns from weights.",
    2, 2, "weight panel, return panel",
    (),
    "series", _run_portfolio_return,
))
_register(OperatorSpec(
    "independent_sort_2x3",
    "One 2x3 size-by-value intersection membership cell (SG, SN, SV, BG, BN, BV).",
    2, 2, "size bin panel (1..2), value bin panel (1..3)",
    (ParamSpec("cell", "string", required=True, choices=portfolio.SORT_CELLS_2X3,
               doc="which intersection cell to emit"),),
    "panel", _run_sort_2x3,
))
_register(OperatorSpec(
    "spread_2x3", "0.5*(SV+BV) - 0.5*(SG+BG) from six leg return series.",
    6, 6, "six leg series panels ordered SG, SN, SV, BG, BN, BV",
    (),
    "series", _run_spread_2x3,
))
_register(OperatorSpec(
    "spread_topbottom", "Top leg minus bottom leg return series.",
    2, 2, "top series panel, bottom series panel",
    (),
    "series", _run_spread_topbottom,
))
_register(OperatorSpec(
    "turnover", "Half the absolute weight change between consecutive weight rows.",
    1, 1, "weight panel",
    (),
    "series", _run_turnover,
))


def get_operator(name: str) -> OperatorSpec:
    try:
        return OPERATORS[name]
    except KeyError:
        raise ArgError(f"unknown op {name!r}", "op") from None


def operator_names() -> list[str]:
    return sorted(OPERATORS)
