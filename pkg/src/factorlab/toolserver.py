"""JSON-RPC 2.0 tool server over newline-delimited stdio.

Exposes every registered panel operator plus load_source, save_panel,
export_graph, build_report, and catalog_lookup as callable tools, so generic
JSON-RPC clients (agent frameworks included) can drive the engine. One
message per line; methods are ``tools/list`` and
``tools/call {"name", "arguments"}``. Panel-producing tools return a summary
payload (id, shape, coverage, span); full data moves through save_panel and
file reads. Each server process owns one isolated session registry and binds
only to the stdio of its parent, so there is no authentication layer.

Error codes: -32700 parse, -32600 invalid request, -32601 unknown method or
tool, -32602 invalid params (message names the offending field), -32000
operator runtime failure.
"""

from __future__ import annotations

import json
import sys

from . import panel as panelio
from . import pipeline, report
from .errors import EngineError
from .ops import ArgError, OPERATORS, execute_operator, validate_args
from .panel import Panel, PanelRegistry

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
RUNTIME_ERROR = -32000

PROTOCOL_VERSION = "2.0"

EXTRA_TOOLS = {
    "load_source": {
        "name": "load_source",
        "description": "Load a saved panel from a directory into the session registry.",
        "inputs": {"min": 0, "max": 0, "doc": "none; reads from disk"},
        "parameters": [
            {"name": "directory", "type": "string", "required": True,
             "doc": "directory containing <panel_id>.csv and <panel_id>.meta.json"},
            {"name": "panel_id", "type": "string", "required": True,
             "doc": "panel id to load"},
        ],
        "returns": {"type": "panel_payload"},
    },
    "save_panel": {
        "name": "save_panel",
        "description": "Write a registered panel to disk as CSV plus metadata.",
        "inputs": {"min": 0, "max": 0, "doc": "none; writes to disk"},
        "parameters": [
            {"name": "panel_id", "type": "string", "required": True,
             "doc": "registered panel id"},
            {"name": "directory", "type": "string", "required": True,
             "doc": "output directory"},
        ],
        "returns": {"type": "file_list"},
    },
    "export_graph": {
        "name": "export_graph",
        "description": "Provenance subgraph of a panel as JSON and DOT.",
        "inputs": {"min": 0, "max": 0, "doc": "none"},
        "parameters": [
            {"name": "panel_id", "type": "string", "required": True,
             "doc": "root panel id"},
        ],
        "returns": {"type": "graph_document"},
    },
    "build_report": {
        "name": "build_report",
        "description": "Standardized four-section diagnostics report for a spread.",
        "inputs": {"min": 0, "max": 0, "doc": "none; references registered panels"},
        "parameters": [
            {"name": "spread", "type": "string", "required": True,
             "doc": "panel id of the spread return series (one column)"},
            {"name": "characteristic", "type": "string", "required": True,
             "doc": "panel id of the sorting characteristic"},
            {"name": "cap", "type": "string", "required": True,
             "doc": "panel id of market equity"},
            {"name": "size_bins", "type": "string", "required": True,
             "doc": "panel id of integer size bins"},
            {"name": "models", "type": "map", "required": True,
             "doc": "model name -> list of factor series panel ids"},
            {"name": "stratify_recipe", "type": "string", "required": False,
             "doc": "recipe path or shipped name rebuilt per size bin"},
            {"name": "stratify_output", "type": "string", "required": False,
             "doc": "recipe output treated as the spread (default: recipe's last step)"},
            {"name": "weights", "type": "string", "required": False,
             "doc": "panel id of spread leg weights for the turnover statistic"},
        ],
        "returns": {"type": "report_document"},
    },
    "catalog_lookup": {
        "name": "catalog_lookup",
        "description": "Rank catalog data items by keyword match against a query.",
        "inputs": {"min": 0, "max": 0, "doc": "none"},
        "parameters": [
            {"name": "query", "type": "string", "required": True,
             "doc": "free-text query"},
        ],
        "returns": {"type": "catalog_matches"},
    },
}


class RpcError(Exception):
    def __init__(self, code: int, message: str, data=None):
        self.code = code
        self.data = data
        super().__init__(message)


class ToolServer:
    """One session: an isolated panel registry driven by tool calls."""

    def __init__(self, registry: PanelRegistry | None = None, catalog=None):
        self.registry = registry or PanelRegistry()
        self.catalog = catalog or pipeline.load_catalog()

    # -- tool surface --------------------------------------------------------

    def list_tools(self) -> list[dict]:
        tools = [spec.describe() for spec in OPERATORS.values()]
        tools.extend(EXTRA_TOOLS.values())
        return sorted(tools, key=lambda t: t["name"])

    def call_tool(self, name: str, arguments: dict) -> dict:
        if not isinstance(arguments, dict):
            raise RpcError(INVALID_PARAMS, "arguments must be an object")
        if name in OPERATORS:
            return self._call_operator(name, arguments)
        handler = getattr(self, f"_tool_{name}", None)
        if name not in EXTRA_TOOLS or handler is None:
            raise RpcError(METHOD_NOT_FOUND, f"unknown tool {name!r}")
        return handler(arguments)

    def _call_operator(self, name: str, arguments: dict) -> dict:
        spec = OPERATORS[name]
        input_ids = arguments.get("inputs", [])
        if not isinstance(input_ids, list) or any(not isinstance(x, str) for x in input_ids):
            raise RpcError(INVALID_PARAMS, "inputs must be a list of panel ids",
                           data={"param": "inputs"})
        args = arguments.get("args", {})
        out_name = arguments.get("name")
        if out_name is not None and not isinstance(out_name, str):
            raise RpcError(INVALID_PARAMS, "name must be a string",
                           data={"param": "name"})
        try:
            normalized = validate_args(spec, args, len(input_ids))
        except ArgError as exc:
            raise RpcError(INVALID_PARAMS, str(exc), data={"param": exc.param}) from exc
        try:
            panels = [self.registry.get(pid) for pid in input_ids]
        except EngineError as exc:
            raise RpcError(INVALID_PARAMS, str(exc), data={"param": "inputs"}) from exc
        try:
            result = execute_operator(spec, panels, normalized)
        except EngineError as exc:
            raise RpcError(RUNTIME_ERROR, f"op {name!r} failed: {exc}") from exc
        if result.n_nonmissing() == 0:
            raise RpcError(RUNTIME_ERROR, f"op {name!r} produced no non-missing values")
        panel_id = self.registry.register(result, name=out_name)
        return self.registry.get(panel_id).payload()

    # -- non-operator tools ----------------------------------------------------

    @staticmethod
    def _required_str(arguments: dict, key: str) -> str:
        value = arguments.get(key)
        if not isinstance(value, str) or not value:
            raise RpcError(INVALID_PARAMS, f"missing or invalid {key!r}",
                           data={"param": key})
        return value

    def _tool_load_source(self, arguments: dict) -> dict:
        directory = self._required_str(arguments, "directory")
        panel_id = self._required_str(arguments, "panel_id")
        try:
            panel = panelio.load(directory, panel_id)
        except EngineError as exc:
            raise RpcError(RUNTIME_ERROR, str(exc)) from exc
        fresh = Panel.source(panel.panel_id, panel.dates, panel.assets, panel.values,
                             params={"directory": directory})
        self.registry.register(fresh)
        return self.registry.get(panel_id).payload()

    def _tool_save_panel(self, arguments: dict) -> dict:
        panel_id = self._required_str(arguments, "panel_id")
        directory = self._required_str(arguments, "directory")
        try:
            panel = self.registry.get(panel_id)
        except EngineError as exc:
            raise RpcError(INVALID_PARAMS, str(exc), data={"param": "panel_id"}) from exc
        try:
            files = panelio.save(panel, directory)
        except (EngineError, OSError) as exc:
            raise RpcError(RUNTIME_ERROR, str(exc)) from exc
        return {"files": [str(f) for f in files]}

    def _tool_export_graph(self, arguments: dict) -> dict:
        panel_id = self._required_str(arguments, "panel_id")
        try:
            doc, dot = panelio.export_graph(self.registry, panel_id)
        except EngineError as exc:
            raise RpcError(INVALID_PARAMS, str(exc), data={"param": "panel_id"}) from exc
        return {"graph": doc, "dot": dot}

    def _tool_build_report(self, arguments: dict) -> dict:
        spread_id = self._required_str(arguments, "spread")
        char_id = self._required_str(arguments, "characteristic")
        cap_id = self._required_str(arguments, "cap")
        size_id = self._required_str(arguments, "size_bins")
        models_arg = arguments.get("models")
        if not isinstance(models_arg, dict) or not models_arg:
            raise RpcError(INVALID_PARAMS, "models must map name -> [factor panel ids]",
                           data={"param": "models"})
        try:
            spread = self.registry.get(spread_id).to_series(name=spread_id)
            char = self.registry.get(char_id)
            cap = self.registry.get(cap_id)
            size_bins = self.registry.get(size_id)
            models = {}
            for model, ids in models_arg.items():
                if not isinstance(ids, list):
                    raise RpcError(INVALID_PARAMS, f"models[{model}] must be a list",
                                   data={"param": "models"})
                models[model] = [self.registry.get(i).to_series(name=i) for i in ids]
        except EngineError as exc:
            raise RpcError(INVALID_PARAMS, str(exc), data={"param": "models"}) from exc

        builder = None
        recipe_ref = arguments.get("stratify_recipe")
        if recipe_ref is not None:
            try:
                spec = pipeline.load_recipe(recipe_ref)
                output = arguments.get("stratify_output") or spec.steps[-1].output
                sources = {name: self.registry.get(name) for name in spec.sources}
                builder = pipeline.make_spread_builder(spec, sources, output)
            except EngineError as exc:
                raise RpcError(INVALID_PARAMS, str(exc),
                               data={"param": "stratify_recipe"}) from exc

        weights = None
        if arguments.get("weights") is not None:
            weights = self.registry.get(self._required_str(arguments, "weights"))

        try:
            rep = report.build_report(
                spread, char, cap, size_bins, models,
                spread_builder=builder,
                weight_panel=weights,
                recipe_reference=str(recipe_ref or ""),
            )
        except EngineError as exc:
            raise RpcError(RUNTIME_ERROR, str(exc)) from exc
        return {
            "document": report.report_document(rep),
            "markdown": report.render_markdown(rep),
        }

    def _tool_catalog_lookup(self, arguments: dict) -> dict:
        query = self._required_str(arguments, "query")
        return {"matches": pipeline.catalog_lookup(query, self.catalog)}

    # -- JSON-RPC plumbing -----------------------------------------------------

    def handle_request(self, obj) -> dict | None:
        if not isinstance(obj, dict) or obj.get("jsonrpc") != PROTOCOL_VERSION:
            return _error_response(None, INVALID_REQUEST, "expected a JSON-RPC 2.0 request")
        has_id = "id" in obj
        req_id = obj.get("id")
        method = obj.get("method")
        if not isinstance(method, str):
            return _error_response(req_id, INVALID_REQUEST, "missing method") if has_id else None

        try:
            if method == "tools/list":
                result = {"tools": self.list_tools()}
            elif method == "tools/call":
                params = obj.get("params", {})
                if not isinstance(params, dict) or not isinstance(params.get("name"), str):
                    raise RpcError(INVALID_PARAMS, "params must carry a tool 'name'",
                                   data={"param": "name"})
                result = self.call_tool(params["name"], params.get("arguments", {}))
            else:
                raise RpcError(METHOD_NOT_FOUND, f"unknown method {method!r}")
        except RpcError as exc:
            return _error_response(req_id, exc.code, str(exc), exc.data) if has_id else None

        if not has_id:
            return None  # notification: no response
        return {"jsonrpc": PROTOCOL_VERSION, "id": req_id, "result": result}

    def handle_line(self, line: str) -> str | None:
        line = line.strip()
        if not line:
            return None
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            return _dump(_error_response(None, PARSE_ERROR, f"parse error: {exc}"))

        if isinstance(obj, list):
            if not obj:
                return _dump(_error_response(None, INVALID_REQUEST, "empty batch"))
            responses = [r for r in (self.handle_request(item) for item in obj)
                         if r is not None]
            return _dump(responses) if responses else None

        response = self.handle_request(obj)
        return _dump(response) if response is not None else None

    def serve(self, stdin=None, stdout=None) -> None:
        """Process requests line by line until end of input."""
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            out = self.handle_line(line)
            if out is not None:
                stdout.write(out + "\n")
                stdout.flush()


def _error_response(req_id, code: int, message: str, data=None) -> dict:
    error = {"code": code, "message": message}
    if data is not None:
        error["data"] = data
    return {"jsonrpc": PROTOCOL_VERSION, "id": req_id, "error": error}


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
