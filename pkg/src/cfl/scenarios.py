"""Scenario registry, JSON scenario files and the scenario runner.

A scenario bundles one structural model (noises, equations, variable roles),
named RCMs built on it, symbolic parameters and a list of expectations. The
runner evaluates every expectation and produces a deterministic report.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .equivalence import compare, contrast_test
from .errors import (
    CflError,
    CyclicGraph,
    EngineInapplicable,
    ParseError,
    SpecError,
    UnknownReference,
    ValidationError,
)
from .estimands import (
    cate_rcm,
    cate_scm,
    direct_effect_scm,
    interventional_cate,
    potential_law,
    relaxed_noise_cate_gap,
    x_grid,
)
from .expr import Const, fold, parse
from .inference import law
from .laws import Empirical, as_engine
from .noise import NoiseSpace, spec_from_dict, spec_to_dict
from .rcm import (
    FunctionalRcm,
    check_consistency,
    check_ignorability,
    check_positivity,
    entailed_rcm,
    identify_single_outcome,
    outcome_equation_rcm,
    user_rcm,
)
from .scm import ScmModel, make_model, validate

log = logging.getLogger(__name__)

SE_MULT = 4.0
DEFAULT_TOL = 1e-9
IGNORABILITY_BUDGET = 100_000
COMPARE_BUDGET = 20_000
CONTRAST_BUDGET = 100_000
GRID_POINTS = 9

TOP_KEYS = ("id", "description", "parameters", "noises", "equations", "roles", "rcm", "expectations")
ROLE_KEYS = ("treatment", "covariates", "outcomes", "treatment_support")
RCM_KINDS = ("user", "entailed", "outcome_equation")

GRID_QUANTITIES = {
    "cate_rcm": cate_rcm,
    "cate_scm": cate_scm,
    "direct_effect_scm": direct_effect_scm,
    "interventional_cate": interventional_cate,
    "relaxed_noise_cate_gap": relaxed_noise_cate_gap,
}
QUANTITIES = (*GRID_QUANTITIES, "do_mean", "potential_mean", "identified_mean", "consistency",
              "ignorability", "positivity", "equivalence", "contrast")
VERDICT_QUANTITIES = ("consistency", "ignorability", "positivity", "equivalence", "contrast")


@dataclass
class Scenario:
    """A model, named RCMs on it, parameters with defaults, and expectations."""

    id: str
    description: str
    parameters: dict
    noises: list
    equations: list
    roles: dict
    rcm: dict
    expectations: list

    def to_dict(self) -> dict:
        return copy.deepcopy({k: getattr(self, k) for k in TOP_KEYS})

    def with_params(self, overrides: Mapping[str, float] | None) -> "Scenario":
        if not overrides:
            return self
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise ParseError(f"unknown parameter {sorted(unknown)[0]!r}", field="parameters")
        out = copy.deepcopy(self)
        out.parameters.update({k: float(v) for k, v in overrides.items()})
        return out


# file format ------------------------------------------------------------------------

def _require(d: dict, key: str, kind, where: str):
    if key not in d:
        raise ParseError(f"missing {key!r}", field=f"{where}.{key}" if where else key)
    v = d[key]
    if not isinstance(v, kind):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ParseError(f"{key!r} must be {name}", field=f"{where}.{key}" if where else key)
    return v


def scenario_from_dict(d) -> Scenario:
    """Check the structure of a scenario tree and build the model once to validate it.

    Raises:
        ParseError: missing or mistyped field (``field`` names it).
        ValidationError: the model is cyclic, references unknown names, or has
            bad distribution parameters.
    """
    if not isinstance(d, dict):
        raise ParseError("scenario must be a JSON object")
    extra = set(d) - set(TOP_KEYS)
    if extra:
        raise ParseError(f"unexpected key {sorted(extra)[0]!r}", field=sorted(extra)[0])
    sid = _require(d, "id", str, "")
    description = d.get("description", "")
    params = d.get("parameters", {})
    if not isinstance(params, dict):
        raise ParseError("'parameters' must be an object", field="parameters")
    for k, v in params.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"parameter {k!r} must be a number", field=f"parameters.{k}")
    noises = _require(d, "noises", list, "")
    for i, nd in enumerate(noises):
        try:
            spec_from_dict(nd, where=f"noises[{i}]")
        except SpecError as exc:
            raise ValidationError(f"noises[{i}]: {exc}", cause=exc) from exc
    equations = _require(d, "equations", list, "")
    for i, e in enumerate(equations):
        if not isinstance(e, str):
            raise ParseError("equation must be a string", field=f"equations[{i}]")
    roles = _require(d, "roles", dict, "")
    for k in ("treatment", "covariates", "outcomes"):
        _require(roles, k, str if k == "treatment" else list, "roles")
    roles.setdefault("treatment_support", [0, 1])
    rcms = d.get("rcm", {})
    if not isinstance(rcms, dict):
        raise ParseError("'rcm' must be an object", field="rcm")
    for name, r in rcms.items():
        where = f"rcm.{name}"
        if not isinstance(r, dict):
            raise ParseError("RCM entry must be an object", field=where)
        kind = r.get("kind", "user")
        if kind not in RCM_KINDS:
            raise ParseError(f"unknown RCM kind {kind!r}", field=f"{where}.kind")
        if kind == "user":
            _require(r, "potentials", list, where)
    expectations = _require(d, "expectations", list, "")
    for i, ex in enumerate(expectations):
        where = f"expectations[{i}]"
        if not isinstance(ex, dict):
            raise ParseError("expectation must be an object", field=where)
        q = _require(ex, "quantity", str, where)
        if q not in QUANTITIES:
            raise ParseError(f"unknown quantity {q!r}", field=f"{where}.quantity")
        _require(ex, "expected", (str, int, float), where)
        args = ex.get("args", {})
        if not isinstance(args, dict):
            raise ParseError("'args' must be an object", field=f"{where}.args")
        for key in ("rcm", "a", "b"):
            if key in args and args[key] not in rcms:
                raise ParseError(f"unknown RCM {args[key]!r}", field=f"{where}.args.{key}")
    sc = Scenario(sid, description, dict(params), noises, equations, roles, rcms, expectations)
    build(sc)
    return sc


def load_scenario(path) -> Scenario:
    """Read and validate a scenario JSON file.

    Raises:
        ParseError: invalid JSON (with line number) or schema violation.
        ValidationError: invalid model.
    """
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    try:
        return scenario_from_dict(d)
    except ParseError as exc:
        if exc.line is None and exc.field:
            exc.line = _guess_line(text, exc.field)
            if exc.line is not None:
                exc.args = (f"{exc.args[0][:-1]}, line {exc.line})",)
        raise


def _guess_line(text: str, field_path: str) -> int | None:
    """Line of the last path component's key in ``text``, if it appears."""
    leaf = field_path.split(".")[-1].split("[")[0]
    needle = f'"{leaf}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def dump_scenario(sc: Scenario, path=None) -> str:
    text = json.dumps(sc.to_dict(), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# building ---------------------------------------------------------------------------

@dataclass
class Built:
    model: ScmModel
    rcms: dict
    params: dict


def build(sc: Scenario) -> Built:
    """Model and RCMs of a scenario at its current parameter values.

    Raises:
        ValidationError: cyclic graph, unknown reference, bad noise parameters,
            or an equation that does not parse.
    """
    params = dict(sc.parameters)
    try:
        noise = NoiseSpace(tuple(spec_from_dict(nd, f"noises[{i}]") for i, nd in enumerate(sc.noises)))
        roles = sc.roles
        model = make_model(noise, sc.equations, roles["treatment"], tuple(roles["covariates"]),
                           tuple(roles["outcomes"]), tuple(int(t) for t in roles["treatment_support"]), params)
        validate(model)
        rcms = {}
        for name, r in sc.rcm.items():
            kind = r.get("kind", "user")
            if kind == "entailed":
                rcms[name] = entailed_rcm(model)
            elif kind == "outcome_equation":
                rcms[name] = outcome_equation_rcm(model)
            else:
                rcms[name] = user_rcm(model, r["potentials"], params, name=name)
    except (CyclicGraph, UnknownReference, SpecError) as exc:
        raise ValidationError(f"scenario {sc.id!r}: {exc}", cause=exc) from exc
    except ParseError as exc:
        raise ValidationError(f"scenario {sc.id!r}: {exc}", cause=exc) from exc
    return Built(model, rcms, params)


def expected_value(expected, params: Mapping[str, float]):
    """Numeric value of a symbolic expectation such as ``"-alpha + beta"``; verdicts pass through."""
    if isinstance(expected, (int, float)):
        return float(expected)
    try:
        e = fold(parse(expected, params))
    except (ParseError, SpecError):
        return expected
    return float(e.value) if isinstance(e, Const) else expected


# running ----------------------------------------------------------------------------

CSV_COLUMNS = ("scenario", "expectation", "estimand", "x", "value", "se", "expected", "tolerance",
               "pass", "engine", "seed", "detail", "anchor")


@dataclass
class Report:
    """Rows of (expectation, computed, expected, pass) for one run.

    ``wall_clock`` is kept out of the rendered reports so they stay
    byte-identical across runs.
    """

    scenario: str
    seed: int
    engine: str
    n: int
    rows: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def render(self, out_format: str = "csv") -> str:
        if out_format == "csv":
            return self.to_csv()
        if out_format == "md":
            return self.to_markdown()
        raise ValueError(f"format must be 'csv' or 'md', got {out_format!r}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _fmt(r.get(k)) for k in CSV_COLUMNS})
        return buf.getvalue()

    def to_markdown(self) -> str:
        cols = ("expectation", "x", "value", "se", "expected", "tolerance", "pass", "engine")
        lines = [f"# Scenario `{self.scenario}`", "",
                 f"seed {self.seed}, engine {self.engine}, samples {self.n}, "
                 f"{'PASS' if self.passed else 'FAIL'}", "",
                 "| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for r in self.rows:
            lines.append("| " + " | ".join(_fmt(r.get(c)) for c in cols) + " |")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def run(scenario, seed: int = 0, engine=None, n: int = 1_000_000, out_format: str | None = None,
        params: Mapping[str, float] | None = None):
    """Evaluate every expectation of ``scenario`` (an id, a path or a Scenario).

    Errors are recorded per expectation and never abort the run. With
    ``out_format`` ("csv" or "md") the rendered text is returned instead of
    the Report.
    """
    import time

    start = time.perf_counter()
    sc = resolve(scenario).with_params(params)
    built = build(sc)
    eng = None if engine is None else as_engine(engine)
    report = Report(sc.id, int(seed), "auto" if eng is None else eng.value, int(n))
    for i, ex in enumerate(sc.expectations):
        report.rows.extend(_evaluate(sc, built, ex, i, int(seed), eng, int(n)))
    report.wall_clock = time.perf_counter() - start
    return report.render(out_format) if out_format else report


def _evaluate(sc, built, ex, i, seed, engine, n) -> list:
    eid = ex.get("id", f"e{i}")
    expected = expected_value(ex["expected"], built.params)
    tol = float(ex.get("tol", DEFAULT_TOL))
    base = {"scenario": sc.id, "expectation": eid, "estimand": ex["quantity"], "expected": expected,
            "seed": seed, "anchor": ex.get("anchor", "")}
    try:
        results = _with_fallback(lambda e: _compute(built, ex["quantity"], ex.get("args", {}), e, seed, n),
                                 engine)
    except (CflError, KeyError, ValueError) as exc:
        log.warning("expectation %s failed: %s", eid, exc)
        return [{**base, "value": None, "pass": False, "engine": "", "detail": f"error: {exc}"}]
    rows = []
    for res in results:
        row = {**base, **res}
        if ex["quantity"] in VERDICT_QUANTITIES:
            row["pass"] = str(res["value"]) == str(expected)
        else:
            se = res.get("se")
            allowed = tol if se is None else max(tol, SE_MULT * se)
            row["tolerance"] = allowed
            row["pass"] = bool(abs(res["value"] - float(expected)) <= allowed)
        rows.append(row)
    return rows


def _with_fallback(fn, engine):
    """Run ``fn(engine)``; if the engine does not apply, warn and use the default engine."""
    if engine is None:
        return fn(None)
    try:
        return fn(engine)
    except EngineInapplicable as exc:
        warnings.warn(f"engine {engine.value} inapplicable ({exc}); using the default engine",
                      RuntimeWarning, stacklevel=3)
        return fn(None)


def _x_label(x: dict) -> str:
    return ";".join(f"{k}={v:.6g}" for k, v in x.items())


def _mean_row(out) -> dict:
    se = float(out.se()[-1]) if isinstance(out, Empirical) else None
    return {"value": float(np.asarray(out.mean())[-1]), "se": se, "engine": _law_engine(out)}


def _law_engine(out) -> str:
    from .laws import ExactTable, GaussianMixture

    if isinstance(out, ExactTable):
        return "exact"
    if isinstance(out, GaussianMixture):
        return "gaussian"
    return "mc"


def _compute(built: Built, quantity: str, args: dict, engine, seed: int, n: int) -> list:
    model, rcms = built.model, built.rcms
    if quantity in GRID_QUANTITIES:
        fn = GRID_QUANTITIES[quantity]
        grid = x_grid(model, int(args.get("grid", GRID_POINTS)), seed)
        out = []
        for x in grid:
            r = fn(model, x, engine=engine, n=n, seed=seed)
            out.append({"x": _x_label(x), "value": r.value, "se": r.standard_error, "engine": r.engine.value})
        return out
    if quantity == "do_mean":
        return [_mean_row(law(model, [parse(args["query"], built.params)], engine=engine, n=n, seed=seed))]
    if quantity == "potential_mean":
        return [_mean_row(potential_law(rcms[args["rcm"]], int(args["t"]), engine, n, seed))]
    if quantity == "identified_mean":
        return [_mean_row(identify_single_outcome(model, int(args["t"]), engine, n, seed))]
    if quantity == "consistency":
        r = check_consistency(rcms[args["rcm"]], engine, min(n, 10_000), seed)
        return [_check_row(r)]
    if quantity == "ignorability":
        r = check_ignorability(rcms[args["rcm"]], args.get("mode", "single"), engine,
                               min(n, IGNORABILITY_BUDGET), seed)
        return [_check_row(r)]
    if quantity == "positivity":
        return [_check_row(check_positivity(model, engine, min(n, IGNORABILITY_BUDGET), seed))]
    if quantity == "equivalence":
        v = compare(rcms[args["a"]], rcms[args["b"]], args["level"], engine=engine,
                    budget=min(n, COMPARE_BUDGET), seed=seed)
        detail = f"statistic={v.statistic:.6g};threshold={v.threshold:.6g}"
        if v.p_value is not None:
            detail += f";p={v.p_value:.6g}"
        if v.witness is not None:
            detail += f";witness_draw={v.witness['draw']}"
        return [{"value": v.verdict.value, "engine": v.method.value, "detail": detail}]
    if quantity == "contrast":
        r = contrast_test(rcms[args["a"]], rcms[args["b"]], n=min(n, CONTRAST_BUDGET), seed=seed)
        verdict = "NotEqual" if r.significant else "Equal"
        return [{"value": verdict, "engine": "mc",
                 "detail": f"statistic={r.statistic:.6g};threshold={r.threshold:.6g};p={r.p_value:.6g}"}]
    raise ParseError(f"unknown quantity {quantity!r}", field="quantity")


def _check_row(r) -> dict:
    return {"value": "holds" if r.holds else "fails", "engine": r.method.value,
            "detail": f"statistic={r.statistic:.6g};threshold={r.threshold:.6g}"}


# registry ---------------------------------------------------------------------------

def _g(name):
    return {"name": name, "dist": "gaussian", "mean": 0.0, "var": 1.0}


def _b(name, p=0.5):
    return {"name": name, "dist": "bernoulli", "p": p}


ROLES_1 = {"treatment": "T", "covariates": ["X"], "outcomes": ["Y"], "treatment_support": [0, 1]}
PROP2_EQUATIONS = ["T = U_T", "X = T + U_X", "Y = T + X + U_Y"]
FIRST_CONSTRUCTION = ["Y0 = (1-T)*(X+U_Y) + T*(X-U_Y)", "Y1 = (1-T)*(1+X-U_Y) + T*(1+X+U_Y)"]
MODIFIED_CONSTRUCTION = ["Y0 = X + U_Y", "Y1 = (1-T)*(1+X-U_Y) + T*(1+X+U_Y)"]


def _ex(eid, quantity, expected, anchor, **args) -> dict:
    out = {"id": eid, "quantity": quantity, "expected": expected, "anchor": anchor}
    if args:
        out["args"] = args
    return out


def _motivating() -> dict:
    return {
        "id": "motivating",
        "description": "Hiring model where T shifts experience X and the decision Y; alpha and beta"
                       " are the two path coefficients.",
        "parameters": {"alpha": 1.0, "beta": 2.0},
        "noises": [_b("U_T"), _g("U_X"), _g("U_Y")],
        "equations": ["T = U_T", "X = alpha*T + U_X", "Y = X + beta*T + U_Y"],
        "roles": dict(ROLES_1),
        "rcm": {},
        "expectations": [
            _ex("cate_rcm", "cate_rcm", "beta", "identified CATE keeps X fixed: direct effect only"),
            _ex("cate_scm", "cate_scm", "alpha + beta", "do(T=t) moves X too: total effect"),
            _ex("direct", "direct_effect_scm", "beta", "joint do on T and X isolates the direct path"),
            _ex("interventional", "interventional_cate", "beta",
                "conditioning inside each intervened world equals the direct effect here"),
        ],
    }


def _prop2() -> dict:
    return {
        "id": "prop2",
        "description": "Model with T -> X where two consistent RCMs meeting the fundamental assumptions"
                       " disagree with the do-counterfactuals in law.",
        "parameters": {},
        "noises": [_b("U_T"), _g("U_X"), _g("U_Y")],
        "equations": list(PROP2_EQUATIONS),
        "roles": dict(ROLES_1),
        "rcm": {"first": {"kind": "user", "potentials": list(FIRST_CONSTRUCTION)},
                "modified": {"kind": "user", "potentials": list(MODIFIED_CONSTRUCTION)}},
        "expectations": [
            _ex("E[Y0]", "potential_mean", 0.5, "mean of the first potential outcome", rcm="first", t=0),
            _ex("E[Y1]", "potential_mean", 1.5, "mean of the second potential outcome", rcm="first", t=1),
            _ex("E[Y_T=0]", "do_mean", 0.0, "mean under do(T=0)", query="Y[T=0]"),
            _ex("E[Y_T=1]", "do_mean", 2.0, "mean under do(T=1)", query="Y[T=1]"),
            _ex("positivity", "positivity", "holds", "both treatment levels keep mass at every x"),
            _ex("first.consistency", "consistency", "holds", "consistency rule", rcm="first"),
            _ex("first.single", "ignorability", "holds", "single-outcome ignorability", rcm="first",
                mode="single"),
            _ex("first.cross", "ignorability", "holds", "cross-outcome ignorability", rcm="first",
                mode="cross"),
            _ex("modified.consistency", "consistency", "holds", "consistency rule", rcm="modified"),
            _ex("modified.single", "ignorability", "holds", "single-outcome ignorability still holds",
                rcm="modified", mode="single"),
            _ex("modified.cross", "ignorability", "fails", "cross-outcome ignorability breaks",
                rcm="modified", mode="cross"),
        ],
    }


def _remark4() -> dict:
    return {
        "id": "remark4",
        "description": "Potential outcomes of the first construction against the outcome-equation"
                       " counterfactuals f_Y(t, X, U_Y): same marginals, different couplings.",
        "parameters": {},
        "noises": [_b("U_T"), _g("U_X"), _g("U_Y")],
        "equations": list(PROP2_EQUATIONS),
        "roles": dict(ROLES_1),
        "rcm": {"potential": {"kind": "user", "potentials": list(FIRST_CONSTRUCTION)},
                "outcome_eq": {"kind": "outcome_equation"}},
        "expectations": [
            _ex("single", "equivalence", "Equal", "each L(T, X, Y_t) matches", a="potential",
                b="outcome_eq", level="single"),
            _ex("cross", "equivalence", "NotEqual", "joint law of (Y_0, Y_1) differs", a="potential",
                b="outcome_eq", level="cross"),
            _ex("contrast", "contrast", "NotEqual", "Y_1 - Y_0 is not degenerate at 1", a="potential",
                b="outcome_eq"),
        ],
    }


def _cor1() -> dict:
    return {
        "id": "cor1",
        "description": "Model without T -> X where a consistent, single-ignorable RCM is single-outcome"
                       " but not cross-outcome equivalent to the do-counterfactuals.",
        "parameters": {},
        "noises": [_b("U_T"), _g("U_X"), _g("U_Y")],
        "equations": ["T = U_T", "X = U_X", "Y = T + X + U_Y"],
        "roles": dict(ROLES_1),
        "rcm": {"potential": {"kind": "user", "potentials": list(FIRST_CONSTRUCTION)},
                "structural": {"kind": "entailed"}},
        "expectations": [
            _ex("consistency", "consistency", "holds", "consistency rule", rcm="potential"),
            _ex("single", "equivalence", "Equal", "each L(T, X, Y_t) matches", a="potential",
                b="structural", level="single"),
            _ex("cross", "equivalence", "NotEqual", "Y_T=1 - Y_T=0 is degenerate at 1, Y_1 - Y_0 is not",
                a="potential", b="structural", level="cross"),
            _ex("contrast", "contrast", "NotEqual", "L(Y_1 - Y_0) against the point mass at 1",
                a="potential", b="structural"),
            _ex("interventional", "interventional_cate", 1.0, "X is not moved by T"),
        ],
    }


def _smoking() -> dict:
    return {
        "id": "smoking",
        "description": "Smoking T driven by a pre-treatment covariate X1, with a post-treatment"
                       " covariate X2 on the path to the outcome Y.",
        "parameters": {"alpha": 1.0, "beta": -1.0, "gamma": -1.0},
        "noises": [_g("U_T"), _g("U1"), _g("U2"), _g("U_Y")],
        "equations": ["T = indicator(X1 + U_T > 0)", "X1 = U1", "X2 = alpha*T + U2",
                      "Y = gamma*X1 - X2 + beta*T + U_Y"],
        "roles": {"treatment": "T", "covariates": ["X1", "X2"], "outcomes": ["Y"], "treatment_support": [0, 1]},
        "rcm": {},
        "expectations": [
            _ex("cate_rcm", "cate_rcm", "beta", "identified CATE holds both covariates fixed"),
            _ex("cate_scm", "cate_scm", "-alpha + beta", "do(T=t) also moves X2"),
            _ex("direct", "direct_effect_scm", "beta", "joint do on T and both covariates"),
        ],
    }


def _prop1() -> dict:
    return {
        "id": "prop1",
        "description": "Potential outcomes equal to the do-counterfactuals on {T=t} and shifted by y"
                       " elsewhere: consistent, yet equivalent at no level.",
        "parameters": {"y": 1.0},
        "noises": [_b("U_T"), _g("U_X"), _g("U_Y")],
        "equations": list(PROP2_EQUATIONS),
        "roles": dict(ROLES_1),
        "rcm": {"shifted": {"kind": "user",
                            "potentials": ["Y0 = Y[T=0] + y*indicator(T != 0)",
                                           "Y1 = Y[T=1] + y*indicator(T != 1)"]},
                "structural": {"kind": "entailed"}},
        "expectations": [
            _ex("consistency", "consistency", "holds", "consistency rule", rcm="shifted"),
            _ex("as", "equivalence", "NotEqual", "differs on {T != t}", a="shifted", b="structural",
                level="as"),
            _ex("single", "equivalence", "NotEqual", "marginal laws differ", a="shifted", b="structural",
                level="single"),
            _ex("cross", "equivalence", "NotEqual", "joint laws differ", a="shifted", b="structural",
                level="cross"),
        ],
    }


def _remark8() -> dict:
    return {
        "id": "remark8",
        "description": "Hiring model whose outcome noise is U_X itself, so the outcome noise depends on"
                       " (T, X) and the identified CATE shifts by the noise gap.",
        "parameters": {"alpha": 1.0, "beta": 2.0},
        "noises": [_b("U_T"), _g("U_X")],
        "equations": ["T = U_T", "X = alpha*T + U_X", "Y = X + beta*T + U_X"],
        "roles": dict(ROLES_1),
        "rcm": {},
        "expectations": [
            _ex("gap", "relaxed_noise_cate_gap", "-alpha", "E[U_X | X=x, T=1] - E[U_X | X=x, T=0]"),
            _ex("cate_rcm", "cate_rcm", "beta - alpha", "direct coefficient plus the noise gap"),
            _ex("cate_scm", "cate_scm", "alpha + beta", "unchanged total effect"),
        ],
    }


_BUILDERS = (_motivating, _prop2, _remark4, _cor1, _smoking, _prop1, _remark8)


def builtin_scenarios() -> list:
    return [scenario_from_dict(b()) for b in _BUILDERS]


def get_scenario(sid: str) -> Scenario:
    for b in _BUILDERS:
        d = b()
        if d["id"] == sid:
            return scenario_from_dict(d)
    raise KeyError(sid)


def resolve(obj) -> Scenario:
    """A Scenario from a Scenario, a builtin id, or a path to a JSON file."""
    if isinstance(obj, Scenario):
        return obj
    try:
        return get_scenario(str(obj))
    except KeyError:
        pass
    path = Path(obj)
    if path.exists():
        return load_scenario(path)
    raise ParseError(f"no builtin scenario or file named {str(obj)!r}")


def rcm_of(sc: Scenario, name: str | None = None) -> FunctionalRcm:
    """A named RCM of a scenario; the only one if ``name`` is None; else the entailed RCM."""
    built = build(sc)
    if name is not None:
        if name not in built.rcms:
            raise ParseError(f"scenario {sc.id!r} has no RCM {name!r}", field=f"rcm.{name}")
        return built.rcms[name]
    if len(built.rcms) == 1:
        return next(iter(built.rcms.values()))
    return entailed_rcm(built.model)
