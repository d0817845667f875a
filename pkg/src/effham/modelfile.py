"""JSON model files.

Example::

    {
      "name": "ac_stark",
      "parameters": {"Omega": 0.05, "Delta": 1.0},
      "space": [{"kind": "qudit", "dim": 2}],
      "operators": {"s21": "ketbra(0, 1, 0)"},
      "terms": [{"op": "scale(Omega/2, s21)", "omega": "Delta"}],
      "simulation": {"t0": 0, "t1": "400/Delta", "dt": 0.01, "psi0": 0},
      "kernel": {"tau": "auto"},
      "secular_cutoff": 0
    }

Operator expressions use ``scale(c, op)``, ``mul(a, b, ...)``,
``add(a, b, ...)``, ``adjoint(a)`` and the builders ``ketbra(f, i, j)``,
``lower(f)``, ``raise(f)``, ``number(f)``, ``identity()``, ``jx(f...)``,
``jy(f...)``, ``jz(f...)``, ``jplus(f...)``, ``jminus(f...)``.  Operators may
also be given as explicit matrices of ``[re, im]`` pairs.  Scalars are
numbers, ``[re, im]`` pairs or arithmetic over the declared parameters.
"""
from __future__ import annotations

import ast
import hashlib
import json
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import opalg
from .model import InteractionHamiltonian, StaticTermError, normalize_term
from .opalg import HilbertSpace, Operator

__all__ = ["ModelError", "InvariantError", "Model", "load_model", "parse_model"]


class ModelError(ValueError):
    """Malformed model file; ``where`` names the offending field."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


class InvariantError(ValueError):
    """The model parses but violates a modelling invariant (exit code 3)."""


@dataclass
class Model:
    name: str
    space: HilbertSpace
    interaction: InteractionHamiltonian
    parameters: dict
    simulation: dict = field(default_factory=dict)
    kernel_tau: float | None = None  # None means "auto"
    secular_cutoff: float | None = None  # None means "off"
    digest: str = ""


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "sin": math.sin, "cos": math.cos}
_CONSTS = {"pi": math.pi}


def _scalar(node, params, where):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in params:
            return params[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ModelError(where, f"unknown parameter {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _scalar(node.operand, params, where)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_scalar(node.left, params, where), _scalar(node.right, params, where))
    if isinstance(node, ast.List) and len(node.elts) == 2:
        re, im = (_scalar(e, params, where) for e in node.elts)
        return complex(re, im)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        return _FUNCS[node.func.id](*(_scalar(a, params, where) for a in node.args))
    raise ModelError(where, f"cannot read a scalar from {ast.unparse(node)!r}")


def _parse_expr(text: str, where: str):
    # ``raise`` is a Python keyword; rename the builder before handing the text to ast
    source = re.sub(r"\braise\s*\(", "raise_(", text.strip())
    try:
        return ast.parse(source, mode="eval").body
    except SyntaxError as exc:
        raise ModelError(where, f"syntax error in {text!r}: {exc.msg}") from None


def scalar_value(value, params: dict, where: str, real: bool = True):
    """Evaluate a JSON scalar: number, ``[re, im]`` or expression string."""
    if isinstance(value, bool):
        raise ModelError(where, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, list) and len(value) == 2:
        v = complex(scalar_value(value[0], params, where), scalar_value(value[1], params, where))
    elif isinstance(value, str):
        v = _scalar(_parse_expr(value, where), params, where)
    else:
        raise ModelError(where, f"expected a number, [re, im] pair or expression, got {value!r}")
    if real:
        if isinstance(v, complex):
            if v.imag != 0:
                raise ModelError(where, "expected a real value")
            v = v.real
        return float(v)
    return v


class _OperatorBuilder:
    def __init__(self, space: HilbertSpace, params: dict, defs: dict):
        self.space = space
        self.params = params
        self.defs = defs  # name -> Operator

    def build(self, text: str, where: str) -> Operator:
        return self._node(_parse_expr(text, where), where)

    def _ints(self, args, where):
        out = []
        for a in args:
            v = _scalar(a, self.params, where)
            if isinstance(v, complex) or float(v) != int(v):
                raise ModelError(where, f"expected an integer index, got {ast.unparse(a)!r}")
            out.append(int(v))
        return out

    def _node(self, node, where) -> Operator:
        sp = self.space
        if isinstance(node, ast.Name):
            if node.id not in self.defs:
                raise ModelError(where, f"undefined operator {node.id!r}")
            return self.defs[node.id]
        if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)):
            raise ModelError(where, f"expected an operator expression, got {ast.unparse(node)!r}")
        fn, args = node.func.id, node.args
        try:
            if fn == "scale":
                if len(args) != 2:
                    raise ModelError(where, "scale takes (scalar, operator)")
                return self._node(args[1], where) * _scalar(args[0], self.params, where)
            if fn in ("mul", "add"):
                if len(args) < 2:
                    raise ModelError(where, f"{fn} takes at least two operators")
                ops = [self._node(a, where) for a in args]
                return opalg.matmul(*ops) if fn == "mul" else opalg.add(*ops)
            if fn == "adjoint":
                return self._node(args[0], where).dag
            if fn == "ketbra":
                return opalg.ketbra(sp, *self._ints(args, where))
            if fn in ("lower", "raise_"):
                return opalg.ladder(sp, *self._ints(args, where), kind=fn.rstrip("_"))
            if fn == "number":
                return opalg.number(sp, *self._ints(args, where))
            if fn == "identity":
                return opalg.identity(sp)
            if fn in ("jx", "jy", "jz", "jplus", "jminus"):
                axis = {"jplus": "plus", "jminus": "minus"}.get(fn, fn[1])
                return opalg.collective_spin(sp, self._ints(args, where), axis)
        except ModelError:
            raise
        except (ValueError, IndexError, TypeError) as exc:
            raise ModelError(where, str(exc)) from None
        raise ModelError(where, f"unknown operator function {fn!r}")


def _matrix(value, space, params, where) -> Operator:
    d = space.total_dim
    if not (isinstance(value, list) and len(value) == d and all(isinstance(r, list) and len(r) == d for r in value)):
        raise ModelError(where, f"explicit matrix must be {d}x{d}")
    m = np.array([[scalar_value(x, params, f"{where}[{i}][{j}]", real=False) for j, x in enumerate(row)] for i, row in enumerate(value)])
    return Operator(space, m)


def parse_model(doc: dict, overrides: dict | None = None, digest: str = "") -> Model:
    """Build a :class:`Model` from decoded JSON; ``overrides`` replace parameters."""
    if not isinstance(doc, dict):
        raise ModelError("", "model file must be a JSON object")
    params = {}
    for k, v in (doc.get("parameters") or {}).items():
        params[k] = scalar_value(v, {}, f"parameters.{k}")
    for k, v in (overrides or {}).items():
        if k not in params:
            raise ModelError(f"parameters.{k}", "cannot override an undeclared parameter")
        params[k] = float(v)

    if "space" not in doc:
        raise ModelError("space", "missing")
    try:
        factors = [opalg.Factor(f["kind"], f["dim"]) for f in doc["space"]]
        space = HilbertSpace(tuple(factors))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError("space", f"invalid factor list ({exc})") from None

    defs: dict[str, Operator] = {}
    builder = _OperatorBuilder(space, params, defs)
    for name, spec in (doc.get("operators") or {}).items():
        where = f"operators.{name}"
        if isinstance(spec, str):
            defs[name] = builder.build(spec, where)
        elif isinstance(spec, dict) and "matrix" in spec:
            defs[name] = _matrix(spec["matrix"], space, params, where)
        else:
            raise ModelError(where, "expected an expression string or {\"matrix\": ...}")

    terms = doc.get("terms")
    if not isinstance(terms, list):
        raise ModelError("terms", "missing or not a list")
    pairs = []
    for i, term in enumerate(terms):
        where = f"terms[{i}]"
        if not isinstance(term, dict) or "op" not in term or "omega" not in term:
            raise ModelError(where, "each term needs 'op' and 'omega'")
        op = builder.build(term["op"], f"{where}.op") if isinstance(term["op"], str) else _matrix(term["op"], space, params, f"{where}.op")
        pairs.append((op, scalar_value(term["omega"], params, f"{where}.omega")))

    sim = {}
    for k, v in (doc.get("simulation") or {}).items():
        if k in ("t0", "t1", "dt", "burn_in"):
            sim[k] = scalar_value(v, params, f"simulation.{k}")
        elif k in ("psi0", "store_every"):
            if not isinstance(v, int) or isinstance(v, bool):
                raise ModelError(f"simulation.{k}", "expected an integer")
            sim[k] = v
        elif k == "method":
            sim[k] = str(v)
        else:
            raise ModelError(f"simulation.{k}", "unknown field")

    tau = (doc.get("kernel") or {}).get("tau", "auto")
    kernel_tau = None if tau == "auto" else scalar_value(tau, params, "kernel.tau")
    cutoff = doc.get("secular_cutoff", "off")
    secular_cutoff = None if cutoff == "off" else scalar_value(cutoff, params, "secular_cutoff")

    try:
        H = InteractionHamiltonian(space, tuple(normalize_term(op, w) for op, w in pairs))
    except StaticTermError as exc:
        raise InvariantError(str(exc)) from None
    return Model(
        name=str(doc.get("name", "model")),
        space=space,
        interaction=H,
        parameters=params,
        simulation=sim,
        kernel_tau=kernel_tau,
        secular_cutoff=secular_cutoff,
        digest=digest,
    )


def load_model(path, overrides: dict | None = None) -> Model:
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    except UnicodeDecodeError as exc:
        raise ModelError("", f"model file is not UTF-8 ({exc})") from None
    return parse_model(doc, overrides, digest)
