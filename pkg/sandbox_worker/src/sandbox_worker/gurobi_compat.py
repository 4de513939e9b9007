"""A scipy-backed stand-in for the ``gurobipy`` modeling API.

Generated solver programs import ``gurobipy``; when the real package is not
installed, the runtime maps that import onto this module instead. It covers
the modeling surface such programs typically use — ``Model``, ``addVar(s)``,
expression algebra, ``quicksum``, ``tupledict``, constraint comparisons, the
``GRB`` constants — and dispatches solving to scipy:

* pure linear models            -> ``scipy.optimize.linprog`` (HiGHS)
* linear with integer variables -> ``scipy.optimize.milp`` (HiGHS)
* convex quadratic objectives   -> multi-start SLSQP
* integer + quadratic           -> rejected with a clear error

Only linear constraints are supported; quadratic terms may appear in the
objective only.
"""
from __future__ import annotations

import itertools
import numbers
from typing import Iterable, Mapping

import numpy as np


class GurobiError(Exception):
    """Modeling or solving error, mirroring the real API's exception type."""


class GRB:
    # solve status codes (values match the real API)
    LOADED = 1
    OPTIMAL = 2
    INFEASIBLE = 3
    INF_OR_UNBD = 4
    UNBOUNDED = 5
    TIME_LIMIT = 9
    # objective senses
    MINIMIZE = 1
    MAXIMIZE = -1
    # variable types
    CONTINUOUS = "C"
    BINARY = "B"
    INTEGER = "I"
    INFINITY = 1e100


# bounds at or beyond this magnitude are treated as unbounded
_INF_THRESHOLD = 1e29

_FEASIBILITY_TOL = 1e-6


def _is_number(value) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _qkey(a: "Var", b: "Var") -> tuple:
    return (a, b) if a._index <= b._index else (b, a)


class Var:
    """One decision variable; arithmetic builds expressions, comparisons build constraints."""

    __slots__ = ("_model", "_index", "lb", "ub", "vtype", "varname", "obj", "_value")

    def __init__(self, model: "Model", index: int, lb, ub, vtype, name, obj=0.0):
        self._model = model
        self._index = index
        self.lb = float(lb)
        self.ub = float(ub)
        self.vtype = vtype
        self.varname = name
        self.obj = float(obj)
        self._value = None

    @property
    def X(self):
        if self._value is None:
            raise GurobiError("variable values are only available after a successful optimize()")
        return self._value

    @property
    def x(self):
        return self.X

    @property
    def VarName(self):
        return self.varname

    def _lin(self) -> "LinExpr":
        return LinExpr._raw(0.0, {self: 1.0})

    def __hash__(self):
        return id(self)

    def __add__(self, other):
        return self._lin() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._lin() - other

    def __rsub__(self, other):
        return (-self._lin()) + other

    def __neg__(self):
        return self._lin() * -1.0

    def __mul__(self, other):
        return self._lin() * other

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._lin() / other

    def __pow__(self, power):
        if power == 2:
            return self._lin() * self._lin()
        raise GurobiError("only squared variables are supported in expressions")

    def __le__(self, other):
        return _compare(self._lin(), other, "<")

    def __ge__(self, other):
        return _compare(self._lin(), other, ">")

    def __eq__(self, other):
        return _compare(self._lin(), other, "=")

    def __repr__(self):
        return f"<Var {self.varname or self._index}>"


class LinExpr:
    """constant + sum(coefficient * variable)."""

    __slots__ = ("constant", "terms")

    def __init__(self, arg=0.0):
        if _is_number(arg):
            self.constant, self.terms = float(arg), {}
        elif isinstance(arg, Var):
            self.constant, self.terms = 0.0, {arg: 1.0}
        elif isinstance(arg, LinExpr):
            self.constant, self.terms = arg.constant, dict(arg.terms)
        else:
            raise GurobiError(f"cannot build a linear expression from {type(arg).__name__}")

    @classmethod
    def _raw(cls, constant: float, terms: dict) -> "LinExpr":
        expr = cls.__new__(cls)
        expr.constant = constant
        expr.terms = terms
        return expr

    def _add_terms_into(self, terms: dict) -> None:
        """Accumulate this expression's variable terms into a mutable dict — see quicksum."""
        for var, coef in self.terms.items():
            terms[var] = terms.get(var, 0.0) + coef

    def __add__(self, other):
        if _is_number(other):
            return LinExpr._raw(self.constant + float(other), dict(self.terms))
        if isinstance(other, Var):
            other = other._lin()
        if isinstance(other, LinExpr):
            terms = dict(self.terms)
            for var, coef in other.terms.items():
                terms[var] = terms.get(var, 0.0) + coef
            return LinExpr._raw(self.constant + other.constant, terms)
        if isinstance(other, QuadExpr):
            return other + self
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (Var, LinExpr, QuadExpr)) or _is_number(other):
            return self + (other * -1.0 if not _is_number(other) else -float(other))
        return NotImplemented

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if _is_number(other):
            factor = float(other)
            return LinExpr._raw(
                self.constant * factor, {v: c * factor for v, c in self.terms.items()}
            )
        if isinstance(other, Var):
            other = other._lin()
        if isinstance(other, LinExpr):
            quad: dict = {}
            for v1, c1 in self.terms.items():
                for v2, c2 in other.terms.items():
                    key = _qkey(v1, v2)
                    quad[key] = quad.get(key, 0.0) + c1 * c2
            terms: dict = {}
            for var, coef in self.terms.items():
                terms[var] = terms.get(var, 0.0) + coef * other.constant
            for var, coef in other.terms.items():
                terms[var] = terms.get(var, 0.0) + coef * self.constant
            terms = {var: coef for var, coef in terms.items() if coef != 0.0}
            linear = LinExpr._raw(self.constant * other.constant, terms)
            if not quad:
                return linear
            return QuadExpr._raw(linear, quad)
        if isinstance(other, QuadExpr):
            if not self.terms:
                return other * self.constant
            raise GurobiError("expressions beyond quadratic degree are not supported")
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_number(other):
            return self * (1.0 / float(other))
        raise GurobiError("can only divide an expression by a number")

    def __le__(self, other):
        return _compare(self, other, "<")

    def __ge__(self, other):
        return _compare(self, other, ">")

    def __eq__(self, other):
        return _compare(self, other, "=")

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"<LinExpr {len(self.terms)} terms + {self.constant}>"


class QuadExpr:
    """A linear expression plus sum(coefficient * var_a * var_b) terms."""

    __slots__ = ("linear", "quad")

    def __init__(self, arg=0.0):
        if isinstance(arg, QuadExpr):
            self.linear = LinExpr(arg.linear)
            self.quad = dict(arg.quad)
        else:
            self.linear = LinExpr(arg)
            self.quad = {}

    @classmethod
    def _raw(cls, linear: LinExpr, quad: dict) -> "QuadExpr":
        expr = cls.__new__(cls)
        expr.linear = linear
        expr.quad = quad
        return expr

    def __add__(self, other):
        if isinstance(other, QuadExpr):
            quad = dict(self.quad)
            for key, coef in other.quad.items():
                quad[key] = quad.get(key, 0.0) + coef
            return QuadExpr._raw(self.linear + other.linear, quad)
        if isinstance(other, (Var, LinExpr)) or _is_number(other):
            return QuadExpr._raw(self.linear + other, dict(self.quad))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (Var, LinExpr, QuadExpr)):
            return self + (other * -1.0)
        if _is_number(other):
            return self + (-float(other))
        return NotImplemented

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if _is_number(other):
            factor = float(other)
            return QuadExpr._raw(
                self.linear * factor, {k: c * factor for k, c in self.quad.items()}
            )
        raise GurobiError("expressions beyond quadratic degree are not supported")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_number(other):
            return self * (1.0 / float(other))
        raise GurobiError("can only divide an expression by a number")

    def __le__(self, other):
        return _compare(self, other, "<")

    def __ge__(self, other):
        return _compare(self, other, ">")

    def __eq__(self, other):
        return _compare(self, other, "=")

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"<QuadExpr {len(self.quad)} quadratic terms>"


class TempConstr:
    """A pending constraint: ``expr (sense) 0`` where expr is lhs minus rhs."""

    __slots__ = ("expr", "sense")

    def __init__(self, expr, sense: str):
        self.expr = expr
        self.sense = sense


def _compare(lhs, rhs, sense: str):
    if isinstance(rhs, (Var, LinExpr, QuadExpr)):
        diff = lhs - rhs
    elif _is_number(rhs):
        diff = lhs - float(rhs)
    else:
        return NotImplemented
    return TempConstr(diff, sense)


def quicksum(items: Iterable) -> LinExpr | QuadExpr:
    constant = 0.0
    terms: dict = {}
    quad: dict = {}
    for item in items:
        if _is_number(item):
            constant += float(item)
        elif isinstance(item, Var):
            terms[item] = terms.get(item, 0.0) + 1.0
        elif isinstance(item, LinExpr):
            constant += item.constant
            item._add_terms_into(terms)
        elif isinstance(item, QuadExpr):
            constant += item.linear.constant
            item.linear._add_terms_into(terms)
            for key, coef in item.quad.items():
                quad[key] = quad.get(key, 0.0) + coef
        else:
            raise GurobiError(f"cannot sum a {type(item).__name__}")
    linear = LinExpr._raw(constant, terms)
    if quad:
        return QuadExpr._raw(linear, quad)
    return linear


class tupledict(dict):
    """dict of keys -> Var with pattern-based selection, as in the real API."""

    def select(self, *pattern):
        if not pattern:
            return list(self.values())
        return [value for key, value in self.items() if _key_matches(key, pattern)]

    def sum(self, *pattern):
        return quicksum(self.select(*pattern))

    def prod(self, coeff, *pattern):
        total = LinExpr()
        for key, var in self.items():
            if pattern and not _key_matches(key, pattern):
                continue
            if isinstance(coeff, Mapping) and key not in coeff:
                continue  # products run over the intersection of keys
            total = total + _coeff_for(coeff, key) * var
        return total


def _key_matches(key, pattern) -> bool:
    key_tuple = key if isinstance(key, tuple) else (key,)
    if len(pattern) != len(key_tuple):
        return False
    return all(p == "*" or p == k for p, k in zip(pattern, key_tuple))


def _coeff_for(coeff, key) -> float:
    if isinstance(coeff, Mapping):
        return float(coeff[key])
    # nested sequences indexed by the key parts (e.g. a cost matrix as list-of-lists)
    value = coeff
    for part in key if isinstance(key, tuple) else (key,):
        value = value[part]
    return float(value)


def multidict(data: Mapping):
    """Split ``{key: [v1, v2, ...]}`` into (keys, dict1, dict2, ...)."""
    keys = list(data)
    if not keys:
        raise GurobiError("multidict needs a non-empty mapping")
    first = data[keys[0]]
    if isinstance(first, (list, tuple)):
        width = len(first)
        columns: list[dict] = [{} for _ in range(width)]
        for key, values in data.items():
            if len(values) != width:
                raise GurobiError("multidict values must all have the same length")
            for i, value in enumerate(values):
                columns[i][key] = value
        return (keys, *columns)
    return keys, dict(data)


class Env:
    """Accepted for compatibility; this backend needs no environment state."""

    def __init__(self, *args, **kwargs):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def setParam(self, *args, **kwargs):
        pass

    def start(self):
        pass

    def dispose(self):
        pass


class _Params:
    """Accepts and ignores any parameter assignment."""

    def __setattr__(self, name, value):
        object.__setattr__(self, name, value)


class Model:
    def __init__(self, name: str = "", env: Env | None = None):
        self._name = name
        self._vars: list[Var] = []
        self._constrs: list[tuple[LinExpr, str, str]] = []
        self._objective: LinExpr | QuadExpr = LinExpr()
        self._objective_set = False
        self._sense = GRB.MINIMIZE
        self._status = GRB.LOADED
        self._obj_val: float | None = None
        self.Params = _Params()
        self.params = self.Params

    # -- building ----------------------------------------------------------
    def addVar(self, lb=0.0, ub=GRB.INFINITY, obj=0.0, vtype=GRB.CONTINUOUS, name="", column=None):
        if vtype not in (GRB.CONTINUOUS, GRB.BINARY, GRB.INTEGER):
            raise GurobiError(f"unsupported variable type {vtype!r}")
        var = Var(self, len(self._vars), lb, ub, vtype, name, obj=obj)
        self._vars.append(var)
        return var

    def addVars(self, *indices, lb=0.0, ub=GRB.INFINITY, obj=0.0, vtype=GRB.CONTINUOUS, name=""):
        out = tupledict()
        for key in _expand_indices(indices):
            label = f"{name}[{key}]" if name else ""
            out[key] = self.addVar(
                lb=_per_key(lb, key),
                ub=_per_key(ub, key),
                obj=_per_key(obj, key),
                vtype=vtype,
                name=label,
            )
        return out

    def addConstr(self, constr, name: str = ""):
        if not isinstance(constr, TempConstr):
            raise GurobiError("addConstr expects a comparison between linear expressions")
        expr = constr.expr
        if isinstance(expr, QuadExpr):
            if any(abs(c) > 0.0 for c in expr.quad.values()):
                raise GurobiError("quadratic constraints are not supported by this backend")
            expr = expr.linear
        elif isinstance(expr, Var):
            expr = expr._lin()
        self._constrs.append((expr, constr.sense, name))
        return constr

    def addConstrs(self, generator, name: str = ""):
        return [self.addConstr(item, name=name) for item in generator]

    def setObjective(self, expr, sense=None):
        if _is_number(expr):
            expr = LinExpr(float(expr))
        elif isinstance(expr, Var):
            expr = expr._lin()
        if not isinstance(expr, (LinExpr, QuadExpr)):
            raise GurobiError(f"cannot use a {type(expr).__name__} as an objective")
        self._objective = expr
        self._objective_set = True
        if sense is not None:
            self._sense = sense

    def setParam(self, *args, **kwargs):
        pass

    def update(self):
        pass

    def getVars(self):
        return list(self._vars)

    # -- results -----------------------------------------------------------
    @property
    def status(self):
        return self._status

    @property
    def Status(self):
        return self._status

    @property
    def objVal(self):
        if self._obj_val is None:
            raise GurobiError("the objective value is only available after a successful optimize()")
        return self._obj_val

    @property
    def ObjVal(self):
        return self.objVal

    # -- solving -----------------------------------------------------------
    def optimize(self):
        n = len(self._vars)
        objective = self._objective
        if not self._objective_set:
            objective = LinExpr._raw(0.0, {v: v.obj for v in self._vars if v.obj})
        if isinstance(objective, QuadExpr) and not any(
            abs(c) > 0.0 for c in objective.quad.values()
        ):
            objective = objective.linear

        if n == 0:
            self._status = GRB.OPTIMAL
            self._obj_val = objective.constant if isinstance(objective, LinExpr) else (
                objective.linear.constant
            )
            return

        const, c, qmat = _objective_arrays(objective, n)
        rows = []
        for expr, sense, _name in self._constrs:
            a = np.zeros(n)
            for var, coef in expr.terms.items():
                a[var._index] += coef
            rows.append((a, sense, -expr.constant))

        lbs = np.array([v.lb if v.vtype != GRB.BINARY else max(v.lb, 0.0) for v in self._vars])
        ubs = np.array([v.ub if v.vtype != GRB.BINARY else min(v.ub, 1.0) for v in self._vars])
        lbs = np.where(lbs <= -_INF_THRESHOLD, -np.inf, lbs)
        ubs = np.where(ubs >= _INF_THRESHOLD, np.inf, ubs)
        integrality = np.array(
            [1 if v.vtype in (GRB.BINARY, GRB.INTEGER) else 0 for v in self._vars]
        )
        sign = 1.0 if self._sense == GRB.MINIMIZE else -1.0

        if qmat is not None:
            if integrality.any():
                raise GurobiError(
                    "models with both integer variables and a quadratic objective "
                    "are not supported by this backend"
                )
            x, status = _solve_quadratic(sign, const, c, qmat, rows, lbs, ubs)
        elif integrality.any():
            x, status = _solve_milp(sign * c, rows, lbs, ubs, integrality)
        else:
            x, status = _solve_linear(sign * c, rows, lbs, ubs)

        self._status = status
        if status == GRB.OPTIMAL and x is not None:
            value = const + float(c @ x)
            if qmat is not None:
                value += float(x @ qmat @ x)
            self._obj_val = value
            for var, xi in zip(self._vars, x):
                var._value = float(xi)
        else:
            self._obj_val = None


def _expand_indices(indices) -> list:
    if not indices:
        raise GurobiError("addVars needs at least one index argument")
    dims = []
    for arg in indices:
        if isinstance(arg, int) and not isinstance(arg, bool):
            dims.append(list(range(arg)))
        elif isinstance(arg, Iterable) and not isinstance(arg, (str, bytes)):
            dims.append(list(arg))
        elif isinstance(arg, str):
            dims.append([arg])
        else:
            raise GurobiError(f"cannot build variable indices from {arg!r}")
    if len(dims) == 1:
        return dims[0]
    return list(itertools.product(*dims))


def _per_key(value, key):
    if isinstance(value, Mapping):
        return value[key]
    return value


def _objective_arrays(objective, n: int):
    """Split an objective into (constant, linear coefficient vector, quadratic matrix|None)."""
    c = np.zeros(n)
    if isinstance(objective, LinExpr):
        for var, coef in objective.terms.items():
            c[var._index] += coef
        return objective.constant, c, None
    for var, coef in objective.linear.terms.items():
        c[var._index] += coef
    qmat = np.zeros((n, n))
    nonzero = False
    for (va, vb), coef in objective.quad.items():
        if coef == 0.0:
            continue
        nonzero = True
        i, j = va._index, vb._index
        if i == j:
            qmat[i, i] += coef
        else:
            qmat[i, j] += coef / 2.0
            qmat[j, i] += coef / 2.0
    return objective.linear.constant, c, (qmat if nonzero else None)


def _split_rows(rows):
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for a, sense, rhs in rows:
        if sense == "<":
            a_ub.append(a)
            b_ub.append(rhs)
        elif sense == ">":
            a_ub.append(-a)
            b_ub.append(-rhs)
        else:
            a_eq.append(a)
            b_eq.append(rhs)
    def to_arr(items):
        return np.array(items) if items else None

    return to_arr(a_ub), to_arr(b_ub), to_arr(a_eq), to_arr(b_eq)


_LINEAR_STATUS = {0: GRB.OPTIMAL, 1: GRB.TIME_LIMIT, 2: GRB.INFEASIBLE, 3: GRB.UNBOUNDED}


def _solve_linear(c, rows, lbs, ubs):
    from scipy.optimize import linprog

    a_ub, b_ub, a_eq, b_eq = _split_rows(rows)
    bounds = [
        (None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
        for lo, hi in zip(lbs, ubs)
    ]
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs"
    )
    status = _LINEAR_STATUS.get(res.status, GRB.INF_OR_UNBD)
    return (res.x if res.x is not None else None), status


def _solve_milp(c, rows, lbs, ubs, integrality):
    from scipy.optimize import Bounds, LinearConstraint, milp

    constraints = []
    if rows:
        a_all = np.array([a for a, _s, _r in rows])
        lo = np.array([-np.inf if s == "<" else r for _a, s, r in rows])
        hi = np.array([np.inf if s == ">" else r for _a, s, r in rows])
        constraints.append(LinearConstraint(a_all, lo, hi))
    res = milp(
        c=c,
        constraints=constraints,
        integrality=integrality,
        bounds=Bounds(lbs, ubs),
    )
    status = _LINEAR_STATUS.get(res.status, GRB.INF_OR_UNBD)
    return (res.x if res.x is not None else None), status


def _feasible(x, rows, lbs, ubs) -> bool:
    if not np.all(x >= lbs - _FEASIBILITY_TOL) or not np.all(x <= ubs + _FEASIBILITY_TOL):
        return False
    for a, sense, rhs in rows:
        value = float(a @ x)
        tol = _FEASIBILITY_TOL * max(1.0, abs(rhs))
        if sense == "<" and value > rhs + tol:
            return False
        if sense == ">" and value < rhs - tol:
            return False
        if sense == "=" and abs(value - rhs) > tol:
            return False
    return True


def _quadratic_starts(rows, lbs, ubs):
    n = len(lbs)
    low = np.where(np.isfinite(lbs), lbs, -1e3)
    high = np.where(np.isfinite(ubs), ubs, 1e3)
    starts = [
        np.clip(np.zeros(n), low, high),
        np.clip(np.ones(n), low, high),
        (low + high) / 2.0,
    ]
    eq_rows = [(a, rhs) for a, sense, rhs in rows if sense == "="]
    if eq_rows:
        a_eq = np.array([a for a, _ in eq_rows])
        b_eq = np.array([r for _, r in eq_rows])
        try:
            guess, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
            starts.append(np.clip(guess, low, high))
        except np.linalg.LinAlgError:
            pass
    rng = np.random.default_rng(0)
    for _ in range(3):
        starts.append(rng.uniform(low, high))
    return starts


def _solve_quadratic(sign, const, c, qmat, rows, lbs, ubs):
    from scipy.optimize import minimize

    def fun(x):
        return sign * (const + float(c @ x) + float(x @ qmat @ x))

    def jac(x):
        return sign * (c + 2.0 * (qmat @ x))

    constraints = []
    for a, sense, rhs in rows:
        if sense == "=":
            constraints.append(
                {"type": "eq", "fun": (lambda x, a=a, r=rhs: float(a @ x) - r), "jac": (lambda x, a=a: a)}
            )
        elif sense == "<":
            constraints.append(
                {"type": "ineq", "fun": (lambda x, a=a, r=rhs: r - float(a @ x)), "jac": (lambda x, a=a: -a)}
            )
        else:
            constraints.append(
                {"type": "ineq", "fun": (lambda x, a=a, r=rhs: float(a @ x) - r), "jac": (lambda x, a=a: a)}
            )
    bounds = [
        (None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
        for lo, hi in zip(lbs, ubs)
    ]

    best_x = None
    best_value = np.inf
    for x0 in _quadratic_starts(rows, lbs, ubs):
        result = minimize(
            fun,
            x0,
            jac=jac,
            bounds=bounds,
            constraints=constraints,
            method="SLSQP",
            options={"maxiter": 500, "ftol": 1e-12},
        )
        x = result.x
        if x is None or not np.all(np.isfinite(x)) or not _feasible(x, rows, lbs, ubs):
            continue
        value = fun(x)
        if value < best_value:
            best_value = value
            best_x = x

    if best_x is not None:
        return best_x, GRB.OPTIMAL
    # no start converged to a feasible point: decide between infeasible and unclassifiable
    feasibility_x, feasibility_status = _solve_linear(np.zeros(len(lbs)), rows, lbs, ubs)
    if feasibility_status == GRB.INFEASIBLE:
        return None, GRB.INFEASIBLE
    return None, GRB.INF_OR_UNBD


__all__ = [
    "GRB",
    "GurobiError",
    "Env",
    "LinExpr",
    "Model",
    "QuadExpr",
    "TempConstr",
    "Var",
    "multidict",
    "quicksum",
    "tupledict",
]
