"""Control systems with polynomial fields, RK4 propagation, adjoints.

States live in R^n; controls are piecewise constant on a breakpoint grid
(uniform grids are the common case, arbitrary sorted breakpoints are
supported so that exact needle/chattering switch times can be realized).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConsistencyError,
    DimensionMismatchError,
    DivergenceError,
    GridError,
    InputError,
)

MAX_POLY_DEGREE = 4
_NODE_TOL = 1e-9


# ---------------------------------------------------------------------------
# polynomials in (s, y)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """coef * s^s_pow * prod_i y_i^y_pows[i], active for s in [lo, hi)."""

    coef: float
    s_pow: int = 0
    y_pows: tuple = ()
    s_range: tuple = (None, None)

    def active(self, s):
        lo, hi = self.s_range
        if lo is not None and s < lo:
            return False
        if hi is not None and s >= hi:
            return False
        return True


class Polynomial:
    """Sparse polynomial in time s and state y with optional s-windows."""

    def __init__(self, terms, n_y):
        self.n_y = int(n_y)
        cleaned = []
        for t in terms:
            pows = tuple(int(p) for p in t.y_pows)
            if len(pows) < self.n_y:
                pows = pows + (0,) * (self.n_y - len(pows))
            if len(pows) != self.n_y:
                raise DimensionMismatchError("y_pows longer than state dimension")
            deg = t.s_pow + sum(pows)
            if deg > MAX_POLY_DEGREE:
                raise InputError(f"polynomial degree {deg} exceeds {MAX_POLY_DEGREE}")
            if not math.isfinite(t.coef):
                raise InputError("non-finite polynomial coefficient")
            cleaned.append(Term(float(t.coef), int(t.s_pow), pows, t.s_range))
        self.terms = tuple(cleaned)

    @classmethod
    def zero(cls, n_y):
        return cls((), n_y)

    @classmethod
    def constant(cls, value, n_y):
        return cls([Term(value)], n_y)

    def __call__(self, s, y):
        total = 0.0
        for t in self.terms:
            if not t.active(s):
                continue
            v = t.coef
            if t.s_pow:
                v *= s**t.s_pow
            for yi, p in zip(y, t.y_pows):
                if p:
                    v *= yi**p
            total += v
        return total

    def eval_batch(self, s_arr, y_arr):
        """Vectorized evaluation; s_arr (B,), y_arr (B, n_y)."""
        s_arr = np.asarray(s_arr, float)
        out = np.zeros_like(s_arr)
        for t in self.terms:
            v = np.full_like(s_arr, t.coef)
            lo, hi = t.s_range
            mask = np.ones_like(s_arr, dtype=bool)
            if lo is not None:
                mask &= s_arr >= lo
            if hi is not None:
                mask &= s_arr < hi
            if t.s_pow:
                v = v * s_arr**t.s_pow
            for i, p in enumerate(t.y_pows):
                if p:
                    v = v * y_arr[:, i] ** p
            out += np.where(mask, v, 0.0)
        return out

    def d_dy(self, i):
        terms = []
        for t in self.terms:
            p = t.y_pows[i]
            if p == 0:
                continue
            pows = list(t.y_pows)
            pows[i] = p - 1
            terms.append(Term(t.coef * p, t.s_pow, tuple(pows), t.s_range))
        return Polynomial(terms, self.n_y)

    def d_ds(self):
        terms = []
        for t in self.terms:
            if t.s_pow == 0:
                continue
            terms.append(Term(t.coef * t.s_pow, t.s_pow - 1, t.y_pows, t.s_range))
        return Polynomial(terms, self.n_y)

    def to_json(self):
        out = []
        for t in self.terms:
            d = {"coef": t.coef, "s_pow": t.s_pow, "y_pows": list(t.y_pows)}
            if t.s_range != (None, None):
                d["s_range"] = list(t.s_range)
            out.append(d)
        return out

    @classmethod
    def from_json(cls, items, n_y):
        terms = []
        for d in items:
            rng = tuple(d.get("s_range", (None, None)))
            terms.append(
                Term(d["coef"], d.get("s_pow", 0), tuple(d.get("y_pows", ())), rng)
            )
        return cls(terms, n_y)


# ---------------------------------------------------------------------------
# control-value sets
# ---------------------------------------------------------------------------

class ControlSet:
    def contains(self, w, tol=1e-9):
        raise NotImplementedError

    def samples(self):
        raise NotImplementedError


class BoxSet(ControlSet):
    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, float))
        self.hi = np.atleast_1d(np.asarray(hi, float))
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise InputError("invalid box bounds")

    def contains(self, w, tol=1e-9):
        w = np.atleast_1d(w)
        return bool(np.all(w >= self.lo - tol) and np.all(w <= self.hi + tol))

    def samples(self):
        m = self.lo.size
        corners = [
            np.array(c) for c in itertools.product(*zip(self.lo, self.hi))
        ][: 2**min(m, 4)]
        mid = 0.5 * (self.lo + self.hi)
        return np.unique(np.vstack(corners + [mid]), axis=0)

    def to_json(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class FiniteSet(ControlSet):
    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, float))
        if self.points.shape[0] == 0:
            raise InputError("finite control set needs at least one point")

    def contains(self, w, tol=1e-9):
        w = np.atleast_1d(w)
        return bool(np.any(np.max(np.abs(self.points - w), axis=1) <= tol))

    def samples(self):
        return self.points

    def to_json(self):
        return {"type": "finite", "points": self.points.tolist()}


def control_set_from_json(obj):
    if obj["type"] == "box":
        return BoxSet(obj["lo"], obj["hi"])
    if obj["type"] == "finite":
        return FiniteSet(obj["points"])
    raise InputError(f"unknown control_set type {obj['type']!r}")


# ---------------------------------------------------------------------------
# system specification
# ---------------------------------------------------------------------------

class SystemSpec:
    """Control system dy/ds = f(s, y, w).

    Either control-affine, f = drift(s,y) + sum_j channels[j](s,y) * w^j,
    or table-driven over a finite control-value set. Jacobians come from
    symbolic differentiation of the polynomial terms.
    """

    def __init__(self, n, m, horizon, drift=None, channels=None, table=None,
                 jump_times=(), control_set=None, c_bound=None):
        self.n = int(n)
        self.m = int(m)
        self.horizon = float(horizon)
        if self.n < 1 or self.m < 1 or self.horizon <= 0:
            raise InputError("need n >= 1, m >= 1, horizon > 0")
        self.jump_times = tuple(float(t) for t in jump_times)
        self.control_set = control_set if control_set is not None else BoxSet(
            -np.inf * np.ones(self.m), np.inf * np.ones(self.m)
        )
        self.c_bound = None if c_bound is None else float(c_bound)
        self.table = None
        if table is not None:
            if drift is not None or channels is not None:
                raise InputError("table-driven spec excludes drift/channels")
            self.table = [
                (np.atleast_1d(np.asarray(wv, float)), list(polys))
                for wv, polys in table
            ]
            for wv, polys in self.table:
                if wv.shape != (self.m,) or len(polys) != self.n:
                    raise DimensionMismatchError("bad table entry shape")
            self._jac_table = [
                (wv, [[p.d_dy(j) for j in range(self.n)] for p in polys])
                for wv, polys in self.table
            ]
        else:
            self.drift = list(drift) if drift is not None else [
                Polynomial.zero(self.n) for _ in range(self.n)
            ]
            self.channels = [list(ch) for ch in (channels or [])]
            if len(self.drift) != self.n:
                raise DimensionMismatchError("drift must have n components")
            if len(self.channels) != self.m:
                raise DimensionMismatchError("need one channel per control input")
            for ch in self.channels:
                if len(ch) != self.n:
                    raise DimensionMismatchError("each channel must have n components")
            self._drift_jac = [[p.d_dy(j) for j in range(self.n)] for p in self.drift]
            self._chan_jac = [
                [[p.d_dy(j) for j in range(self.n)] for p in ch] for ch in self.channels
            ]

    @property
    def is_affine(self):
        return self.table is None

    def _table_lookup(self, w):
        for wv, polys in self.table:
            if np.max(np.abs(wv - w)) <= 1e-9:
                return polys
        raise InputError(f"control value {w} not in the table-driven sample set")

    def f(self, s, y, w):
        w = np.atleast_1d(np.asarray(w, float))
        if self.is_affine:
            out = np.array([p(s, y) for p in self.drift])
            for j in range(self.m):
                if w[j] != 0.0:
                    out += w[j] * np.array([p(s, y) for p in self.channels[j]])
            return out
        polys = self._table_lookup(w)
        return np.array([p(s, y) for p in polys])

    def jac_y(self, s, y, w):
        w = np.atleast_1d(np.asarray(w, float))
        if self.is_affine:
            out = np.array([[p(s, y) for p in row] for row in self._drift_jac])
            for j in range(self.m):
                if w[j] != 0.0:
                    out += w[j] * np.array(
                        [[p(s, y) for p in row] for row in self._chan_jac[j]]
                    )
            return out
        for wv, rows in self._jac_table:
            if np.max(np.abs(wv - w)) <= 1e-9:
                return np.array([[p(s, y) for p in row] for row in rows])
        raise InputError(f"control value {w} not in the table-driven sample set")

    def f_batch(self, s_arr, y_arr, w):
        """Vectorized field over node batches for one fixed control value."""
        w = np.atleast_1d(np.asarray(w, float))
        b = len(s_arr)
        if self.is_affine:
            out = np.zeros((b, self.n))
            for i, p in enumerate(self.drift):
                out[:, i] = p.eval_batch(s_arr, y_arr)
            for j in range(self.m):
                if w[j] != 0.0:
                    for i, p in enumerate(self.channels[j]):
                        out[:, i] += w[j] * p.eval_batch(s_arr, y_arr)
            return out
        polys = self._table_lookup(w)
        out = np.zeros((b, self.n))
        for i, p in enumerate(polys):
            out[:, i] = p.eval_batch(s_arr, y_arr)
        return out

    def to_json(self):
        out = {
            "n": self.n,
            "m": self.m,
            "S": self.horizon,
            "jump_times": list(self.jump_times),
            "control_set": self.control_set.to_json(),
        }
        if self.c_bound is not None:
            out["c_bound"] = self.c_bound
        if self.is_affine:
            out["drift"] = [p.to_json() for p in self.drift]
            out["channels"] = [[p.to_json() for p in ch] for ch in self.channels]
        else:
            out["table"] = [
                {"value": wv.tolist(), "field": [p.to_json() for p in polys]}
                for wv, polys in self.table
            ]
        return out

    @classmethod
    def from_json(cls, obj):
        n = obj["n"]
        kwargs = dict(
            n=n,
            m=obj["m"],
            horizon=obj["S"],
            jump_times=obj.get("jump_times", ()),
            control_set=control_set_from_json(obj["control_set"])
            if "control_set" in obj
            else None,
            c_bound=obj.get("c_bound"),
        )
        if "table" in obj:
            kwargs["table"] = [
                (e["value"], [Polynomial.from_json(p, n) for p in e["field"]])
                for e in obj["table"]
            ]
        else:
            kwargs["drift"] = [Polynomial.from_json(p, n) for p in obj.get("drift", [[]] * n)]
            kwargs["channels"] = [
                [Polynomial.from_json(p, n) for p in ch] for ch in obj.get("channels", [])
            ]
        return cls(**kwargs)


# ---------------------------------------------------------------------------
# control paths and trajectories
# ---------------------------------------------------------------------------

class ControlPath:
    """Piecewise-constant control on sorted breakpoints times[0..G]."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        self.values = values
        if self.times.ndim != 1 or len(self.times) < 2:
            raise GridError("need at least one cell")
        if np.any(np.diff(self.times) <= 0):
            raise GridError("breakpoints must be strictly increasing")
        if self.values.ndim != 2 or self.values.shape[0] != len(self.times) - 1:
            raise GridError("need exactly one value per cell")
        self.times.flags.writeable = False
        self.values.flags.writeable = False

    @classmethod
    def uniform(cls, t_end, cells, values, t0=0.0):
        """Uniform grid on [t0, t_end]; `values` one of
        scalar (constant scalar control), (m,) row (constant vector control,
        pass as [[...]] when m == cells), (cells,) scalars, (cells, m)."""
        times = np.linspace(t0, t_end, cells + 1)
        values = np.asarray(values, dtype=float)
        if values.ndim == 0:
            values = np.full((cells, 1), float(values))
        elif values.ndim == 1 and values.size == cells:
            values = values.reshape(cells, 1)
        elif values.ndim == 1:
            values = np.tile(values, (cells, 1))
        elif values.ndim == 2 and values.shape[0] == 1:
            values = np.tile(values, (cells, 1))
        return cls(times, values)

    @property
    def cells(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def is_uniform(self):
        d = np.diff(self.times)
        return bool(np.all(np.abs(d - d[0]) <= _NODE_TOL * max(1.0, abs(self.horizon))))

    def cell_index(self, s):
        idx = int(np.searchsorted(self.times, s + _NODE_TOL, side="right") - 1)
        return min(max(idx, 0), self.cells - 1)

    def value_at(self, s):
        return self.values[self.cell_index(s)]

    def value_before(self, s):
        """Left-limit value at s (value of the cell ending at s)."""
        idx = int(np.searchsorted(self.times, s - _NODE_TOL, side="right") - 1)
        return self.values[min(max(idx, 0), self.cells - 1)]

    def node_index(self, s):
        scale = max(1.0, abs(self.horizon))
        hits = np.nonzero(np.abs(self.times - s) <= _NODE_TOL * scale)[0]
        if hits.size == 0:
            raise GridError(f"s = {s} is not a grid node")
        return int(hits[0])

    def has_node(self, s):
        try:
            self.node_index(s)
            return True
        except GridError:
            return False

    def integral(self):
        return np.diff(self.times) @ self.values

    def l1_norm(self):
        return float(np.diff(self.times) @ np.linalg.norm(self.values, axis=1))

    def same_grid(self, other):
        return len(self.times) == len(other.times) and bool(
            np.all(np.abs(self.times - other.times) <= _NODE_TOL)
        )

    def with_values(self, values):
        return ControlPath(self.times, values)

    def replace_window(self, lo, hi, value):
        """New path equal to `value` on [lo, hi); endpoints must be nodes."""
        i = self.node_index(lo)
        j = self.node_index(hi)
        if j < i:
            raise GridError("window endpoints out of order")
        vals = self.values.copy()
        vals[i:j] = np.atleast_1d(value)
        return ControlPath(self.times, vals)

    def restrict(self, lo, hi):
        """Segments of the path intersected with [lo, hi) as (times, values)."""
        ts = [lo]
        vs = []
        for k in range(self.cells):
            a, b = self.times[k], self.times[k + 1]
            if b <= lo + _NODE_TOL or a >= hi - _NODE_TOL:
                continue
            seg_end = min(b, hi)
            vs.append(self.values[k])
            ts.append(seg_end)
        if len(ts) == 1:  # window inside one cell
            vs.append(self.value_at(lo))
            ts.append(hi)
        ts[-1] = hi
        return np.asarray(ts), np.asarray(vs)

    def csv_rows(self):
        for k in range(self.cells):
            yield (self.times[k], self.times[k + 1], *self.values[k])

    def to_json(self):
        return {"times": self.times.tolist(), "values": self.values.tolist()}


@dataclass
class Process:
    """A control path with its integrated state trajectory on the same grid."""

    control: ControlPath
    states: np.ndarray  # (G+1, n)
    horizon: float = field(default=0.0)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != len(self.control.times):
            raise GridError("states must carry one value per grid node")
        self.horizon = float(self.control.times[-1])

    @property
    def times(self):
        return self.control.times

    @property
    def endpoint(self):
        return self.states[-1]

    def state_at_node(self, s):
        return self.states[self.control.node_index(s)]


@dataclass
class MatrixPath:
    """Variational flow matrices M(s_k, base_time) for grid nodes >= base."""

    base_time: float
    times: np.ndarray
    matrices: np.ndarray  # (K, n, n)

    @property
    def final(self):
        return self.matrices[-1]

    def at_node(self, s):
        hits = np.nonzero(np.abs(self.times - s) <= _NODE_TOL)[0]
        if hits.size == 0:
            raise GridError(f"s = {s} is not a node of the matrix path")
        return self.matrices[int(hits[0])]


@dataclass
class AdjointPath:
    """Covector trajectory lambda(s_k); xi is the terminal covector."""

    times: np.ndarray
    covectors: np.ndarray  # (G+1, n)

    @property
    def xi(self):
        return self.covectors[-1]

    def at_node(self, s):
        hits = np.nonzero(np.abs(self.times - s) <= _NODE_TOL)[0]
        if hits.size == 0:
            raise GridError(f"s = {s} is not a node of the adjoint path")
        return self.covectors[int(hits[0])]


# ---------------------------------------------------------------------------
# RK4 propagation
# ---------------------------------------------------------------------------

def _rk4_cell(field, s0, s1, y, param, substeps=1):
    h = (s1 - s0) / substeps
    for i in range(substeps):
        s = s0 + i * h
        k1 = field(s, y, param)
        k2 = field(s + 0.5 * h, y + 0.5 * h * k1, param)
        k3 = field(s + 0.5 * h, y + 0.5 * h * k2, param)
        k4 = field(s + h, y + h * k3, param)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def rk4_path(field, times, params, y0, substep_h=None):
    """RK4 over consecutive cells; params[k] is passed to field on cell k.

    One step per cell unless substep_h asks for finer steps. Raises
    DivergenceError with the offending cell index on non-finite states.
    """
    y = np.asarray(y0, dtype=float).copy()
    out = np.empty((len(times), y.size))
    out[0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(times) - 1):
            width = times[k + 1] - times[k]
            substeps = 1
            if substep_h is not None and width > substep_h * (1 + 1e-9):
                substeps = int(np.ceil(width / substep_h))
            y = _rk4_cell(field, times[k], times[k + 1], y, params[k], substeps)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(k)
            out[k + 1] = y
    return out


def _check_jump_times_on_grid(sys, ctrl):
    for t in sys.jump_times:
        if not ctrl.has_node(t):
            raise GridError(f"declared jump time {t} is not a grid node")


def integrate(sys, ctrl, y0):
    """Integrate dy/ds = f(s, y, w(s)) with classical RK4 per cell."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.shape != (sys.n,):
        raise DimensionMismatchError(f"y0 must have length {sys.n}")
    if ctrl.m != sys.m:
        raise DimensionMismatchError("control dimension mismatch")
    if abs(ctrl.horizon - sys.horizon) > _NODE_TOL * max(1.0, sys.horizon):
        raise GridError("control horizon differs from the declared horizon")
    _check_jump_times_on_grid(sys, ctrl)
    for v in ctrl.values:
        if not sys.control_set.contains(v):
            raise InputError(f"control value {v} outside the declared value set")
    states = rk4_path(sys.f, ctrl.times, ctrl.values, y0)
    return Process(control=ctrl, states=states)


def variational_flow(sys, proc, s_from):
    """Flow matrices M(s, s_from) of the linearized system along proc."""
    k0 = proc.control.node_index(s_from)
    n = sys.n
    ctrl = proc.control

    def field(s, state, w):
        y = state[:n]
        mat = state[n:].reshape(n, n)
        dy = sys.f(s, y, w)
        dm = sys.jac_y(s, y, w) @ mat
        return np.concatenate([dy, dm.ravel()])

    z0 = np.concatenate([proc.states[k0], np.eye(n).ravel()])
    out = rk4_path(field, ctrl.times[k0:], ctrl.values[k0:], z0)
    mats = out[:, n:].reshape(-1, n, n)
    return MatrixPath(base_time=float(ctrl.times[k0]), times=ctrl.times[k0:], matrices=mats)


def transport_to_final(sys, proc):
    """M(S, s_k) for every grid node, by one backward matrix integration.

    Any adjoint path is xi @ M(S, .); extremality searches reuse this
    single propagation for all candidate covectors.
    """
    n = sys.n
    ctrl = proc.control
    times = ctrl.times

    def field(tau, state, cell):
        s = times[-1] - tau
        y = state[:n]
        mat = state[n:].reshape(n, n)
        w = ctrl.values[cell]
        dy = -sys.f(s, y, w)
        dm = mat @ sys.jac_y(s, y, w)
        return np.concatenate([dy, dm.ravel()])

    z0 = np.concatenate([proc.states[-1], np.eye(n).ravel()])
    rev_times = times[-1] - times[::-1]
    cells = list(range(ctrl.cells))[::-1]
    out = rk4_path(field, rev_times, cells, z0)
    mats = out[:, n:].reshape(-1, n, n)[::-1]
    return MatrixPath(base_time=float(times[-1]), times=times, matrices=mats)


def adjoint(sys, proc, xi):
    """Backward adjoint d(lambda)/ds = -lambda . df/dy with lambda(S) = xi."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (sys.n,):
        raise DimensionMismatchError(f"xi must have length {sys.n}")
    if not np.all(np.isfinite(xi)):
        raise InputError("xi must be finite")
    n = sys.n
    ctrl = proc.control
    times = ctrl.times

    def field(tau, state, cell):
        s = times[-1] - tau
        y = state[:n]
        lam = state[n:]
        w = ctrl.values[cell]
        dy = -sys.f(s, y, w)
        dlam = lam @ sys.jac_y(s, y, w)
        return np.concatenate([dy, dlam])

    z0 = np.concatenate([proc.states[-1], xi])
    rev_times = times[-1] - times[::-1]
    cells = list(range(ctrl.cells))[::-1]
    out = rk4_path(field, rev_times, cells, z0)
    covectors = out[:, n:][::-1].copy()
    path = AdjointPath(times=times, covectors=covectors)
    if sys.c_bound is not None and np.linalg.norm(xi) > 0:
        floor = np.linalg.norm(xi) * np.exp(-sys.c_bound * (times[-1] - times))
        norms = np.linalg.norm(covectors, axis=1)
        if np.any(norms < 0.99 * floor - 1e-12):
            raise ConsistencyError(
                "adjoint norm fell below the Gronwall floor for the declared c bound"
            )
    return path


def merge_breakpoints(t1, t2, tol=_NODE_TOL):
    merged = np.sort(np.concatenate([t1, t2]))
    out = [merged[0]]
    for t in merged[1:]:
        if t - out[-1] > tol:
            out.append(t)
    out[-1] = max(t1[-1], t2[-1])
    return np.asarray(out)


def resample(ctrl, times):
    """The same piecewise-constant control on a refined breakpoint grid."""
    mids = 0.5 * (times[:-1] + times[1:])
    vals = np.array([ctrl.value_at(t) for t in mids])
    return ControlPath(times, vals)


def pseudo_distance(sys, w1, w2, y0):
    """max_s |y[w1](s) - y[w2](s)| over the merged grid nodes."""
    if abs(w1.horizon - w2.horizon) > _NODE_TOL:
        raise GridError("controls must share the horizon")
    if not w1.same_grid(w2):
        times = merge_breakpoints(w1.times, w2.times)
        w1 = resample(w1, times)
        w2 = resample(w2, times)
    p1 = integrate(sys, w1, y0)
    p2 = integrate(sys, w2, y0)
    return float(np.max(np.linalg.norm(p1.states - p2.states, axis=1)))


# ---------------------------------------------------------------------------
# Scorza-Dragoni jump diagnostic
# ---------------------------------------------------------------------------

SD_THRESHOLD = 1e-3
_SD_SMALLEST_WINDOW_EXP = 20  # smallest window = S * 2**-20
_SD_SUBSAMPLES = 8


def _sd_control_samples(sys, proc):
    pts = sys.control_set.samples()
    pts = pts[np.all(np.isfinite(pts), axis=1)] if pts.size else pts
    used = np.unique(proc.control.values, axis=0)
    pts = np.unique(np.vstack([pts, used]), axis=0) if pts.size else used
    if pts.shape[0] > 8:
        idx = np.linspace(0, pts.shape[0] - 1, 8).astype(int)
        pts = pts[idx]
    return pts


def sd_jump_diagnostic(sys, proc, r):
    """Grid nodes where the time-averaged local oscillation does not decay.

    For each interior node s̄ and each sampled control value, the sup over a
    state ball of |f(s, x, w) - f(s̄, y(s̄), w)| is averaged over backward
    dyadic windows [s̄ - δ, s̄]; a node is flagged when the smallest-window
    average stays above SD_THRESHOLD. For piecewise-continuous specs the
    flagged set is the declared jump set, independent of the grid.
    """
    if r <= 0:
        raise InputError("ball radius r must be positive")
    horizon = sys.horizon
    wsamples = _sd_control_samples(sys, proc)
    n = sys.n
    flagged = []
    delta_min = horizon * 2.0**-_SD_SMALLEST_WINDOW_EXP
    ball = np.vstack([np.zeros(n), r * np.eye(n), -r * np.eye(n)])
    for k in range(1, len(proc.times)):
        s_bar = float(proc.times[k])
        delta = min(delta_min, s_bar)
        if delta <= 0:
            continue
        y_bar = proc.states[k]
        s_pts = s_bar - delta + delta * (np.arange(_SD_SUBSAMPLES) + 0.5) / _SD_SUBSAMPLES
        xs = y_bar + ball  # (B, n)
        worst = 0.0
        for w in wsamples:
            ref = sys.f(s_bar, y_bar, w)
            for x in xs:
                vals = sys.f_batch(s_pts, np.tile(x, (len(s_pts), 1)), w)
                diffs = np.linalg.norm(vals - ref, axis=1)
                worst = max(worst, float(np.mean(diffs)))
        if worst > SD_THRESHOLD:
            flagged.append(s_bar)
    return flagged
