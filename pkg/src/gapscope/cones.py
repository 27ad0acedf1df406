"""Finitely generated convex cones: membership, polars, separation.

A cone is {sum a_i r_i + sum b_j l_j : a_i >= 0, b_j real} for stored rays
r_i and lineality vectors l_j. All decision procedures run on the small
dense simplex solver in lp.py.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import (
    DimensionMismatchError,
    InfeasibleError,
    InputError,
    UnsupportedDimensionError,
)
from .lp import solve_lp

_ZERO_RAY_TOL = 1e-12
_WITNESS_TOL = 1e-9
MAX_POLAR_DIM = 6


class PolyhedralCone:
    """Finitely generated convex cone in R^dim (rays plus lineality)."""

    def __init__(self, dim, rays=(), lineality=()):
        if int(dim) < 1:
            raise InputError("cone dimension must be a positive integer")
        self.dim = int(dim)
        self.rays = self._clean(rays, "ray")
        self.lineality = self._clean(lineality, "lineality vector")

    def _clean(self, vecs, label):
        arr = np.asarray(list(vecs), dtype=float)
        if arr.size == 0:
            return np.zeros((0, self.dim))
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"every {label} must have length {self.dim}"
            )
        if not np.all(np.isfinite(arr)):
            raise InputError(f"non-finite {label}")
        keep = np.linalg.norm(arr, axis=1) >= _ZERO_RAY_TOL
        arr = arr[keep]
        arr.flags.writeable = False
        return arr

    @classmethod
    def span_plus(cls, rays):
        rays = np.atleast_2d(np.asarray(rays, dtype=float))
        return cls(rays.shape[1], rays=rays)

    @classmethod
    def trivial(cls, dim):
        return cls(dim)

    @classmethod
    def full_space(cls, dim):
        return cls(dim, lineality=np.eye(dim))

    @property
    def is_trivial(self):
        return self.rays.shape[0] == 0 and self.lineality.shape[0] == 0

    def generators(self):
        """Rays plus +-lineality pairs, as rows (possibly empty)."""
        parts = [self.rays, self.lineality, -self.lineality]
        return np.vstack([p for p in parts if p.shape[0] > 0] or [np.zeros((0, self.dim))])

    def unit_generators(self):
        gen = self.generators()
        if gen.shape[0] == 0:
            return gen
        return gen / np.linalg.norm(gen, axis=1, keepdims=True)

    def to_json(self):
        return {
            "dim": self.dim,
            "rays": self.rays.tolist(),
            "lineality": self.lineality.tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(obj["dim"], obj.get("rays", ()), obj.get("lineality", ()))

    def __repr__(self):
        return (
            f"PolyhedralCone(dim={self.dim}, rays={self.rays.shape[0]}, "
            f"lineality={self.lineality.shape[0]})"
        )


@dataclass(frozen=True)
class SeparationWitness:
    """Nonzero covector xi with xi.k1 >= 0 on K1 and xi.k2 <= 0 on K2."""

    xi: np.ndarray
    margin: float


def cone_inf_distance(cone, v):
    """Minimum sup-norm distance from v to the cone, via one LP.

    Variables are the generator coefficients plus the distance bound t;
    the LP minimizes t subject to |G a - v|_inf <= t.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (cone.dim,):
        raise DimensionMismatchError(f"vector must have length {cone.dim}")
    gen = cone.unit_generators()
    k = gen.shape[0]
    if k == 0:
        return float(np.max(np.abs(v))) if v.size else 0.0
    n = cone.dim
    # rows: G a - t <= v   and   -G a - t <= -v
    a_ub = np.zeros((2 * n, k + 1))
    a_ub[:n, :k] = gen.T
    a_ub[:n, k] = -1.0
    a_ub[n:, :k] = -gen.T
    a_ub[n:, k] = -1.0
    b_ub = np.concatenate([v, -v])
    c = np.zeros(k + 1)
    c[k] = 1.0
    res = solve_lp(c, a_ub=a_ub, b_ub=b_ub)
    return max(res.fun, 0.0)


def cone_contains(cone, v, tol):
    """True iff v lies within distance tol of the cone (LP decision).

    The LP minimizes the sup-norm of the generator-combination residual,
    which brackets the Euclidean distance within a sqrt(dim) factor.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    return cone_inf_distance(cone, v) <= tol


def _orthonormalize(rows, tol=1e-10):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0:
        return rows
    q, r = np.linalg.qr(rows.T)
    keep = np.abs(np.diag(r)) > tol
    return q.T[keep]


def _prune_rays(rays, lines, tol=1e-9):
    """Drop rays expressible as conic combinations of the remaining ones."""
    rays = list(rays)
    changed = True
    while changed:
        changed = False
        for i in range(len(rays)):
            others = rays[:i] + rays[i + 1 :]
            cols = [np.asarray(r) for r in others]
            for l in lines:
                cols.extend([l, -l])
            if not cols:
                continue
            a = np.array(cols).T
            coef, resid = nnls(a, np.asarray(rays[i]))
            if resid <= tol:
                rays.pop(i)
                changed = True
                break
    return rays


def _cut_halfspace(rays, lines, normal, tol=1e-9):
    """Intersect span+(rays)+span(lines) with {x : normal . x <= 0}."""
    normal = normal / np.linalg.norm(normal)
    if lines.shape[0] > 0:
        d = lines @ normal
        j = int(np.argmax(np.abs(d)))
        if abs(d[j]) > tol:
            l0 = lines[j]
            d0 = d[j]
            new_lines = []
            for i, l in enumerate(lines):
                if i == j:
                    continue
                p = l - (d[i] / d0) * l0
                if np.linalg.norm(p) > tol:
                    new_lines.append(p / np.linalg.norm(p))
            new_rays = []
            for r in rays:
                p = r - ((r @ normal) / d0) * l0
                if np.linalg.norm(p) > tol:
                    new_rays.append(p / np.linalg.norm(p))
            new_rays.append(-np.sign(d0) * l0)
            return new_rays, _orthonormalize(new_lines)
    d = np.array([r @ normal for r in rays])
    pos = [r for r, di in zip(rays, d) if di > tol]
    zero = [r for r, di in zip(rays, d) if abs(di) <= tol]
    neg = [r for r, di in zip(rays, d) if di < -tol]
    if not pos:
        return list(rays), lines
    combos = []
    for p, dp in [(r, r @ normal) for r in pos]:
        for q, dq in [(r, r @ normal) for r in neg]:
            w = dp * q - dq * p
            nw = np.linalg.norm(w)
            if nw > _ZERO_RAY_TOL:
                combos.append(w / nw)
    merged = zero + neg + combos
    # dedupe parallel rays
    out = []
    for r in merged:
        if all(np.linalg.norm(r - s) > 1e-9 for s in out):
            out.append(r)
    return _prune_rays(out, lines), lines


def polar(cone):
    """Polar cone {p : p . w <= 0 for all w in the cone}.

    Enumerates generators by incremental double description starting from
    the full space; supported up to dimension MAX_POLAR_DIM.
    """
    if cone.dim > MAX_POLAR_DIM:
        raise UnsupportedDimensionError(
            f"polar enumeration supported up to dimension {MAX_POLAR_DIM}; "
            "use cone_contains-based tests instead"
        )
    rays: list = []
    lines = np.eye(cone.dim)
    halfspaces = [r for r in cone.rays]
    for l in cone.lineality:
        halfspaces.extend([l, -l])
    for a in halfspaces:
        rays, lines = _cut_halfspace(rays, lines, np.asarray(a, dtype=float))
    return PolyhedralCone(cone.dim, rays=rays, lineality=lines)


def canonicalize(cone):
    """Promote antipodal ray pairs to lineality and prune redundancy."""
    rays = [r / np.linalg.norm(r) for r in cone.rays]
    lines = [l for l in cone.lineality]
    changed = True
    while changed:
        changed = False
        for i in range(len(rays)):
            for j in range(i + 1, len(rays)):
                if rays[i] @ rays[j] < -1.0 + 1e-9:
                    lines.append(rays[i])
                    rays = [r for k, r in enumerate(rays) if k not in (i, j)]
                    changed = True
                    break
            if changed:
                break
    lines = _orthonormalize(lines) if lines else np.zeros((0, cone.dim))
    rays = _prune_rays(rays, lines)
    return PolyhedralCone(cone.dim, rays=rays, lineality=lines)


def _check_dims(k1, k2):
    if k1.dim != k2.dim:
        raise DimensionMismatchError(
            f"ambient dimensions differ: {k1.dim} vs {k2.dim}"
        )


def _witness_constraints(g1, g2, n, t_var):
    """Rows for xi.g1 >= t, -xi.g2 >= t with xi = p - q, box |xi_i| <= 1.

    Layout of variables: p (n), q (n), optionally t (1 when t_var).
    Returns (a_ub, b_ub).
    """
    k = 2 * n + (1 if t_var else 0)
    rows = []
    rhs = []
    for g in g1:
        row = np.zeros(k)
        row[:n] = -g
        row[n : 2 * n] = g
        if t_var:
            row[2 * n] = 1.0
        rows.append(row)
        rhs.append(0.0)
    for g in g2:
        row = np.zeros(k)
        row[:n] = g
        row[n : 2 * n] = -g
        if t_var:
            row[2 * n] = 1.0
        rows.append(row)
        rhs.append(0.0)
    for i in range(2 * n):  # box p_i <= 1, q_i <= 1
        row = np.zeros(k)
        row[i] = 1.0
        rows.append(row)
        rhs.append(1.0)
    return np.array(rows), np.array(rhs)


def _min_slack(xi, g1, g2):
    slacks = []
    for g in g1:
        slacks.append(float(xi @ g))
    for g in g2:
        slacks.append(float(-(xi @ g)))
    return min(slacks) if slacks else float(np.max(np.abs(xi)))


def linear_separation(k1, k2):
    """Witness xi with xi.k1 >= 0 on K1, xi.k2 <= 0 on K2, or None.

    Maximizes the minimum slack over unit generators subject to the box
    |xi|_inf <= 1; when only zero-slack witnesses exist, falls back to
    coordinate LPs that detect any nonzero covector in the witness cone.
    None means the cones are transverse.
    """
    _check_dims(k1, k2)
    n = k1.dim
    g1 = k1.unit_generators()
    g2 = k2.unit_generators()
    if g1.shape[0] == 0 and g2.shape[0] == 0:
        xi = np.zeros(n)
        xi[0] = 1.0
        return SeparationWitness(xi=xi, margin=1.0)

    a_ub, b_ub = _witness_constraints(g1, g2, n, t_var=True)
    c = np.zeros(2 * n + 1)
    c[2 * n] = -1.0  # maximize t
    res = solve_lp(c, a_ub=a_ub, b_ub=b_ub)
    t_star = -res.fun
    if t_star > _WITNESS_TOL:
        xi = res.x[:n] - res.x[n : 2 * n]
        xi = xi / np.max(np.abs(xi))
        return SeparationWitness(xi=xi, margin=max(_min_slack(xi, g1, g2), 0.0))

    a_ub0, b_ub0 = _witness_constraints(g1, g2, n, t_var=False)
    for i in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(2 * n)
            c[i] = -sign
            c[n + i] = sign
            res = solve_lp(c, a_ub=a_ub0, b_ub=b_ub0)
            if -res.fun >= 0.5:
                xi = res.x[:n] - res.x[n : 2 * n]
                xi = xi / np.max(np.abs(xi))
                slack = _min_slack(xi, g1, g2)
                if slack >= -_WITNESS_TOL:
                    return SeparationWitness(xi=xi, margin=max(slack, 0.0))
    return None


def _has_common_nonzero_ray(k1, k2, tol=1e-7):
    """LP probe for x != 0 with x in K1 and x in K2."""
    g1 = k1.unit_generators()
    g2 = k2.unit_generators()
    m1, m2 = g1.shape[0], g2.shape[0]
    if m1 == 0 or m2 == 0:
        return False
    n = k1.dim
    # variables: a (m1), b (m2); x = G1^T a; constraints G1^T a - G2^T b = 0
    a_eq = np.hstack([g1.T, -g2.T])
    b_eq = np.zeros(n)
    a_ub = np.zeros((1, m1 + m2))
    a_ub[0, :m1] = 1.0  # sum a <= 1 keeps the problem bounded
    b_ub = np.array([1.0])
    best = 0.0
    for i in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(m1 + m2)
            c[:m1] = -sign * g1[:, i]
            try:
                res = solve_lp(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq)
            except InfeasibleError:
                continue
            best = max(best, -res.fun)
            if best > tol:
                return True
    return best > tol


def classify_transversality(k1, k2):
    """Trichotomy of a cone pair.

    Returns "NotTransverse" when a separating covector exists,
    "StronglyTransverse" when a common nonzero ray exists besides,
    and "ComplementarySubspaces" otherwise.
    """
    _check_dims(k1, k2)
    if linear_separation(k1, k2) is not None:
        return "NotTransverse"
    if _has_common_nonzero_ray(k1, k2):
        return "StronglyTransverse"
    return "ComplementarySubspaces"
