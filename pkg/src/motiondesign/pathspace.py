"""One-dimensional discretization of the motion parameter.

The path parameter runs over [0, 1] and is split into uniform path
elements.  Control values (Lagrange nodes or B-spline control points) each
hold a complete vector of spatial displacements.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PathMesh:
    kind: str  # "lagrange" | "bspline"
    degree: int
    n_elements: int
    continuity_reductions: tuple = ()
    quadrature: int | None = None

    @classmethod
    def from_spec(cls, spec):
        return cls(spec.kind, spec.degree, spec.n_elements, tuple(spec.continuity_reductions), spec.quadrature)

    @property
    def n_gauss(self):
        return self.quadrature or self.degree + 1

    @cached_property
    def breakpoints(self):
        return np.arange(self.n_elements + 1) / self.n_elements

    @cached_property
    def knots(self):
        """Open knot vector; reduced path nodes get multiplicity ``degree``."""
        p = self.degree
        if self.kind != "bspline":
            return None
        inner = []
        for b in range(1, self.n_elements):
            mult = p if b in self.continuity_reductions else 1
            inner += [self.breakpoints[b]] * mult
        return np.array([0.0] * (p + 1) + inner + [1.0] * (p + 1))

    @property
    def n_ctrl(self):
        if self.kind == "bspline":
            return len(self.knots) - self.degree - 1
        return self.n_elements * self.degree + 1

    def first_ctrl(self, e):
        """Index of the first control value active on path element ``e``."""
        if self.kind == "bspline":
            span = np.searchsorted(self.knots, self.breakpoints[e], side="right") - 1
            return int(span - self.degree)
        return e * self.degree

    def element_of(self, s):
        return min(int(np.floor(s * self.n_elements)), self.n_elements - 1)

    def basis(self, e, s):
        """Shape values and s-derivatives of the p+1 active functions at points ``s`` of element ``e``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        p = self.degree
        if self.kind == "bspline":
            span = self.first_ctrl(e) + p
            out = [_bspline_basis(self.knots, p, span, x) for x in s]
            return np.array([o[0] for o in out]), np.array([o[1] for o in out])
        h = 1.0 / self.n_elements
        t = (s - self.breakpoints[e]) / h
        N, dN = _lagrange_basis(p, t)
        return N, dN / h

    @cached_property
    def _gauss(self):
        return np.polynomial.legendre.leggauss(self.n_gauss)

    def quadrature_points(self, e):
        x, w = self._gauss
        a, b = self.breakpoints[e], self.breakpoints[e + 1]
        return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w

    @cached_property
    def quadrature_rules(self):
        """Per element: Gauss points, weights, shape values and s-derivatives there."""
        rules = []
        for e in range(self.n_elements):
            pts, wts = self.quadrature_points(e)
            rules.append((pts, wts) + self.basis(e, pts))
        return tuple(rules)

    @cached_property
    def greville(self):
        """Parameter associated with every control value."""
        if self.kind == "bspline":
            p = self.degree
            return np.array([self.knots[i + 1:i + p + 1].mean() for i in range(self.n_ctrl)])
        return np.arange(self.n_ctrl) / (self.n_ctrl - 1)

    @cached_property
    def stations(self):
        """Parameters of the configurations reported along the path."""
        if self.kind == "bspline":
            return self.breakpoints
        return self.greville

    def ctrl_at_breakpoint(self, b):
        """Control value that equals the curve at path node ``b``."""
        if self.kind != "bspline":
            return b * self.degree
        s = self.breakpoints[b]
        e = min(b, self.n_elements - 1)
        N, _ = self.basis(e, s)
        j = int(np.argmax(N[0]))
        if abs(N[0, j] - 1.0) > 1e-12:
            raise ValueError(f"path node {b} is not interpolatory; reduce continuity there to C0")
        return self.first_ctrl(e) + j

    def evaluate(self, ctrl, s):
        """Curve values and s-derivatives at parameters ``s`` for control array (n_ctrl, n)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        vals = np.empty((len(s), ctrl.shape[1]))
        ders = np.empty_like(vals)
        for i, x in enumerate(s):
            e = self.element_of(x)
            N, dN = self.basis(e, x)
            c = ctrl[self.first_ctrl(e):self.first_ctrl(e) + self.degree + 1]
            vals[i] = N[0] @ c
            ders[i] = dN[0] @ c
        return vals, ders

    def collocation_matrix(self, s):
        A = np.zeros((len(s), self.n_ctrl))
        for i, x in enumerate(s):
            e = self.element_of(x)
            N, _ = self.basis(e, x)
            A[i, self.first_ctrl(e):self.first_ctrl(e) + self.degree + 1] = N[0]
        return A


def _lagrange_basis(p, t):
    nodes = np.linspace(0.0, 1.0, p + 1)
    N = np.ones((len(t), p + 1))
    dN = np.zeros((len(t), p + 1))
    for a in range(p + 1):
        others = [b for b in range(p + 1) if b != a]
        denom = np.prod([nodes[a] - nodes[b] for b in others])
        for b in others:
            N[:, a] *= t - nodes[b]
        for m in others:
            term = np.ones(len(t))
            for b in others:
                if b != m:
                    term *= t - nodes[b]
            dN[:, a] += term
        N[:, a] /= denom
        dN[:, a] /= denom
    return N, dN


def _bspline_basis(knots, p, span, x):
    """Cox-de Boor values and first derivatives of the p+1 functions on ``span``."""
    ndu = np.zeros((p + 1, p + 1))
    ndu[0, 0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]  # knot differences (lower triangle)
            tmp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        ndu[j, j] = saved
    N = ndu[:, p].copy()
    dN = np.zeros(p + 1)
    if p > 0:
        for r in range(p + 1):
            d = 0.0
            if r >= 1:
                d += ndu[r - 1, p - 1] / ndu[p, r - 1]
            if r <= p - 1:
                d -= ndu[r, p - 1] / ndu[p, r]
            dN[r] = p * d
    return N, dN


def eval_shapes(path_mesh, s):
    """Shape values, s-derivatives and active control indices at one parameter."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"path parameter {s} outside [0, 1]")
    e = path_mesh.element_of(s)
    N, dN = path_mesh.basis(e, s)
    first = path_mesh.first_ctrl(e)
    return N[0], dN[0], np.arange(first, first + path_mesh.degree + 1)


# ---------------------------------------------------------------------------
# total arc length


@dataclass(frozen=True)
class ArcLengthState:
    """Volume-weighted RMS trajectory speed and its derivatives.

    The Hessian is ``diag(weights)/scale - outer(grad, grad)/scale``; it is
    kept in that factored form and only expanded on request.
    """

    s_u: float
    grad: np.ndarray
    weights: np.ndarray  # V_k / V per dof
    scale: float  # s_u, or the floor used in divisions
    regularized: bool

    @property
    def hess(self):
        return (np.diag(self.weights) - np.outer(self.grad, self.grad)) / self.scale

    def hess_dot(self, v):
        return (self.weights * v - self.grad * (self.grad @ v)) / self.scale


def arc_length_state(rate, volumes, total_volume, eps=0.0):
    """Arc length state for displacement rates ``rate`` (per free dof).

    ``volumes`` holds the influence volume of the node owning each dof.
    Below ``eps`` the value ``eps`` replaces s_u in divisions.
    """
    rate = np.asarray(rate, dtype=float)
    w = np.asarray(volumes, dtype=float) / total_volume
    wr = w * rate
    s_u = float(np.sqrt(rate @ wr))
    regularized = s_u < eps or s_u == 0.0
    if not regularized:
        scale = s_u
    else:
        scale = eps if eps > 0 else 1.0  # zero rate: grad vanishes regardless
    return ArcLengthState(s_u, wr / scale, w, scale, regularized)


def path_element_length(problem, D, e):
    """Integral of s_u over path element ``e`` and its gradient w.r.t. the control values."""
    from .functional import discretize

    disc = discretize(problem)
    pm = disc.path
    pts, wts, _, dN = pm.quadrature_rules[e]
    first = pm.first_ctrl(e)
    active = D[first:first + pm.degree + 1]
    L = 0.0
    grad = np.zeros_like(D)
    for g in range(len(pts)):
        arc = arc_length_state(dN[g] @ active, disc.volumes, disc.total_volume, disc.eps)
        L += wts[g] * arc.s_u
        grad[first:first + pm.degree + 1] += wts[g] * np.outer(dN[g], arc.grad)
    return L, grad
