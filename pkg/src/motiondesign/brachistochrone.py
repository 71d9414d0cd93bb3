"""Curve of fastest descent: closed-form cycloid and path finite element solution.

The finite element solution reuses the motion machinery: a single point
mass sits at A, its displacement D(s) traces the curve, and the objective
1/sqrt(2 g depth) integrated against s_u (here the plain speed |D_{,s}|)
is the travel time.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from .functional import CallableObjective, discretize
from .model import (ConfigurationConstraint, EqualLength, Mesh, MotionProblem, Node, PathSpec,
                    PredictorSpec, SolverConfig)
from .solver import solve_motion


class BrachError(ValueError):
    pass


@dataclass(frozen=True)
class BrachProblem:
    A: tuple
    B: tuple
    g: float = 10.0

    def __post_init__(self):
        (xa, ya), (xb, yb) = self.A, self.B
        if not self.g > 0:
            raise BrachError("gravity must be positive")
        if yb > ya:
            raise BrachError("end point lies above the start point; the mass cannot get there")
        if yb == ya and xb == xa:
            raise BrachError("start and end point coincide")

    @property
    def drop(self):
        return self.A[1] - self.B[1]

    @property
    def run(self):
        return self.B[0] - self.A[0]


@dataclass(frozen=True)
class CycloidSolution:
    C1: float
    C2: float
    t_E: float
    problem: BrachProblem

    @property
    def radius(self):
        return 1.0 / (4.0 * self.problem.g * self.C1**2)

    @property
    def direction(self):
        return 1.0 if self.problem.run >= 0 else -1.0

    def point(self, t):
        t = np.asarray(t, dtype=float)
        R = self.radius
        x = self.C2 + self.direction * R * _t_minus_sin(t)
        y = self.problem.A[1] - R * 2.0 * np.sin(0.5 * t) ** 2
        return np.stack([x, y], axis=-1)

    def sample(self, n=201):
        t = np.linspace(0.0, self.t_E, n)
        return t, self.point(t)

    @property
    def time(self):
        """Travel time along the cycloid, t_E * sqrt(R / g)."""
        return self.t_E * np.sqrt(self.radius / self.problem.g)

    def residuals(self):
        end = self.point(self.t_E)
        return end[0] - self.problem.B[0], end[1] - self.problem.B[1]


def _t_minus_sin(t):
    """t - sin(t) without cancellation for small t."""
    t = np.asarray(t, dtype=float)
    series = t**3 / 6 * (1 - t**2 / 20 * (1 - t**2 / 42 * (1 - t**2 / 72 * (1 - t**2 / 110))))
    return np.where(np.abs(t) < 0.1, series, t - np.sin(t))


def _shape_ratio(t):
    """Run-to-drop ratio of a cycloid arc ending at angle ``t``; increases from 0 to infinity on (0, 2 pi)."""
    return _t_minus_sin(t) / (2.0 * np.sin(0.5 * t) ** 2)


def solve_exact(problem):
    """Constants C1, C2 and end angle t_E of the cycloid through A and B."""
    g, h, w = problem.g, problem.drop, abs(problem.run)
    if w == 0.0:
        raise BrachError("vertical drop: the cycloid degenerates to free fall")
    if h == 0.0:
        # end point level with A: exactly one full arch
        t_E = 2.0 * np.pi
    else:
        target = w / h
        lo, hi = 1e-8, 2.0 * np.pi - 1e-8
        if not _shape_ratio(lo) < target < _shape_ratio(hi):
            raise BrachError(f"run/drop ratio {target:g} outside the resolvable range")
        t_E = scipy.optimize.brentq(lambda t: _shape_ratio(t) - target, lo, hi, xtol=1e-15, rtol=1e-15)
    R = w / float(_t_minus_sin(t_E))
    C1 = 1.0 / np.sqrt(4.0 * g * R)
    return CycloidSolution(float(C1), float(problem.A[0]), float(t_E), problem)


def travel_time(curve, problem, tol=1e-12):
    """Time to slide along the polyline ``curve`` (points from A to B) starting at rest.

    Each straight segment is integrated in closed form: with depths h0, h1
    below A and length l the time is 2 l / (sqrt(2 g) (sqrt(h0) + sqrt(h1))).
    """
    P = np.asarray(curve, dtype=float)
    depth = problem.A[1] - P[:, 1]
    scale = max(abs(problem.drop), abs(problem.run), 1.0)
    if np.any(depth < -tol * scale):
        k = int(np.argmin(depth))
        raise BrachError(f"curve rises above the start height at point {k} (speed would be imaginary)")
    depth = np.clip(depth, 0.0, None)
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    root = np.sqrt(depth)
    denom = root[:-1] + root[1:]
    moving = seg > 0
    if np.any(denom[moving] == 0.0):
        raise BrachError("curve runs along the start height; the mass never starts moving")
    return float(np.sum(2.0 * seg[moving] / (np.sqrt(2.0 * problem.g) * denom[moving])))


# ---------------------------------------------------------------------------
# finite element solution


def time_objective(g):
    """F(D) = 1 / sqrt(2 g depth) with depth = -D_y, and its derivatives."""
    c = 1.0 / np.sqrt(2.0 * g)

    def depth(D):
        h = -float(D[1])
        if not h > 0.0:
            raise ValueError("point at or above the start height")
        return h

    def value(D):
        return c * depth(D) ** -0.5

    def gradient(D):
        return np.array([0.0, 0.5 * c * depth(D) ** -1.5])

    def hessian(D):
        H = np.zeros((2, 2))
        H[1, 1] = 0.75 * c * depth(D) ** -2.5
        return H

    return CallableObjective(value, gradient, hessian)


def motion_problem(problem, path):
    """Point mass at A that has to end at B, as a motion design problem."""
    mesh = Mesh((Node(0, tuple(map(float, problem.A))),), (), {})
    dx, dy = problem.run, -problem.drop
    target = ConfigurationConstraint(path.n_elements, {(0, 0): float(dx), (0, 1): float(dy)}, partial=False)
    return MotionProblem(mesh, path, (target,), EqualLength(), SolverConfig(tolerance=1e-10),
                         PredictorSpec("linear"), name="brachistochrone")


def sagged_chord(mp, problem, sag=0.05):
    """Straight chord A-B pushed down by ``sag`` times |AB| at mid-path."""
    disc = discretize(mp)
    s = disc.path.greville
    chord = np.array([problem.run, -problem.drop])
    D = np.outer(s, chord)
    D[:, 1] -= sag * np.hypot(*chord) * np.sin(np.pi * s)
    return disc.apply_prescribed(D)


@dataclass
class FESolution:
    curve: np.ndarray  # (n, 2) points from A to B
    T: float
    motion: object  # MotionSolution of the path problem
    problem: MotionProblem

    @property
    def converged(self):
        return self.motion.converged


def fe_curve(mp, D, samples_per_element=None):
    disc = discretize(mp)
    pm = disc.path
    if samples_per_element is None:
        samples_per_element = 1 if (pm.kind == "lagrange" and pm.degree == 1) else 200
    s = np.linspace(0.0, 1.0, pm.n_elements * samples_per_element + 1)
    vals, _ = pm.evaluate(D, s)
    return np.asarray(mp.mesh.nodes[0].X) + vals, s


def solve_fe(problem, path):
    """Path finite element solution with equal-length regularization.

    ``path`` is a :class:`PathSpec` with at least two elements; unless it
    sets a quadrature order, 4 (p + 1) Gauss points per element are used.  Curved
    (higher order) path elements are sampled densely before evaluating
    the travel time.
    """
    if path.n_elements < 2:
        raise BrachError("the finite element solution needs at least two path elements")
    if path.quadrature is None:
        # the integrand is singular at A; p + 1 points resolve it poorly
        path = replace(path, quadrature=4 * (path.degree + 1))
    mp = motion_problem(problem, path)
    sol = solve_motion(mp, sagged_chord(mp, problem), objective=time_objective(problem.g))
    curve, _ = fe_curve(mp, sol.D)
    return FESolution(curve, travel_time(curve, problem), sol, mp)


def reference_setup():
    """A = (1, 5), B = (10, 2), g = 10."""
    return BrachProblem((1.0, 5.0), (10.0, 2.0), 10.0)


def refinement_study(problem, counts=(4, 8, 16, 32)):
    return {n: solve_fe(problem, PathSpec("lagrange", 1, n)).T for n in counts}

