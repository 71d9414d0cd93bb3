"""Builders for the shipped example problems.

Coordinates are representative choices; only material values and path
discretizations follow the reference setups.  ``write_all`` regenerates
the JSON files under ``problems/``.
"""

from pathlib import Path

import numpy as np
import scipy.optimize

from .functional import discretize, spatial_state
from .model import (ConfigurationConstraint, ControlledDof, Element, EqualLength, Material, Mesh,
                    MotionProblem, Node, PathSpec, PredictorSpec, SolverConfig, dump_problem)

PROBLEM_DIR = Path(__file__).parent / "problems"
X, Y = 0, 1


def _mesh(coords, elements, materials, supports):
    nodes = tuple(Node(i, tuple(float(c) for c in xy)) for i, xy in enumerate(coords))
    els = tuple(Element(kind, tuple(n), mat) for kind, n, mat in elements)
    sup = frozenset((n, d) for n, dirs in supports.items() for d in dirs)
    return Mesh(nodes, els, dict(materials), sup)


def _target(path_node, values, partial=True):
    return ConfigurationConstraint(path_node, dict(values), partial)


def two_bar_truss(n_elements=14, half_span=1.0, height=0.2, shift=0.2):
    """Shallow two-bar truss; the target mirrors the apex and shifts it sideways."""
    mat = {"bar": Material(30000.0, area=0.1)}
    mesh = _mesh([(-half_span, 0.0), (0.0, height), (half_span, 0.0)],
                 [("truss2d", (0, 1), "bar"), ("truss2d", (1, 2), "bar")],
                 mat, {0: (X, Y), 2: (X, Y)})
    target = _target(n_elements, {(1, X): shift, (1, Y): -2.0 * height}, partial=False)
    return MotionProblem(mesh, PathSpec("lagrange", 1, n_elements), (target,), EqualLength(),
                         SolverConfig(), PredictorSpec("linear"), name="two_bar_truss")


# parallelogram linkage: crank 0-1 turns from 60 to 45 degrees
KIN_START, KIN_END = np.radians(60.0), np.radians(45.0)


def kinematic_positions(theta):
    """Node coordinates of the linkage with crank angle ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([(0.0, 0.0), (c, s), (2.0 + c, s), (2.0, 0.0)])


def _kinematic_mesh():
    mat = {"bar": Material(30000.0, area=0.1)}
    return _mesh(kinematic_positions(KIN_START),
                 [("truss2d", (0, 1), "bar"), ("truss2d", (1, 2), "bar"), ("truss2d", (2, 3), "bar")],
                 mat, {0: (X, Y), 3: (X, Y)})


def kinematic_truss(n_elements=14, kind="lagrange", degree=1):
    """Four nodes, three bars, two supports; only the crank tip's vertical end value is given."""
    mesh = _kinematic_mesh()
    v_end = float(kinematic_positions(KIN_END)[1, Y] - kinematic_positions(KIN_START)[1, Y])
    target = _target(n_elements, {(1, Y): v_end})
    return MotionProblem(mesh, PathSpec(kind, degree, n_elements), (target,), ControlledDof(((1, Y),)),
                         SolverConfig(), PredictorSpec("linear"), name="kinematic_truss")


def staged_truss(stage_angles=(55.0, 50.0, 45.0), elements_per_stage=3, degree=2):
    """Linkage driven through three prescribed stages with C0 path nodes between them."""
    mesh = _kinematic_mesh()
    n = elements_per_stage * len(stage_angles)
    y0 = kinematic_positions(KIN_START)[1, Y]
    configs = tuple(
        _target((k + 1) * elements_per_stage,
                {(1, Y): float(kinematic_positions(np.radians(a))[1, Y] - y0)})
        for k, a in enumerate(stage_angles)
    )
    reductions = tuple(elements_per_stage * (k + 1) for k in range(len(stage_angles) - 1))
    return MotionProblem(mesh, PathSpec("bspline", degree, n, reductions), configs, ControlledDof(((1, Y),)),
                         SolverConfig(), PredictorSpec("linear"), name="staged_truss")


# zig-zag chain of four rigid plates, pinned at both ends
FOLD_LINK = np.sqrt(2.0)


def fold_angles(a1):
    """Link angles of the symmetric fold with first-link angle ``a1``."""
    a2 = -np.arccos(np.sqrt(2.0) - np.cos(a1))
    return np.array([a1, a2, -a2, -a1])


def fold_hinges(a1):
    angles = fold_angles(a1)
    steps = FOLD_LINK * np.column_stack([np.cos(angles), np.sin(angles)])
    return np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])


def quad_fold(n_elements=6, kind="bspline", degree=2, width=0.2, end_angle=30.0):
    hinges = fold_hinges(np.radians(45.0))
    coords = [tuple(h) for h in hinges]  # nodes 0..4 are the hinge line
    elements = []
    for k in range(4):
        a, b = hinges[k], hinges[k + 1]
        t = (b - a) / np.linalg.norm(b - a)
        n = np.array([-t[1], t[0]]) * width
        coords += [tuple(b + n), tuple(a + n)]
        elements.append(("quad4", (k, k + 1, len(coords) - 2, len(coords) - 1), "plate"))
    mesh = _mesh(coords, elements, {"plate": Material(1000.0, 0.3, thickness=1.0)}, {0: (X, Y), 4: (X, Y)})
    end = fold_hinges(np.radians(end_angle))
    values = {(1, Y): float(end[1, Y] - hinges[1, Y]), (3, Y): float(end[3, Y] - hinges[3, Y])}
    return MotionProblem(mesh, PathSpec(kind, degree, n_elements), (_target(n_elements, values),),
                         ControlledDof(((1, Y), (3, Y))), SolverConfig(), PredictorSpec("linear"),
                         name="quad_fold")


def multi_snap(n_elements=32, side_heights=(0.5, 0.55), top_height=1.0, area_side=0.1, area_top=0.5):
    """Upper two-bar truss resting on the apexes of two side trusses."""
    hl, hr = side_heights
    coords = [(-3.0, 0.0), (-2.0, hl), (-1.0, 0.0), (1.0, 0.0), (2.0, hr), (3.0, 0.0),
              (0.0, max(hl, hr) + top_height)]
    mats = {"side": Material(30000.0, area=area_side), "top": Material(30000.0, area=area_top)}
    elements = [("truss2d", (0, 1), "side"), ("truss2d", (1, 2), "side"),
                ("truss2d", (3, 4), "side"), ("truss2d", (4, 5), "side"),
                ("truss2d", (1, 6), "top"), ("truss2d", (6, 4), "top")]
    mesh = _mesh(coords, elements, mats, {0: (X, Y), 2: (X, Y), 3: (X, Y), 5: (X, Y)})
    target = _target(n_elements, {(6, Y): -2.0 * coords[6][1]})
    coarse = tuple(n for n in (4, 8, 16) if n < n_elements)
    return MotionProblem(mesh, PathSpec("lagrange", 1, n_elements), (target,), ControlledDof(((6, Y),)),
                         SolverConfig(), PredictorSpec("hierarchical", coarse), name="multi_snap")


def high_truss(n_elements=20, half_span=0.5, height=3.0):
    """Slender two-bar truss (width:height = 1:3) flipped vertically; bifurcates before the limit point."""
    mesh = _mesh([(-half_span, 0.0), (0.0, height), (half_span, 0.0)],
                 [("truss2d", (0, 1), "bar"), ("truss2d", (1, 2), "bar")],
                 {"bar": Material(30000.0, area=0.1)}, {0: (X, Y), 2: (X, Y)})
    target = _target(n_elements, {(1, X): 0.0, (1, Y): -2.0 * height}, partial=False)
    return MotionProblem(mesh, PathSpec("lagrange", 1, n_elements), (target,), ControlledDof(((1, Y),)),
                         SolverConfig(), PredictorSpec("linear"), name="high_truss")


def secondary_path_predictor(problem, side=1.0):
    """Motion along the bifurcated equilibrium branch of the high truss.

    At every controlled vertical value the horizontal apex displacement
    solves F_x = 0 with u != 0; where no such root exists the apex stays
    on the symmetry axis.
    """
    disc = discretize(problem)
    D = disc.apply_prescribed(np.zeros((disc.n_ctrl, disc.n_dof)))
    ix = disc.dofmap.index[(1, X)]
    iy = disc.dofmap.index[(1, Y)]
    span = problem.mesh.characteristic_length()

    def fx(u, v):
        d = np.zeros(disc.n_dof)
        d[ix], d[iy] = u, v
        return spatial_state(problem, d)[1][ix]

    for k in range(1, disc.n_ctrl - 1):
        v = D[k, iy]
        grid = side * np.linspace(1e-6, 2.0, 200) * span
        vals = np.array([fx(u, v) for u in grid])
        change = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
        if change.size:
            j = change[0]
            D[k, ix] = scipy.optimize.brentq(fx, grid[j], grid[j + 1], args=(v,), xtol=1e-14)
    return D


def arch(eas=False, n_elements=5, n_quads=20, span=10.0, rise=1.0, depth=0.2, sway=0.05):
    """Clamped shallow arch of one quad layer, mirrored through its chord line."""
    xs = np.linspace(-0.5 * span, 0.5 * span, n_quads + 1)
    y0 = rise * (1.0 - (2.0 * xs / span) ** 2)
    bottom = [(x, y - 0.5 * depth) for x, y in zip(xs, y0)]
    top = [(x, y + 0.5 * depth) for x, y in zip(xs, y0)]
    coords = bottom + top
    nb = n_quads + 1
    kind = "quad4_eas" if eas else "quad4"
    elements = [(kind, (i, i + 1, nb + i + 1, nb + i), "arch") for i in range(n_quads)]
    clamped = {n: (X, Y) for n in (0, n_quads, nb, nb + n_quads)}
    mesh = _mesh(coords, elements, {"arch": Material(30000.0, 0.3, thickness=1.0)}, clamped)
    values = {}
    for i in range(nb):
        for n in (i, nb + i):
            if n in clamped:
                continue
            values[(n, X)] = 0.0
            values[(n, Y)] = float(-2.0 * y0[i])
    center = nb + n_quads // 2
    return MotionProblem(mesh, PathSpec("bspline", 3, n_elements), (_target(n_elements, values, partial=False),),
                         ControlledDof(((center, Y),)), SolverConfig(max_iterations=60),
                         PredictorSpec("linear", sway=sway), name="arch_eas" if eas else "arch_q1")


BUILDERS = {
    "two_bar_truss": two_bar_truss,
    "kinematic_truss": kinematic_truss,
    "staged_truss": staged_truss,
    "quad_fold": quad_fold,
    "multi_snap": multi_snap,
    "high_truss": high_truss,
    "arch_q1": lambda: arch(eas=False),
    "arch_eas": lambda: arch(eas=True),
}


def write_all(directory=PROBLEM_DIR):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, build in BUILDERS.items():
        dump_problem(build(), directory / f"{name}.json")


if __name__ == "__main__":
    write_all()
