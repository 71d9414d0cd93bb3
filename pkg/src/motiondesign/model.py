"""Structures, materials, configuration constraints and the problem file."""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

DIRECTIONS = "xyz"
ELEMENT_KINDS = {"truss2d": (2, 2), "truss3d": (2, 3), "quad4": (4, 2), "quad4_eas": (4, 2)}
PREDICTORS = ("linear", "hierarchical", "preanalysis")


class ProblemError(ValueError):
    """Invalid problem description; the message names the violated field."""


class ParseError(ProblemError):
    """Problem file is not readable as a structured document."""


@dataclass(frozen=True)
class Node:
    id: int
    X: tuple


@dataclass(frozen=True)
class Material:
    youngs_modulus: float
    poisson_ratio: float = 0.0
    area: float | None = None
    thickness: float | None = None


@dataclass(frozen=True)
class Element:
    kind: str
    nodes: tuple
    material: str


@dataclass(frozen=True)
class Mesh:
    nodes: tuple
    elements: tuple
    materials: dict
    supports: frozenset = frozenset()  # {(node, direction index)}

    @property
    def dim(self):
        return len(self.nodes[0].X)

    @property
    def coordinates(self):
        return np.array([n.X for n in self.nodes], dtype=float)

    def characteristic_length(self):
        """Largest node-to-node distance."""
        X = self.coordinates
        if len(X) < 2:
            return 1.0
        diff = X[:, None, :] - X[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())


@dataclass(frozen=True)
class ConfigurationConstraint:
    """Prescribed displacements at one path node (element boundary of the path mesh)."""

    path_node: int
    prescribed: dict  # {(node, direction index): displacement}
    partial: bool = True


@dataclass(frozen=True)
class PathSpec:
    kind: str = "lagrange"
    degree: int = 1
    n_elements: int = 4
    continuity_reductions: tuple = ()
    quadrature: int | None = None  # Gauss points per path element, default degree + 1


@dataclass(frozen=True)
class ControlledDof:
    dofs: tuple  # ((node, direction index), ...)
    schedule: str | tuple = "uniform"  # or explicit values per control point (single dof only)


@dataclass(frozen=True)
class EqualLength:
    pass


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 50
    relaxation: bool = True
    min_relaxation: float = 2.0**-10
    divergence_factor: float = 1e6


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = "linear"
    coarse: tuple = ()  # element counts for the hierarchical predictor
    steps_per_node: int = 4  # continuation substeps for the preanalysis
    sway: float = 0.0  # amplitude of an antisymmetric perturbation added to the predictor


@dataclass(frozen=True)
class MotionProblem:
    mesh: Mesh
    path: PathSpec
    configurations: tuple
    regularization: ControlledDof | EqualLength
    solver: SolverConfig = field(default_factory=SolverConfig)
    predictor: PredictorSpec = field(default_factory=PredictorSpec)
    name: str = ""

    def with_path(self, n_elements=None, degree=None, kind=None):
        """Copy with another path discretization; path-node ids are rescaled."""
        n_old = self.path.n_elements
        n_new = self.path.n_elements if n_elements is None else int(n_elements)

        def rescale(b):
            if (b * n_new) % n_old:
                raise ProblemError(
                    f"path node {b} of {n_old} elements has no counterpart with {n_new} path elements")
            return b * n_new // n_old

        path = replace(
            self.path,
            n_elements=n_new,
            degree=self.path.degree if degree is None else int(degree),
            kind=self.path.kind if kind is None else kind,
            continuity_reductions=tuple(rescale(b) for b in self.path.continuity_reductions),
        )
        configs = tuple(replace(c, path_node=rescale(c.path_node)) for c in self.configurations)
        reg = self.regularization
        if isinstance(reg, ControlledDof) and not isinstance(reg.schedule, str):
            reg = replace(reg, schedule="uniform")
        predictor = replace(self.predictor, coarse=tuple(n for n in self.predictor.coarse if n <= n_new))
        return replace(self, path=path, configurations=configs, regularization=reg, predictor=predictor)


# ---------------------------------------------------------------------------
# DOF numbering


@dataclass(frozen=True)
class DofMap:
    index: dict  # (node, direction) -> global free index
    keys: tuple  # inverse of index
    n_nodes: int
    dim: int

    @property
    def n_dof(self):
        return len(self.keys)

    def node_dofs(self, node):
        """Global indices of one node's directions (-1 where supported)."""
        return np.array([self.index.get((node, i), -1) for i in range(self.dim)])

    def element_dofs(self, element):
        return np.concatenate([self.node_dofs(n) for n in element.nodes])


def build_dof_map(mesh):
    index = {}
    for node in mesh.nodes:
        for i in range(mesh.dim):
            if (node.id, i) not in mesh.supports:
                index[(node.id, i)] = len(index)
    if not index:
        raise ProblemError("mesh has no free degrees of freedom (every direction is supported)")
    return DofMap(index=index, keys=tuple(index), n_nodes=len(mesh.nodes), dim=mesh.dim)


# ---------------------------------------------------------------------------
# validation


def dof_label(key):
    node, direction = key
    return f"{node}:{DIRECTIONS[direction]}"


def parse_dof(label, where="dof"):
    try:
        node, direction = str(label).split(":")
        return int(node), DIRECTIONS.index(direction.strip().lower())
    except ValueError:
        raise ProblemError(f"{where}: cannot read dof {label!r}, expected 'node:x|y|z'") from None


def validate_mesh(mesh):
    if not mesh.nodes:
        raise ProblemError("nodes: mesh has no nodes")
    dim = mesh.dim
    if dim not in (2, 3):
        raise ProblemError("nodes: coordinates must have 2 or 3 components")
    for i, n in enumerate(mesh.nodes):
        if n.id != i:
            raise ProblemError(f"nodes[{i}]: ids must be unique and contiguous from 0 (got {n.id})")
        if len(n.X) != dim or not all(math.isfinite(c) for c in n.X):
            raise ProblemError(f"nodes[{i}]: coordinates must be {dim} finite numbers")
    for name, m in mesh.materials.items():
        if not m.youngs_modulus > 0:
            raise ProblemError(f"materials.{name}: youngs_modulus must be > 0")
        if not 0.0 <= m.poisson_ratio < 0.5:
            raise ProblemError(f"materials.{name}: poisson_ratio must lie in [0, 0.5)")
        if m.area is not None and not m.area > 0:
            raise ProblemError(f"materials.{name}: area must be > 0")
        if m.thickness is not None and not m.thickness > 0:
            raise ProblemError(f"materials.{name}: thickness must be > 0")
    for i, el in enumerate(mesh.elements):
        where = f"elements[{i}]"
        if el.kind not in ELEMENT_KINDS:
            raise ProblemError(f"{where}: unknown element kind {el.kind!r}")
        n_nodes, el_dim = ELEMENT_KINDS[el.kind]
        if len(el.nodes) != n_nodes:
            raise ProblemError(f"{where}: {el.kind} needs {n_nodes} nodes")
        if el_dim != dim:
            raise ProblemError(f"{where}: {el.kind} requires {el_dim}D coordinates")
        for n in el.nodes:
            if not 0 <= n < len(mesh.nodes):
                raise ProblemError(f"{where}: references node {n}, mesh has {len(mesh.nodes)} nodes")
        if el.material not in mesh.materials:
            raise ProblemError(f"{where}: references unknown material {el.material!r}")
        mat = mesh.materials[el.material]
        if el.kind.startswith("truss") and mat.area is None:
            raise ProblemError(f"{where}: truss material {el.material!r} needs an area")
        if el.kind.startswith("quad") and mat.thickness is None:
            raise ProblemError(f"{where}: quad material {el.material!r} needs a thickness")
        if el.kind.startswith("quad"):
            P = np.array([mesh.nodes[n].X for n in el.nodes])
            signed = 0.5 * sum(P[a, 0] * P[(a + 1) % 4, 1] - P[(a + 1) % 4, 0] * P[a, 1] for a in range(4))
            if signed <= 0:
                raise ProblemError(f"{where}: quad nodes must be ordered counterclockwise")
    for node, direction in mesh.supports:
        if not 0 <= node < len(mesh.nodes) or not 0 <= direction < dim:
            raise ProblemError(f"supports: ({node}, {direction}) is not a node direction of the mesh")


def validate_problem(problem):
    mesh = problem.mesh
    validate_mesh(mesh)
    dofmap = build_dof_map(mesh)
    path = problem.path
    if path.kind not in ("lagrange", "bspline"):
        raise ProblemError(f"path.type: expected 'lagrange' or 'bspline', got {path.kind!r}")
    if path.degree < 1:
        raise ProblemError("path.degree must be >= 1")
    if path.n_elements < 1:
        raise ProblemError("path.n_elements must be >= 1")
    if path.quadrature is not None and path.quadrature < 1:
        raise ProblemError("path.quadrature must be >= 1")
    for b in path.continuity_reductions:
        if not 0 < b < path.n_elements:
            raise ProblemError(f"path.continuity_reductions: {b} is not an interior path node")

    seen = set()
    has_target = False
    for i, c in enumerate(problem.configurations):
        where = f"configurations[{i}]"
        if not 0 <= c.path_node <= path.n_elements:
            raise ProblemError(f"{where}: path node {c.path_node} outside 0..{path.n_elements}")
        if c.path_node in seen:
            raise ProblemError(f"{where}: path node {c.path_node} configured twice")
        seen.add(c.path_node)
        for key, value in c.prescribed.items():
            if key not in dofmap.index:
                raise ProblemError(f"{where}: dof {dof_label(key)} is supported or does not exist")
            if not math.isfinite(value):
                raise ProblemError(f"{where}: value of {dof_label(key)} is not finite")
        if c.path_node == 0:
            if any(v != 0.0 for v in c.prescribed.values()):
                raise ProblemError(f"{where}: the initial configuration is the undeformed state")
            continue
        if not c.partial and len(c.prescribed) != dofmap.n_dof:
            raise ProblemError(f"{where}: marked full but prescribes {len(c.prescribed)} of {dofmap.n_dof} dofs")
        if c.prescribed:
            has_target = True
    if not has_target:
        raise ProblemError("configurations: no target constraint, the motion is unconstrained")

    reg = problem.regularization
    if isinstance(reg, ControlledDof):
        if not reg.dofs:
            raise ProblemError("regularization: controlled_dof needs at least one dof")
        for key in reg.dofs:
            if key not in dofmap.index:
                raise ProblemError(f"regularization: dof {dof_label(key)} is supported or does not exist")
            stations = [c.path_node for c in problem.configurations if key in c.prescribed and c.path_node > 0]
            if not stations:
                raise ProblemError(f"regularization: controlled dof {dof_label(key)} has no prescribed value")
        if not isinstance(reg.schedule, str):
            if len(reg.dofs) != 1:
                raise ProblemError("regularization: explicit schedules need exactly one dof")
        elif reg.schedule != "uniform":
            raise ProblemError(f"regularization: unknown schedule {reg.schedule!r}")
    elif not isinstance(reg, EqualLength):
        raise ProblemError("regularization: expected controlled_dof or equal_length")

    s = problem.solver
    if not s.tolerance > 0:
        raise ProblemError("solver.tol must be > 0")
    if s.max_iterations < 1:
        raise ProblemError("solver.max_iter must be >= 1")
    p = problem.predictor
    if p.kind not in PREDICTORS:
        raise ProblemError(f"predictor: unknown type {p.kind!r}")
    if not math.isfinite(p.sway):
        raise ProblemError("predictor.sway must be finite")
    if p.kind == "hierarchical":
        for n in p.coarse:
            if not 0 < n <= path.n_elements:
                raise ProblemError(f"predictor.coarse: {n} must lie in 1..{path.n_elements}")
    return problem


# ---------------------------------------------------------------------------
# problem file


def _require(d, key, where):
    if key not in d:
        raise ProblemError(f"{where}: missing key {key!r}")
    return d[key]


def _known_keys(d, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ProblemError(f"{where}: unknown key {extra[0]!r} (expected one of {', '.join(sorted(allowed))})")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProblemError(f"{where}: expected a number, got {v!r}")
    return float(v)


def problem_from_dict(d, name=""):
    if not isinstance(d, dict):
        raise ProblemError("problem: top level must be an object")
    _known_keys(d, ("name", "nodes", "materials", "elements", "supports", "path", "configurations",
                    "regularization", "solver", "predictor"), "problem")
    nodes = []
    for i, raw in enumerate(_require(d, "nodes", "problem")):
        if isinstance(raw, dict):
            nid, X = raw.get("id", i), _require(raw, "X", f"nodes[{i}]")
        else:
            nid, X = i, raw
        nodes.append(Node(int(nid), tuple(_number(c, f"nodes[{i}]") for c in X)))
    materials = {}
    for key, m in _require(d, "materials", "problem").items():
        where = f"materials.{key}"
        _known_keys(m, ("E", "nu", "A", "t"), where)
        materials[str(key)] = Material(
            youngs_modulus=_number(_require(m, "E", where), where + ".E"),
            poisson_ratio=_number(m.get("nu", 0.0), where + ".nu"),
            area=None if m.get("A") is None else _number(m["A"], where + ".A"),
            thickness=None if m.get("t") is None else _number(m["t"], where + ".t"),
        )
    elements = []
    for i, e in enumerate(_require(d, "elements", "problem")):
        where = f"elements[{i}]"
        elements.append(Element(str(_require(e, "type", where)),
                                tuple(int(n) for n in _require(e, "nodes", where)),
                                str(_require(e, "material", where))))
    supports = set()
    for i, s in enumerate(d.get("supports", [])):
        node = int(_require(s, "node", f"supports[{i}]"))
        for name_ in _require(s, "dofs", f"supports[{i}]"):
            if name_ not in DIRECTIONS:
                raise ProblemError(f"supports[{i}]: unknown direction {name_!r}")
            supports.add((node, DIRECTIONS.index(name_)))
    mesh = Mesh(tuple(nodes), tuple(elements), materials, frozenset(supports))

    p = d.get("path", {})
    _known_keys(p, ("type", "degree", "n_elements", "continuity_reductions", "quadrature"), "path")
    path = PathSpec(
        kind=str(p.get("type", "lagrange")),
        degree=int(p.get("degree", 1)),
        n_elements=int(p.get("n_elements", 4)),
        continuity_reductions=tuple(int(b) for b in p.get("continuity_reductions", [])),
        quadrature=None if p.get("quadrature") is None else int(p["quadrature"]),
    )
    configs = []
    for i, c in enumerate(_require(d, "configurations", "problem")):
        where = f"configurations[{i}]"
        _known_keys(c, ("path_node", "values", "partial"), where)
        values = {parse_dof(k, where): _number(v, f"{where}.values[{k}]")
                  for k, v in c.get("values", {}).items()}
        configs.append(ConfigurationConstraint(int(_require(c, "path_node", where)), values,
                                               bool(c.get("partial", True))))

    r = _require(d, "regularization", "problem")
    if isinstance(r, str):
        r = {"type": r}
    _known_keys(r, ("type", "dof", "dofs", "schedule"), "regularization")
    rtype = r.get("type")
    if rtype == "equal_length":
        reg = EqualLength()
    elif rtype == "controlled_dof":
        dofs = r.get("dofs", [r["dof"]] if "dof" in r else [])
        sched = r.get("schedule", "uniform")
        reg = ControlledDof(tuple(parse_dof(x, "regularization") for x in dofs),
                            sched if isinstance(sched, str) else tuple(_number(v, "regularization.schedule") for v in sched))
    else:
        raise ProblemError(f"regularization: unknown type {rtype!r}")

    s = d.get("solver", {})
    _known_keys(s, ("tol", "max_iter", "relaxation"), "solver")
    solver = SolverConfig(
        tolerance=_number(s.get("tol", 1e-8), "solver.tol"),
        max_iterations=int(s.get("max_iter", 50)),
        relaxation=bool(s.get("relaxation", True)),
    )
    pr = d.get("predictor", "linear")
    if isinstance(pr, str):
        pr = {"type": pr}
    _known_keys(pr, ("type", "coarse", "steps_per_node", "sway"), "predictor")
    predictor = PredictorSpec(kind=str(pr.get("type", "linear")),
                              coarse=tuple(int(n) for n in pr.get("coarse", ())),
                              steps_per_node=int(pr.get("steps_per_node", 4)),
                              sway=_number(pr.get("sway", 0.0), "predictor.sway"))
    problem = MotionProblem(mesh, path, tuple(configs), reg, solver, predictor, name=str(d.get("name", name)))
    return validate_problem(problem)


def problem_to_dict(problem):
    mesh = problem.mesh
    supports = {}
    for node, direction in sorted(mesh.supports):
        supports.setdefault(node, []).append(DIRECTIONS[direction])

    def material(m):
        out = {"E": m.youngs_modulus, "nu": m.poisson_ratio}
        if m.area is not None:
            out["A"] = m.area
        if m.thickness is not None:
            out["t"] = m.thickness
        return out

    reg = problem.regularization
    if isinstance(reg, EqualLength):
        reg_d = {"type": "equal_length"}
    else:
        reg_d = {"type": "controlled_dof", "dofs": [dof_label(k) for k in reg.dofs],
                 "schedule": reg.schedule if isinstance(reg.schedule, str) else list(reg.schedule)}
    path = problem.path
    path_d = {"type": path.kind, "degree": path.degree, "n_elements": path.n_elements,
              "continuity_reductions": list(path.continuity_reductions)}
    if path.quadrature is not None:
        path_d["quadrature"] = path.quadrature
    pred = problem.predictor
    pred_d = {"type": pred.kind}
    if pred.kind == "hierarchical":
        pred_d["coarse"] = list(pred.coarse)
    if pred.kind == "preanalysis":
        pred_d["steps_per_node"] = pred.steps_per_node
    if pred.sway:
        pred_d["sway"] = pred.sway
    return {
        "name": problem.name,
        "nodes": [list(n.X) for n in mesh.nodes],
        "materials": {k: material(m) for k, m in mesh.materials.items()},
        "elements": [{"type": e.kind, "nodes": list(e.nodes), "material": e.material} for e in mesh.elements],
        "supports": [{"node": n, "dofs": dirs} for n, dirs in supports.items()],
        "path": path_d,
        "configurations": [
            {"path_node": c.path_node, "partial": c.partial,
             "values": {dof_label(k): v for k, v in sorted(c.prescribed.items())}}
            for c in problem.configurations
        ],
        "regularization": reg_d,
        "solver": {"tol": problem.solver.tolerance, "max_iter": problem.solver.max_iterations,
                   "relaxation": problem.solver.relaxation},
        "predictor": pred_d,
    }


def load_problem(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read problem file ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return problem_from_dict(data, name=path.stem)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ProblemError(f"{path}: malformed field ({exc})") from None


def dump_problem(problem, path):
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=1) + "\n", encoding="utf-8")
