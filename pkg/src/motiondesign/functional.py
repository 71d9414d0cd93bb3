"""Path functional J = int F(D) s_u ds and its monolithic linearization.

``assemble`` returns the reduced residual R_mod and tangent K_mod over all
unprescribed path unknowns; with equal-length regularization the
constraint rows and multiplier columns are appended (a symmetric KKT
system).
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import elements
from .model import ControlledDof, EqualLength, ProblemError, build_dof_map, validate_problem
from .pathspace import PathMesh, arc_length_state

ARC_FLOOR = 1e-10  # times the characteristic mesh length


# ---------------------------------------------------------------------------
# discretization of one problem


@dataclass
class Discretization:
    problem: object
    dofmap: object
    path: PathMesh
    volumes: np.ndarray  # influence volume of the node owning each free dof
    total_volume: float
    eps: float
    groups: list  # (kind, material, X (ne, nn, dim), dof index (ne, nn*dim) with n for supported)
    prescribed: np.ndarray  # bool (n_ctrl, n_dof)
    values: np.ndarray  # prescribed values (n_ctrl, n_dof)
    equal_length: bool

    @property
    def n_dof(self):
        return self.dofmap.n_dof

    @property
    def n_ctrl(self):
        return self.path.n_ctrl

    @property
    def free(self):
        return np.flatnonzero(~self.prescribed.ravel())

    @property
    def n_constraints(self):
        return self.path.n_elements - 1 if self.equal_length else 0

    def apply_prescribed(self, D):
        D = np.array(D, dtype=float, copy=True)
        D[self.prescribed] = self.values[self.prescribed]
        return D

    def expand(self, x, D_ref):
        """Full control array from the free unknowns ``x``."""
        D = np.array(D_ref, dtype=float, copy=True)
        D.ravel()[self.free] = x
        return D


_CACHE = OrderedDict()


def discretize(problem):
    key = id(problem)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is problem:
        return hit[1]
    disc = _build(problem)
    _CACHE[key] = (problem, disc)
    while len(_CACHE) > 16:
        _CACHE.popitem(last=False)
    return disc


def _build(problem):
    validate_problem(problem)
    mesh = problem.mesh
    dofmap = build_dof_map(mesh)
    n = dofmap.n_dof
    pm = PathMesh.from_spec(problem.path)
    node_vol, total = elements.tributary_volume(mesh)
    volumes = np.array([node_vol[node] for node, _ in dofmap.keys])

    X = mesh.coordinates
    grouped = OrderedDict()
    for el in mesh.elements:
        idx = dofmap.element_dofs(el)
        idx[idx < 0] = n
        grouped.setdefault((el.kind, el.material), ([], []))
        grouped[(el.kind, el.material)][0].append(X[list(el.nodes)])
        grouped[(el.kind, el.material)][1].append(idx)
    groups = [(kind, mesh.materials[mat], np.array(xs), np.array(ids)) for (kind, mat), (xs, ids) in grouped.items()]

    mask = np.zeros((pm.n_ctrl, n), dtype=bool)
    values = np.zeros((pm.n_ctrl, n))
    mask[0] = True
    stations = {}
    for c in problem.configurations:
        if c.path_node == 0:
            continue
        try:
            j = pm.ctrl_at_breakpoint(c.path_node)
        except ValueError as exc:
            raise ProblemError(f"configurations: {exc}") from None
        for key, v in c.prescribed.items():
            i = dofmap.index[key]
            mask[j, i] = True
            values[j, i] = v
            stations.setdefault(i, []).append((pm.breakpoints[c.path_node], v))

    reg = problem.regularization
    if isinstance(reg, ControlledDof):
        for key in reg.dofs:
            i = dofmap.index[key]
            if not isinstance(reg.schedule, str):
                if len(reg.schedule) != pm.n_ctrl:
                    raise ProblemError(f"regularization: schedule needs {pm.n_ctrl} values")
                mask[:, i] = True
                values[:, i] = reg.schedule
                continue
            pts = sorted([(0.0, 0.0)] + stations[i])
            s_b, v_b = np.array(pts).T
            ctrl = pm.greville <= s_b[-1] + 1e-14
            mask[ctrl, i] = True
            values[ctrl, i] = np.interp(pm.greville[ctrl], s_b, v_b)

    return Discretization(
        problem=problem, dofmap=dofmap, path=pm, volumes=volumes, total_volume=total,
        eps=ARC_FLOOR * mesh.characteristic_length(), groups=groups,
        prescribed=mask, values=values, equal_length=isinstance(reg, EqualLength),
    )


# ---------------------------------------------------------------------------
# spatial quantities


def spatial_states(problem, Ds, tangent=True):
    """Batched :func:`spatial_state` over configurations ``Ds`` (m, n_dof).

    Returns energies (m,), internal forces (m, n_dof) and tangents
    (m, n_dof, n_dof), or None for the tangents when ``tangent`` is off.
    """
    disc = discretize(problem)
    n = disc.n_dof
    Ds = np.asarray(Ds, dtype=float)
    m = Ds.shape[0]
    Dx = np.concatenate([Ds, np.zeros((m, 1))], axis=1)  # column n holds supported dofs
    energy = np.zeros(m)
    F = np.zeros(m * (n + 1))
    K = np.zeros(m * (n + 1) ** 2) if tangent else None
    cfg = np.arange(m)[:, None, None]
    for kind, mat, X, idx in disc.groups:
        ne, k = idx.shape
        d = Dx[:, idx].reshape(m * ne, k)
        Xb = np.broadcast_to(X, (m,) + X.shape).reshape((m * ne,) + X.shape[1:])
        if kind.startswith("truss"):
            e, f, kt = elements.truss_states(Xb, d, mat.youngs_modulus * mat.area)
        else:
            e, f, kt, _ = elements.quad_states(Xb, d, mat.youngs_modulus, mat.poisson_ratio, mat.thickness,
                                               eas=kind == "quad4_eas")
        energy += e.reshape(m, ne).sum(axis=1)
        F += np.bincount((cfg * (n + 1) + idx[None]).ravel(), weights=f.ravel(), minlength=m * (n + 1))
        if tangent:
            flat = cfg[..., None] * (n + 1) ** 2 + (idx[:, :, None] * (n + 1) + idx[:, None, :])[None]
            K += np.bincount(flat.ravel(), weights=kt.ravel(), minlength=m * (n + 1) ** 2)
    F = F.reshape(m, n + 1)[:, :n]
    if tangent:
        K = K.reshape(m, n + 1, n + 1)[:, :n, :n]
    return energy, F, K


def spatial_state(problem, D):
    """Internal energy, internal force vector and tangent stiffness at free displacements ``D``."""
    e, F, K = spatial_states(problem, np.asarray(D, dtype=float)[None])
    return float(e[0]), F[0], K[0]


class Objective:
    """Scalar quantity F(D) integrated along the path; subclasses return value, gradient, Hessian."""

    def evaluate(self, D):
        return self.value(D), self.gradient(D), self.hessian(D)


class InternalEnergy(Objective):
    def __init__(self, problem):
        self.problem = problem

    def evaluate(self, D):
        return spatial_state(self.problem, D)


class CallableObjective(Objective):
    def __init__(self, value, gradient, hessian):
        self.value, self.gradient, self.hessian = value, gradient, hessian


def _objective_eval(problem, objective):
    if objective is None:
        return lambda D: spatial_state(problem, D)
    return objective.evaluate


def _objective_batch(problem, objective, tangent):
    """Function mapping configurations (m, n_dof) to per-configuration (value, gradient, Hessian)."""
    if objective is None:
        def batch(Ds):
            e, F, K = spatial_states(problem, Ds, tangent)
            return [(float(e[i]), F[i], None if K is None else K[i]) for i in range(len(e))]
        return batch
    return lambda Ds: [objective.evaluate(d) for d in Ds]


# ---------------------------------------------------------------------------
# path integration


@dataclass(frozen=True)
class PathSamples:
    sbar: np.ndarray
    s_u: np.ndarray
    value: np.ndarray  # objective (internal energy by default)
    element: np.ndarray
    weight: np.ndarray  # quadrature weight in s
    _arc_args: tuple = field(default=(), repr=False, compare=False)

    @cached_property
    def arclength(self):
        """Running arc length at every sample; computed on first access."""
        return _running_arclength(*self._arc_args, self.sbar, self.element)

    def per_element(self, n_elements):
        return np.bincount(self.element, weights=self.weight * self.value * self.s_u, minlength=n_elements)


@dataclass(frozen=True)
class AssembledSystem:
    residual: np.ndarray  # R_mod on free unknowns, then constraint values
    tangent: np.ndarray  # K_mod (KKT-augmented with equal-length regularization)
    J: float
    gradient: np.ndarray  # dJ/dD on free unknowns
    samples: PathSamples
    lengths: np.ndarray  # integral of s_u per path element
    constraints: np.ndarray  # L_e - L_{e+1}
    n_free: int


def _running_arclength(disc, D, lengths, s_points, elem, n_sub=8):
    pm = disc.path
    x, w = np.polynomial.legendre.leggauss(n_sub)
    offset = np.concatenate([[0.0], np.cumsum(lengths)])
    out = np.empty(len(s_points))
    for k, (s, e) in enumerate(zip(s_points, elem)):
        a = pm.breakpoints[e]
        pts = 0.5 * (a + s) + 0.5 * (s - a) * x
        _, dN = pm.basis(e, pts)
        first = pm.first_ctrl(e)
        rates = dN @ D[first:first + pm.degree + 1]
        su = np.sqrt(np.einsum("gi,i,gi->g", rates, disc.volumes / disc.total_volume, rates))
        out[k] = offset[e] + 0.5 * (s - a) * (w @ su)
    return out


def assemble(problem, D, objective=None, multipliers=None, tangent=True):
    """Residual, tangent and value of the path functional at control array ``D`` (n_ctrl, n_dof)."""
    disc = discretize(problem)
    pm = disc.path
    n = disc.n_dof
    m = pm.degree + 1
    D = np.asarray(D, dtype=float)
    if D.shape != (pm.n_ctrl, n):
        raise ValueError(f"control array must have shape {(pm.n_ctrl, n)}, got {D.shape}")
    evaluate = _objective_batch(problem, objective, tangent)
    nc = disc.n_constraints
    lam = np.zeros(nc) if multipliers is None else np.asarray(multipliers, dtype=float)

    N_tot = pm.n_ctrl * n
    R = np.zeros((pm.n_ctrl, n))
    K = np.zeros((N_tot, N_tot)) if tangent else None
    dL = np.zeros((pm.n_elements, pm.n_ctrl, n))
    lengths = np.zeros(pm.n_elements)
    J = 0.0
    samples = {"sbar": [], "s_u": [], "value": [], "element": [], "weight": []}

    # objective at every quadrature point of the path in one batch
    configs = [Ns @ D[pm.first_ctrl(e):pm.first_ctrl(e) + m] for e, (_, _, Ns, _) in enumerate(pm.quadrature_rules)]
    values = evaluate(np.concatenate(configs))
    n_g = pm.n_gauss

    for e in range(pm.n_elements):
        pts, wts, Ns, dNs = pm.quadrature_rules[e]
        first = pm.first_ctrl(e)
        active = D[first:first + m]
        # multiplier weight of this element's length in sum_e lam_e (L_e - L_{e+1})
        c_e = (lam[e] if e < nc else 0.0) - (lam[e - 1] if 1 <= e <= nc else 0.0)
        R_blk = np.zeros((m, n))
        K_blk = np.zeros((m, n, m, n)) if tangent else None
        for g in range(len(pts)):
            N, dN, w = Ns[g], dNs[g], wts[g]
            Fv, Fd, Fdd = values[e * n_g + g]
            arc = arc_length_state(dN @ active, disc.volumes, disc.total_volume, disc.eps)
            s = arc.s_u
            J += w * Fv * s
            lengths[e] += w * s
            dL[e, first:first + m] += w * np.outer(dN, arc.grad)
            R_blk += w * (np.outer(N, Fd) * s + np.outer(dN, arc.grad) * Fv)
            if tangent:
                K_blk += w * (
                    np.einsum("a,b,ij->aibj", N, N, Fdd * s)
                    + np.einsum("a,b,i,j->aibj", N, dN, Fd, arc.grad)
                    + np.einsum("a,b,i,j->aibj", dN, N, arc.grad, Fd)
                    + np.einsum("a,b,ij->aibj", dN, dN, (Fv + c_e) * arc.hess)
                )
            samples["sbar"].append(pts[g])
            samples["s_u"].append(s)
            samples["value"].append(Fv)
            samples["element"].append(e)
            samples["weight"].append(w)
        R[first:first + m] += R_blk
        if tangent:
            sl = slice(first * n, (first + m) * n)
            K[sl, sl] += K_blk.reshape(m * n, m * n)

    free = disc.free
    grad = R.ravel()[free]
    constraints = lengths[:-1] - lengths[1:] if nc else np.zeros(0)
    G = (dL[:-1] - dL[1:]).reshape(nc, N_tot)[:, free] if nc else np.zeros((0, len(free)))
    residual = np.concatenate([grad + G.T @ lam, constraints])
    if tangent:
        Kf = K[np.ix_(free, free)]
        if nc:
            Kf = np.block([[Kf, G.T], [G, np.zeros((nc, nc))]])
    else:
        Kf = None

    el = np.array(samples["element"], dtype=int)
    sb = np.array(samples["sbar"])
    psamples = PathSamples(
        sbar=sb,
        s_u=np.array(samples["s_u"]),
        value=np.array(samples["value"]),
        element=el,
        weight=np.array(samples["weight"]),
        _arc_args=(disc, D.copy(), lengths),
    )
    return AssembledSystem(residual, Kf, float(J), grad, psamples, lengths, constraints, len(free))


def evaluate_J(problem, D, objective=None):
    """Value of the path functional and its integrand samples at the quadrature points."""
    sys = assemble(problem, D, objective, tangent=False)
    return sys.J, sys.samples


def profile(problem, D, objective=None):
    """Objective and s_u along the path at every path node and quadrature point, sorted by parameter."""
    disc = discretize(problem)
    pm = disc.path
    sys = assemble(problem, D, objective, tangent=False)
    evaluate = _objective_eval(problem, objective)
    s_nodes = pm.breakpoints
    el_nodes = np.array([pm.element_of(s) for s in s_nodes])
    vals, rates = pm.evaluate(np.asarray(D, dtype=float), s_nodes)
    su = [arc_length_state(r, disc.volumes, disc.total_volume).s_u for r in rates]
    fv = [evaluate(v)[0] for v in vals]
    arc = _running_arclength(disc, D, sys.lengths, s_nodes, el_nodes)
    sb = np.concatenate([s_nodes, sys.samples.sbar])
    order = np.argsort(sb, kind="stable")
    return (sb[order],
            np.concatenate([arc, sys.samples.arclength])[order],
            np.concatenate([su, sys.samples.s_u])[order],
            np.concatenate([fv, sys.samples.value])[order])


def configurations(problem, D):
    """Displacements (free dofs) at the path stations."""
    disc = discretize(problem)
    vals, _ = disc.path.evaluate(np.asarray(D, dtype=float), disc.path.stations)
    return vals


def recover_forces(problem, D):
    """External forces on the free dofs that hold each path station in equilibrium."""
    return np.array([spatial_state(problem, v)[1] for v in configurations(problem, D)])


def full_displacements(problem, d_free):
    """(n_nodes, dim) displacement array from a free-dof vector."""
    disc = discretize(problem)
    out = np.zeros((disc.dofmap.n_nodes, disc.dofmap.dim))
    for i, (node, direction) in enumerate(disc.dofmap.keys):
        out[node, direction] = d_free[i]
    return out
