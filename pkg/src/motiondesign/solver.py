"""Monolithic Newton solution of K_mod dD = -R_mod, and predictor motions."""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .functional import assemble, discretize, recover_forces, spatial_state
from .model import ControlledDof, SolverConfig  # noqa: F401  (re-exported)
from .pathspace import PathMesh

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class SingularSystemError(RuntimeError):
    def __init__(self, message, path_node=None):
        super().__init__(message)
        self.path_node = path_node


@dataclass
class IterationRecord:
    iteration: int
    residual: float
    relaxation: float
    J: float
    forced: bool = False  # minimum relaxation taken without decrease


@dataclass
class MotionSolution:
    D: np.ndarray
    J: float
    converged: bool
    history: list = field(default_factory=list)
    multipliers: np.ndarray | None = None
    forces: np.ndarray | None = None
    message: str = ""

    @property
    def iterations(self):
        return len(self.history) - 1

    @property
    def residuals(self):
        return [h.residual for h in self.history]


# ---------------------------------------------------------------------------
# predictors


def predictor_linear(problem):
    """Piecewise linear interpolation in the path parameter between prescribed values.

    Dofs never prescribed after the start stay at zero.
    """
    disc = discretize(problem)
    pm = disc.path
    stations = {}
    for c in problem.configurations:
        for key, v in c.prescribed.items():
            stations.setdefault(disc.dofmap.index[key], []).append((pm.breakpoints[c.path_node], v))
    D = np.zeros((pm.n_ctrl, disc.n_dof))
    for i, pts in stations.items():
        s_b, v_b = np.array(sorted([(0.0, 0.0)] + pts)).T
        D[:, i] = np.interp(pm.greville, s_b, v_b)
    return disc.apply_prescribed(D)


def embed(coarse_mesh, D_coarse, fine_mesh):
    """Represent a coarse path on a finer path mesh by collocation at the fine control parameters."""
    g = fine_mesh.greville
    vals, _ = coarse_mesh.evaluate(D_coarse, g)
    A = fine_mesh.collocation_matrix(g)
    return np.linalg.solve(A, vals)


def predictor_hierarchical(problem, coarse=None, config=None):
    """Solve on successively finer path meshes, each seeding the next."""
    coarse = tuple(problem.predictor.coarse if coarse is None else coarse)
    target = problem.path.n_elements
    counts = sorted({n for n in coarse if n < target})
    if not counts:
        return predictor_linear(problem)
    sub = problem.with_path(n_elements=counts[0])
    sol = solve_motion(sub, predictor_linear(sub), config=config)
    if not sol.converged:
        raise DivergenceError(f"coarse solve with {counts[0]} path elements failed: {sol.message}", sol.history)
    for n in counts[1:]:
        nxt = problem.with_path(n_elements=n)
        D0 = discretize(nxt).apply_prescribed(
            embed(discretize(sub).path, sol.D, discretize(nxt).path))
        sol = solve_motion(nxt, D0, config=config, multipliers=_resample_multipliers(sol, nxt))
        if not sol.converged:
            raise DivergenceError(f"coarse solve with {n} path elements failed: {sol.message}", sol.history)
        sub = nxt
    D0 = embed(discretize(sub).path, sol.D, discretize(problem).path)
    return discretize(problem).apply_prescribed(D0)


def _resample_multipliers(sol, problem):
    disc = discretize(problem)
    if not disc.equal_length or sol.multipliers is None or len(sol.multipliers) == 0:
        return None
    x_old = np.linspace(0, 1, len(sol.multipliers) + 2)[1:-1]
    x_new = np.linspace(0, 1, disc.n_constraints + 2)[1:-1]
    return np.interp(x_new, x_old, sol.multipliers) * len(sol.multipliers) / max(disc.n_constraints, 1)


def _controlled_index(disc, target):
    reg = disc.problem.regularization
    if isinstance(reg, ControlledDof):
        return disc.dofmap.index[reg.dofs[0]]
    return int(np.argmax(np.abs(target)))


def equilibrium_path(problem, load, control, values, D_start=None, max_iter=30, tol=1e-10):
    """Displacement-controlled continuation of F_int(D) = lambda * load.

    ``control`` is the free dof index driven through ``values``; the other
    dofs and the load factor follow from equilibrium.  Returns the states
    and load factors at every value.
    """
    n = discretize(problem).n_dof
    others = np.array([i for i in range(n) if i != control])
    D = np.zeros(n) if D_start is None else np.array(D_start, dtype=float)
    lam = 0.0
    states, factors = [], []
    scale = max(np.linalg.norm(load), 1.0)
    for v in values:
        D[control] = v
        for _ in range(max_iter):
            _, F, K = spatial_state(problem, D)
            r = F - lam * load
            if np.linalg.norm(r) <= tol * scale:
                break
            A = np.column_stack([K[:, others], -load])
            step = np.linalg.lstsq(A, -r, rcond=None)[0]
            D[others] += step[:-1]
            lam += step[-1]
        else:
            raise DivergenceError(f"equilibrium iteration failed at controlled value {v:g}")
        states.append(D.copy())
        factors.append(lam)
    return np.array(states), np.array(factors)


def predictor_preanalysis(problem, steps_per_node=None):
    """Static nonlinear analysis under the forces that hold the target configuration.

    The driven dof is stepped through the values the path prescribes and
    the resulting equilibrium states become the control values.
    """
    disc = discretize(problem)
    pm = disc.path
    steps = steps_per_node or problem.predictor.steps_per_node
    target = disc.values[-1]
    if not disc.prescribed[-1].all():
        raise ValueError("preanalysis predictor needs a fully prescribed target configuration")
    if not np.any(target):
        return disc.apply_prescribed(np.zeros((pm.n_ctrl, disc.n_dof)))
    _, load, _ = spatial_state(problem, target)
    control = _controlled_index(disc, target)
    lin = predictor_linear(problem)
    ctrl_values = lin[:, control]
    fine = [0.0]
    for a, b in zip(ctrl_values[:-1], ctrl_values[1:]):
        fine += list(np.linspace(a, b, steps + 1)[1:])
    states, _ = equilibrium_path(problem, load, control, fine)
    D = states[::steps]  # fine[0] is the reference state
    return disc.apply_prescribed(D)


def add_sway(problem, D, amplitude):
    """Add ``amplitude * sin(pi s) * xi`` to every unprescribed vertical entry.

    ``xi`` is the node's horizontal reference position scaled to [-1, 1],
    so the perturbation is antisymmetric about the mesh center.  It breaks
    the mirror symmetry that Newton's method would otherwise preserve.
    """
    disc = discretize(problem)
    X = problem.mesh.coordinates[:, 0]
    half = 0.5 * (X.max() - X.min()) or 1.0
    xi = np.array([(X[node] - 0.5 * (X.max() + X.min())) / half if d == 1 else 0.0
                   for node, d in disc.dofmap.keys])
    bump = amplitude * np.outer(np.sin(np.pi * disc.path.greville), xi)
    D = np.array(D, dtype=float)
    D[~disc.prescribed] += bump[~disc.prescribed]
    return D


def predictor(problem, kind=None, config=None):
    kind = kind or problem.predictor.kind
    if kind == "linear":
        D = predictor_linear(problem)
    elif kind == "hierarchical":
        return predictor_hierarchical(problem, config=config)
    elif kind == "preanalysis":
        D = predictor_preanalysis(problem)
    else:
        raise ValueError(f"unknown predictor {kind!r}")
    if problem.predictor.sway:
        D = add_sway(problem, D, problem.predictor.sway)
    return D


# ---------------------------------------------------------------------------
# Newton iteration


def _solve_linear(disc, K, r):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)  # zero pivots are reported below
        lu, piv = scipy.linalg.lu_factor(K, check_finite=True)
    diag = np.abs(np.diag(lu))
    bad = np.flatnonzero(diag <= 1e-14 * max(diag.max(), 1e-300))
    if bad.size:
        k = int(bad[0])
        node = None
        if k < len(disc.free):
            node = int(disc.free[k] // disc.n_dof)
        raise SingularSystemError(f"singular system matrix near unknown {k} (path control value {node})", node)
    return scipy.linalg.lu_solve((lu, piv), -r)


def _trial(problem, D, lam, objective):
    try:
        sys = assemble(problem, D, objective, lam)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError):
        return None, np.inf
    norm = float(np.linalg.norm(sys.residual))
    return sys, norm if np.isfinite(norm) else np.inf


def solve_motion(problem, D0, objective=None, config=None, multipliers=None, recover=True):
    """Newton iteration on the complete path, returning a :class:`MotionSolution`."""
    cfg = config or problem.solver
    disc = discretize(problem)
    D = np.asarray(D0, dtype=float)
    if not np.allclose(D[disc.prescribed], disc.values[disc.prescribed], rtol=0, atol=1e-12):
        raise ValueError("initial path violates prescribed configuration values")
    D = disc.apply_prescribed(D)
    nc = disc.n_constraints
    lam = np.zeros(nc) if multipliers is None else np.asarray(multipliers, dtype=float)

    sys, norm = _trial(problem, D, lam, objective)
    if sys is None:
        raise ValueError("objective cannot be evaluated on the initial path")
    r0 = max(norm, 1e-300)
    history = [IterationRecord(0, norm, 0.0, sys.J)]
    nf = sys.n_free
    converged = norm < cfg.tolerance
    message = "converged" if converged else ""

    for it in range(1, cfg.max_iterations + 1):
        if converged:
            break
        delta = _solve_linear(disc, sys.tangent, sys.residual)
        omega = 1.0
        forced = False
        while True:
            D_try = disc.expand(D.ravel()[disc.free] + omega * delta[:nf], D)
            lam_try = lam + omega * delta[nf:]
            sys_try, norm_try = _trial(problem, D_try, lam_try, objective)
            if not cfg.relaxation or norm_try < norm:
                break
            if omega / 2 < cfg.min_relaxation:
                forced = True
                break
            omega /= 2
        if sys_try is None:
            message = "objective evaluation failed along the Newton step"
            break
        if forced:
            log.info("iteration %d: minimum relaxation factor forced (residual %.3e -> %.3e)", it, norm, norm_try)
        D, lam, sys, norm = D_try, lam_try, sys_try, norm_try
        history.append(IterationRecord(it, norm, omega, sys.J, forced))
        log.debug("iteration %d: |R| = %.3e, omega = %g, J = %.6e", it, norm, omega, sys.J)
        if not np.isfinite(norm) or norm > cfg.divergence_factor * r0:
            message = "diverged (residual growth)"
            break
        if norm < cfg.tolerance:
            converged = True
            message = "converged"
    else:
        if not converged:
            message = f"no convergence in {cfg.max_iterations} iterations"

    forces = recover_forces(problem, D) if (recover and converged and objective is None) else None
    return MotionSolution(D=D, J=sys.J, converged=converged, history=history,
                          multipliers=lam if nc else None, forces=forces, message=message)


def classify_stationary_point(problem, D, objective=None, multipliers=None):
    """'minimum', 'maximum' or 'saddle' from the inertia of the (projected) tangent."""
    disc = discretize(problem)
    sys = assemble(problem, D, objective, multipliers)
    nf = sys.n_free
    H = sys.tangent[:nf, :nf]
    if disc.n_constraints:
        G = sys.tangent[nf:, :nf]
        Z = scipy.linalg.null_space(G)
        H = Z.T @ H @ Z
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    tol = 1e-10 * max(np.abs(ev).max(), 1e-300)
    if np.all(ev > tol):
        return "minimum"
    if np.all(ev < -tol):
        return "maximum"
    return "saddle"


def run(problem, predictor_kind=None, config=None, objective=None):
    """Predictor followed by the Newton solve."""
    D0 = predictor(problem, predictor_kind, config)
    return solve_motion(problem, D0, objective=objective, config=config)


__all__ = [
    "DivergenceError", "SingularSystemError", "IterationRecord", "MotionSolution", "SolverConfig",
    "predictor_linear", "predictor_hierarchical", "add_sway", "predictor_preanalysis", "predictor", "embed",
    "equilibrium_path", "solve_motion", "classify_stationary_point", "run", "PathMesh",
]
