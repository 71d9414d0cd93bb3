"""Self-checks run by ``motiondesign verify``.

Every check returns a :class:`Check`; ``run_all`` collects them in a fixed
order.  Element routines are looked up on the module at call time so a
test can substitute a broken implementation and watch the table fail.
"""

from dataclasses import dataclass

import numpy as np

from . import benchmarks, brachistochrone, elements, functional, pathspace, solver
from .model import Material, PathSpec


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def fd_gradient(fun, x, h):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def fd_jacobian(fun, x, h):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.column_stack(cols)


def element_fd_errors(state, X, d, mat, h=1e-6):
    """(force error, stiffness error) of one element routine against central differences."""
    st = state(X, d, mat)
    f_fd = fd_gradient(lambda v: state(X, v, mat).energy, d, h)
    k_fd = fd_jacobian(lambda v: state(X, v, mat).f_int, d, h)
    f_err = np.linalg.norm(st.f_int - f_fd) / max(1.0, np.linalg.norm(st.f_int))
    k_err = np.linalg.norm(st.k_t - k_fd) / np.linalg.norm(st.k_t)
    return float(f_err), float(k_err)


def _element_cases(rng):
    bar = Material(30000.0, area=0.1)
    plate = Material(1000.0, 0.3, thickness=1.0)
    Xb = np.array([[0.0, 0.0], [1.0, 0.2]])
    Xq = np.array([[0.0, 0.0], [1.0, 0.1], [1.1, 0.9], [-0.1, 1.0]])
    return [
        ("truss", lambda *a: elements.truss_state(*a), Xb, 0.05 * rng.standard_normal(4), bar),
        ("quad4", lambda *a: elements.quad_state(*a), Xq, 0.05 * rng.standard_normal(8), plate),
        ("quad4_eas", lambda *a: elements.eas_quad_state(*a), Xq, 0.05 * rng.standard_normal(8), plate),
    ]


def check_element_derivatives(seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for name, state, X, d, mat in _element_cases(rng):
        f_err, k_err = element_fd_errors(state, X, d, mat)
        out.append(Check(f"fd {name}", f_err < 1e-6 and k_err < 1e-5,
                         f"force {f_err:.1e}, stiffness {k_err:.1e}"))
    return out


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def check_rigid_body(seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, state, X, _, mat in _element_cases(rng):
        for _ in range(5):
            R = rotation(rng.uniform(-np.pi, np.pi))
            t = rng.standard_normal(2)
            d = (X @ R.T + t - X).ravel()
            vol = elements.element_volume("truss" if name == "truss" else "quad", X, mat)
            worst = max(worst, state(X, d, mat).energy / (mat.youngs_modulus * vol))
    return Check("rigid body energy", worst < 1e-12, f"max energy / (E V) {worst:.1e}")


def _random_state(problem, rng, amplitude=0.05):
    disc = functional.discretize(problem)
    D = solver.predictor_linear(problem)
    D = D + amplitude * problem.mesh.characteristic_length() * rng.standard_normal(D.shape)
    return disc.apply_prescribed(D)


def functional_fd_errors(problem, D, h=1e-6):
    """Gradient, tangent and asymmetry errors of the assembled system at ``D`` (zero multipliers)."""
    disc = functional.discretize(problem)
    sys = functional.assemble(problem, D)
    x0 = D.ravel()[disc.free]
    hh = h * problem.mesh.characteristic_length()

    def J(x):
        return functional.evaluate_J(problem, disc.expand(x, D))[0]

    def grad(x):
        return functional.assemble(problem, disc.expand(x, D), tangent=False).gradient

    nf = sys.n_free
    g_err = rel_err(sys.gradient, fd_gradient(J, x0, hh))
    k_err = rel_err(sys.tangent[:nf, :nf], fd_jacobian(grad, x0, hh))
    K = sys.tangent
    asym = float(np.abs(K - K.T).max() / np.abs(K).max())
    return g_err, k_err, asym


def check_functional_derivatives(seed=2, n_states=4):
    rng = np.random.default_rng(seed)
    problems = [benchmarks.two_bar_truss(4), benchmarks.kinematic_truss(3),
                benchmarks.quad_fold(2)]
    worst = [0.0, 0.0, 0.0]
    for p in problems:
        for _ in range(n_states):
            errs = functional_fd_errors(p, _random_state(p, rng, 0.02))
            worst = [max(a, b) for a, b in zip(worst, errs)]
    ok = worst[0] < 1e-6 and worst[1] < 1e-4 and worst[2] < 1e-10
    return Check("fd path functional", ok,
                 f"gradient {worst[0]:.1e}, tangent {worst[1]:.1e}, asymmetry {worst[2]:.1e}")


def check_arc_length(seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        r = rng.standard_normal(6)
        V = rng.uniform(0.1, 1.0, 6)
        a = pathspace.arc_length_state(r, V, V.sum())
        c = rng.uniform(0.1, 10.0)
        b = pathspace.arc_length_state(c * r, V, V.sum())
        worst = max(worst, abs(b.s_u - c * a.s_u) / (c * a.s_u), abs(a.grad @ r - a.s_u) / a.s_u,
                    np.abs(a.hess @ r).max() / max(np.abs(a.hess).max(), 1e-300))
    return Check("arc length homogeneity", worst < 1e-12, f"max deviation {worst:.1e}")


def check_partition_of_unity(seed=4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for pm in (pathspace.PathMesh("lagrange", 2, 5), pathspace.PathMesh("bspline", 3, 6, (2,)),
               pathspace.PathMesh("bspline", 2, 4)):
        for s in rng.uniform(0.0, 1.0, 50):
            N, dN, _ = pathspace.eval_shapes(pm, s)
            worst = max(worst, abs(N.sum() - 1.0), abs(dN.sum()) / np.abs(dN).sum())
    return Check("partition of unity", worst < 1e-12, f"max deviation {worst:.1e}")


def check_brachistochrone():
    sol = brachistochrone.solve_exact(brachistochrone.reference_setup())
    ok = (round(sol.C1, 3) == 0.116 and round(sol.t_E, 2) == 4.05 and round(sol.C2, 3) == 1.0
          and max(map(abs, sol.residuals())) < 1e-10)
    return Check("brachistochrone constants", ok,
                 f"C1 {sol.C1:.4f} (0.116), C2 {sol.C2:.3f} (1.0), t_E {sol.t_E:.4f} (4.05)")


def check_equal_length():
    p = brachistochrone.reference_setup()
    fe = brachistochrone.solve_fe(p, PathSpec("lagrange", 1, 8))
    lengths = functional.assemble(fe.problem, fe.motion.D, objective=brachistochrone.time_objective(p.g),
                                  multipliers=fe.motion.multipliers, tangent=False).lengths
    dev = float(np.abs(np.diff(lengths)).max() / lengths.sum())
    return Check("equal path element lengths", fe.converged and dev < 1e-8, f"max |L_e - L_e+1| / L {dev:.1e}")


def bar_length_change(problem, D):
    """Largest relative change of any element edge length over the path stations."""
    X = problem.mesh.coordinates
    worst = 0.0
    for v in functional.configurations(problem, D):
        x = X + functional.full_displacements(problem, v)
        for el in problem.mesh.elements:
            n = list(el.nodes)
            edges = [(n[0], n[1])] if len(n) == 2 else [(n[a], n[(a + 1) % len(n)]) for a in range(len(n))]
            for i, j in edges:
                L = np.linalg.norm(X[j] - X[i])
                worst = max(worst, abs(np.linalg.norm(x[j] - x[i]) - L) / L)
    return worst


def check_mechanisms():
    out = []
    for p in (benchmarks.kinematic_truss(), benchmarks.quad_fold()):
        D0 = solver.predictor(p)
        J0 = functional.evaluate_J(p, D0)[0]
        sol = solver.solve_motion(p, D0)
        change = bar_length_change(p, sol.D)
        ok = sol.converged and change < 1e-4 and sol.J < 1e-3 * J0
        out.append(Check(f"mechanism {p.name}", ok,
                         f"J {sol.J:.2e} vs predictor {J0:.2e}, length change {change:.1e}"))
    return out


def check_determinism():
    p = benchmarks.two_bar_truss(6)
    D = _random_state(p, np.random.default_rng(5))
    a = functional.assemble(p, D)
    b = functional.assemble(p, D)
    same = np.array_equal(a.residual, b.residual) and np.array_equal(a.tangent, b.tangent) and a.J == b.J
    return Check("deterministic assembly", bool(same), "bit-identical" if same else "outputs differ")


def run_all():
    checks = [check_brachistochrone()]
    checks += check_element_derivatives()
    checks.append(check_rigid_body())
    checks.append(check_functional_derivatives())
    checks.append(check_arc_length())
    checks.append(check_partition_of_unity())
    checks.append(check_equal_length())
    checks += check_mechanisms()
    checks.append(check_determinism())
    return checks


def format_table(checks):
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  result  detail"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  {c.detail}")
    return "\n".join(lines)
