"""Acceptance criteria, one test each.

Every test appends a PASS/FAIL line that pytest prints in the terminal
summary, then asserts at the criterion's tolerance.
"""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from motiondesign import benchmarks, brachistochrone, functional, solver, verify
from motiondesign.model import PathSpec


def record(number, title, checks):
    """checks: list of (label, passed, detail)."""
    ok = all(passed for _, passed, _ in checks)
    parts = "; ".join(f"{label} {'ok' if passed else 'FAILED'} ({detail})" for label, passed, detail in checks)
    ACCEPTANCE_LINES.append(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}: {parts}")
    assert ok, parts


def solve(problem, D0=None):
    D0 = solver.predictor(problem) if D0 is None else D0
    return D0, solver.solve_motion(problem, D0)


def test_criterion_1_brachistochrone_constants():
    start = time.perf_counter()
    sol = brachistochrone.solve_exact(brachistochrone.reference_setup())
    elapsed = time.perf_counter() - start

    def sig3(x):
        return float(f"{x:.3g}")

    record(1, "cycloid constants", [
        ("C1", sig3(sol.C1) == 0.116, f"{sol.C1:.5f}"),
        ("C2", sig3(sol.C2) == 1.0, f"{sol.C2:.5f}"),
        ("t_E", sig3(sol.t_E) == 4.05, f"{sol.t_E:.5f}"),
        ("runtime", elapsed < 0.1, f"{elapsed * 1e3:.1f} ms"),
    ])


def test_criterion_2_brachistochrone_fe():
    start = time.perf_counter()
    setup = brachistochrone.reference_setup()
    T = brachistochrone.solve_exact(setup).time
    lin = brachistochrone.solve_fe(setup, PathSpec("lagrange", 1, 15)).T
    cub = brachistochrone.solve_fe(setup, PathSpec("bspline", 3, 2)).T
    study = brachistochrone.refinement_study(setup)
    seq = [study[n] for n in (4, 8, 16, 32)]
    elapsed = time.perf_counter() - start
    record(2, "brachistochrone FE", [
        ("15 linear", T <= lin <= 1.01 * T, f"T/T_exact = {lin / T:.5f}"),
        ("2 cubic", T <= cub <= 1.01 * T, f"T/T_exact = {cub / T:.5f}"),
        ("monotone 4-32", all(a > b for a, b in zip(seq[:-1], seq[1:])), ", ".join(f"{t:.5f}" for t in seq)),
        ("runtime", elapsed < 5.0, f"{elapsed:.2f} s"),
    ])


def test_criterion_3_derivative_consistency():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    problems = [benchmarks.two_bar_truss(), benchmarks.kinematic_truss(), benchmarks.quad_fold()]
    worst = np.zeros(3)
    n_states = 0
    for p in problems:
        for _ in range(4):
            errs = verify.functional_fd_errors(p, verify._random_state(p, rng, 0.02))
            worst = np.maximum(worst, errs)
            n_states += 1
    elapsed = time.perf_counter() - start
    record(3, f"FD checks on {n_states} states", [
        ("states", n_states >= 10, str(n_states)),
        ("gradient", worst[0] < 1e-6, f"{worst[0]:.1e}"),
        ("tangent", worst[1] < 1e-4, f"{worst[1]:.1e}"),
        ("asymmetry", worst[2] < 1e-10, f"{worst[2]:.1e}"),
        ("runtime", elapsed < 30.0, f"{elapsed:.1f} s"),
    ])


def test_criterion_4_kinematic_mechanisms():
    start = time.perf_counter()
    checks = []
    cases = [
        ("truss", benchmarks.kinematic_truss, (14, "lagrange", 1), (28, "lagrange", 1),
         ((13, "bspline", 2), (14, "lagrange", 1))),
        ("fold", benchmarks.quad_fold, (6, "bspline", 2), (12, "bspline", 2),
         ((6, "bspline", 2), (7, "lagrange", 1))),
    ]
    for label, build, base, fine, (spline, lagrange) in cases:
        p = build(*base)
        D0, sol = solve(p)
        J0 = functional.evaluate_J(p, D0)[0]
        change = verify.bar_length_change(p, sol.D)
        checks.append((f"{label} converged", sol.converged, sol.message))
        checks.append((f"{label} length change", change < 1e-4, f"{change:.1e}"))
        checks.append((f"{label} J/J_pred", sol.J < 1e-3 * J0, f"{sol.J / J0:.1e}"))
        J_fine = solve(build(*fine))[1].J
        checks.append((f"{label} doubling", J_fine <= 0.5 * sol.J, f"{sol.J:.2e} -> {J_fine:.2e}"))
        ps, pl = build(*spline), build(*lagrange)
        n_s, n_l = functional.discretize(ps).n_ctrl, functional.discretize(pl).n_ctrl
        J_s, J_l = solve(ps)[1].J, solve(pl)[1].J
        checks.append((f"{label} spline vs Lagrange", n_s == n_l and J_s < J_l,
                       f"{n_s} controls: {J_s:.2e} < {J_l:.2e}"))
    elapsed = time.perf_counter() - start
    checks.append(("runtime", elapsed < 60.0, f"{elapsed:.1f} s"))
    record(4, "kinematic mechanisms", checks)


def test_criterion_5_two_bar_snap_through():
    p = benchmarks.two_bar_truss()
    D0, sol = solve(p)
    _, arc, _, pi = functional.profile(p, sol.D)
    mat = p.mesh.materials["bar"]
    EAL = mat.youngs_modulus * mat.area * np.hypot(1.0, 0.2)
    disc = functional.discretize(p)
    apex = functional.configurations(p, sol.D)[:, [disc.dofmap.index[(1, 0)], disc.dofmap.index[(1, 1)]]]
    u, v = apex[:, 0], apex[:, 1]
    # first station where the vertical motion is complete (within 1 %)
    k = int(np.argmax(np.abs(v - v[-1]) <= 0.01 * abs(v[-1])))
    frac_u = abs(u[k]) / abs(u[-1])
    record(5, "two-bar snap-through", [
        ("iterations", sol.converged and sol.iterations <= 15, f"{sol.iterations} at tol {p.solver.tolerance:g}"),
        ("end energy", pi[-1] < 1e-8 * EAL, f"Pi_int(end) = {pi[-1]:.4g}, limit {1e-8 * EAL:.2g}"),
        ("vertical first", frac_u < 0.9, f"vertical done at station {k}, horizontal {100 * frac_u:.0f}%"),
    ])


def test_criterion_6_locking_ordering(solve_benchmark):
    J_q1 = solve_benchmark("arch_q1")[2].J
    J_eas = solve_benchmark("arch_eas")[2].J
    record(6, "EAS vs Q1 arch", [
        ("ratio", J_eas < 0.8 * J_q1, f"J_EAS / J_Q1 = {J_eas:.2f} / {J_q1:.2f} = {J_eas / J_q1:.2f}"),
    ])


def test_criterion_7_instability_ordering():
    p = benchmarks.high_truss()
    J_lin = functional.evaluate_J(p, solver.predictor_linear(p))[0]
    D_sec = benchmarks.secondary_path_predictor(p)
    J_sec = functional.evaluate_J(p, D_sec)[0]
    sol = solver.solve_motion(p, D_sec)
    record(7, "high truss ordering", [
        ("converged", sol.converged, sol.message),
        ("ordering", sol.J < J_sec < J_lin, f"{sol.J:.1f} < {J_sec:.1f} < {J_lin:.1f}"),
    ])


def test_criterion_8_intermediate_configurations():
    p = benchmarks.staged_truss()
    _, sol = solve(p)
    disc = functional.discretize(p)
    vals, _ = disc.path.evaluate(sol.D, disc.path.breakpoints)
    err = max(abs(vals[c.path_node, disc.dofmap.index[k]] - v)
              for c in p.configurations for k, v in c.prescribed.items())
    record(8, "three-stage truss", [
        ("converged", sol.converged, sol.message),
        ("stage values", err < 1e-12, f"max deviation {err:.1e}"),
    ])


def test_criterion_9_invariant_suite():
    checks = verify.run_all()
    record(9, "verify suite", [(c.name, c.passed, c.detail) for c in checks])
