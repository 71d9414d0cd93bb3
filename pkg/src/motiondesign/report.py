"""Run a problem end to end and write its result files."""

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import functional, solver
from .model import DIRECTIONS, dof_label


@dataclass
class RunReport:
    problem: object
    solution: solver.MotionSolution
    J_predictor: float
    wall_time: float
    error: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.solution is not None and self.solution.converged


def run_problem(problem, predictor_kind=None):
    """Predictor, Newton solve and force recovery; divergence is recorded, not raised."""
    start = time.perf_counter()
    D0 = solver.predictor(problem, predictor_kind)
    J0 = functional.evaluate_J(problem, D0)[0]
    error = ""
    try:
        sol = solver.solve_motion(problem, D0)
    except solver.SingularSystemError as exc:
        error = str(exc)
        sol = solver.MotionSolution(D0, J0, False, [], message=error)
    return RunReport(problem, sol, J0, time.perf_counter() - start, error or ("" if sol.converged else sol.message))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(x):
    return repr(float(x))


def write_history(history, directory):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "iterations.csv", ["iteration", "residual", "relaxation", "J"],
               [[h.iteration, _num(h.residual), _num(h.relaxation), _num(h.J)] for h in history])


def write_outputs(report, directory):
    """report.json, trajectory.csv, energy.csv, forces.csv and iterations.csv."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    p = report.problem
    sol = report.solution
    disc = functional.discretize(p)
    dim = disc.dofmap.dim
    X = p.mesh.coordinates

    write_history(sol.history, out)

    stations = functional.configurations(p, sol.D)
    rows = []
    for k, v in enumerate(stations):
        x = X + functional.full_displacements(p, v)
        for node in range(len(X)):
            rows.append([k, node] + [_num(c) for c in x[node]])
    _write_csv(out / "trajectory.csv", ["path_node", "node"] + list(DIRECTIONS[:dim]), rows)

    sbar, arc, su, pi = functional.profile(p, sol.D)
    _write_csv(out / "energy.csv", ["sbar", "arclength", "s_u", "Pi_int"],
               [[_num(a), _num(b), _num(c), _num(d)] for a, b, c, d in zip(sbar, arc, su, pi)])

    forces = sol.forces if sol.forces is not None else functional.recover_forces(p, sol.D)
    rows = []
    for k, f in enumerate(forces):
        for i, key in enumerate(disc.dofmap.keys):
            rows.append([k, key[0], DIRECTIONS[key[1]], _num(f[i])])
    _write_csv(out / "forces.csv", ["path_node", "node", "direction", "force"], rows)

    summary = {
        "name": p.name,
        "converged": sol.converged,
        "message": report.error or sol.message,
        "J": sol.J,
        "J_predictor": report.J_predictor,
        "iterations": sol.iterations,
        "residual": sol.history[-1].residual if sol.history else None,
        "path": {"type": p.path.kind, "degree": p.path.degree, "n_elements": p.path.n_elements},
        "n_unknowns": int(disc.free.size + disc.n_constraints),
        "path_nodes": len(stations),
        "stations": [float(s) for s in disc.path.stations],
        "dofs": [dof_label(k) for k in disc.dofmap.keys],
        "snapshots": np.asarray(stations).tolist(),
        "controls": np.asarray(sol.D).tolist(),
        "wall_time": report.wall_time,
    }
    summary.update(report.extras)
    (out / "report.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    return out
