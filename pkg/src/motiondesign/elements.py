"""Spatial element library.

Total Lagrangian truss and plane-stress quadrilateral elements with
Green-Lagrange strain and St. Venant-Kirchhoff material.  Every routine
returns the element energy together with its exact first and second
derivatives, so the path functional can be linearized consistently.

The ``*_states`` functions are batched over elements of one kind; the
singular ``*_state`` wrappers evaluate a single element.
"""

from dataclasses import dataclass

import numpy as np


class ElementError(ValueError):
    """Degenerate or inverted element geometry."""


@dataclass(frozen=True)
class ElementState:
    energy: float
    f_int: np.ndarray
    k_t: np.ndarray
    alpha: np.ndarray | None = None  # condensed enhanced strain parameters (EAS only)


# ---------------------------------------------------------------------------
# trusses


def truss_states(X, d, EA):
    """Batched truss evaluation.

    X : (ne, 2, dim) reference coordinates, d : (ne, 2*dim) displacements,
    EA : (ne,) axial stiffness.  Returns (energy, f_int, k_t) arrays.
    """
    X = np.asarray(X, dtype=float)
    d = np.asarray(d, dtype=float)
    ne, _, dim = X.shape
    EA = np.broadcast_to(np.asarray(EA, dtype=float), (ne,))

    dX = X[:, 1] - X[:, 0]
    L2 = np.einsum("ei,ei->e", dX, dX)
    if np.any(L2 <= 0.0):
        raise ElementError("truss element with zero reference length")
    L = np.sqrt(L2)
    u = d.reshape(ne, 2, dim)
    dx = dX + u[:, 1] - u[:, 0]
    l2 = np.einsum("ei,ei->e", dx, dx)
    strain = (l2 - L2) / (2.0 * L2)

    energy = 0.5 * EA * L * strain**2
    b = np.concatenate([-dx, dx], axis=1) / L2[:, None]
    axial = EA * L * strain  # conjugate to the Green-Lagrange strain, times L
    f_int = axial[:, None] * b

    eye = np.eye(dim)
    G = np.block([[eye, -eye], [-eye, eye]])
    k_t = (EA * L)[:, None, None] * np.einsum("ei,ej->eij", b, b)
    k_t += (axial / L2)[:, None, None] * G[None]
    return energy, f_int, k_t


def truss_state(X, d, mat):
    """Energy, internal force and tangent of one bar (``mat`` needs E and area)."""
    X = np.asarray(X, dtype=float)
    e, f, k = truss_states(X[None], np.asarray(d, dtype=float)[None], mat.youngs_modulus * mat.area)
    return ElementState(float(e[0]), f[0], k[0])


# ---------------------------------------------------------------------------
# bilinear quadrilaterals

_G = 1.0 / np.sqrt(3.0)
GAUSS_2x2 = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
_XI_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _dshape(xi, eta):
    # rows: nodes, cols: d/dxi, d/deta
    return 0.25 * np.column_stack([
        _XI_NODES[:, 0] * (1.0 + _XI_NODES[:, 1] * eta),
        _XI_NODES[:, 1] * (1.0 + _XI_NODES[:, 0] * xi),
    ])


_DN_GAUSS = np.stack([_dshape(*p) for p in GAUSS_2x2])  # (4 gp, 4 nodes, 2)
_DN_CENTER = _dshape(0.0, 0.0)


def plane_stress_matrix(E, nu):
    return E / (1.0 - nu**2) * np.array([
        [1.0, nu, 0.0],
        [nu, 1.0, 0.0],
        [0.0, 0.0, 0.5 * (1.0 - nu)],
    ])


def _eas_modes(X, detJ):
    """Enhanced strain interpolation, shape (ne, 4 gp, 3, 4)."""
    J0 = np.einsum("ai,eaj->eij", _DN_CENTER, X)
    det0 = np.linalg.det(J0)
    P = np.linalg.inv(J0)  # P[k, m] = d xi_m / d X_k

    # covariant natural strain -> physical Voigt strain, built column by column
    units = np.zeros((3, 2, 2))
    units[0, 0, 0] = 1.0
    units[1, 1, 1] = 1.0
    units[2, 0, 1] = units[2, 1, 0] = 0.5
    phys = np.einsum("eki,cij,elj->eckl", P, units, P, optimize=True)
    T0 = np.stack([phys[:, :, 0, 0], phys[:, :, 1, 1], 2.0 * phys[:, :, 0, 1]], axis=1)  # (ne, 3, 3)

    M = np.zeros((4, 3, 4))
    for g, (xi, eta) in enumerate(GAUSS_2x2):
        M[g, 0, 0] = xi
        M[g, 1, 1] = eta
        M[g, 2, 2] = xi
        M[g, 2, 3] = eta
    scale = det0[:, None] / detJ  # (ne, gp)
    return scale[:, :, None, None] * np.einsum("eij,gjk->egik", T0, M)


def quad_states(X, d, E, nu, thickness, eas=False, suppress_alpha=False, max_local_iter=20):
    """Batched plane-stress quadrilateral evaluation with 2x2 Gauss quadrature.

    X : (ne, 4, 2) counterclockwise reference coordinates, d : (ne, 8).
    With ``eas`` four enhanced Green-Lagrange strain modes are added and
    condensed element by element.  Returns (energy, f_int, k_t, alpha).
    """
    X = np.asarray(X, dtype=float)
    d = np.asarray(d, dtype=float)
    ne = X.shape[0]
    C = plane_stress_matrix(E, nu)

    J = np.einsum("gai,eaj->egij", _DN_GAUSS, X)  # J[i, j] = dX_j / dxi_i
    detJ = np.linalg.det(J)
    if np.any(detJ <= 0.0):
        bad = int(np.argmin(detJ.min(axis=1)))
        raise ElementError(f"quad element {bad} has a non-positive Jacobian (check node ordering)")
    dNdX = np.einsum("egij,gaj->egai", np.linalg.inv(J), _DN_GAUSS)
    dV = thickness * detJ  # unit Gauss weights

    u = d.reshape(ne, 4, 2)
    F = np.eye(2) + np.einsum("eai,egaj->egij", u, dNdX)
    C_green = np.einsum("egki,egkj->egij", F, F)
    Ec = np.stack([
        0.5 * (C_green[..., 0, 0] - 1.0),
        0.5 * (C_green[..., 1, 1] - 1.0),
        C_green[..., 0, 1],
    ], axis=-1)  # (ne, gp, 3)

    # B[e, g, voigt, node, comp]
    B = np.zeros((ne, 4, 3, 4, 2))
    B[:, :, 0] = np.einsum("egk,ega->egak", F[..., :, 0], dNdX[..., 0])
    B[:, :, 1] = np.einsum("egk,ega->egak", F[..., :, 1], dNdX[..., 1])
    B[:, :, 2] = (np.einsum("egk,ega->egak", F[..., :, 0], dNdX[..., 1])
                  + np.einsum("egk,ega->egak", F[..., :, 1], dNdX[..., 0]))
    B = B.reshape(ne, 4, 3, 8)

    alpha = np.zeros((ne, 4))
    E_tot = Ec
    if eas:
        Gt = _eas_modes(X, detJ)  # (ne, gp, 3, 4)
        H = np.einsum("egvi,vw,egwj,eg->eij", Gt, C, Gt, dV, optimize=True)
        if not suppress_alpha:
            # local Newton on the enhanced-strain residual (linear in alpha);
            # converged once h is round-off relative to the magnitude of its terms
            for _ in range(max_local_iter):
                E_tot = Ec + np.einsum("egvi,ei->egv", Gt, alpha)
                h = np.einsum("egvi,vw,egw,eg->ei", Gt, C, E_tot, dV, optimize=True)
                size = np.einsum("egvi,vw,egw,eg->ei", np.abs(Gt), np.abs(C), np.abs(E_tot), dV, optimize=True)
                if np.all(np.linalg.norm(h, axis=1) <= 1e-12 * np.linalg.norm(size, axis=1)):
                    break
                alpha = alpha - np.linalg.solve(H, h[..., None])[..., 0]
            else:
                raise ElementError("EAS static condensation did not converge")
        E_tot = Ec + np.einsum("egvi,ei->egv", Gt, alpha)

    S = np.einsum("vw,egw->egv", C, E_tot)
    energy = 0.5 * np.einsum("egv,egv,eg->e", E_tot, S, dV, optimize=True)
    f_int = np.einsum("egvi,egv,eg->ei", B, S, dV, optimize=True)

    k_mat = np.einsum("egvi,vw,egwj,eg->eij", B, C, B, dV, optimize=True)
    S_mat = np.stack([np.stack([S[..., 0], S[..., 2]], -1), np.stack([S[..., 2], S[..., 1]], -1)], -2)
    geo = np.einsum("egai,egij,egbj,eg->eab", dNdX, S_mat, dNdX, dV, optimize=True)
    k_t = k_mat + np.einsum("eab,ij->eaibj", geo, np.eye(2)).reshape(ne, 8, 8)

    if eas and not suppress_alpha:
        K_da = np.einsum("egvi,vw,egwj,eg->eij", B, C, Gt, dV, optimize=True)
        k_t = k_t - K_da @ np.linalg.solve(H, np.swapaxes(K_da, 1, 2))
    k_t = 0.5 * (k_t + np.swapaxes(k_t, 1, 2))
    return energy, f_int, k_t, alpha


def _quad_single(X, d, mat, eas, **kw):
    e, f, k, a = quad_states(np.asarray(X, dtype=float)[None], np.asarray(d, dtype=float)[None],
                             mat.youngs_modulus, mat.poisson_ratio, mat.thickness, eas=eas, **kw)
    return ElementState(float(e[0]), f[0], k[0], a[0] if eas else None)


def quad_state(X, d, mat):
    """Displacement-based bilinear quadrilateral (Q1)."""
    return _quad_single(X, d, mat, eas=False)


def eas_quad_state(X, d, mat, suppress_alpha=False):
    """Q1 enriched with four condensed enhanced strain modes.

    ``suppress_alpha`` forces the enhanced parameters to zero, which must
    reproduce :func:`quad_state`.
    """
    return _quad_single(X, d, mat, eas=True, suppress_alpha=suppress_alpha)


# ---------------------------------------------------------------------------
# volumes


def element_volume(kind, X, mat):
    X = np.asarray(X, dtype=float)
    if kind.startswith("truss"):
        return mat.area * float(np.linalg.norm(X[1] - X[0]))
    J = np.einsum("gai,aj->gij", _DN_GAUSS, X)
    return mat.thickness * float(np.linalg.det(J).sum())


def tributary_volume(mesh):
    """Per-node influence volumes and their total.

    Bars give half their volume to each end node, quadrilaterals a quarter
    to each corner.  A mesh without elements (a point mass) weighs its
    nodes equally.
    """
    V = np.zeros(len(mesh.nodes))
    X = mesh.coordinates
    for el in mesh.elements:
        vol = element_volume(el.kind, X[list(el.nodes)], mesh.materials[el.material])
        V[list(el.nodes)] += vol / len(el.nodes)
    if not mesh.elements:
        V[:] = 1.0
    return V, float(V.sum())
