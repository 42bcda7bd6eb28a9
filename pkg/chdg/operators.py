"""
Negative-norm machinery on the DG space: the inverse discrete Laplacian, the
(.,.)_{-1,h} product, elliptic projections and node averaging.
"""
import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from chdg import dg
from chdg.exceptions import LinearSolveFailure
from chdg.quadrature import (
    MAX_EDGE_DEGREE, MAX_TRIANGLE_DEGREE, edge_quadrature,
)

logger = logging.getLogger(__name__)

PROJECTIONS = ('l2_continuous', 'elliptic_continuous')
DENSE_GRAM_LIMIT = 3000
RESIDUAL_TOLERANCE = 1e-10

# extra exactness for integrands that are not polynomial on a cell
SMOOTH_EXTRA_DEGREE = 4


def factorize(matrix):
    try:
        lu = splinalg.splu(sparse.csc_matrix(matrix))
    except RuntimeError as e:
        raise LinearSolveFailure('sparse factorization failed: %s' % e)
    return lu


def checked_solve(lu, matrix, rhs, tolerance=RESIDUAL_TOLERANCE):
    """
    Solve with a factorization and verify the linear residual relative to
    the size of the right-hand side.
    """
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure('linear solve produced non-finite values')
    residual = np.abs(matrix @ x - rhs).max() if len(rhs) else 0.0
    scale = max(1.0, np.abs(rhs).max() if len(rhs) else 0.0)
    logger.debug('linear residual %.3e (scale %.3e)', residual, scale)
    if residual > tolerance * scale:
        raise LinearSolveFailure(
            'linear residual %.3e exceeds %.1e' % (residual, tolerance * scale)
        )
    return x


class InverseLaplacianSolver(object):
    """
    Factorization of the SIPG matrix bordered by the mass-weighted constant.

    For a source zeta the bordered system
        A psi + lambda m = M zeta,   m^T psi = 0
    has a unique solution, and Delta_h^{-1} zeta = -psi.
    """

    def __init__(self, space, sigma0=None, sipg=None, mass=None):
        self.space = space
        self.sigma0 = dg.default_penalty(space.degree) if sigma0 is None else float(sigma0)
        self.sipg = dg.assemble_sipg(space, self.sigma0) if sipg is None else sipg
        self.mass = dg.assemble_mass(space) if mass is None else mass
        self.constant_load = self.mass @ np.ones(space.num_dofs)
        border = sparse.csr_matrix(self.constant_load[:, None])
        self.bordered = sparse.bmat(
            [[self.sipg, border], [border.T, None]], format='csc',
        )
        self._lu = factorize(self.bordered)
        logger.debug('factorized bordered SIPG system for %r', space)

    def potential(self, zeta):
        """
        psi = -Delta_h^{-1} zeta as a coefficient vector (or matrix of
        column vectors).
        """
        zeta = np.asarray(zeta, dtype=float)
        rhs = self.mass @ zeta
        pad = np.zeros((1,) + rhs.shape[1:])
        x = checked_solve(self._lu, self.bordered, np.concatenate([rhs, pad]))
        return x[:self.space.num_dofs]

    def _coefficients(self, field):
        if isinstance(field, dg.DGField):
            self.space.check_field(field)
            return field.coefficients
        return np.asarray(field, dtype=float)


def inv_laplacian(solver, zeta):
    psi = solver.potential(solver._coefficients(zeta))
    return dg.DGField(solver.space, -psi)


def minus1_inner(solver, zeta, xi):
    """
    (zeta, xi)_{-1,h} = a_h(-Delta_h^{-1} zeta, -Delta_h^{-1} xi).
    """
    psi_zeta = solver.potential(solver._coefficients(zeta))
    psi_xi = solver.potential(solver._coefficients(xi))
    return float(psi_zeta @ (solver.sipg @ psi_xi))


def minus1_norm(solver, zeta):
    return float(np.sqrt(max(minus1_inner(solver, zeta, zeta), 0.0)))


def minus1_gram(solver, limit=DENSE_GRAM_LIMIT):
    """
    Dense matrix G with x^T G y = (u_x, u_y)_{-1,h}.  Since a_h(psi_x, psi_y)
    equals (x, psi_y) on mean-zero potentials, G = M Psi with Psi the
    solution operator applied to the identity.
    """
    size = solver.space.num_dofs
    if size > limit:
        raise ValueError('dense Gram matrix requested for %d dofs (limit %d)' % (size, limit))
    psi = solver.potential(np.eye(size))
    gram = np.asarray(solver.mass @ psi)
    return 0.5 * (gram + gram.T)


def continuous_prolongation(space):
    """
    Sparse injection S_h -> V_h copying each continuous coefficient to every
    broken degree of freedom at the same node.
    """
    rows = np.arange(space.num_dofs)
    return sparse.csr_matrix(
        (np.ones(space.num_dofs), (rows, space.continuous_map)),
        shape=(space.num_dofs, space.num_continuous),
    )


def _smooth_volume_tables(space):
    degree = min(dg.volume_degree(space.degree) + SMOOTH_EXTRA_DEGREE, MAX_TRIANGLE_DEGREE)
    return space.quadrature_tables(degree)


def _smooth_edge_traces(space):
    degree = min(dg.edge_degree(space.degree) + SMOOTH_EXTRA_DEGREE, MAX_EDGE_DEGREE)
    return space.edge_traces(edge_quadrature(degree))


def _gradient_values(grad_u, points):
    grad = grad_u(points[..., 0], points[..., 1])
    gx, gy = (np.broadcast_to(np.asarray(g, dtype=float), points.shape[:-1]) for g in grad)
    return np.stack([gx, gy], axis=-1)


def load_vector(space, func):
    """
    Components (func, phi_i) for a smooth ``func(x, y)``.
    """
    phi, _, weights, points = _smooth_volume_tables(space)
    values = np.broadcast_to(
        np.asarray(func(points[..., 0], points[..., 1]), dtype=float), weights.shape,
    )
    return np.einsum('cq,qi->ci', weights * values, phi).ravel()


def elliptic_load_vector(space, u, grad_u):
    """
    Components a_h(u, phi_i) + (u, phi_i) for smooth u, using the exact
    gradient in the edge averages; jumps of u vanish.
    """
    phi, grads, weights, points = _smooth_volume_tables(space)
    gu = _gradient_values(grad_u, points)
    volume = np.einsum('cq,cqd,cqid->ci', weights, gu, grads).ravel()

    traces = _smooth_edge_traces(space)
    edges = space.mesh.interior_edges
    flux = np.einsum('eqd,ed->eq', _gradient_values(grad_u, traces.points), edges.normals)
    left = np.einsum('eq,eqi->ei', traces.weights * flux, traces.left)
    right = np.einsum('eq,eqi->ei', traces.weights * flux, traces.right)
    consistency = np.zeros(space.num_dofs)
    np.add.at(consistency, space.dofs[edges.cells], -left)
    np.add.at(consistency, space.dofs[edges.neighbors], right)
    return volume + consistency + load_vector(space, u)


def elliptic_projection(space, u, grad_u, sigma0=None, sipg=None, mass=None):
    """
    P_h u with a_h(u - P_h u, v) + (u - P_h u, v) = 0 for all v in V_h.
    """
    sigma0 = dg.default_penalty(space.degree) if sigma0 is None else sigma0
    sipg = dg.assemble_sipg(space, sigma0) if sipg is None else sipg
    mass = dg.assemble_mass(space) if mass is None else mass
    matrix = (sipg + mass).tocsc()
    rhs = elliptic_load_vector(space, u, grad_u)
    return dg.DGField(space, checked_solve(factorize(matrix), matrix, rhs))


def project_initial(space, u0, method='l2_continuous', grad=None,
                    sigma0=None, sipg=None, mass=None):
    """
    Project the initial datum onto the continuous subspace S_h, either in
    L2 or in the a_h + L2 inner product (which needs ``grad``).
    """
    if method not in PROJECTIONS:
        raise ValueError('unknown initial projection %r' % (method,))
    mass = dg.assemble_mass(space) if mass is None else mass
    P = continuous_prolongation(space)
    if method == 'l2_continuous':
        matrix = P.T @ mass @ P
        rhs = P.T @ load_vector(space, u0)
    else:
        if grad is None:
            raise ValueError('elliptic initial projection needs the gradient of u0')
        sigma0 = dg.default_penalty(space.degree) if sigma0 is None else sigma0
        sipg = dg.assemble_sipg(space, sigma0) if sipg is None else sipg
        matrix = P.T @ (sipg + mass) @ P
        rhs = P.T @ elliptic_load_vector(space, u0, grad)
    matrix = sparse.csc_matrix(matrix)
    coefficients = checked_solve(factorize(matrix), matrix, rhs)
    logger.debug('projected initial data (%s) onto %d continuous dofs',
                 method, space.num_continuous)
    return dg.DGField(space, P @ coefficients, dg.CONTINUOUS)


def node_average(space, v):
    """
    Replace every coefficient by the mean over all cells sharing its node.
    """
    space.check_field(v)
    cmap = space.continuous_map
    sums = np.bincount(cmap, weights=v.coefficients, minlength=space.num_continuous)
    return dg.DGField(space, (sums / space.node_multiplicity)[cmap], dg.CONTINUOUS)
