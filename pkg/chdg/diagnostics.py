"""
Verification harness: nested-mesh convergence studies, the discrete spectrum
estimate of the linearized Cahn-Hilliard operator and the nonlinear
discrete Gronwall bound.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from chdg import dg, operators, stepper
from chdg.conf import worker_count
from chdg.exceptions import (
    ConditionViolated, ConfigError, SpectrumError,
)
from chdg.interface import extract_zero_level_set, interpolate_in_time, make_initial
from chdg.mesh import build_uniform_mesh
from chdg.quadrature import MAX_TRIANGLE_DEGREE

logger = logging.getLogger(__name__)

# errors at or below this are treated as exact and get no order
ZERO_ERROR = 1e-12

PUBLISHED_MASS = {1: 3.064, 2: 3.032, 3: 2.989}
MASS_TOLERANCE = 0.25


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    h: float
    err_linf_l2: float
    order_l2: float = None
    err_l2_h1: float = None
    order_h1: float = None


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    @property
    def final(self):
        return self.rows[-1]


def _order(coarse, fine, h_coarse, h_fine):
    if coarse is None or fine is None or coarse <= ZERO_ERROR or fine <= ZERO_ERROR:
        return None
    return math.log(coarse / fine) / math.log(h_coarse / h_fine)


def _with_orders(entries):
    """
    Rows from (n, h, err_l2, err_h1) tuples, orders between successive rows.
    """
    rows = []
    for i, (n, h, err_l2, err_h1) in enumerate(entries):
        order_l2 = order_h1 = None
        if i:
            _, h_prev, l2_prev, h1_prev = entries[i - 1]
            order_l2 = _order(l2_prev, err_l2, h_prev, h)
            order_h1 = _order(h1_prev, err_h1, h_prev, h)
        row = ConvergenceRow(n, h, err_l2, order_l2, err_h1, order_h1)
        logger.info('n=%d h=%.6g err_l2=%.6e order=%s err_h1=%.6e order=%s',
                    n, h, err_l2, order_l2, err_h1, order_h1)
        rows.append(row)
    return rows


def check_nested(n_list, reference_n=None):
    errors = []
    n_list = [int(n) for n in n_list]
    if len(n_list) < 1:
        errors.append('n_list must not be empty')
    if any(n < 1 for n in n_list):
        errors.append('n_list entries must be positive')
    elif any(b <= a or b % a for a, b in zip(n_list, n_list[1:])):
        errors.append('n_list must be increasing with each entry dividing the next')
    if reference_n is not None and n_list and reference_n != 2 * max(n_list):
        errors.append('reference_n must be 2*max(n_list) = %d, got %d'
                      % (2 * max(n_list), reference_n))
    if errors:
        raise ConfigError(errors)
    return n_list


class NestedEvaluator(object):
    """
    Coarse basis functions tabulated at the quadrature points of a nested
    fine space, so that coarse-minus-fine differences are integrated
    exactly with the fine rule.
    """

    def __init__(self, coarse, fine):
        self.coarse = coarse
        self.fine = fine
        cells, bary = coarse.mesh.locate(fine.volume_points)
        self.cells = cells
        self.values = coarse.element.tabulate(bary[..., 1:3])
        dphi = coarse.element.tabulate_gradients(bary[..., 1:3])
        self.gradients = np.einsum(
            'cqij,cqlj->cqli', coarse.mesh.gradient_maps[cells], dphi,
        )

    def difference_norms(self, U_coarse, U_fine):
        """
        L2 norm and broken H1 seminorm of U_coarse - U_fine.
        """
        fine = self.fine
        coefficients = U_coarse.local[self.cells]
        diff = np.einsum('cql,cql->cq', self.values, coefficients) - U_fine.quadrature_values()
        grad_fine = np.einsum('cqli,cl->cqi', fine.volume_gradients, U_fine.local)
        grad_diff = np.einsum('cqli,cql->cqi', self.gradients, coefficients) - grad_fine
        weights = fine.volume_weights
        l2 = math.sqrt(np.sum(weights * diff ** 2))
        h1 = math.sqrt(np.sum(weights * np.sum(grad_diff ** 2, axis=-1)))
        return l2, h1


def _trajectory(params, initial, n):
    space = dg.DGSpace(build_uniform_mesh(n), params.degree)
    result = stepper.run_simulation(params, space, initial, keep_trajectory=True)
    return space, result.trajectory


def convergence_study(params, initial, n_list, reference_n, workers=None):
    """
    Run every mesh of ``n_list`` and the reference mesh 2*max(n_list) with
    identical time stepping, and report

        err_linf_l2 = max_m ||U_n^m - U_ref^m||
        err_l2_h1   = sqrt(k sum_{m>=1} |U_n^m - U_ref^m|_{1,h}^2)

    with orders between successive meshes.
    """
    n_list = check_nested(n_list, reference_n)
    meshes = n_list + [reference_n]
    workers = workers or worker_count()
    with ThreadPoolExecutor(max_workers=min(workers, len(meshes))) as executor:
        runs = list(executor.map(lambda n: _trajectory(params, initial, n), meshes))
    ref_space, ref_traj = runs[-1]
    entries = []
    for n, (space, traj) in zip(n_list, runs[:-1]):
        evaluator = NestedEvaluator(space, ref_space)
        norms = [evaluator.difference_norms(a, b) for a, b in zip(traj, ref_traj)]
        err_l2 = max(l2 for l2, _ in norms)
        err_h1 = math.sqrt(params.k * sum(h1 ** 2 for _, h1 in norms[1:]))
        entries.append((n, space.mesh.h, err_l2, err_h1))
    return ConvergenceReport(
        rows=_with_orders(entries),
        metadata={
            'epsilon': params.epsilon, 'k': params.k, 'T': params.T,
            'scheme': params.scheme, 'reference_n': reference_n,
        },
    )


def projection_errors(space, projected, u, grad_u):
    """
    L2 error and broken H1 seminorm error of a DG field against smooth u.
    """
    degree = min(dg.volume_degree(space.degree) + operators.SMOOTH_EXTRA_DEGREE,
                 MAX_TRIANGLE_DEGREE)
    phi, grads, weights, points = space.quadrature_tables(degree)
    x, y = points[..., 0], points[..., 1]
    values = np.einsum('ql,cl->cq', phi, projected.local)
    gradients = np.einsum('cqli,cl->cqi', grads, projected.local)
    exact = np.broadcast_to(np.asarray(u(x, y), dtype=float), weights.shape)
    gx, gy = grad_u(x, y)
    exact_grad = np.stack([
        np.broadcast_to(np.asarray(gx, dtype=float), weights.shape),
        np.broadcast_to(np.asarray(gy, dtype=float), weights.shape),
    ], axis=-1)
    l2 = math.sqrt(np.sum(weights * (values - exact) ** 2))
    h1 = math.sqrt(np.sum(weights * np.sum((gradients - exact_grad) ** 2, axis=-1)))
    return l2, h1


def projection_study(u, grad_u, n_list, degree=1, sigma0=None):
    """
    Error table of the DG elliptic projection P_h u against the exact u.
    """
    entries = []
    for n in check_nested(n_list):
        space = dg.DGSpace(build_uniform_mesh(n), degree)
        projected = operators.elliptic_projection(space, u, grad_u, sigma0)
        l2, h1 = projection_errors(space, projected, u, grad_u)
        entries.append((n, space.mesh.h, l2, h1))
    return ConvergenceReport(
        rows=_with_orders(entries), metadata={'degree': degree},
    )


def _fprime_weights(U_ref, fprime):
    u = U_ref.quadrature_values()
    if fprime is None:
        return 3.0 * u ** 2 - 1.0
    if callable(fprime):
        return np.broadcast_to(np.asarray(fprime(u), dtype=float), u.shape)
    return np.full_like(u, float(fprime))


def spectrum_numerator(U_ref, epsilon, sipg, fprime=None):
    """
    Matrix of eps a_h(Phi, Phi) + ((1 - eps^3) / eps) (f'(U_ref) Phi, Phi).
    """
    weights = _fprime_weights(U_ref, fprime)
    coupling = dg.assemble_weighted_mass(U_ref.space, weights)
    return (epsilon * sipg + ((1.0 - epsilon ** 3) / epsilon) * coupling).tocsr(), weights


def spectrum_snapshot(params, space, initial, time=0.0):
    """
    Reference field and -1,h solver of a spectrum estimate: the elliptic
    projection P_h u0 at t=0, the computed U at a later ``time``.
    """
    if time <= 0:
        ops = stepper.SimOperators(space, params.sigma0)
        U = operators.elliptic_projection(
            space, initial, initial.gradient, params.sigma0, sipg=ops.sipg, mass=ops.mass,
        )
        return U, ops.solver
    state = stepper.run_simulation(replace(params, T=time), space, initial).state
    return state.U, state.operators.solver


def spectrum_estimate(U_ref, epsilon, solver, fprime=None, sipg=None,
                      dense_limit=operators.DENSE_GRAM_LIMIT):
    """
    Smallest generalized eigenvalue of the numerator matrix against the
    (.,.)_{-1,h} Gram matrix over mean-zero fields, with f'(u) = 3u^2 - 1
    unless ``fprime`` (a constant or a callable of u) replaces it.
    """
    space = U_ref.space
    space.check_field(U_ref)
    own_form = sipg is None
    sipg = solver.sipg if own_form else sipg
    numerator, weights = spectrum_numerator(U_ref, epsilon, sipg, fprime)
    m = solver.constant_load
    if space.num_dofs <= dense_limit:
        basis = linalg.null_space(m[None, :])
        gram = operators.minus1_gram(solver, limit=dense_limit)
        left = basis.T @ (numerator @ basis)
        right = basis.T @ gram @ basis
        value = linalg.eigh(
            0.5 * (left + left.T), 0.5 * (right + right.T),
            eigvals_only=True, subset_by_index=[0, 0],
        )[0]
    else:
        shift = spectrum_lower_bound(solver, weights, epsilon, own_form) - 1.0
        value = _sparse_spectrum(space, solver, numerator, shift)
    logger.info('spectrum estimate %r eps=%g: %.10g', space, epsilon, value)
    return float(value)


def spectrum_lower_bound(solver, weights, epsilon, own_form=True):
    """
    A priori lower bound of the quotient.  With c = (1 - eps^3) / eps and
    w the smallest f' weight, every mean-zero field built from A-eigenpairs
    mu gives at least eps mu^2 + c w mu >= -(c w)^2 / (4 eps).  A numerator
    assembled from another penalty only keeps c w mu_max.
    """
    coupling = ((1.0 - epsilon ** 3) / epsilon) * min(0.0, float(weights.min()))
    if coupling == 0.0:
        return 0.0
    if own_form:
        return -coupling ** 2 / (4.0 * epsilon)
    try:
        top = splinalg.eigsh(
            solver.sipg, k=1, M=solver.mass, which='LA', return_eigenvectors=False,
        )[0]
    except splinalg.ArpackNoConvergence as e:
        raise SpectrumError('could not bound the SIPG spectrum: %s' % e)
    return coupling * top


def _sparse_spectrum(space, solver, numerator, shift):
    """
    Writing Phi = M^{-1} A psi for potentials psi turns the quotient into
    K psi = lambda A psi with the sparse K = A M^{-1} N M^{-1} A.  A is
    singular on constants, so both sides get a rank one term in the mass
    load m:

        B  = A + m m^T          (positive definite, equal to A on mean-zero psi)
        K' = K + s m m^T        (constants become an eigenvector with value s)

    With s above the Rayleigh quotient of a mean-zero start vector, the
    smallest eigenvalue above ``shift`` is the constrained minimum.
    """
    A = solver.sipg
    mass_inverse = dg.assemble_inverse_mass(space)
    K = (A @ mass_inverse @ numerator @ mass_inverse @ A).tocsc()
    m = solver.constant_load
    size = space.num_dofs

    start = np.random.default_rng(0).standard_normal(size)
    start -= (m @ start) / (m @ np.ones(size))
    constant_value = (start @ (K @ start)) / (start @ (A @ start)) + 1.0
    if constant_value <= shift:
        raise SpectrumError('spectrum shift %g is above a Rayleigh quotient %g'
                            % (shift, constant_value - 1.0))

    # (K' - shift B) x = b through the border t = (s - shift) m.x
    border = sparse.csr_matrix(m[:, None])
    system = sparse.bmat([
        [K - shift * A, border],
        [border.T, sparse.csr_matrix([[-1.0 / (constant_value - shift)]])],
    ], format='csc')
    lu = operators.factorize(system)

    def solve(b):
        return lu.solve(np.concatenate([np.ravel(b), [0.0]]))[:size]

    def left(x):
        x = np.ravel(x)
        return K @ x + constant_value * m * (m @ x)

    def right(x):
        x = np.ravel(x)
        return A @ x + m * (m @ x)

    shape = (size, size)
    try:
        values = splinalg.eigsh(
            splinalg.LinearOperator(shape, matvec=left, dtype=float), k=1,
            M=splinalg.LinearOperator(shape, matvec=right, dtype=float),
            sigma=shift, OPinv=splinalg.LinearOperator(shape, matvec=solve, dtype=float),
            which='LA', v0=start, return_eigenvectors=False,
        )
    except splinalg.ArpackNoConvergence as e:
        raise SpectrumError('shift-invert eigensolver did not converge: %s' % e)
    return float(values.min())


@dataclass(frozen=True)
class GronwallInput:
    S1: float
    b: tuple
    k: tuple
    p: float

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if not self.S1 > 0:
            raise ValueError('S1 must be positive')
        if not self.p > 1:
            raise ValueError('p must exceed 1')
        if b.shape != k.shape or b.ndim != 1:
            raise ValueError('b and k must be sequences of equal length')
        if (b < 0).any() or (k < 0).any():
            raise ValueError('b and k must be nonnegative')

    @property
    def length(self):
        return len(self.b) + 1


def gronwall_bound(data):
    """
    Bounds on S_l for l = 2..L of a positive sequence with
    S_{l+1} - S_l <= b_l S_l + k_l S_l^p, where a_l = prod_{s<l} 1/(1+b_s).
    Raises ConditionViolated at the first l where the bracket is not
    positive.
    """
    b = np.asarray(data.b, dtype=float)
    k = np.asarray(data.k, dtype=float)
    p = float(data.p)
    a = np.cumprod(1.0 / (1.0 + b))
    bracket = data.S1 ** (1.0 - p) + (1.0 - p) * np.cumsum(k * a ** (1.0 - p))
    failing = np.flatnonzero(bracket <= 0)
    if len(failing):
        raise ConditionViolated(int(failing[0]) + 2)
    return bracket ** (1.0 / (1.0 - p)) / a


def node_average_ratio(v):
    """
    sum_K ||v - v_hat||^2 / sum_e h_e ||[v]||^2 for the node-averaged v_hat.
    """
    space = v.space
    averaged = operators.node_average(space, v)
    difference = v.with_coefficients(v.coefficients - averaged.coefficients)
    jumps = float(v.coefficients @ (dg.assemble_jump_matrix(space, power=1) @ v.coefficients))
    if jumps <= 0:
        return 0.0
    return dg.l2_norm(difference) ** 2 / jumps


@dataclass(frozen=True)
class MassReport:
    test_id: int
    measured: float
    published: float
    deviation: float

    @property
    def within_tolerance(self):
        return self.deviation <= MASS_TOLERANCE


def measured_mass_report(test_id, mass):
    """
    Compare a measured total mass with the published constant of a test.
    Informational only, a large deviation is logged, not raised.
    """
    published = PUBLISHED_MASS[int(test_id)]
    measured = abs(float(mass))
    report = MassReport(int(test_id), measured, published, abs(measured - published))
    if report.within_tolerance:
        logger.info('test %d mass %.6f (published %.3f)', test_id, measured, published)
    else:
        logger.warning('test %d mass %.6f deviates from published %.3f by %.3f',
                       test_id, measured, published, report.deviation)
    return report


class SnapshotSink(object):
    """
    Run sink keeping U at the given steps.
    """

    def __init__(self, steps):
        self.steps = frozenset(steps)
        self.fields = {}

    def record(self, row):
        pass

    def dump(self, state):
        if state.step in self.steps:
            self.fields[state.step] = state.U

    def close(self):
        pass


@dataclass(frozen=True)
class SweepSnapshot:
    epsilon: float
    time: float
    polyline: object


def _bracketing_steps(time, k):
    x = time / k
    lower = int(math.floor(x + 1e-9))
    upper = lower if x - lower <= 1e-9 else lower + 1
    return x, lower, upper


def _sweep_run(params, test_id, shape, n, epsilon, times):
    brackets = [_bracketing_steps(t, params.k) for t in times]
    steps = sorted({s for _, lower, upper in brackets for s in (lower, upper)})
    dump_every = int(np.gcd.reduce(steps)) or 1
    run_params = replace(params, epsilon=epsilon, T=steps[-1] * params.k)
    space = dg.DGSpace(build_uniform_mesh(n), params.degree)
    if space.mesh.h > epsilon:
        logger.info('sweep eps=%g is not resolved by h=%g', epsilon, space.mesh.h)
    sink = SnapshotSink(steps)
    stepper.run_simulation(
        run_params, space, make_initial(test_id, epsilon, shape),
        sinks=(sink,), dump_every=dump_every,
    )
    stored = sorted(sink.fields.items())
    snapshots = []
    for t, (x, lower, upper) in zip(times, brackets):
        window = [(s, U) for s, U in stored if lower <= s <= upper]
        U = interpolate_in_time(window, min(max(x, lower), upper))
        averaged = operators.node_average(space, U)
        snapshots.append(SweepSnapshot(epsilon, t, extract_zero_level_set(averaged, t)))
    return snapshots


def interface_sweep(params, test_id, epsilons, times, n, shape=None, workers=None):
    """
    Zero level sets of the node-averaged solution at ``times`` for every
    epsilon, one independent run per epsilon on the n x n mesh.  Times
    between steps blend the two neighbouring steps.  Snapshots come back
    ordered by epsilon, then time.
    """
    epsilons = [float(e) for e in epsilons]
    times = sorted({float(t) for t in times})
    if not epsilons or not times:
        raise ConfigError('the sweep needs at least one epsilon and one time')
    if any(not e > 0 for e in epsilons) or times[0] < 0:
        raise ConfigError('sweep epsilons must be positive and times non-negative')
    if params.degree != 1:
        raise ConfigError('the sweep extracts level sets of piecewise linear fields, degree must be 1')
    workers = workers or worker_count()
    with ThreadPoolExecutor(max_workers=min(workers, len(epsilons))) as executor:
        runs = list(executor.map(
            lambda epsilon: _sweep_run(params, test_id, shape, n, epsilon, times), epsilons,
        ))
    return [snapshot for run in runs for snapshot in run]
