"""
Backward Euler MIP-DG time stepping for the Cahn-Hilliard equation in mixed
form.  Each step solves the coupled system

    M (U^m - U^{m-1}) / k + A W^m = 0
    eps A U^m + N(U^m) / eps - M W^m = 0

for (U^m, W^m) with a damped Newton iteration, where N collects the
nonlinear term (f^m, phi_i) of the convex splitting or fully implicit
variant.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from chdg import dg, operators
from chdg.exceptions import ConservationError, NewtonDivergence
from chdg.mesh import DOMAIN_AREA

logger = logging.getLogger(__name__)

STEP_MASS_TOLERANCE = 1e-11 * DOMAIN_AREA
RUN_MASS_TOLERANCE = 1e-10 * DOMAIN_AREA
LINEAR_TOLERANCE = 1e-8
MAX_HALVINGS = 30


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    k: float
    T: float
    sigma0: float = None
    degree: int = 1
    scheme: str = 'splitting'
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    init_projection: str = 'l2_continuous'
    max_halvings: int = MAX_HALVINGS

    def __post_init__(self):
        if self.sigma0 is None:
            object.__setattr__(self, 'sigma0', dg.default_penalty(self.degree))
        for name in ('epsilon', 'k', 'sigma0', 'newton_tol'):
            if not getattr(self, name) > 0:
                raise ValueError('%s must be positive, got %r' % (name, getattr(self, name)))
        if self.T < 0:
            raise ValueError('T must not be negative, got %r' % (self.T,))
        if self.scheme not in dg.SCHEMES:
            raise ValueError('unknown scheme %r' % (self.scheme,))
        if self.init_projection not in operators.PROJECTIONS:
            raise ValueError('unknown initial projection %r' % (self.init_projection,))

    @property
    def num_steps(self):
        return int(math.floor(self.T / self.k + 1e-9))

    @property
    def implicit_unstable(self):
        """
        The fully implicit variant is only known to be stable for k <= eps^3.
        """
        return self.scheme == 'implicit' and self.k > self.epsilon ** 3


class SimOperators(object):
    """
    Matrices shared by every step of one simulation, assembled on demand.
    """

    def __init__(self, space, sigma0):
        self.space = space
        self.sigma0 = sigma0

    @cached_property
    def mass(self):
        return dg.assemble_mass(self.space)

    @cached_property
    def sipg(self):
        return dg.assemble_sipg(self.space, self.sigma0)

    @cached_property
    def solver(self):
        return operators.InverseLaplacianSolver(
            self.space, self.sigma0, sipg=self.sipg, mass=self.mass,
        )

    @cached_property
    def gram(self):
        return operators.minus1_gram(self.solver)

    @cached_property
    def mass_lu(self):
        return operators.factorize(self.mass)

    @cached_property
    def constant_load(self):
        return self.mass @ np.ones(self.space.num_dofs)

    def total_mass(self, U):
        return float(self.constant_load @ U.coefficients)


@dataclass(frozen=True, eq=False)
class SimState:
    step: int
    time: float
    U: dg.DGField
    W: dg.DGField
    operators: SimOperators
    newton_iterations: int = 0
    residual: float = 0.0
    residual_history: tuple = ()

    def __post_init__(self):
        if self.U.space is not self.W.space:
            raise ValueError('U and W must live on the same space')

    @property
    def space(self):
        return self.U.space


@dataclass(frozen=True)
class TimeSeriesRow:
    step: int
    time: float
    energy: float
    mass: float
    newton_iters: int
    residual: float
    energy_law_residual: float


class TimeSeriesRecord(object):
    columns = (
        'step', 'time', 'energy', 'mass', 'newton_iters', 'residual',
        'energy_law_residual',
    )

    def __init__(self):
        self.rows = []

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def append(self, row):
        if self.rows and row.step <= self.rows[-1].step:
            raise ValueError('time series rows must have increasing steps')
        self.rows.append(row)

    def column(self, name):
        return np.array([getattr(row, name) for row in self.rows])

    @property
    def energies(self):
        return self.column('energy')

    @property
    def masses(self):
        return self.column('mass')


def _max_norm(vector):
    return float(np.abs(vector).max()) if len(vector) else 0.0


def newton_solve(residual, jacobian, x0, tol, max_iter, max_halvings=MAX_HALVINGS):
    """
    Damped Newton iteration.  A step is halved until the max-norm of the
    residual decreases; returns (x, iterations, residual history).
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    norm = _max_norm(r)
    history = [norm]
    iterations = 0
    while norm > tol:
        if iterations >= max_iter:
            raise NewtonDivergence(
                'Newton did not reach %.1e in %d iterations (residual %.3e)'
                % (tol, max_iter, norm),
                iterations=iterations, residuals=history,
            )
        J = jacobian(x)
        dx = operators.checked_solve(operators.factorize(J), J, -r, LINEAR_TOLERANCE)
        alpha = 1.0
        for halvings in range(max_halvings + 1):
            trial = x + alpha * dx
            r_trial = residual(trial)
            norm_trial = _max_norm(r_trial)
            if np.isfinite(norm_trial) and norm_trial < norm:
                break
            alpha *= 0.5
        else:
            raise NewtonDivergence(
                'line search failed after %d halvings (residual %.3e)' % (max_halvings, norm),
                iterations=iterations, residuals=history,
            )
        if halvings:
            logger.debug('Newton step damped by %d halvings', halvings)
        x, r, norm = trial, r_trial, norm_trial
        iterations += 1
        history.append(norm)
        logger.debug('Newton iteration %d: residual %.3e', iterations, norm)
    return x, iterations, history


def _check_step_mass(ops, U_prev, U):
    drift = abs(ops.constant_load @ (U - U_prev))
    if drift > STEP_MASS_TOLERANCE:
        raise ConservationError('mass changed by %.3e in one step' % drift)


def step(state, params):
    """
    Advance (U^{m-1}, W^{m-1}) to (U^m, W^m).
    """
    ops = state.operators
    space = state.space
    M, A = ops.mass, ops.sipg
    eps, k = params.epsilon, params.k
    size = space.num_dofs
    U_prev = state.U.coefficients
    prev_field = state.U

    def split(x):
        return dg.DGField(space, x[:size]), x[size:]

    def residual(x):
        U, W = split(x)
        first = M @ (U.coefficients - U_prev) / k + A @ W
        second = (
            eps * (A @ U.coefficients)
            + dg.assemble_nonlinear(space, U, prev_field, params.scheme) / eps
            - M @ W
        )
        return np.concatenate([first, second])

    def jacobian(x):
        U, _ = split(x)
        N = dg.assemble_nonlinear_jacobian(space, U, params.scheme)
        return sparse.bmat([[M / k, A], [eps * A + N / eps, -M]], format='csc')

    x0 = np.concatenate([U_prev, state.W.coefficients])
    x, iterations, history = newton_solve(
        residual, jacobian, x0, params.newton_tol, params.newton_max_iter,
        params.max_halvings,
    )
    _check_step_mass(ops, U_prev, x[:size])
    return SimState(
        step=state.step + 1,
        time=(state.step + 1) * k,
        U=dg.DGField(space, x[:size]),
        W=dg.DGField(space, x[size:]),
        operators=ops,
        newton_iterations=iterations,
        residual=history[-1],
        residual_history=tuple(history),
    )


def reduced_step(state, params):
    """
    Same step through the single-field equation obtained by eliminating W:

        G (U - U_prev) / k + eps A U + N(U) / eps + mu m = 0,  m^T (U - U_prev) = 0

    with G the (.,.)_{-1,h} Gram matrix; W is recovered afterwards.  Meant
    for small spaces, G is dense.
    """
    ops = state.operators
    space = state.space
    M, A, G = ops.mass, ops.sipg, ops.gram
    m = ops.constant_load
    eps, k = params.epsilon, params.k
    size = space.num_dofs
    U_prev = state.U.coefficients
    prev_field = state.U

    def residual(x):
        U = dg.DGField(space, x[:size])
        mu = x[size]
        first = (
            G @ (U.coefficients - U_prev) / k
            + eps * (A @ U.coefficients)
            + dg.assemble_nonlinear(space, U, prev_field, params.scheme) / eps
            + mu * m
        )
        return np.concatenate([first, [m @ (U.coefficients - U_prev)]])

    def jacobian(x):
        U = dg.DGField(space, x[:size])
        N = dg.assemble_nonlinear_jacobian(space, U, params.scheme)
        block = G / k + (eps * A + N / eps).toarray()
        return np.block([[block, m[:, None]], [m[None, :], np.zeros((1, 1))]])

    x0 = np.concatenate([U_prev, [0.0]])
    x, iterations, history = newton_solve(
        residual, jacobian, x0, params.newton_tol, params.newton_max_iter,
        params.max_halvings,
    )
    U = x[:size]
    psi = ops.solver.potential((U - U_prev) / k)
    W = -psi - x[size]
    return SimState(
        step=state.step + 1,
        time=(state.step + 1) * k,
        U=dg.DGField(space, U),
        W=dg.DGField(space, W),
        operators=ops,
        newton_iterations=iterations,
        residual=history[-1],
        residual_history=tuple(history),
    )


def chemical_potential(U, ops, params, U_prev=None):
    """
    W from the second equation: M W = eps A U + N(U) / eps, with the
    lagged argument defaulting to U itself (the m = 0 convention).
    """
    U_prev = U if U_prev is None else U_prev
    rhs = (
        params.epsilon * (ops.sipg @ U.coefficients)
        + dg.assemble_nonlinear(U.space, U, U_prev, params.scheme) / params.epsilon
    )
    W = operators.checked_solve(ops.mass_lu, ops.mass, rhs)
    return dg.DGField(U.space, W)


def discrete_energy(U, params, sipg=None):
    """
    E_h(U) = ||U^2 - 1||^2 / (4 eps) + (eps / 2) a_h(U, U).
    """
    space = U.space
    if sipg is None:
        sipg = dg.assemble_sipg(space, params.sigma0)
    u = U.quadrature_values()
    bulk = np.sum(space.volume_weights * (u ** 2 - 1.0) ** 2) / (4.0 * params.epsilon)
    gradient = 0.5 * params.epsilon * float(U.coefficients @ (sipg @ U.coefficients))
    return float(bulk + gradient)


def _sign(params, sign):
    if sign is None:
        return 1.0 if params.scheme == 'splitting' else -1.0
    return float(sign)


def energy_law_increment(U_prev, U, params, ops, sign=None):
    """
    Dissipation of one step: k ||d_t U||^2_{-1,h} plus the k^2 terms of the
    energy law, with the last one entering with ``sign`` (+1 for the
    splitting variant, -1 for the implicit one by default).
    """
    space = U.space
    k, eps = params.k, params.epsilon
    d = (U.coefficients - U_prev.coefficients) / k
    weights = space.volume_weights
    u = U.quadrature_values()
    u_prev = U_prev.quadrature_values()
    dq = (u - u_prev) / k
    d_square = (u ** 2 - u_prev ** 2) / k
    bracket = (
        0.5 * eps * float(d @ (ops.sipg @ d))
        + np.sum(weights * d_square ** 2) / (4.0 * eps)
        + np.sum(weights * (u * dq) ** 2) / (2.0 * eps)
        + _sign(params, sign) * np.sum(weights * dq ** 2) / (2.0 * eps)
    )
    return k * operators.minus1_inner(ops.solver, d, d) + k ** 2 * float(bracket)


def energy_law_residual(trajectory, params, ops, sign=None):
    """
    For every l, E_h(U^l) + sum_{m<=l} increment_m - E_h(U^0).  Vanishes
    for exact scheme solutions.
    """
    if not trajectory:
        return np.zeros(0)
    energies = [discrete_energy(U, params, ops.sipg) for U in trajectory]
    increments = [0.0] + [
        energy_law_increment(a, b, params, ops, sign)
        for a, b in zip(trajectory[:-1], trajectory[1:])
    ]
    return np.asarray(energies) + np.cumsum(increments) - energies[0]


@dataclass
class SimulationResult:
    record: TimeSeriesRecord
    state: SimState
    trajectory: list = field(default_factory=list)


def initial_state(params, space, initial, ops=None):
    """
    U^0 from the configured projection of the initial datum and W^0 from
    the chemical-potential equation.
    """
    ops = ops or SimOperators(space, params.sigma0)
    U0 = operators.project_initial(
        space, initial, params.init_projection,
        grad=getattr(initial, 'gradient', None),
        sigma0=params.sigma0, sipg=ops.sipg, mass=ops.mass,
    )
    W0 = chemical_potential(U0, ops, params)
    return SimState(step=0, time=0.0, U=U0, W=W0, operators=ops)


def run_simulation(params, space, initial, sinks=(), dump_every=10,
                   keep_trajectory=False, state=None):
    """
    Advance from the projected initial datum to T, streaming one
    TimeSeriesRow per step to every sink and dumping fields every
    ``dump_every`` steps (and at the last step).  Sinks are closed even
    when a step fails, so partial output is kept.
    """
    if dump_every < 1:
        raise ValueError('dump_every must be at least 1')
    if params.implicit_unstable:
        logger.warning('k exceeds epsilon^3 (k=%g, epsilon=%g); the implicit scheme may '
                       'not dissipate energy', params.k, params.epsilon)
    record = TimeSeriesRecord()
    trajectory = []
    num_steps = params.num_steps
    logger.info('starting %s run: %r, eps=%g, k=%g, %d steps',
                params.scheme, space, params.epsilon, params.k, num_steps)
    try:
        state = state or initial_state(params, space, initial)
        ops = state.operators
        mass0 = ops.total_mass(state.U)
        energy0 = discrete_energy(state.U, params, ops.sipg)
        law = 0.0
        row = TimeSeriesRow(0, 0.0, energy0, mass0, 0, 0.0, 0.0)
        _emit(sinks, record, row, state, dump=True)
        if keep_trajectory:
            trajectory.append(state.U)
        energy = energy0
        for m in range(1, num_steps + 1):
            previous = state
            state = step(state, params)
            mass = ops.total_mass(state.U)
            if abs(mass - mass0) > RUN_MASS_TOLERANCE:
                raise ConservationError(
                    'mass drifted by %.3e after %d steps' % (abs(mass - mass0), m)
                )
            new_energy = discrete_energy(state.U, params, ops.sipg)
            law += energy_law_increment(previous.U, state.U, params, ops)
            if new_energy > energy + 1e-9 * max(1.0, energy0):
                logger.warning('energy increased at step %d: %.12g -> %.12g',
                               m, energy, new_energy)
            energy = new_energy
            row = TimeSeriesRow(
                m, state.time, energy, mass, state.newton_iterations,
                state.residual, energy + law - energy0,
            )
            dump = m % dump_every == 0 or m == num_steps
            _emit(sinks, record, row, state, dump=dump)
            if keep_trajectory:
                trajectory.append(state.U)
    finally:
        for sink in sinks:
            sink.close()
    logger.info('finished run after %d steps, final energy %.12g', num_steps, energy)
    return SimulationResult(record=record, state=state, trajectory=trajectory)


def _emit(sinks, record, row, state, dump):
    record.append(row)
    for sink in sinks:
        sink.record(row)
        if dump:
            sink.dump(state)
    if dump:
        logger.info('step %d t=%g energy=%.12g mass=%.15g',
                    row.step, row.time, row.energy, row.mass)
