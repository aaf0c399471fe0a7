"""
Primal-Dual Interior Point (opfgap.powerflow.pdipm.py)
======================================================

A general purpose primal-dual interior point method for

.. code-block:: none

    min f(x)  subject to  g(x) = 0,  h(x) <= 0

The inequalities get slacks ``z > 0`` with multipliers ``mu``, the barrier
parameter ``gamma`` is driven to zero by ``sigma`` each iteration and steps
stop short of the boundary by the factor ``xi``. Each Newton step solves the
sparse reduced KKT system.

The problem is any object with three methods:

* ``objective(x)`` returning ``(f, df)``
* ``constraints(x)`` returning ``(g, h, dg, dh)`` where ``dg`` and ``dh``
  are sparse Jacobians with one row per constraint
* ``hessian(x, lam, mu)`` returning the sparse Hessian of the Lagrangian
"""
import logging, warnings
from collections import namedtuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve, MatrixRankWarning

from opfgap.settings import solver_options

logger = logging.getLogger(__name__)

# =============================================================================

PdipmResult = namedtuple('PdipmResult', ['x', 'f', 'lam', 'mu', 'status',
    'iterations', 'feasibility', 'best_x', 'best_f', 'message'])
PdipmResult.__doc__ = """Outcome of :func:`pdipm`.

    ``status`` is 'converged', 'xtol' (step became negligible on a feasible
    point), 'max_iter' or 'numerical'. ``best_x`` and ``best_f`` hold the
    lowest objective among the iterates within feasibility tolerance, None
    when there was none.
"""

SUCCESS = ('converged', 'xtol')

# step lengths and barrier values that mean the method has broken down
ALPHA_MIN = 1e-12
GAMMA_LIMIT = 1e12


def _norm(values):
    return np.abs(values).max() if len(values) else 0.0


def _feasibility(g, h):
    return max(_norm(g), h.max() if len(h) else 0.0, 0.0)


def _step_length(values, steps, xi):
    shrinking = steps < 0
    if not shrinking.any():
        return 1.0

    return min(xi * (values[shrinking] / -steps[shrinking]).min(), 1.0)


def pdipm(problem, x0, opts=None):
    """Minimises `problem` starting from `x0`.

    :param problem: object with `objective`, `constraints` and `hessian`
    :param x0: starting point, need not be feasible
    :param opts: dict overriding any of 'feastol', 'opttol', 'xtol',
                 'max_iter', 'sigma' and 'xi' from
                 :data:`opfgap.settings.settings`

    :returns: :class:`PdipmResult`
    """
    options = solver_options(opts)
    feastol = options['feastol']
    opttol = options['opttol']
    xtol = options['xtol']
    sigma = options['sigma']
    xi = options['xi']

    x = np.array(x0, dtype=float)
    f, df = problem.objective(x)
    g, h, dg, dh = problem.constraints(x)
    neq, niq = len(g), len(h)

    #--- interior start for the slacks and multipliers
    z0 = 1.0
    gamma = 1.0
    lam = np.zeros(neq)
    z = np.maximum(-h, z0)
    mu = np.full(niq, z0)
    big = gamma / z > z0
    mu[big] = gamma / z[big]
    e = np.ones(niq)

    best_x, best_f = None, None
    status = 'max_iter'
    message = ''
    iterations = 0

    for iterations in range(1, options['max_iter'] + 1):
        Lx = df + dg.T @ lam + dh.T @ mu
        Lxx = problem.hessian(x, lam, mu)

        zinv = sparse.diags(1.0 / z)
        dh_zinv = dh.T @ zinv
        M = Lxx + dh_zinv @ sparse.diags(mu) @ dh
        N = Lx + dh_zinv @ (mu * h + gamma * e)

        if neq:
            kkt = sparse.bmat([[M, dg.T], [dg, None]], format='csc')
            rhs = np.r_[-N, -g]
        else:
            kkt = sparse.csc_matrix(M)
            rhs = -N

        try:
            with warnings.catch_warnings():
                warnings.simplefilter('error', MatrixRankWarning)
                step = np.atleast_1d(spsolve(kkt, rhs))
        except (MatrixRankWarning, RuntimeError) as e_solve:
            status, message = 'numerical', f'singular KKT system ({e_solve})'
            break

        if not np.all(np.isfinite(step)):
            status, message = 'numerical', 'non-finite Newton step'
            break

        dx = step[:len(x)]
        dlam = step[len(x):]
        dz = -h - z - dh @ dx
        dmu = -mu + (gamma * e - mu * dz) / z

        alphap = _step_length(z, dz, xi)
        alphad = _step_length(mu, dmu, xi)

        f_prev = f
        x = x + alphap * dx
        z = z + alphap * dz
        lam = lam + alphad * dlam
        mu = mu + alphad * dmu
        if niq:
            gamma = sigma * (z @ mu) / niq

        f, df = problem.objective(x)
        g, h, dg, dh = problem.constraints(x)

        Lx = df + dg.T @ lam + dh.T @ mu
        feasibility = _feasibility(g, h)
        gradcond = _norm(Lx) / (1 + max(_norm(lam), _norm(mu)))
        compcond = (z @ mu) / (1 + _norm(x)) if niq else 0.0
        costcond = abs(f - f_prev) / (1 + abs(f_prev))
        relative_step = alphap * _norm(dx) / (1 + _norm(x))

        logger.debug(('pdipm iteration %d: f=%.8g feas=%.2e grad=%.2e '
            'comp=%.2e step=%.2e'), iterations, f, feasibility, gradcond,
            compcond, relative_step)

        if feasibility <= feastol and (best_f is None or f < best_f):
            best_x, best_f = x.copy(), f

        if feasibility <= feastol and gradcond < opttol and \
                compcond < opttol and costcond < opttol:
            status = 'converged'
            message = f'converged in {iterations} iterations'
            break

        if relative_step < xtol and feasibility <= feastol:
            status = 'xtol'
            message = f'relative step below {xtol} after {iterations} iterations'
            break

        if np.any(np.isnan(x)) or alphap < ALPHA_MIN or alphad < ALPHA_MIN \
                or gamma < np.finfo(float).eps or gamma > GAMMA_LIMIT:
            status = 'numerical'
            message = f'numerical breakdown at iteration {iterations}'
            break
    else:
        message = f'iteration limit {options["max_iter"]} reached'

    if status not in SUCCESS:
        logger.warning('pdipm stopped: %s', message)

    return PdipmResult(x, f, lam, mu, status, iterations,
        _feasibility(g, h), best_x, best_f, message)
