"""
Local AC-OPF (opfgap.powerflow.acopf.py)
========================================

Losses minimisation in rectangular voltage coordinates: minimise total active
generation subject to the AC power balance, voltage magnitude bounds,
generator bounds and optionally branch flow limits. The variables are

.. code-block:: none

    x = [e, f, pg, qg]      V = e + j f

and the problem is handed to :func:`opfgap.powerflow.pdipm.pdipm`. The
result is a local optimum, which is an upper bound of the global one.

Every generator is dispatchable. The angle of the reference bus is held at
its starting value to remove the rotational degree of freedom. Angle
difference limits are not modelled.
"""
import logging

import numpy as np
from scipy import sparse

from opfgap.network import build_admittance, bus_injection
from opfgap.powerflow.limits import check_flow_mode, evaluate_feasible_point
from opfgap.powerflow.newton import PfSolution
from opfgap.powerflow.pdipm import pdipm, SUCCESS
from opfgap.qcqp.forms import weighted_form, real_embedding
from opfgap.settings import solver_options

logger = logging.getLogger(__name__)

# generators whose range is narrower than this (pu) are held fixed
FIXED_SPAN = 1e-9

# =============================================================================

class InfeasibleBoundsError(ValueError):
    """Bounds that no operating point can satisfy.

    :param crossings: list of human readable descriptions, one per crossing
    """
    def __init__(self, name, crossings):
        self.crossings = crossings
        super().__init__(f'{name}: infeasible bounds: ' + '; '.join(crossings))


def crossed_bounds(net):
    """Lists every lower bound above its upper bound, and total demand above
    total capacity."""
    crossings = []
    for label, ids, lower, upper in [
            ('Vmin > Vmax at bus', net.bus_ids, net.vmin, net.vmax),
            ('Pmin > Pmax at generator', net.gen_rows + 1, net.pmin,
                net.pmax),
            ('Qmin > Qmax at generator', net.gen_rows + 1, net.qmin,
                net.qmax)]:
        for count in np.flatnonzero(lower > upper):
            crossings.append(f'{label} {int(ids[count])}')

    capacity = net.pmax.sum() * net.base_mva
    demand = net.pd.sum() * net.base_mva
    if capacity < demand:
        crossings.append((f'total Pmax {capacity:.1f} MW below total load '
            f'{demand:.1f} MW'))

    return crossings

# =============================================================================

def _rows(indices, columns, n, values=1.0):
    """Sparse selector with one row per entry of `indices`."""
    indices = np.asarray(indices, dtype=int)
    data = np.broadcast_to(values, indices.shape).astype(float)
    return sparse.csr_matrix((data, (np.arange(len(indices)), columns +
        indices)), shape=(len(indices), n))


def _vstack(blocks, n):
    """Stacks sparse blocks with `n` columns, skipping empty ones."""
    blocks = [block for block in blocks if block.shape[0]]
    if not blocks:
        return sparse.csr_matrix((0, n))

    return sparse.vstack(blocks, format='csr')


class AcopfProblem:
    """The AC-OPF as callbacks for :func:`opfgap.powerflow.pdipm.pdipm`.

    :param net: :class:`opfgap.network.Network`
    :param adm: its :class:`opfgap.network.AdmittanceModel`
    :param flow_mode: 'S', 'I' or 'none'
    :param angle: reference bus angle to hold, radians
    """
    def __init__(self, net, adm, flow_mode, angle=0.0):
        self.net = net
        self.adm = adm
        self.flow_mode = check_flow_mode(flow_mode)

        nb, ng = net.n_bus, net.n_gen
        self.nb, self.ng = nb, ng
        self.nx = 2 * nb + 2 * ng
        self.cg = net.gen_matrix
        self.eye = sparse.identity(nb, format='csr')

        #--- linear equality rows: reference angle and fixed generators
        s = net.slack
        angle_row = sparse.csr_matrix(([np.sin(angle), -np.cos(angle)],
            ([0, 0], [s, nb + s])), shape=(1, self.nx))

        p_fixed = np.flatnonzero(net.pmax - net.pmin <= FIXED_SPAN)
        q_fixed = np.flatnonzero(net.qmax - net.qmin <= FIXED_SPAN)
        self.linear_eq = _vstack([angle_row,
            _rows(p_fixed, 2 * nb, self.nx),
            _rows(q_fixed, 2 * nb + ng, self.nx)], self.nx)
        self.linear_eq_rhs = np.r_[0.0, net.pmin[p_fixed], net.qmin[q_fixed]]

        #--- linear inequality rows: generator bounds
        p_free = np.setdiff1d(np.arange(ng), p_fixed)
        q_free = np.setdiff1d(np.arange(ng), q_fixed)
        blocks, rhs = [], []
        for free, lower, upper, offset in [
                (p_free, net.pmin, net.pmax, 2 * nb),
                (q_free, net.qmin, net.qmax, 2 * nb + ng)]:
            low = free[np.isfinite(lower[free])]
            high = free[np.isfinite(upper[free])]
            blocks.append(_rows(low, offset, self.nx, -1.0))
            rhs.append(-lower[low])
            blocks.append(_rows(high, offset, self.nx))
            rhs.append(upper[high])

        self.linear_ineq = _vstack(blocks, self.nx)
        self.linear_ineq_rhs = np.concatenate(rhs)

        #--- flow limited branches, both ends
        self.limited = np.flatnonzero(net.br_rate > 0) \
            if self.flow_mode != 'none' else np.zeros(0, dtype=int)
        limit = net.br_rate[self.limited]
        self.flow_limit = np.r_[limit, limit] ** 2
        self.yx = _vstack([adm.yf[self.limited], adm.yt[self.limited]], nb)
        self.cx = _vstack([adm.cf[self.limited], adm.ct[self.limited]], nb)

    def __repr__(self):
        return (f'AcopfProblem("{self.net.name}", flow_mode='
            f'"{self.flow_mode}", nx={self.nx})')

    def split(self, x):
        nb, ng = self.nb, self.ng
        v = x[:nb] + 1j * x[nb:2 * nb]
        return v, x[2 * nb:2 * nb + ng], x[2 * nb + ng:]

    def pack(self, v, pg, qg):
        return np.r_[v.real, v.imag, pg, qg]

    # -------------------------------------------------------------------------
    # Callbacks

    def objective(self, x):
        df = np.zeros(self.nx)
        df[2 * self.nb:2 * self.nb + self.ng] = 1.0
        return x[2 * self.nb:2 * self.nb + self.ng].sum(), df

    def _voltage_derivatives(self, ymat, cmat, v):
        """dS/de and dS/df of ``s = (cmat v) * conj(ymat v)``."""
        current = ymat @ v
        d_current = sparse.diags(np.conj(current)) @ cmat
        d_voltage = sparse.diags(cmat @ v) @ ymat.conj()
        return d_current + d_voltage, 1j * (d_current - d_voltage)

    def _flows(self, v):
        current = self.yx @ v
        power = (self.cx @ v) * np.conj(current)
        return current, power

    def constraints(self, x):
        net = self.net
        v, pg, qg = self.split(x)
        nb, ng = self.nb, self.ng
        zeros = sparse.csr_matrix((nb, ng))

        #--- power balance
        s = bus_injection(self.adm, v)
        mis = s + net.pd + 1j * net.qd - self.cg @ (pg + 1j * qg)
        ds_de, ds_df = self._voltage_derivatives(self.adm.ybus, self.eye, v)
        dg_balance = sparse.bmat([
            [ds_de.real, ds_df.real, -self.cg, zeros],
            [ds_de.imag, ds_df.imag, zeros, -self.cg],
        ])

        g = np.r_[mis.real, mis.imag,
            self.linear_eq @ x - self.linear_eq_rhs]
        dg = sparse.vstack([dg_balance, self.linear_eq], format='csr')

        #--- voltage magnitudes
        vm2 = np.abs(v) ** 2
        dvm2 = sparse.hstack([sparse.diags(2 * v.real),
            sparse.diags(2 * v.imag), sparse.csr_matrix((nb, 2 * ng))])

        h_parts = [net.vmin ** 2 - vm2, vm2 - net.vmax ** 2,
            self.linear_ineq @ x - self.linear_ineq_rhs]
        dh_parts = [-dvm2, dvm2, self.linear_ineq]

        #--- branch flows
        if len(self.limited):
            pad = sparse.csr_matrix((self.yx.shape[0], 2 * ng))
            current, power = self._flows(v)
            if self.flow_mode == 'I':
                d_current = sparse.diags(np.conj(current)) @ self.yx
                h_parts.append(np.abs(current) ** 2 - self.flow_limit)
                dh_parts.append(sparse.hstack([2 * d_current.real,
                    2 * (1j * d_current).real, pad]))
            else:
                dsf_de, dsf_df = self._voltage_derivatives(self.yx, self.cx,
                    v)
                p = sparse.diags(power.real)
                q = sparse.diags(power.imag)
                h_parts.append(np.abs(power) ** 2 - self.flow_limit)
                dh_parts.append(sparse.hstack([
                    2 * (p @ dsf_de.real + q @ dsf_de.imag),
                    2 * (p @ dsf_df.real + q @ dsf_df.imag), pad]))

        h = np.concatenate(h_parts)
        dh = _vstack(dh_parts, self.nx)
        return g, h, dg, dh

    def hessian(self, x, lam, mu):
        nb = self.nb
        v, _, _ = self.split(x)

        lam_p, lam_q = lam[:nb], lam[nb:2 * nb]
        hess = 2 * real_embedding(weighted_form(self.adm.ybus, self.eye,
            lam_p, lam_q))

        mu_min, mu_max = mu[:nb], mu[nb:2 * nb]
        diag = np.tile(2 * (mu_max - mu_min), 2)
        hess = hess + sparse.diags(diag)

        if len(self.limited):
            mu_flow = mu[-len(self.flow_limit):]
            if self.flow_mode == 'I':
                inner = self.yx.conj().T @ sparse.diags(mu_flow) @ self.yx
                hess = hess + 2 * real_embedding(inner)
            else:
                _, power = self._flows(v)
                dsf_de, dsf_df = self._voltage_derivatives(self.yx, self.cx,
                    v)
                dp = sparse.hstack([dsf_de.real, dsf_df.real])
                dq = sparse.hstack([dsf_de.imag, dsf_df.imag])
                weight = sparse.diags(mu_flow)
                hess = hess + 2 * (dp.T @ weight @ dp + dq.T @ weight @ dq)
                hess = hess + 4 * real_embedding(weighted_form(self.yx,
                    self.cx, mu_flow * power.real, mu_flow * power.imag))

        pad = 2 * self.ng
        return sparse.block_diag([hess, sparse.csr_matrix((pad, pad))],
            format='csr')

# =============================================================================

def _solution(problem, x, base_mva, converged, iterations, message, quality,
        lam=None):
    v, pg, qg = problem.split(x)
    g, _, _, _ = problem.constraints(x)
    mismatch = np.abs(g[:2 * problem.nb]).max()
    return PfSolution(v, pg, qg, converged, mismatch, base_mva, iterations,
        message, quality, lam)


def local_acopf(net, start, flow_mode='none', opts=None, adm=None):
    """Finds a local optimum of the losses minimisation AC-OPF.

    :param net: :class:`opfgap.network.Network`
    :param start: converged :class:`opfgap.powerflow.newton.PfSolution`
                  used as the starting point
    :param flow_mode: 'S', 'I' or 'none'
    :param opts: interior point options, see :mod:`opfgap.settings`
    :param adm: optional pre-built admittance model

    :returns: :class:`opfgap.powerflow.newton.PfSolution` with `quality`
              'ok', 'degraded' (best feasible iterate of an unfinished solve)
              or 'failed'. When `start` is feasible the result is never
              worse than it.

    :raises InfeasibleBoundsError: some bounds cannot be met by any point
    """
    crossings = crossed_bounds(net)
    if crossings:
        raise InfeasibleBoundsError(net.name, crossings)

    check_flow_mode(flow_mode)
    options = solver_options(opts)
    if adm is None:
        adm = build_admittance(net)

    slack_angle = float(np.angle(start.v[net.slack]))
    problem = AcopfProblem(net, adm, flow_mode, slack_angle)
    x0 = problem.pack(start.v, start.pg, start.qg)

    start_feasible = start.converged and evaluate_feasible_point(net, start,
        flow_mode, options['feastol'], adm).feasible

    logger.info('%s: AC-OPF (%s flow limits) from %.4f MW', net.name,
        flow_mode, start.objective)
    result = pdipm(problem, x0, options)

    if result.status in SUCCESS:
        sol = _solution(problem, result.x, net.base_mva, True,
            result.iterations, result.message, 'ok', result.lam)
    elif result.best_x is not None:
        sol = _solution(problem, result.best_x, net.base_mva, True,
            result.iterations, 'best feasible iterate: ' + result.message,
            'degraded', result.lam)
        logger.warning('%s: AC-OPF degraded, %s', net.name, result.message)
    else:
        sol = _solution(problem, result.x, net.base_mva, False,
            result.iterations, result.message, 'failed', result.lam)

    if start_feasible and (not sol.converged or
            sol.objective > start.objective):
        logger.info('%s: AC-OPF result not better than the start, keeping '
            'the start', net.name)
        quality = 'ok' if result.status in SUCCESS else 'degraded'
        return PfSolution(start.v, start.pg, start.qg, True,
            start.max_mismatch, net.base_mva, result.iterations,
            'start point kept: ' + result.message, quality, result.lam)

    logger.info('%s: AC-OPF %s, %.4f MW', net.name, sol.quality,
        sol.objective)
    return sol
