"""
Newton Power Flow (opfgap.powerflow.newton.py)
==============================================

Polar Newton-Raphson power flow. PV and reference bus magnitudes come from
the generator voltage setpoints, the reference bus absorbs the active and
reactive residual. Reactive limits are not enforced: the OPF is where they
are handled.
"""
import logging, warnings

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve, MatrixRankWarning

from opfgap.network import build_admittance, bus_injection
from opfgap.matpower import PQ

logger = logging.getLogger(__name__)

# =============================================================================

class PfSolution:
    """An AC operating point.

    :param v: complex bus voltages, per unit
    :param pg: active output of each network generator, per unit
    :param qg: reactive output of each network generator, per unit
    :param converged: True when the point satisfies the power balance to the
                      requested tolerance
    :param max_mismatch: largest power balance residual, per unit
    :param base_mva: system base, used to express the objective in MW
    :param iterations: number of solver iterations taken
    :param message: short description of how the solve ended
    :param quality: 'ok', 'degraded' (best iterate of an unfinished solve)
                    or 'failed'
    """
    def __init__(self, v, pg, qg, converged, max_mismatch, base_mva,
            iterations=0, message='', quality='ok', lam=None):
        self.v = np.asarray(v, dtype=complex)
        self.pg = np.asarray(pg, dtype=float)
        self.qg = np.asarray(qg, dtype=float)
        self.converged = bool(converged)
        self.max_mismatch = float(max_mismatch)
        self.base_mva = float(base_mva)
        self.iterations = iterations
        self.message = message
        self.quality = quality
        self.lam = lam

    def __repr__(self):
        return (f'PfSolution(converged={self.converged}, '
            f'objective={self.objective:.4f}, iterations={self.iterations})')

    @property
    def objective(self):
        """Total active generation in MW."""
        return float(self.base_mva * self.pg.sum())

# =============================================================================
# Mismatch and Jacobian
# =============================================================================

def bus_types(net):
    """Returns the (pv, pq) internal index arrays used by the power flow.
    The reference bus is in neither."""
    pv = net.pv
    pq = np.flatnonzero(net.bus_types == PQ)
    return pv, pq


def scheduled_injection(net):
    """Complex power scheduled at each bus from generator setpoints and
    loads, per unit."""
    return net.gen_matrix @ (net.pg0 + 1j * net.qg0) - (net.pd + 1j * net.qd)


def mismatch(adm, v, sbus, pvpq, pq):
    """Power balance mismatch vector [P at PV+PQ buses, Q at PQ buses]."""
    mis = bus_injection(adm, v) - sbus
    return np.r_[mis[pvpq].real, mis[pq].imag]


def dsbus_dv(ybus, v):
    """Partial derivatives of the bus injections with respect to voltage
    angle and magnitude, returns (dS_dVa, dS_dVm)."""
    ibus = ybus @ v
    diag_v = sparse.diags(v)
    diag_ibus = sparse.diags(ibus)
    diag_vnorm = sparse.diags(v / np.abs(v))

    ds_dvm = diag_v @ (ybus @ diag_vnorm).conj() + \
        diag_ibus.conj() @ diag_vnorm
    ds_dva = 1j * (diag_v @ (diag_ibus - ybus @ diag_v).conj())
    return ds_dva, ds_dvm


def polar_jacobian(adm, v, pvpq, pq):
    """Jacobian of :func:`mismatch` with respect to the angles of the PV and
    PQ buses followed by the magnitudes of the PQ buses."""
    ds_dva, ds_dvm = dsbus_dv(adm.ybus, v)
    ds_dva = ds_dva.tocsr()
    ds_dvm = ds_dvm.tocsr()

    j11 = ds_dva[pvpq][:, pvpq].real
    j12 = ds_dvm[pvpq][:, pq].real
    j21 = ds_dva[pq][:, pvpq].imag
    j22 = ds_dvm[pq][:, pq].imag

    return sparse.bmat([[j11, j12], [j21, j22]], format='csc')

# =============================================================================
# Solver
# =============================================================================

def initial_voltage(net, start='flat'):
    """Starting voltages: flat (1 pu, 0 rad) or the voltages stored in the
    case. Magnitudes at PV and reference buses are the generator
    setpoints."""
    if start == 'flat':
        vm = np.ones(net.n_bus)
        va = np.zeros(net.n_bus)
    elif start == 'case':
        vm = np.array(net.vm0)
        va = np.array(net.va0)
    else:
        raise ValueError(f'unknown power flow start "{start}"')

    controlled = net.bus_types[net.gen_bus] != PQ
    vm[net.gen_bus[controlled]] = net.vg[controlled]
    return vm * np.exp(1j * va)


def generator_outputs(net, adm, v):
    """Splits the generation needed at each bus between its generators:
    active power in proportion to the setpoints, reactive power equally.

    :returns: tuple (pg, qg) per unit
    """
    total = bus_injection(adm, v) + net.pd + 1j * net.qd
    gen_bus = net.gen_bus

    count = np.bincount(gen_bus, minlength=net.n_bus)
    scheduled = np.bincount(gen_bus, weights=net.pg0, minlength=net.n_bus)

    share = 1.0 / count[gen_bus]
    proportional = np.abs(scheduled[gen_bus]) > 1e-12
    share[proportional] = net.pg0[proportional] / \
        scheduled[gen_bus][proportional]

    pg = total.real[gen_bus] * share
    qg = total.imag[gen_bus] / count[gen_bus]
    return pg, qg


def _failed(net, adm, v, norm, iterations, message):
    logger.warning('%s: power flow failed: %s', net.name, message)
    pg, qg = generator_outputs(net, adm, v)
    return PfSolution(v, pg, qg, False, norm, net.base_mva, iterations,
        message, 'failed')


def solve_powerflow(net, start='flat', tol=1e-8, max_iter=30, adm=None):
    """Solves the AC power flow with Newton's method.

    :param net: :class:`opfgap.network.Network`
    :param start: 'flat' or 'case' for the voltages stored in the case, or
                  an array of complex starting voltages
    :param tol: mismatch tolerance in per unit
    :param max_iter: iteration limit
    :param adm: optional pre-built :class:`opfgap.network.AdmittanceModel`

    :returns: :class:`PfSolution`. A singular Jacobian or the iteration
              limit give `converged=False`, never an exception.
    """
    if adm is None:
        adm = build_admittance(net)

    if isinstance(start, str):
        v = initial_voltage(net, start)
    else:
        v = np.array(start, dtype=complex)

    pv, pq = bus_types(net)
    pvpq = np.r_[pv, pq]
    npvpq = len(pvpq)
    sbus = scheduled_injection(net)

    va = np.angle(v)
    vm = np.abs(v)

    F = mismatch(adm, v, sbus, pvpq, pq)
    norm = np.abs(F).max() if len(F) else 0.0
    iterations = 0

    while norm > tol and iterations < max_iter:
        iterations += 1
        J = polar_jacobian(adm, v, pvpq, pq)

        try:
            with warnings.catch_warnings():
                warnings.simplefilter('error', MatrixRankWarning)
                dx = np.atleast_1d(spsolve(J, F))
        except (MatrixRankWarning, RuntimeError) as e:
            return _failed(net, adm, v, norm, iterations,
                f'singular Jacobian ({e})')

        if not np.all(np.isfinite(dx)):
            return _failed(net, adm, v, norm, iterations,
                'singular Jacobian (non-finite update)')

        va[pvpq] -= dx[:npvpq]
        vm[pq] -= dx[npvpq:]
        v = vm * np.exp(1j * va)

        F = mismatch(adm, v, sbus, pvpq, pq)
        norm = np.abs(F).max()
        logger.debug('%s: newton iteration %d, mismatch %.3e', net.name,
            iterations, norm)

    converged = norm <= tol
    if converged:
        message = f'converged in {iterations} iterations'
        quality = 'ok'
    else:
        message = f'no convergence after {iterations} iterations'
        quality = 'failed'
        logger.warning('%s: %s (mismatch %.3e)', net.name, message, norm)

    pg, qg = generator_outputs(net, adm, v)
    return PfSolution(v, pg, qg, converged, norm, net.base_mva, iterations,
        message, quality)
