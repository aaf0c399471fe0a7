"""
Operating Limits (opfgap.powerflow.limits.py)
=============================================

Checks an AC operating point against voltage, generator and branch flow
limits. Flow limits come in two flavours: apparent power ('S') and current
('I'). A rateA of 0 means the branch is unlimited. Current limits are rateA
read as MVA at 1 pu voltage, i.e. a per unit current of rateA / baseMVA.
"""
from collections import namedtuple

import numpy as np

from opfgap.network import build_admittance, branch_flows

# =============================================================================

FLOW_MODES = ('S', 'I', 'none')

LIMIT_CLASSES = ('vm', 'pg', 'qg', 'flow')

Violation = namedtuple('Violation', ['kind', 'index', 'amount'])


def check_flow_mode(flow_mode):
    if flow_mode not in FLOW_MODES:
        raise ValueError(
            f'flow mode must be one of {FLOW_MODES}, got "{flow_mode}"')

    return flow_mode


def flow_magnitudes(net, adm, v, flow_mode):
    """Magnitude of the limited quantity at both ends of each branch with a
    rating.

    :returns: tuple (branch indices, from end, to end), None for mode 'none'
    """
    if check_flow_mode(flow_mode) == 'none':
        return None

    limited = np.flatnonzero(net.br_rate > 0)
    flows = branch_flows(adm, v)
    if flow_mode == 'S':
        return limited, np.abs(flows.sf[limited]), np.abs(flows.st[limited])

    return limited, np.abs(flows.i_f[limited]), np.abs(flows.i_t[limited])


class ConstraintReport:
    """Violations found on an operating point.

    :param violations: list of :class:`Violation` (kind, index, amount in pu)
    """
    def __init__(self, violations):
        self.violations = violations

        self.worst = {name:0.0 for name in LIMIT_CLASSES}
        for violation in violations:
            group = violation.kind[:-3] if violation.kind != 'flow' else \
                'flow'
            self.worst[group] = max(self.worst[group], violation.amount)

    def __repr__(self):
        return f'ConstraintReport({len(self.violations)} violations)'

    @property
    def feasible(self):
        return not self.violations


def _collect(kind, amounts, tol):
    return [Violation(kind, int(i), float(amounts[i])) for i in
        np.flatnonzero(amounts > tol)]


def evaluate_feasible_point(net, sol, flow_mode='none', tol=0.0, adm=None):
    """Reports the limits a converged operating point violates.

    :param net: :class:`opfgap.network.Network`
    :param sol: converged :class:`opfgap.powerflow.newton.PfSolution`
    :param flow_mode: 'S', 'I' or 'none'
    :param tol: amounts up to this value are not reported

    :returns: :class:`ConstraintReport`
    """
    if not sol.converged:
        raise ValueError('limits can only be checked on a converged point')

    check_flow_mode(flow_mode)
    if adm is None:
        adm = build_admittance(net)

    vm = np.abs(sol.v)
    violations = []
    violations.extend(_collect('vmmax', vm - net.vmax, tol))
    violations.extend(_collect('vmmin', net.vmin - vm, tol))
    violations.extend(_collect('pgmax', sol.pg - net.pmax, tol))
    violations.extend(_collect('pgmin', net.pmin - sol.pg, tol))
    violations.extend(_collect('qgmax', sol.qg - net.qmax, tol))
    violations.extend(_collect('qgmin', net.qmin - sol.qg, tol))

    magnitudes = flow_magnitudes(net, adm, sol.v, flow_mode)
    if magnitudes is not None:
        limited, from_end, to_end = magnitudes
        excess = np.maximum(from_end, to_end) - net.br_rate[limited]
        for count in np.flatnonzero(excess > tol):
            violations.append(Violation('flow', int(limited[count]),
                float(excess[count])))

    return ConstraintReport(violations)
