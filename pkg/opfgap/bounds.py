"""
Lower Bounds (opfgap.bounds.py)
===============================

The DC-OPF without flow limits reduces to a single balance constraint with
box bounds on each generator, so a continuous merit order solves it exactly.
With unit costs its value is the total load, a lower bound of the losses
minimisation AC-OPF as long as no branch has a negative resistance: such a
branch can create active power and void the bound.
"""
import logging

import numpy as np

from opfgap.matpower import BR_R

logger = logging.getLogger(__name__)

NOT_VALID = 'not valid'

# =============================================================================

class InfeasibleBoundError(ValueError):
    """Total load is outside the range the generators can cover.

    :param shortfall: MW by which the load misses the aggregate range,
                      positive when load exceeds total Pmax, negative when
                      load is below total Pmin
    """
    def __init__(self, message, shortfall):
        self.shortfall = shortfall
        super().__init__(message)


class GapError(ValueError):
    pass


class LowerBound:
    """A lower bound of the AC-OPF objective.

    :param value: bound in MW
    :param valid: False when negative resistances void the bound
    :param reason: why the bound is not valid, empty otherwise
    :param dispatch: MW per network generator achieving the bound
    """
    def __init__(self, value, valid, reason='', dispatch=None):
        self.value = float(value)
        self.valid = bool(valid)
        self.reason = reason
        self.dispatch = dispatch

    def __repr__(self):
        return f'LowerBound({self.value:.4f}, valid={self.valid})'


def unit_costs(net):
    """Cost 1 per MW for every generator: losses minimisation."""
    return np.ones(net.n_gen)


def case_costs(net):
    """Linear cost terms taken from the case's gencost table."""
    return np.array(net.cost)


def negative_resistance_count(net, raw_case=None):
    if raw_case is not None:
        return int((raw_case.branch[:, BR_R] < 0).sum())

    return int((net.br_r < 0).sum())


def dcopf_no_flow_limits(net, costs=None, raw_case=None):
    """Solves the DC-OPF without flow limits by merit order: every generator
    starts at Pmin and the remaining load goes to the cheapest generators
    first. Ties keep network order.

    :param net: :class:`opfgap.network.Network`
    :param costs: cost per MW of each network generator, unit costs when
                  None
    :param raw_case: optional :class:`opfgap.matpower.CaseData`; when given,
                     negative resistances are looked for in every branch row
                     of the file, in service or not

    :returns: :class:`LowerBound`

    :raises InfeasibleBoundError: load outside [sum Pmin, sum Pmax]
    """
    costs = unit_costs(net) if costs is None else np.asarray(costs, float)
    base = net.base_mva
    demand = net.pd.sum() * base
    pmin = net.pmin * base
    pmax = net.pmax * base

    low, high = pmin.sum(), pmax.sum()
    if demand > high:
        raise InfeasibleBoundError((f'{net.name}: load {demand:.1f} MW '
            f'exceeds total Pmax {high:.1f} MW'), demand - high)
    if demand < low:
        raise InfeasibleBoundError((f'{net.name}: load {demand:.1f} MW is '
            f'below total Pmin {low:.1f} MW'), demand - low)

    dispatch = pmin.copy()
    remaining = demand - low
    for count in np.argsort(costs, kind='stable'):
        if remaining <= 0:
            break

        take = min(pmax[count] - pmin[count], remaining)
        dispatch[count] += take
        remaining -= take

    value = float(costs @ dispatch)

    negatives = negative_resistance_count(net, raw_case)
    reason = ''
    if negatives:
        reason = f'{negatives} branches with negative resistance present'
        logger.info('%s: lower bound not valid, %s', net.name, reason)

    return LowerBound(value, not negatives, reason, dispatch)


def gap_percent(lb, ub):
    """Optimality gap ``100 (ub - lb) / lb`` between a lower bound and the
    objective of a feasible point.

    :param lb: :class:`LowerBound`
    :param ub: upper bound in MW

    :returns: float percentage, or :data:`NOT_VALID` when the lower bound
              is not valid

    :raises GapError: the bound is not positive or `ub` is negative
    """
    if not lb.valid:
        return NOT_VALID

    if lb.value <= 0:
        raise GapError(f'gap undefined for a lower bound of {lb.value} MW')
    if ub < 0:
        raise GapError(f'upper bound {ub} MW is negative')

    return 100.0 * (ub - lb.value) / lb.value
