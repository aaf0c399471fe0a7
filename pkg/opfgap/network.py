"""
Network Model (opfgap.network.py)
=================================

Turns the raw tables of a :class:`opfgap.matpower.CaseData` into a validated
per-unit :class:`Network` and assembles its sparse admittance structures.

Out-of-service elements, buses of type 4 and islands that do not contain the
reference bus are left out of the network; what was dropped is recorded in
:attr:`Network.warnings`.
"""
import logging
from collections import namedtuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from opfgap.matpower import (BUS_I, BUS_TYPE, PD, QD, GS, BS, VM, VA,
    BASE_KV, VMAX, VMIN, GEN_BUS, PG, QG, QMAX, QMIN, VG, GEN_STATUS, PMAX,
    PMIN, F_BUS, T_BUS, BR_R, BR_X, BR_B, RATE_A, TAP, SHIFT, BR_STATUS,
    MODEL, NCOST, COST, PW_LINEAR, PQ, PV, REF, NONE)

logger = logging.getLogger(__name__)

# =============================================================================

class NetworkError(ValueError):
    pass


_DTYPES = {
    'bus_ids':int,
    'bus_types':int,
    'gen_bus':int,
    'gen_rows':int,
    'br_from':int,
    'br_to':int,
    'branch_rows':int,
    'br_y':complex,
}


def _frozen(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.flags.writeable = False
    return array

# =============================================================================
# Network
# =============================================================================

class Network:
    """Validated per-unit network. Quantities are arrays indexed by internal
    bus, generator or branch number. Powers are in per unit of
    :attr:`base_mva`, angles in radians.

    Buses: ``bus_ids`` (external numbers), ``bus_types``, ``pd``, ``qd``,
    ``gs``, ``bs``, ``vmin``, ``vmax``, ``base_kv``, ``vm0``, ``va0``.

    Generators: ``gen_bus``, ``pmin``, ``pmax``, ``qmin``, ``qmax``, ``pg0``,
    ``qg0``, ``vg``, ``cost`` (linear cost per MW), ``gen_rows``.

    Branches: ``br_from``, ``br_to``, ``br_r``, ``br_x``, ``br_y`` (series
    admittance), ``br_b`` (total charging), ``br_tap``, ``br_shift``,
    ``br_rate`` (rateA in pu, 0 is unlimited), ``branch_rows``.
    """
    def __init__(self, name, base_mva, slack, buses, gens, branches,
            warnings=None):
        self.name = name
        self.base_mva = float(base_mva)
        self.slack = int(slack)
        self.warnings = list(warnings or [])

        for group in (buses, gens, branches):
            for key, value in group.items():
                setattr(self, key, _frozen(value, _DTYPES.get(key, float)))

    def __repr__(self):
        return (f'Network("{self.name}", buses={self.n_bus}, '
            f'gens={self.n_gen}, branches={self.n_branch})')

    @property
    def n_bus(self):
        return len(self.bus_ids)

    @property
    def n_gen(self):
        return len(self.gen_bus)

    @property
    def n_branch(self):
        return len(self.br_from)

    @property
    def pv(self):
        return np.flatnonzero(self.bus_types == PV)

    @property
    def pq(self):
        return np.flatnonzero(self.bus_types == PQ)

    @property
    def gen_buses(self):
        """Sorted internal indices of buses with at least one generator."""
        return np.unique(self.gen_bus)

    @property
    def gen_matrix(self):
        """Sparse bus-by-generator connection matrix."""
        return sparse.csr_matrix((np.ones(self.n_gen),
            (self.gen_bus, np.arange(self.n_gen))),
            shape=(self.n_bus, self.n_gen))

    @property
    def total_load(self):
        """Sum of active load in MW."""
        return float(self.pd.sum() * self.base_mva)


def _linear_costs(case, rows):
    costs = np.ones(len(rows))
    if case.gencost is None:
        return costs

    for count, row in enumerate(rows):
        cost = case.gencost[row]
        n = int(cost[NCOST])
        if cost[MODEL] == PW_LINEAR and n < 2:
            costs[count] = 0.0
        elif cost[MODEL] == PW_LINEAR:
            x1, y1, x2, y2 = cost[COST:COST + 4]
            costs[count] = (y2 - y1) / (x2 - x1) if x2 != x1 else 0.0
            logger.warning(('%s: generator %d has a piecewise linear cost, '
                'using the slope of its first segment'), case.name, row + 1)
        elif n >= 2:
            # only the linear term survives, higher degrees are discarded
            costs[count] = cost[COST + n - 2]
        else:
            costs[count] = 0.0

    return costs


def build_network(case):
    """Builds the per-unit :class:`Network` of a case.

    :param case: :class:`opfgap.matpower.CaseData`

    :raises NetworkError: no usable reference bus, several reference buses in
                          the same island, or a branch with zero impedance
    """
    case.validate()
    base = case.base_mva
    bus, gen, branch = case.bus, case.gen, case.branch
    warnings = []

    index = {int(b):i for i, b in enumerate(bus[:, BUS_I])}
    f_raw = np.array([index[int(b)] for b in branch[:, F_BUS]], dtype=int)
    t_raw = np.array([index[int(b)] for b in branch[:, T_BUS]], dtype=int)
    g_raw = np.array([index[int(b)] for b in gen[:, GEN_BUS]], dtype=int)

    bus_on = bus[:, BUS_TYPE] != NONE
    br_on = (branch[:, BR_STATUS] > 0) & bus_on[f_raw] & bus_on[t_raw]

    #--- find the island that holds the reference bus
    nb_raw = len(bus)
    graph = sparse.coo_matrix((np.ones(br_on.sum()),
        (f_raw[br_on], t_raw[br_on])), shape=(nb_raw, nb_raw))
    _, labels = connected_components(graph, directed=False)

    refs = np.flatnonzero((bus[:, BUS_TYPE] == REF) & bus_on)
    if len(refs) == 0:
        raise NetworkError(f'{case.name}: no in-service reference bus')

    ref_labels = labels[refs]
    if len(np.unique(ref_labels)) != len(ref_labels):
        raise NetworkError((f'{case.name}: more than one reference bus in '
            'the same connected area'))

    sizes = np.bincount(labels[bus_on], minlength=nb_raw)
    slack_raw = refs[np.argmax(sizes[ref_labels])]
    keep = bus_on & (labels == labels[slack_raw])

    dropped = np.flatnonzero(~keep)
    if len(dropped):
        lost = bus[dropped, PD].sum()
        message = (f'{len(dropped)} isolated or disconnected buses excluded '
            f'with {lost:.1f} MW of load')
        warnings.append(message)
        logger.warning('%s: %s', case.name, message)

    br_keep = br_on & keep[f_raw]
    if (~br_keep).sum():
        message = f'{int((~br_keep).sum())} branches out of service'
        warnings.append(message)
        logger.info('%s: %s', case.name, message)

    gen_keep = (gen[:, GEN_STATUS] > 0) & keep[g_raw]
    if (~gen_keep).sum():
        message = f'{int((~gen_keep).sum())} generators out of service'
        warnings.append(message)
        logger.info('%s: %s', case.name, message)

    #--- renumber
    new_index = np.cumsum(keep) - 1
    bus_rows = np.flatnonzero(keep)
    gen_rows = np.flatnonzero(gen_keep)
    branch_rows = np.flatnonzero(br_keep)

    gen_bus = new_index[g_raw[gen_rows]]
    br_from = new_index[f_raw[branch_rows]]
    br_to = new_index[t_raw[branch_rows]]
    slack = int(new_index[slack_raw])

    types = bus[bus_rows, BUS_TYPE].astype(int)
    has_gen = np.zeros(len(bus_rows), dtype=bool)
    has_gen[gen_bus] = True
    types[(types == PV) & ~has_gen] = PQ
    types[slack] = REF

    if not has_gen[slack]:
        raise NetworkError((f'{case.name}: reference bus '
            f'{int(bus[slack_raw, BUS_I])} has no in-service generator'))

    r = branch[branch_rows, BR_R]
    x = branch[branch_rows, BR_X]
    zero = np.flatnonzero((r == 0) & (x == 0))
    if len(zero):
        row = branch_rows[zero[0]]
        raise NetworkError((f'{case.name}: branch {row + 1} '
            f'({int(branch[row, F_BUS])}-{int(branch[row, T_BUS])}) has zero '
            'impedance'))

    tap = branch[branch_rows, TAP].copy()
    tap[tap == 0] = 1.0

    buses = {
        'bus_ids':bus[bus_rows, BUS_I],
        'bus_types':types,
        'pd':bus[bus_rows, PD] / base,
        'qd':bus[bus_rows, QD] / base,
        'gs':bus[bus_rows, GS] / base,
        'bs':bus[bus_rows, BS] / base,
        'vmin':bus[bus_rows, VMIN],
        'vmax':bus[bus_rows, VMAX],
        'base_kv':bus[bus_rows, BASE_KV],
        'vm0':bus[bus_rows, VM],
        'va0':np.deg2rad(bus[bus_rows, VA]),
    }
    gens = {
        'gen_bus':gen_bus,
        'gen_rows':gen_rows,
        'pmin':gen[gen_rows, PMIN] / base,
        'pmax':gen[gen_rows, PMAX] / base,
        'qmin':gen[gen_rows, QMIN] / base,
        'qmax':gen[gen_rows, QMAX] / base,
        'pg0':gen[gen_rows, PG] / base,
        'qg0':gen[gen_rows, QG] / base,
        'vg':gen[gen_rows, VG],
        'cost':_linear_costs(case, gen_rows),
    }
    branches = {
        'br_from':br_from,
        'br_to':br_to,
        'branch_rows':branch_rows,
        'br_r':r,
        'br_x':x,
        'br_y':1.0 / (r + 1j * x),
        'br_b':branch[branch_rows, BR_B],
        'br_tap':tap,
        'br_shift':np.deg2rad(branch[branch_rows, SHIFT]),
        'br_rate':branch[branch_rows, RATE_A] / base,
    }

    net = Network(case.name, base, slack, buses, gens, branches, warnings)
    logger.debug('built %r', net)
    return net

# =============================================================================
# Admittance
# =============================================================================

Flows = namedtuple('Flows', ['sf', 'st', 'i_f', 'i_t'])


class AdmittanceModel:
    """Sparse bus admittance matrix and the per-branch two-port blocks.

    :param ybus: complex n_bus x n_bus CSR matrix
    :param yff, yft, ytf, ytt: per branch two-port admittances
    :param yf, yt: branch x bus matrices giving from/to end currents
    :param cf, ct: branch x bus incidence of the from/to ends
    """
    def __init__(self, ybus, yff, yft, ytf, ytt, yf, yt, cf, ct):
        self.ybus = ybus
        self.yff = _frozen(yff, complex)
        self.yft = _frozen(yft, complex)
        self.ytf = _frozen(ytf, complex)
        self.ytt = _frozen(ytt, complex)
        self.yf = yf
        self.yt = yt
        self.cf = cf
        self.ct = ct


def build_admittance(net):
    """Assembles the :class:`AdmittanceModel` of a :class:`Network`."""
    nb, nl = net.n_bus, net.n_branch
    y = net.br_y
    tap = net.br_tap * np.exp(1j * net.br_shift)

    ytt = y + 0.5j * net.br_b
    yff = ytt / (net.br_tap ** 2)
    yft = -y / np.conj(tap)
    ytf = -y / tap

    i = np.arange(nl)
    f, t = net.br_from, net.br_to
    cf = sparse.csr_matrix((np.ones(nl), (i, f)), shape=(nl, nb))
    ct = sparse.csr_matrix((np.ones(nl), (i, t)), shape=(nl, nb))
    yf = sparse.csr_matrix((np.r_[yff, yft], (np.r_[i, i], np.r_[f, t])),
        shape=(nl, nb))
    yt = sparse.csr_matrix((np.r_[ytf, ytt], (np.r_[i, i], np.r_[f, t])),
        shape=(nl, nb))

    ysh = net.gs + 1j * net.bs
    ybus = (cf.T @ yf + ct.T @ yt + sparse.diags(ysh)).tocsr()

    return AdmittanceModel(ybus, yff, yft, ytf, ytt, yf, yt, cf, ct)


def bus_injection(adm, v):
    """Complex power injected into the network at each bus, per unit."""
    return v * np.conj(adm.ybus @ v)


def branch_flows(adm, v):
    """Complex power and current entering each branch at both ends."""
    i_f = adm.yf @ v
    i_t = adm.yt @ v
    sf = (adm.cf @ v) * np.conj(i_f)
    st = (adm.ct @ v) * np.conj(i_t)
    return Flows(sf, st, i_f, i_t)


def branch_losses(adm, v):
    """Active power lost in each branch, per unit."""
    flows = branch_flows(adm, v)
    return (flows.sf + flows.st).real
