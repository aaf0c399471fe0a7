"""
QCQP Builder (opfgap.qcqp.problem.py)
=====================================

Writes the losses minimisation AC-OPF with current flow limits as

.. code-block:: none

    min   x' C x + c
    s.t.  x' A_k x  = a_k      k = 1 .. n_eq
          x' B_k x <= b_k      k = 1 .. n_ineq

where ``'`` is the conjugate transpose and ``x`` holds the bus voltages,
either as complex numbers (Hermitian forms) or as their real and imaginary
parts (real symmetric forms).

Counting rule:

* buses without a generator get two equalities, P and Q balance
* buses with generators get four inequalities bounding the net P and Q
  injection by the aggregated generator limits less the load
* every bus gets two voltage magnitude inequalities
* every branch with a rating gets two current inequalities, one per end

The reference angle is not fixed, the problem is invariant to a common
rotation of the voltages.
"""
from collections import namedtuple

import numpy as np

from opfgap.network import build_admittance
from opfgap.qcqp.forms import (FormStack, stack_forms, injection_forms,
    magnitude_forms, current_forms)

# =============================================================================

REPRESENTATIONS = ('real', 'complex')

Evaluation = namedtuple('Evaluation', ['objective', 'eq_residual',
    'ineq_slack'])


class DimensionError(ValueError):
    pass


class QcqpProblem:
    """A quadratically constrained quadratic program over bus voltages.

    :param name: case name
    :param representation: 'complex' or 'real'
    :param n_var: number of variables
    :param C: objective :class:`opfgap.qcqp.forms.FormStack` with one form
    :param c: objective constant
    :param A: equality forms, `a` their right hand sides
    :param B: inequality forms, `b` their right hand sides
    :param variable_map: dict of external bus number to tuple of variable
                         indices
    :param eq_labels, ineq_labels: one description per constraint row
    """
    def __init__(self, name, representation, n_var, C, c, A, a, B, b,
            variable_map=None, eq_labels=None, ineq_labels=None):
        if representation not in REPRESENTATIONS:
            raise ValueError(f'unknown representation "{representation}"')

        self.name = name
        self.representation = representation
        self.n_var = int(n_var)
        self.C = C
        self.c = float(c)
        self.A = A
        self.a = np.asarray(a, dtype=float)
        self.B = B
        self.b = np.asarray(b, dtype=float)
        self.variable_map = variable_map or {}
        self.eq_labels = eq_labels or [''] * len(self.a)
        self.ineq_labels = ineq_labels or [''] * len(self.b)

    def __repr__(self):
        return (f'QcqpProblem("{self.name}", {self.representation}, '
            f'n_var={self.n_var}, n_eq={self.n_eq}, n_ineq={self.n_ineq})')

    @property
    def n_eq(self):
        return len(self.a)

    @property
    def n_ineq(self):
        return len(self.b)

    @property
    def sparsity(self):
        """Percentage of upper triangle positions that are nonzero in the
        objective or any constraint."""
        pattern = self.C.upper_pattern() | self.A.upper_pattern() | \
            self.B.upper_pattern()
        return 100.0 * len(pattern) / (self.n_var * (self.n_var + 1) / 2)

    def real(self):
        """This problem in the real symmetric representation."""
        if self.representation == 'real':
            return self

        n = self.n_var
        variable_map = {bus:(k[0], n + k[0]) for bus, k in
            self.variable_map.items()}
        return QcqpProblem(self.name, 'real', 2 * n,
            self.C.real_embedding(), self.c, self.A.real_embedding(), self.a,
            self.B.real_embedding(), self.b, variable_map, self.eq_labels,
            self.ineq_labels)

# =============================================================================

def _collapse(stack):
    """Sums every form of a stack into a single form."""
    collapsed = FormStack(stack.n, 1, np.zeros(len(stack.form), dtype=int),
        stack.row, stack.col, stack.value)
    return collapsed.coalesce()


def build_qcqp(net, representation='real', adm=None):
    """Builds the :class:`QcqpProblem` of a network.

    :param net: :class:`opfgap.network.Network`
    :param representation: 'real' or 'complex'
    :param adm: optional pre-built admittance model
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f'unknown representation "{representation}"')
    if adm is None:
        adm = build_admittance(net)

    nb = net.n_bus
    base = net.base_mva
    everything = np.arange(nb)
    ids = net.bus_ids.astype(int)

    p_forms = injection_forms(adm.ybus, everything, 'P')
    q_forms = injection_forms(adm.ybus, everything, 'Q')

    gen_buses = net.gen_buses
    free_buses = np.setdiff1d(everything, gen_buses)

    #--- objective: generation at generator buses is injection plus load
    C = _collapse(p_forms.select(gen_buses).scaled(np.full(len(gen_buses),
        base)))
    c = base * net.pd[gen_buses].sum()

    #--- balance at buses without generation
    A = stack_forms([p_forms.select(free_buses), q_forms.select(free_buses)])
    a = np.r_[-net.pd[free_buses], -net.qd[free_buses]]
    eq_labels = [f'P {ids[k]}' for k in free_buses] + \
        [f'Q {ids[k]}' for k in free_buses]

    #--- net injection bounds at generator buses
    def aggregate(values):
        return np.bincount(net.gen_bus, weights=values, minlength=nb)[
            gen_buses]

    pmin, pmax = aggregate(net.pmin), aggregate(net.pmax)
    qmin, qmax = aggregate(net.qmin), aggregate(net.qmax)
    pd, qd = net.pd[gen_buses], net.qd[gen_buses]
    ones = np.ones(len(gen_buses))

    p_gen = p_forms.select(gen_buses)
    q_gen = q_forms.select(gen_buses)
    stacks = [p_gen, p_gen.scaled(-ones), q_gen, q_gen.scaled(-ones)]
    rhs = [pmax - pd, -(pmin - pd), qmax - qd, -(qmin - qd)]
    ineq_labels = []
    for label in ('Pmax', 'Pmin', 'Qmax', 'Qmin'):
        ineq_labels.extend(f'{label} {ids[k]}' for k in gen_buses)

    #--- voltage magnitudes
    magnitudes = magnitude_forms(everything, nb)
    stacks.extend([magnitudes, magnitudes.scaled(-np.ones(nb))])
    rhs.extend([net.vmax ** 2, -net.vmin ** 2])
    ineq_labels.extend(f'Vmax {i}' for i in ids)
    ineq_labels.extend(f'Vmin {i}' for i in ids)

    #--- current limits at both ends
    limited = np.flatnonzero(net.br_rate > 0)
    if len(limited):
        limit = net.br_rate[limited] ** 2
        stacks.extend([current_forms(adm.yf, limited),
            current_forms(adm.yt, limited)])
        rhs.extend([limit, limit])
        rows = net.branch_rows[limited] + 1
        ineq_labels.extend(f'If {row}' for row in rows)
        ineq_labels.extend(f'It {row}' for row in rows)

    B = stack_forms(stacks)
    b = np.concatenate(rhs)

    variable_map = {int(i):(k,) for k, i in enumerate(ids)}
    problem = QcqpProblem(net.name, 'complex', nb, C, c, A, a, B, b,
        variable_map, eq_labels, ineq_labels)

    if representation == 'real':
        return problem.real()

    return problem

# =============================================================================

def embed(x):
    """``[Re x; Im x]`` of a complex candidate."""
    x = np.asarray(x)
    return np.r_[x.real, x.imag]


def candidate_from_voltages(problem, v):
    """The candidate vector of `problem` for complex bus voltages `v`."""
    v = np.asarray(v, dtype=complex)
    if problem.representation == 'complex':
        return v

    return embed(v)


def evaluate(problem, x):
    """Evaluates the objective and every constraint at `x`.

    :returns: :class:`Evaluation` of the objective ``x'Cx + c``, the
              equality residuals ``x'A_k x - a_k`` and the inequality slacks
              ``b_k - x'B_k x`` (negative means violated)

    :raises DimensionError: `x` does not have `n_var` entries
    """
    x = np.asarray(x)
    if x.ndim != 1 or len(x) != problem.n_var:
        raise DimensionError((f'candidate has shape {x.shape}, problem has '
            f'{problem.n_var} variables'))

    objective = problem.C.values(x)[0] + problem.c
    return Evaluation(float(objective), problem.A.values(x) - problem.a,
        problem.b - problem.B.values(x))
