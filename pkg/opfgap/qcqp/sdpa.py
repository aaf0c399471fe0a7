"""
Shor Relaxation Export (opfgap.qcqp.sdpa.py)
============================================

Writes the Shor relaxation of a real QCQP in SDPA sparse format (.dat-s).
Replacing ``x x'`` by a matrix ``X >= 0`` gives

.. code-block:: none

    min  <C, X> + c
    s.t. <A_k, X> = a_k
         <B_k, X> + s_k = b_k,   s >= 0,   X >= 0

which is SDPA's dual problem ``max <F0, Y>  s.t. <F_i, Y> = c_i, Y >= 0``
with ``Y = diag(X, s)``: block 1 is X, block 2 is a diagonal block holding
the slacks, ``F0 = -C`` and each constraint contributes one ``F_i``. The
relaxation value is ``c`` minus the optimum SDPA reports.
"""
from collections import namedtuple

import numpy as np

# =============================================================================

SdpaData = namedtuple('SdpaData', ['n_constraints', 'block_struct', 'c',
    'entries'])
SdpaData.__doc__ = """Contents of a .dat-s file. ``entries`` is a list of
    (matrix, block, row, col, value) tuples, 1-based as in the file except
    that matrix 0 is F0."""


def _upper_entries(stack):
    stack = stack.coalesce()
    keep = stack.row <= stack.col
    return (stack.form[keep], stack.row[keep] + 1, stack.col[keep] + 1,
        np.real(stack.value[keep]))


def export_shor_sdpa(problem):
    """Returns the .dat-s text of the Shor relaxation of `problem`.

    :param problem: real :class:`opfgap.qcqp.problem.QcqpProblem`

    :raises ValueError: `problem` uses the complex representation or has no
                        constraints, SDPA needs at least one
    """
    if problem.representation != 'real':
        raise ValueError('SDPA export needs the real representation')

    if problem.n_eq + problem.n_ineq == 0:
        raise ValueError(f'{problem.name} has no constraints to export')

    n_eq, n_ineq = problem.n_eq, problem.n_ineq
    blocks = [str(problem.n_var)]
    if n_ineq:
        blocks.append(str(-n_ineq))

    lines = [
        f'* Shor relaxation of {problem.name}',
        f'* relaxation value = {problem.c!r} - (SDPA objective)',
        f'* constraints 1-{n_eq} are equalities, the rest inequalities '
            'with slacks in block 2',
        str(n_eq + n_ineq),
        str(len(blocks)),
        ' '.join(blocks),
        ' '.join(repr(float(v)) for v in np.r_[problem.a, problem.b]),
    ]

    _, row, col, value = _upper_entries(problem.C)
    lines.extend(f'0 1 {r} {c} {-v!r}' for r, c, v in zip(row.tolist(),
        col.tolist(), value.tolist()))

    for offset, stack in ((0, problem.A), (n_eq, problem.B)):
        form, row, col, value = _upper_entries(stack)
        lines.extend(f'{k + offset + 1} 1 {r} {c} {v!r}' for k, r, c, v in
            zip(form.tolist(), row.tolist(), col.tolist(), value.tolist()))

    lines.extend(f'{n_eq + k + 1} 2 {k + 1} {k + 1} 1.0' for k in
        range(n_ineq))
    return '\n'.join(lines) + '\n'


def save_sdpa(problem, filename):
    with open(filename, 'w', encoding='utf-8') as f:
        f.write(export_shor_sdpa(problem))

# =============================================================================

def _values(line):
    return line.replace('{', ' ').replace('}', ' ').replace(',', ' ').replace(
        '(', ' ').replace(')', ' ').split()


def read_sdpa(text):
    """Parses .dat-s text into :class:`SdpaData`. Comment lines start with
    ``*`` or ``"``."""
    lines = [line for line in text.splitlines() if line.strip() and
        line.lstrip()[0] not in '*"']

    n_constraints = int(_values(lines[0])[0])
    n_blocks = int(_values(lines[1])[0])
    block_struct = [int(v) for v in _values(lines[2])[:n_blocks]]
    c = np.array([float(v) for v in _values(lines[3])[:n_constraints]])

    entries = []
    for line in lines[4:]:
        matrix, block, row, col, value = _values(line)[:5]
        entries.append((int(matrix), int(block), int(row), int(col),
            float(value)))

    return SdpaData(n_constraints, block_struct, c, entries)


def inner_products(data, blocks):
    """``<F_i, Y>`` for every matrix of `data`, F0 first.

    :param blocks: list of dense arrays, one per block; diagonal blocks may
                   be given as 1-D arrays
    """
    totals = np.zeros(data.n_constraints + 1)
    for matrix, block, row, col, value in data.entries:
        y = blocks[block - 1]
        if np.ndim(y) == 1:
            entry = y[row - 1] if row == col else 0.0
        else:
            entry = y[row - 1, col - 1]

        # upper triangle only, off diagonal entries count twice
        weight = 1.0 if row == col else 2.0
        totals[matrix] += weight * value * entry

    return totals
