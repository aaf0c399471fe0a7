"""
QCQP Text Format (opfgap.qcqp.export.py)
========================================

Writes and reads a :class:`opfgap.qcqp.problem.QcqpProblem` as plain text.
The format is line based and whitespace separated:

.. code-block:: none

    # opfgap qcqp 1
    case <name>
    representation <real|complex>
    n_var <count>
    n_eq <count>
    n_ineq <count>
    objective <c>
    matrix C <nnz>
    <row> <col> <real> <imag>
    ...
    matrix A <k> <a_k> <nnz> [label]
    ...
    matrix B <k> <b_k> <nnz> [label]
    ...
    end

Indices are 1-based. Only the upper triangle (row <= col) of each matrix is
written, the lower triangle is its conjugate. Floats are written with
Python's ``repr`` so reading gives back the exact values. Lines starting
with ``#`` after the first are comments.
"""
import numpy as np

from opfgap.qcqp.forms import FormStack
from opfgap.qcqp.problem import QcqpProblem

MAGIC = '# opfgap qcqp 1'

HEADER_KEYS = ('case', 'representation', 'n_var', 'n_eq', 'n_ineq',
    'objective')

# =============================================================================

class QcqpFormatError(ValueError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f'line {line_number}: {message}'

        super().__init__(message)


def _upper(stack):
    stack = stack.coalesce()
    keep = stack.row <= stack.col
    return (stack.form[keep], stack.row[keep], stack.col[keep],
        stack.value[keep])


def _entry_lines(rows, cols, values):
    values = np.asarray(values, dtype=complex)
    return [f'{r + 1} {c + 1} {float(v.real)!r} {float(v.imag)!r}' for r, c, v
        in zip(rows.tolist(), cols.tolist(), values)]


def _stack_lines(tag, stack, rhs, labels):
    form, row, col, value = _upper(stack)
    bounds = np.searchsorted(form, np.arange(stack.n_forms + 1))

    lines = []
    for k in range(stack.n_forms):
        start, end = bounds[k], bounds[k + 1]
        label = f' {labels[k]}' if labels[k] else ''
        lines.append(f'matrix {tag} {k + 1} {float(rhs[k])!r} {end - start}'
            f'{label}')
        lines.extend(_entry_lines(row[start:end], col[start:end],
            value[start:end]))

    return lines


def export_qcqp(problem):
    """Returns the text form of a :class:`QcqpProblem`."""
    lines = [
        MAGIC,
        f'case {problem.name}',
        f'representation {problem.representation}',
        f'n_var {problem.n_var}',
        f'n_eq {problem.n_eq}',
        f'n_ineq {problem.n_ineq}',
        f'objective {problem.c!r}',
    ]

    _, row, col, value = _upper(problem.C)
    lines.append(f'matrix C {len(value)}')
    lines.extend(_entry_lines(row, col, value))

    lines.extend(_stack_lines('A', problem.A, problem.a, problem.eq_labels))
    lines.extend(_stack_lines('B', problem.B, problem.b,
        problem.ineq_labels))
    lines.append('end')
    return '\n'.join(lines) + '\n'


def save_qcqp(problem, filename):
    with open(filename, 'w', encoding='utf-8') as f:
        f.write(export_qcqp(problem))

# =============================================================================
# Reader
# =============================================================================

class _Section:
    def __init__(self, tag, rhs, nnz, label):
        self.tag = tag
        self.rhs = rhs
        self.nnz = nnz
        self.label = label
        self.rows = []
        self.cols = []
        self.values = []


def _full_stack(n, sections, is_complex):
    form, row, col, value = [], [], [], []
    for k, section in enumerate(sections):
        r = np.array(section.rows, dtype=int)
        c = np.array(section.cols, dtype=int)
        v = np.array(section.values, dtype=complex)
        off = r != c
        form.append(np.full(len(r) + off.sum(), k))
        row.append(np.r_[r, c[off]])
        col.append(np.r_[c, r[off]])
        value.append(np.r_[v, np.conj(v[off])])

    dtype = complex if is_complex else float
    if not sections:
        return FormStack.empty(n, dtype)

    value = np.concatenate(value)
    if not is_complex:
        value = value.real

    return FormStack(n, len(sections), np.concatenate(form),
        np.concatenate(row), np.concatenate(col), value.astype(dtype))


def _number(token, kind, line_number):
    try:
        return kind(token)
    except ValueError:
        raise QcqpFormatError(f'bad number "{token}"', line_number)


def parse_qcqp(text):
    """Reads the output of :func:`export_qcqp` back into a
    :class:`QcqpProblem`.

    :raises QcqpFormatError: the text does not follow the format
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise QcqpFormatError(f'first line must be "{MAGIC}"', 1)

    header = {}
    sections = {'C':[], 'A':[], 'B':[]}
    current = None
    finished = False

    for line_number, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if finished:
            raise QcqpFormatError('content after "end"', line_number)

        tokens = line.split()
        if tokens[0] in HEADER_KEYS:
            if len(tokens) != 2:
                raise QcqpFormatError(f'"{tokens[0]}" takes one value',
                    line_number)
            header[tokens[0]] = tokens[1]
        elif tokens[0] == 'matrix':
            if current is not None and len(current.values) != current.nnz:
                raise QcqpFormatError('matrix has fewer entries than '
                    'declared', line_number)

            tag = tokens[1] if len(tokens) > 1 else ''
            if tag == 'C' and len(tokens) == 3:
                current = _Section('C', 0.0, _number(tokens[2], int,
                    line_number), '')
            elif tag in ('A', 'B') and len(tokens) >= 5:
                current = _Section(tag, _number(tokens[3], float,
                    line_number), _number(tokens[4], int, line_number),
                    ' '.join(tokens[5:]))
            else:
                raise QcqpFormatError(f'bad matrix line "{line}"',
                    line_number)
            sections[current.tag].append(current)
        elif tokens[0] == 'end':
            finished = True
        else:
            if current is None or len(tokens) != 4:
                raise QcqpFormatError(f'unexpected line "{line}"',
                    line_number)
            if len(current.values) == current.nnz:
                raise QcqpFormatError('matrix has more entries than '
                    'declared', line_number)

            r = _number(tokens[0], int, line_number) - 1
            c = _number(tokens[1], int, line_number) - 1
            if r > c:
                raise QcqpFormatError('entry below the diagonal',
                    line_number)

            current.rows.append(r)
            current.cols.append(c)
            current.values.append(complex(_number(tokens[2], float,
                line_number), _number(tokens[3], float, line_number)))

    if not finished:
        raise QcqpFormatError('missing "end"')
    if current is not None and len(current.values) != current.nnz:
        raise QcqpFormatError('last matrix has fewer entries than declared')

    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise QcqpFormatError(f'missing header keys {missing}')
    if len(sections['C']) != 1:
        raise QcqpFormatError('expected exactly one objective matrix')

    n_var = _number(header['n_var'], int, None)
    representation = header['representation']
    is_complex = representation == 'complex'
    A, B = sections['A'], sections['B']
    if len(A) != _number(header['n_eq'], int, None) or \
            len(B) != _number(header['n_ineq'], int, None):
        raise QcqpFormatError('matrix counts do not match the header')

    try:
        return QcqpProblem(header['case'], representation, n_var,
            _full_stack(n_var, sections['C'], is_complex),
            _number(header['objective'], float, None),
            _full_stack(n_var, A, is_complex), [s.rhs for s in A],
            _full_stack(n_var, B, is_complex), [s.rhs for s in B],
            eq_labels=[s.label for s in A],
            ineq_labels=[s.label for s in B])
    except ValueError as e:
        raise QcqpFormatError(str(e))
