"""
Quadratic Forms (opfgap.qcqp.forms.py)
======================================

Hermitian quadratic forms ``x' H x`` of the bus voltage vector. A
:class:`FormStack` stores many such forms as one set of triplets so that
evaluating every constraint of a problem is a single vectorised pass.

Entries are stored in full (both triangles); duplicates are allowed until
:meth:`FormStack.coalesce` is called.
"""
import numpy as np
from scipy import sparse

# =============================================================================

class FormStack:
    """A stack of `n_forms` quadratic forms over `n` variables.

    :param n: number of variables
    :param n_forms: number of forms in the stack
    :param form, row, col: integer arrays giving the form and position of
                           each stored value, 0-based
    :param value: complex or real values
    """
    def __init__(self, n, n_forms, form, row, col, value):
        self.n = int(n)
        self.n_forms = int(n_forms)
        self.form = np.asarray(form, dtype=int)
        self.row = np.asarray(row, dtype=int)
        self.col = np.asarray(col, dtype=int)
        self.value = np.asarray(value)

    def __repr__(self):
        return (f'FormStack(n={self.n}, forms={self.n_forms}, '
            f'entries={len(self.value)})')

    def __len__(self):
        return self.n_forms

    @classmethod
    def empty(cls, n, dtype=complex):
        return cls(n, 0, [], [], [], np.zeros(0, dtype=dtype))

    @property
    def is_complex(self):
        return np.iscomplexobj(self.value)

    def values(self, x):
        """Evaluates every form at `x`, returns a real array of length
        `n_forms`."""
        x = np.asarray(x)
        terms = np.conj(x[self.row]) * self.value * x[self.col]
        return np.bincount(self.form, weights=np.real(terms),
            minlength=self.n_forms)

    def matrix(self, k):
        """Sparse CSR matrix of form `k`."""
        mask = self.form == k
        return sparse.csr_matrix((self.value[mask], (self.row[mask],
            self.col[mask])), shape=(self.n, self.n))

    def coalesce(self):
        """Sums duplicate entries and drops zeros. Entries come out sorted
        by (form, row, col)."""
        if not len(self.value):
            return self

        key = (self.form * self.n + self.row) * self.n + self.col
        unique, inverse = np.unique(key, return_inverse=True)
        value = np.zeros(len(unique), dtype=self.value.dtype)
        np.add.at(value, inverse, self.value)

        keep = value != 0
        unique, value = unique[keep], value[keep]
        form, rest = np.divmod(unique, self.n * self.n)
        row, col = np.divmod(rest, self.n)
        return FormStack(self.n, self.n_forms, form, row, col, value)

    def scaled(self, factors):
        """Each form multiplied by its entry in `factors`."""
        factors = np.asarray(factors)
        return FormStack(self.n, self.n_forms, self.form, self.row, self.col,
            self.value * factors[self.form])

    def select(self, indices):
        """A new stack holding the forms at `indices`, in that order."""
        indices = np.asarray(indices, dtype=int)
        lookup = np.full(self.n_forms, -1)
        lookup[indices] = np.arange(len(indices))
        new_form = lookup[self.form]
        mask = new_form >= 0
        return FormStack(self.n, len(indices), new_form[mask], self.row[mask],
            self.col[mask], self.value[mask])

    def real_embedding(self):
        """The real symmetric stack over ``[Re x; Im x]``: a Hermitian
        ``Hr + j Hi`` becomes ``[[Hr, -Hi], [Hi, Hr]]``."""
        if not self.is_complex:
            return self

        n = self.n
        hr, hi = self.value.real, self.value.imag
        r, c, k = self.row, self.col, self.form

        embedded = FormStack(2 * n, self.n_forms,
            np.r_[k, k, k, k],
            np.r_[r, n + r, r, n + r],
            np.r_[c, n + c, n + c, c],
            np.r_[hr, hr, -hi, hi])
        return embedded.coalesce()

    def upper_pattern(self):
        """Set of (row, col) positions with row <= col that are nonzero in
        at least one form."""
        stack = self.coalesce()
        upper = stack.row <= stack.col
        return set(zip(stack.row[upper].tolist(), stack.col[upper].tolist()))


def stack_forms(stacks):
    """Concatenates :class:`FormStack` objects over the same variables."""
    n = stacks[0].n
    offsets = np.cumsum([0] + [s.n_forms for s in stacks])
    dtype = complex if any(s.is_complex for s in stacks) else float

    return FormStack(n, offsets[-1],
        np.concatenate([s.form + offset for s, offset in zip(stacks,
            offsets)]),
        np.concatenate([s.row for s in stacks]),
        np.concatenate([s.col for s in stacks]),
        np.concatenate([s.value.astype(dtype) for s in stacks]))

# =============================================================================
# Power System Forms
# =============================================================================

def injection_forms(ybus, buses, kind='P'):
    """Active ('P') or reactive ('Q') power injection at each of `buses` as
    Hermitian forms of the voltage vector."""
    ybus = sparse.csr_matrix(ybus)
    buses = np.asarray(buses, dtype=int)
    sub = ybus[buses].tocoo()
    k = buses[sub.row]
    y = sub.data

    if kind == 'P':
        forward, backward = y / 2, np.conj(y) / 2
    elif kind == 'Q':
        forward, backward = -y / 2j, np.conj(y) / 2j
    else:
        raise ValueError(f'unknown injection kind "{kind}"')

    stack = FormStack(ybus.shape[0], len(buses),
        np.r_[sub.row, sub.row],
        np.r_[k, sub.col],
        np.r_[sub.col, k],
        np.r_[forward, backward])
    return stack.coalesce()


def magnitude_forms(buses, n):
    """|x_k|^2 for each of `buses`."""
    buses = np.asarray(buses, dtype=int)
    return FormStack(n, len(buses), np.arange(len(buses)), buses, buses,
        np.ones(len(buses), dtype=complex))


def current_forms(yx, rows):
    """Squared current magnitude ``|yx[l] x|^2`` for each branch in `rows`,
    where `yx` is a branch by bus current matrix."""
    sub = sparse.csr_matrix(yx)[np.asarray(rows, dtype=int)]
    form, row, col, value = [], [], [], []
    for count in range(sub.shape[0]):
        start, end = sub.indptr[count], sub.indptr[count + 1]
        idx = sub.indices[start:end]
        w = sub.data[start:end]
        r, c = np.meshgrid(idx, idx, indexing='ij')
        form.append(np.full(r.size, count))
        row.append(r.ravel())
        col.append(c.ravel())
        value.append(np.outer(np.conj(w), w).ravel())

    if not form:
        return FormStack.empty(yx.shape[1])

    stack = FormStack(yx.shape[1], sub.shape[0], np.concatenate(form),
        np.concatenate(row), np.concatenate(col), np.concatenate(value))
    return stack.coalesce()

# =============================================================================
# Matrix Helpers
# =============================================================================

def weighted_form(ymat, cmat, wp, wq):
    """Hermitian matrix of ``sum(wp * Re(s) + wq * Im(s))`` where
    ``s = (cmat x) * conj(ymat x)``.

    :param ymat: complex sparse current matrix
    :param cmat: real sparse incidence matrix with the same shape
    :param wp, wq: weights per row
    """
    dp = sparse.diags(wp)
    dq = sparse.diags(wq)
    yh = ymat.conj().T
    ct = cmat.T
    active = (yh @ dp @ cmat + ct @ dp @ ymat) / 2
    reactive = (yh @ dq @ cmat - ct @ dq @ ymat) / 2j
    return (active + reactive).tocsr()


def real_embedding(matrix):
    """``[[Hr, -Hi], [Hi, Hr]]`` of a sparse Hermitian matrix."""
    matrix = sparse.csr_matrix(matrix)
    hr = matrix.real
    hi = matrix.imag
    return sparse.bmat([[hr, -hi], [hi, hr]], format='csr')
