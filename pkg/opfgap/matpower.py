"""
MATPOWER Case Files (opfgap.matpower.py)
========================================

Reading and writing of the MATPOWER version '2' case format, plus the
sanitization transforms applied to published snapshot data. Tables are kept
exactly as they appear in the file (status 0 rows, trailing optional columns
and all); interpretation happens in :mod:`opfgap.network`.
"""
import logging, re
from pathlib import Path

import numpy as np

from opfgap import __version__

logger = logging.getLogger(__name__)

# =============================================================================
# Column Indices
# =============================================================================

# bus table
BUS_I, BUS_TYPE, PD, QD, GS, BS, BUS_AREA, VM, VA, BASE_KV, ZONE, VMAX, \
    VMIN = range(13)

# bus types
PQ, PV, REF, NONE = 1, 2, 3, 4

# gen table
GEN_BUS, PG, QG, QMAX, QMIN, VG, MBASE, GEN_STATUS, PMAX, PMIN = range(10)

# branch table
F_BUS, T_BUS, BR_R, BR_X, BR_B, RATE_A, RATE_B, RATE_C, TAP, SHIFT, \
    BR_STATUS, ANGMIN, ANGMAX = range(13)

# gencost table
MODEL, STARTUP, SHUTDOWN, NCOST, COST = range(5)
PW_LINEAR, POLYNOMIAL = 1, 2

# minimum number of columns a row of each table must have
MIN_COLUMNS = {
    'bus':13,
    'gen':10,
    'branch':11,
    'gencost':4,
}

MANDATORY = ['bus', 'gen', 'branch']

_HEADERS = {
    'bus':('bus_i', 'type', 'Pd', 'Qd', 'Gs', 'Bs', 'area', 'Vm', 'Va',
        'baseKV', 'zone', 'Vmax', 'Vmin'),
    'gen':('bus', 'Pg', 'Qg', 'Qmax', 'Qmin', 'Vg', 'mBase', 'status',
        'Pmax', 'Pmin'),
    'branch':('fbus', 'tbus', 'r', 'x', 'b', 'rateA', 'rateB', 'rateC',
        'ratio', 'angle', 'status', 'angmin', 'angmax'),
    'gencost':('model', 'startup', 'shutdown', 'n', 'c(n-1)', '...', 'c0'),
}

# =============================================================================
# Exceptions
# =============================================================================

class CaseFormatError(ValueError):
    pass


class CaseParseError(CaseFormatError):
    """Raised when a line of a case file cannot be interpreted.

    :param message: description of the problem
    :param line_number: 1-indexed line in the source text
    """
    def __init__(self, message, line_number):
        super().__init__(f'line {line_number}: {message}')
        self.line_number = line_number


class CaseStructureError(CaseFormatError):
    pass


class UnsupportedFormatError(CaseFormatError):
    pass


class CaseInvariantError(CaseFormatError):
    pass

# =============================================================================
# Case Data
# =============================================================================

def _table(values, name):
    if values is None:
        return None

    table = np.array(values, dtype=float)
    if table.size == 0:
        table = np.zeros((0, MIN_COLUMNS[name]))

    if table.ndim != 2:
        raise CaseStructureError(f'{name} table must be two dimensional')

    table.flags.writeable = False
    return table


class CaseData:
    """Raw tabular image of a MATPOWER case.

    :param name: case name, the name of the MATPOWER function
    :param base_mva: system base in MVA
    :param bus: bus table, one row per bus, MATPOWER column order
    :param gen: generator table
    :param branch: branch table
    :param gencost: optional generator cost table
    :param version: format version tag, only '2' is supported
    """
    def __init__(self, name, base_mva, bus, gen, branch, gencost=None,
            version='2'):
        self.name = name
        self.base_mva = float(base_mva)
        self.bus = _table(bus, 'bus')
        self.gen = _table(gen, 'gen')
        self.branch = _table(branch, 'branch')
        self.gencost = _table(gencost, 'gencost')
        self.version = version

    def __repr__(self):
        return (f'CaseData("{self.name}", buses={len(self.bus)}, '
            f'gens={len(self.gen)}, branches={len(self.branch)})')

    def __eq__(self, other):
        # content comparison
        if not isinstance(other, CaseData):
            return NotImplemented

        if self.name != other.name or self.version != other.version or \
                self.base_mva != other.base_mva:
            return False

        for attr in ['bus', 'gen', 'branch', 'gencost']:
            mine = getattr(self, attr)
            theirs = getattr(other, attr)
            if mine is None or theirs is None:
                if mine is not theirs:
                    return False
                continue

            if not np.array_equal(mine, theirs, equal_nan=True):
                return False

        return True

    def replace(self, **changes):
        """Returns a copy of this case with the named fields replaced."""
        fields = dict(name=self.name, base_mva=self.base_mva, bus=self.bus,
            gen=self.gen, branch=self.branch, gencost=self.gencost,
            version=self.version)
        fields.update(changes)
        return CaseData(**fields)

    def validate(self):
        """Checks the structural invariants of the tables, raising
        :class:`CaseInvariantError` on the first violation found."""
        if not self.base_mva > 0:
            raise CaseInvariantError(
                f'baseMVA must be positive, got {self.base_mva}')

        bus_ids = self.bus[:, BUS_I]
        if len(np.unique(bus_ids)) != len(bus_ids):
            raise CaseInvariantError('duplicate bus numbers in bus table')

        known = set(bus_ids.tolist())
        for label, column in [('from', F_BUS), ('to', T_BUS)]:
            missing = set(self.branch[:, column].tolist()) - known
            if missing:
                raise CaseInvariantError((f'branch {label} bus '
                    f'{int(min(missing))} is not in the bus table'))

        missing = set(self.gen[:, GEN_BUS].tolist()) - known
        if missing:
            raise CaseInvariantError(
                f'generator bus {int(min(missing))} is not in the bus table')

        if not np.any(self.bus[:, BUS_TYPE] == REF):
            raise CaseInvariantError('no reference bus in bus table')

        bad = np.flatnonzero(self.bus[:, VMIN] > self.bus[:, VMAX])
        if len(bad):
            raise CaseInvariantError(
                f'bus {int(bus_ids[bad[0]])} has Vmin > Vmax')

        on = self.gen[:, GEN_STATUS] > 0
        for low, high, label in [(QMIN, QMAX, 'Q'), (PMIN, PMAX, 'P')]:
            bad = np.flatnonzero(on & (self.gen[:, low] > self.gen[:, high]))
            if len(bad):
                raise CaseInvariantError((f'generator {bad[0] + 1} has '
                    f'{label}min > {label}max'))

        if self.gencost is not None and len(self.gencost) not in \
                (len(self.gen), 2 * len(self.gen)):
            raise CaseInvariantError(('gencost must have one row per '
                'generator (or two with reactive costs)'))

        if self.gencost is not None:
            width = self.gencost.shape[1]
            for count, row in enumerate(self.gencost, start=1):
                n = row[NCOST]
                if row[MODEL] == PW_LINEAR:
                    needed = 2 * n
                elif row[MODEL] == POLYNOMIAL:
                    needed = n
                else:
                    raise CaseInvariantError((f'gencost row {count} has '
                        f'unknown cost model {format_number(row[MODEL])}'))

                if not (n >= 0 and n.is_integer() and
                        COST + needed <= width):
                    raise CaseInvariantError((f'gencost row {count} has '
                        f'{width - COST} coefficients, NCOST '
                        f'{format_number(n)} needs {format_number(needed)}'))

        return self

# =============================================================================
# Parsing
# =============================================================================

_FUNCTION = re.compile(r'^\s*function\s+(?:\w+\s*=\s*)?(\w+)')
_FIELD = re.compile(r'^\s*mpc\.(\w+)\s*=\s*(.*)$')
_QUOTED = re.compile(r"""^['"]([^'"]*)['"]""")
_SEPARATORS = re.compile(r'[\s,]+')
_CASE_NAME = re.compile(r'^\s*%+\s*case name:\s*(.*\S)\s*$')


def _strip_comment(line):
    # "%" starts a comment everywhere in numeric content
    return line.split('%', 1)[0]


class _MatrixReader:
    """Accumulates the rows of a single bracketed matrix."""
    def __init__(self, name, line_number):
        self.name = name
        self.start_line = line_number
        self.rows = []
        self.current = []
        self.current_line = line_number
        self.width = None

    def feed(self, text, line_number):
        continued = False
        if '...' in text:
            text = text.split('...', 1)[0]
            continued = True

        segments = text.split(';')
        for count, segment in enumerate(segments):
            if count > 0:
                self.end_row()

            for token in _SEPARATORS.split(segment.strip()):
                if not token:
                    continue

                if not self.current:
                    self.current_line = line_number

                try:
                    self.current.append(float(token))
                except ValueError:
                    raise CaseParseError((f'bad number "{token}" in '
                        f'{self.name} matrix'), line_number)

        if not continued:
            self.end_row()

    def end_row(self):
        if not self.current:
            return

        row = self.current
        self.current = []

        if self.width is None:
            minimum = MIN_COLUMNS.get(self.name, 1)
            if len(row) < minimum:
                raise CaseParseError((f'{self.name} row has {len(row)} '
                    f'columns, expected at least {minimum}'),
                    self.current_line)
            self.width = len(row)
        elif len(row) != self.width:
            raise CaseParseError((f'{self.name} row has {len(row)} columns, '
                f'expected {self.width}'), self.current_line)

        self.rows.append(row)

    def result(self):
        self.end_row()
        if not self.rows:
            return np.zeros((0, MIN_COLUMNS.get(self.name, 0)))

        return np.array(self.rows, dtype=float)


def parse_case(text, name=None):
    """Parses the content of a MATPOWER version '2' case file.

    :param text: the file content
    :param name: optional case name, defaults to the name kept in a
                 "% case name:" comment by :func:`write_case`, then to the
                 function declared in the file ("case" if there is neither)

    :returns: :class:`CaseData`
    """
    function_name = None
    stored_name = None
    version = None
    base_mva = None
    tables = {}

    reader = None
    skipping = None     # closing bracket of an ignored field, if any

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if reader is None and skipping is None and stored_name is None:
            match = _CASE_NAME.match(raw)
            if match:
                stored_name = match.group(1)
                continue


        if reader is not None:
            if ']' in line:
                reader.feed(line.split(']', 1)[0], line_number)
                tables[reader.name] = reader.result()
                reader = None
            else:
                reader.feed(line, line_number)
            continue

        if skipping is not None:
            if skipping in line:
                skipping = None
            continue

        if not line.strip():
            continue

        match = _FUNCTION.match(line)
        if match:
            function_name = match.group(1)
            continue

        match = _FIELD.match(line)
        if not match:
            continue

        field, rhs = match.group(1), match.group(2).strip()
        if field == 'version':
            quoted = _QUOTED.match(rhs)
            version = quoted.group(1) if quoted else rhs.rstrip(';').strip()
        elif field == 'baseMVA':
            try:
                base_mva = float(rhs.rstrip(';').strip())
            except ValueError:
                raise CaseParseError(f'bad baseMVA "{rhs}"', line_number)
        elif rhs.startswith('['):
            body = rhs[1:]
            if field in MIN_COLUMNS:
                reader = _MatrixReader(field, line_number)
                if ']' in body:
                    reader.feed(body.split(']', 1)[0], line_number)
                    tables[field] = reader.result()
                    reader = None
                else:
                    reader.feed(body, line_number)
            else:
                logger.debug('skipping unsupported field mpc.%s', field)
                if ']' not in body:
                    skipping = ']'
        elif rhs.startswith('{'):
            logger.debug('skipping cell array mpc.%s', field)
            if '}' not in rhs:
                skipping = '}'

    if reader is not None:
        raise CaseParseError(f'unterminated {reader.name} matrix',
            reader.start_line)

    if version is None:
        raise UnsupportedFormatError(
            'no mpc.version tag, only MATPOWER case format version 2 is read')

    if version != '2':
        raise UnsupportedFormatError(
            f'unsupported MATPOWER case format version "{version}"')

    if base_mva is None:
        raise CaseStructureError('missing mandatory field mpc.baseMVA')

    for table in MANDATORY:
        if table not in tables:
            raise CaseStructureError(f'missing mandatory table mpc.{table}')

    if name is None:
        name = stored_name or function_name or 'case'

    return CaseData(name, base_mva, tables['bus'], tables['gen'],
        tables['branch'], tables.get('gencost'), version)


def load_case(filename):
    """Reads and parses a case file. The case name is the file's stem."""
    path = Path(filename)
    with open(path, encoding='utf-8', errors='replace') as f:
        text = f.read()

    logger.debug('parsing %s', path)
    return parse_case(text, name=path.stem)

# =============================================================================
# Writing
# =============================================================================

def format_number(value):
    """Returns the shortest text that parses back to exactly `value`."""
    value = float(value)
    if np.isnan(value):
        return 'NaN'

    if np.isinf(value):
        return 'Inf' if value > 0 else '-Inf'

    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))

    return repr(value)


def _identifier(name):
    ident = re.sub(r'\W', '_', name)
    if not ident or ident[0].isdigit():
        ident = 'case_' + ident

    return ident


def _write_table(output, field, table):
    output.append(f'%% {field} data')
    output.append('%\t' + '\t'.join(_HEADERS[field]))
    output.append(f'mpc.{field} = [')
    for row in table:
        output.append('\t' + '\t'.join(format_number(v) for v in row) + ';')

    output.append('];')
    output.append('')


def write_case(case):
    """Serializes a :class:`CaseData` into MATPOWER case text. Parsing the
    result gives back an identical object."""
    case.validate()
    name = _identifier(case.name)

    output = [
        f'function mpc = {name}',
        f'%{name.upper()}  written by opfgap {__version__}',
        f'%% case name: {case.name}',
        '',
        '%% MATPOWER Case Format : Version 2',
        f"mpc.version = '{case.version}';",
        '',
        '%%-----  Power Flow Data  -----%%',
        '%% system MVA base',
        f'mpc.baseMVA = {format_number(case.base_mva)};',
        '',
    ]

    for field in ['bus', 'gen', 'branch']:
        _write_table(output, field, getattr(case, field))

    if case.gencost is not None:
        output.append('%%-----  OPF Data  -----%%')
        _write_table(output, 'gencost', case.gencost)

    return '\n'.join(output)


def save_case(case, filename):
    with open(filename, 'w', encoding='utf-8') as f:
        f.write(write_case(case))

# =============================================================================
# Sanitization
# =============================================================================

def clamp_negative_pmin(case):
    """Converts generating units with negative minimum output (pumped storage
    read as dispatchable load) into units with Pmin of zero.

    :returns: tuple (new :class:`CaseData`, number of generators modified)
    """
    gen = np.array(case.gen)
    mask = gen[:, PMIN] < 0
    count = int(mask.sum())
    if count:
        gen[mask, PMIN] = 0.0
        logger.info('%s: clamped Pmin to 0 for %d generators', case.name,
            count)

    return case.replace(gen=gen), count


def is_transformer(branch):
    """Mask of branch rows that are transformers: off-nominal tap ratio or a
    non-zero phase shift."""
    tap = branch[:, TAP]
    return ((tap != 0) & (tap != 1)) | (branch[:, SHIFT] != 0)
