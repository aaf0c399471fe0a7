"""
Scribe Module (opfgap.scribe.py)
================================

Renders :class:`opfgap.ledger.BoundLedger` rows as text, CSV or JSON
tables. MW values are shown with one decimal and gaps with two in text and
CSV; JSON keeps full precision.
"""
import csv, io, json

from colored import fg, attr

from opfgap.stats import VOLTAGE_CLASSES

# =============================================================================
# Table Definitions
# =============================================================================

def _field(name):
    return lambda ledger: getattr(ledger, name)


def _histogram(label):
    def getter(ledger):
        if ledger.voltage_level_histogram is None:
            return None
        return ledger.voltage_level_histogram.get(label, 0)

    return getter


def _acopf(mode):
    return lambda ledger: ledger.acopf.get(mode)


# each column is (header, getter, kind); kind picks the cell format
TABLES = {
    'general':[
        ('case', _field('case'), 'text'),
        ('buses', _field('n_bus'), 'int'),
        ('generators', _field('n_gen'), 'int'),
        ('branches', _field('n_branch'), 'int'),
        ('transformers', _field('n_transformer'), 'int'),
        ('load MW', _field('total_load'), 'mw'),
    ],
    'voltage_levels':[('case', _field('case'), 'text')] + [
        (f'{label} kV', _histogram(label), 'int') for label, _, _ in
            VOLTAGE_CLASSES],
    'negative_rx':[
        ('case', _field('case'), 'text'),
        ('R < 0', _field('n_neg_r'), 'int'),
        ('X < 0', _field('n_neg_x'), 'int'),
    ],
    'losses':[
        ('case', _field('case'), 'text'),
        ('DCOPF MW', _field('dcopf_lb'), 'mw'),
        ('OPF MW', lambda ledger: ledger.acopf.get(ledger.gap_flow_mode),
            'mw'),
        ('gap %', _field('gap'), 'pct'),
    ],
    'flow_limits':[
        ('case', _field('case'), 'text'),
        ('S MW', _acopf('S'), 'mw'),
        ('I MW', _acopf('I'), 'mw'),
        ('none MW', _acopf('none'), 'mw'),
    ],
    'qcqp_sizes':[
        ('case', _field('case'), 'text'),
        ('nVAR', _field('n_var'), 'int'),
        ('nEQ', _field('n_eq'), 'int'),
        ('nINEQ', _field('n_ineq'), 'int'),
        ('sparsity %', _field('sparsity'), 'pct'),
    ],
}

# tables printed by default for each command line verb
VERB_TABLES = {
    'stats':['general', 'voltage_levels', 'negative_rx'],
    'bounds':['losses', 'flow_limits'],
    'qcqp':['qcqp_sizes'],
    'sdpa':['qcqp_sizes'],
    'profiles':['general'],
    'all':list(TABLES),
}

FORMATS = ('text', 'csv', 'json')

# =============================================================================

def format_cell(value, kind, missing=''):
    if value is None:
        return missing
    if isinstance(value, str):
        return value
    if kind == 'mw':
        return f'{value:.1f}'
    if kind == 'pct':
        return f'{value:.2f}'

    return str(value)


def _rows(ledgers, columns, missing):
    return [[format_cell(getter(ledger), kind, missing) for _, getter, kind
        in columns] for ledger in ledgers]


def _csv_table(ledgers, columns):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow([header for header, _, _ in columns])
    writer.writerows(_rows(ledgers, columns, ''))
    return buffer.getvalue()


def _text_table(ledgers, name, columns, colour):
    headers = [header for header, _, _ in columns]
    rows = _rows(ledgers, columns, '-')
    widths = [max([len(header)] + [len(row[count]) for row in rows]) for
        count, header in enumerate(headers)]

    def line(cells):
        # first column left aligned, figures right aligned
        parts = [cells[0].ljust(widths[0])]
        parts.extend(cell.rjust(width) for cell, width in zip(cells[1:],
            widths[1:]))
        return '  '.join(parts)

    title = name
    header = line(headers)
    if colour:
        title = fg('yellow') + attr('bold') + title + attr('reset')
        header = attr('bold') + header + attr('reset')

    lines = [title, header, '-' * sum(widths + [2 * (len(widths) - 1)])]
    lines.extend(line(row) for row in rows)
    return '\n'.join(lines) + '\n'


def _json_table(ledgers, columns):
    return [{header:getter(ledger) for header, getter, _ in columns} for
        ledger in ledgers]


def render_table(ledgers, name, fmt='text', colour=False):
    """Renders a single table.

    :param ledgers: list of :class:`opfgap.ledger.BoundLedger`
    :param name: key of :data:`TABLES`
    :param fmt: 'text', 'csv' or 'json'
    :param colour: ANSI colour for the text format
    """
    if name not in TABLES:
        raise ValueError(f'unknown table "{name}"')

    columns = TABLES[name]
    if fmt == 'text':
        return _text_table(ledgers, name, columns, colour)
    if fmt == 'csv':
        return _csv_table(ledgers, columns)
    if fmt == 'json':
        return json.dumps(_json_table(ledgers, columns), indent=2) + '\n'

    raise ValueError(f'unknown format "{fmt}"')


def render_tables(ledgers, fmt='text', table=None, colour=False):
    """Renders several tables.

    :param ledgers: list of :class:`opfgap.ledger.BoundLedger`
    :param fmt: 'text', 'csv' or 'json'
    :param table: a table name, a list of names, or None for all of them
    :param colour: ANSI colour for the text format

    JSON output is a single object keyed by table name. Text and CSV tables
    are separated by a blank line.
    """
    if table is None:
        names = list(TABLES)
    elif isinstance(table, str):
        names = [table]
    else:
        names = list(table)

    if fmt == 'json':
        for name in names:
            if name not in TABLES:
                raise ValueError(f'unknown table "{name}"')

        return json.dumps({name:_json_table(ledgers, TABLES[name]) for name
            in names}, indent=2) + '\n'

    return '\n'.join(render_table(ledgers, name, fmt, colour) for name in
        names)
