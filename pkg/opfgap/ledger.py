"""
Bound Ledger (opfgap.ledger.py)
===============================

Runs the analysis over a batch of case files and records one
:class:`BoundLedger` per case: its figures, the DC lower bound, the AC
upper bounds per flow mode, the gap and the QCQP sizes.

A failing case never stops the batch, it becomes an error record instead.
With ``jobs > 1`` cases run in worker processes; results are always
returned in input order.
"""
import json, logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from opfgap.bounds import dcopf_no_flow_limits, gap_percent, NOT_VALID
from opfgap.matpower import load_case, clamp_negative_pmin
from opfgap.network import build_network, build_admittance
from opfgap.powerflow.acopf import local_acopf
from opfgap.powerflow.limits import FLOW_MODES
from opfgap.powerflow.newton import solve_powerflow
from opfgap.qcqp.export import save_qcqp
from opfgap.qcqp.problem import build_qcqp
from opfgap.qcqp.sdpa import save_sdpa
from opfgap.scribe import TABLES, render_table
from opfgap.settings import merge_config, solver_options
from opfgap.stats import compute_stats, emit_profiles

logger = logging.getLogger(__name__)

VERBS = ('stats', 'bounds', 'qcqp', 'sdpa', 'profiles', 'all')

# =============================================================================

class BoundLedger:
    """Everything computed for one case. Values that were not computed for
    the requested verb stay None.

    MW quantities: `total_load`, `dcopf_lb`, `pf_objective` and the values
    of `acopf` (flow mode to objective). `gap` is a percentage or
    ``'not valid'``.
    """
    FIELDS = ('case', 'verb', 'n_bus', 'n_gen', 'n_branch', 'n_transformer',
        'voltage_level_histogram', 'voltage_levels', 'n_neg_r', 'n_neg_x',
        'total_load', 'dcopf_lb', 'lb_valid', 'lb_reason', 'pf_objective',
        'pf_converged', 'acopf', 'acopf_quality', 'gap', 'gap_flow_mode',
        'representation', 'n_var', 'n_eq', 'n_ineq', 'sparsity', 'warnings')

    def __init__(self, case, **kwargs):
        for field in self.FIELDS:
            setattr(self, field, None)

        self.case = case
        self.acopf = {}
        self.acopf_quality = {}
        self.warnings = []

        for key, value in kwargs.items():
            if key not in self.FIELDS:
                raise AttributeError(f'BoundLedger has no field "{key}"')
            setattr(self, key, value)

    def __repr__(self):
        return f'BoundLedger("{self.case}", gap={self.gap})'

    def as_dict(self):
        return {field:getattr(self, field) for field in self.FIELDS}

# =============================================================================
# Per Case
# =============================================================================

def _output_file(out, name, suffix):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return str(path / f'{name}{suffix}')


def _record_stats(ledger, stats):
    ledger.n_bus = stats.n_bus
    ledger.n_gen = stats.n_gen
    ledger.n_branch = stats.n_branch
    ledger.n_transformer = stats.n_transformer
    ledger.voltage_level_histogram = stats.voltage_level_histogram
    ledger.voltage_levels = stats.voltage_levels
    ledger.n_neg_r = stats.n_neg_r
    ledger.n_neg_x = stats.n_neg_x
    ledger.total_load = stats.total_load


def _record_bounds(ledger, net, case, adm, config):
    lb = dcopf_no_flow_limits(net, raw_case=case)
    ledger.dcopf_lb = lb.value
    ledger.lb_valid = lb.valid
    ledger.lb_reason = lb.reason

    pf = solve_powerflow(net, config['start'], config['pf_tol'],
        config['pf_max_iter'], adm)
    ledger.pf_converged = pf.converged
    if pf.converged:
        ledger.pf_objective = pf.objective

    flow_mode = config['flow_mode']
    modes = FLOW_MODES if flow_mode == 'all' else (flow_mode,)
    options = solver_options(config)
    for mode in modes:
        sol = local_acopf(net, pf, mode, options, adm)
        ledger.acopf_quality[mode] = sol.quality
        ledger.acopf[mode] = sol.objective if sol.converged else None

    ledger.gap_flow_mode = 'none' if 'none' in modes else flow_mode
    ub = ledger.acopf[ledger.gap_flow_mode]
    if not lb.valid:
        ledger.gap = NOT_VALID
    elif ub is not None:
        ledger.gap = gap_percent(lb, ub)


def process_case(path, config, verb='all'):
    """Runs `verb` on one case file.

    :param path: MATPOWER case file
    :param config: settings dict, see :mod:`opfgap.settings`
    :param verb: one of :data:`VERBS`

    :returns: :class:`BoundLedger`
    """
    if verb not in VERBS:
        raise ValueError(f'unknown verb "{verb}"')

    case = load_case(path)
    logger.info('%s: loaded from %s', case.name, path)
    if config.get('clamp_pmin'):
        case, _ = clamp_negative_pmin(case)

    net = build_network(case)
    adm = build_admittance(net)
    out = config.get('out')

    ledger = BoundLedger(case.name, verb=verb)
    ledger.warnings = list(net.warnings)
    stats = compute_stats(net, case)
    _record_stats(ledger, stats)

    if verb in ('profiles', 'all') and out:
        profiles = emit_profiles(stats)
        for suffix, text in (('_impedance.csv', profiles.impedance),
                ('_voltage.csv', profiles.voltage)):
            with open(_output_file(out, case.name, suffix), 'w',
                    encoding='utf-8', newline='') as f:
                f.write(text)

    if verb in ('bounds', 'all'):
        _record_bounds(ledger, net, case, adm, config)

    if verb in ('qcqp', 'sdpa', 'all'):
        problem = build_qcqp(net, config['representation'], adm)
        ledger.representation = problem.representation
        ledger.n_var = problem.n_var
        ledger.n_eq = problem.n_eq
        ledger.n_ineq = problem.n_ineq
        ledger.sparsity = problem.sparsity

        if out and verb in ('qcqp', 'all'):
            save_qcqp(problem, _output_file(out, case.name, '.qcqp'))
        if out and verb in ('sdpa', 'all'):
            save_sdpa(problem.real(), _output_file(out, case.name, '.dat-s'))

    logger.info('%s: done', case.name)
    return ledger


def _run_case(args):
    path, config, verb = args
    try:
        return process_case(path, config, verb), None
    except (ValueError, OSError) as e:
        logger.error('%s: %s', path, e)
        return None, (str(path), str(e))
    except Exception as e:
        # any other failure stays with its case too
        logger.exception('%s: unexpected failure', path)
        return None, (str(path), str(e))

# =============================================================================
# Batch
# =============================================================================

def _write_batch(out, ledgers, errors):
    with open(_output_file(out, 'ledger', '.json'), 'w',
            encoding='utf-8') as f:
        json.dump({
            'cases':[ledger.as_dict() for ledger in ledgers],
            'errors':[{'path':path, 'error':message} for path, message in
                errors],
        }, f, indent=2)
        f.write('\n')

    for name in TABLES:
        with open(_output_file(out, name, '.csv'), 'w', encoding='utf-8',
                newline='') as f:
            f.write(render_table(ledgers, name, 'csv'))


def run_pipeline(paths, config=None, verb='all'):
    """Runs `verb` over every case file.

    :param paths: list of MATPOWER case files
    :param config: settings overrides, layered on
                   :data:`opfgap.settings.settings`
    :param verb: one of :data:`VERBS`

    :returns: tuple (ledgers, errors, status); `errors` holds (path,
              message) tuples and `status` is 1 when any case failed,
              otherwise 0

    :raises ConfigError: a setting is unknown or has a bad value
    """
    if verb not in VERBS:
        raise ValueError(f'unknown verb "{verb}"')

    config = merge_config(config)
    jobs = [(path, config, verb) for path in paths]

    if config['jobs'] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config['jobs']) as executor:
            results = list(executor.map(_run_case, jobs))
    else:
        results = [_run_case(job) for job in jobs]

    ledgers = [ledger for ledger, _ in results if ledger is not None]
    errors = [error for _, error in results if error is not None]

    if config.get('out'):
        _write_batch(config['out'], ledgers, errors)

    status = 1 if errors else 0
    logger.info('%d cases done, %d failed', len(ledgers), len(errors))
    return ledgers, errors, status
