"""
Command Line Tools
==================

Argument builders for the ``opfgap`` program, so each flag is defined once,
and the glue turning parsed arguments into a settings dict.

Flags default to None: only flags given on the command line override the
config file and the defaults in :mod:`opfgap.settings`.
"""
import logging

from opfgap.__init__ import __version__
from opfgap.ledger import VERBS
from opfgap.scribe import TABLES, FORMATS
from opfgap.settings import settings, merge_config, CHOICES

# =============================================================================
# Argument Builders for argparse
# =============================================================================

def verb_arg(parser):
    parser.add_argument('verb', choices=VERBS, help=('What to compute: '
        'case figures (stats), lower and upper bounds with the gap (bounds), '
        'the QCQP (qcqp), its Shor relaxation in SDPA format (sdpa), the '
        'impedance and voltage profiles (profiles) or everything (all)'))


def cases_arg(parser):
    parser.add_argument('cases', nargs='*', help='MATPOWER case files')


def flow_mode_arg(parser):
    parser.add_argument('--flow-mode', dest='flow_mode',
        choices=CHOICES['flow_mode'], help=('Branch flow limits used by '
        'the AC-OPF: apparent power (S), current (I), none, or all three. '
        f'Defaults to "{settings["flow_mode"]}"'))


def repr_arg(parser):
    parser.add_argument('--repr', dest='representation',
        choices=CHOICES['representation'], help=('QCQP variables: complex '
        'voltages or their real and imaginary parts. Defaults to '
        f'"{settings["representation"]}"'))


def out_arg(parser):
    parser.add_argument('--out', help=('Directory to write the exported '
        'problems, profiles and tables into. Nothing is written when not '
        'given'))


def start_arg(parser):
    parser.add_argument('--start', choices=CHOICES['start'], help=('Power '
        'flow starting voltages. Defaults to '
        f'"{settings["start"]}"'))


def jobs_arg(parser):
    parser.add_argument('--jobs', type=int, help=('Number of cases to '
        'process in parallel'))


def config_arg(parser):
    parser.add_argument('--config', help=('JSON file of settings, command '
        'line flags take precedence'))


def format_arg(parser):
    parser.add_argument('--format', choices=FORMATS, default='text',
        help='Table output format')


def table_arg(parser):
    parser.add_argument('--table', choices=list(TABLES), action='append',
        help=('Table to print, may be repeated. Defaults to the tables of '
        'the chosen verb'))


def clamp_arg(parser):
    parser.add_argument('--clamp-pmin', dest='clamp_pmin',
        action='store_const', const=True, help=('Replace negative generator '
        'Pmin values by 0 before analysis'))


def colour_arg(parser):
    parser.add_argument('--no-colour', dest='colour', action='store_const',
        const=False, help='Plain text tables without ANSI colour')


def verbosity_args(parser):
    parser.add_argument('-v', '--verbose', action='count', default=0,
        help='More logging, repeat for debug output')
    parser.add_argument('-q', '--quiet', action='store_true',
        help='Only log errors')


def version_arg(parser):
    parser.add_argument('--version', action='version',
        version='%(prog)s {version}'.format(version=__version__ ))


def tolerance_args(parser):
    parser.add_argument('--feastol', type=float, help=('Interior point '
        f'feasibility tolerance in pu. Defaults to {settings["feastol"]}'))
    parser.add_argument('--opttol', type=float, help=('Interior point '
        'gradient and complementarity tolerance. Defaults to '
        f'{settings["opttol"]}'))
    parser.add_argument('--xtol', type=float, help=('Interior point relative '
        f'step termination. Defaults to {settings["xtol"]}'))
    parser.add_argument('--max-iter', dest='max_iter', type=int,
        help=('Interior point iteration limit. Defaults to '
        f'{settings["max_iter"]}'))

# =============================================================================
# Meta Argument Builders
# =============================================================================

def general_args(parser):
    config_arg(parser)
    verbosity_args(parser)
    version_arg(parser)


def solver_args(parser):
    flow_mode_arg(parser)
    start_arg(parser)
    tolerance_args(parser)


def output_args(parser):
    repr_arg(parser)
    out_arg(parser)
    format_arg(parser)
    table_arg(parser)
    colour_arg(parser)

# =============================================================================
# Glue
# =============================================================================

def config_from_args(args):
    """Settings dict from the defaults, the --config file and the flags."""
    overrides = {key:value for key, value in vars(args).items() if key in
        settings}
    return merge_config(overrides, getattr(args, 'config', None))


def configure_logging(args):
    level = logging.WARNING
    if args.quiet:
        level = logging.ERROR
    elif args.verbose == 1:
        level = logging.INFO
    elif args.verbose > 1:
        level = logging.DEBUG

    logging.basicConfig(level=level,
        format='%(levelname)s %(name)s: %(message)s')
