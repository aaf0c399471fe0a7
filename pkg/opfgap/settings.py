"""
Settings (opfgap.settings.py)
=============================

Defines the default settings used by :func:`opfgap.ledger.run_pipeline` and
the solvers. A JSON config file can override any of them, command line
flags override the file.
"""
import json

# =============================================================================

class ConfigError(ValueError):
    pass


settings = {
    # branch flow limits used by the AC-OPF: 'S' (apparent power), 'I'
    # (current), 'none', or 'all' to solve once per mode
    'flow_mode':'none',

    # QCQP variables: 'real' (e and f parts) or 'complex' (bus voltages)
    'representation':'real',

    # power flow starting voltages: 'case' uses Vm/Va from the file, 'flat'
    # uses 1 pu and 0 rad
    'start':'case',

    # Newton power flow mismatch tolerance (pu) and iteration limit
    'pf_tol':1e-8,
    'pf_max_iter':30,

    # interior point tolerances: feasibility (pu), gradient and
    # complementarity, relative step length
    'feastol':5e-6,
    'opttol':1e-4,
    'xtol':1e-8,

    # interior point iteration limit
    'max_iter':1000,

    # barrier reduction factor
    'sigma':0.2,

    # fraction of the step to the boundary that is taken
    'xi':0.99995,

    # number of worker processes, 1 runs every case in this process
    'jobs':1,

    # ANSI colour in text tables
    'colour':True,

    # directory for exported files, None writes nothing
    'out':None,

    # replace negative Pmin values by 0 before building the network
    'clamp_pmin':False,
}

SOLVER_KEYS = ('feastol', 'opttol', 'xtol', 'max_iter', 'sigma', 'xi')

# allowed values of the settings that take a fixed set of names
CHOICES = {
    'flow_mode':('S', 'I', 'none', 'all'),
    'representation':('complex', 'real'),
    'start':('flat', 'case'),
}


def load_config(filename):
    """Reads a JSON object of settings overrides.

    :raises ConfigError: the file is not a JSON object or names a key that
                         is not in :data:`settings`
    """
    with open(filename) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f'{filename}: not valid JSON ({e})')

    if not isinstance(data, dict):
        raise ConfigError(f'{filename}: expected a JSON object')

    unknown = sorted(set(data) - set(settings))
    if unknown:
        raise ConfigError(f'{filename}: unknown settings {unknown}')

    return data


def merge_config(overrides=None, filename=None):
    """Layers the defaults, an optional config file and explicit overrides.
    Overrides whose value is None are ignored.

    :param overrides: dict, typically from parsed command line flags
    :param filename: optional JSON config file
    """
    config = dict(settings)
    if filename:
        config.update(load_config(filename))

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in settings:
            raise ConfigError(f'unknown setting "{key}"')

        config[key] = value

    for key, allowed in CHOICES.items():
        if config[key] not in allowed:
            raise ConfigError((f'bad value "{config[key]}" for {key}, '
                f'expected one of {", ".join(allowed)}'))

    return config


def solver_options(config=None):
    """The interior point subset of a config dict."""
    config = config or settings
    return {key:config.get(key, settings[key]) for key in SOLVER_KEYS}
