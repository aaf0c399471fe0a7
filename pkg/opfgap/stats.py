"""
Case Statistics (opfgap.stats.py)
=================================

Descriptive figures of a case: element counts, buses per voltage class,
branches with negative resistance or reactance, total load, and the
impedance and voltage profiles used for plotting.

Counts are taken over the raw tables, out-of-service rows included, so they
describe the published files rather than the energized network.
"""
import csv, io
from collections import namedtuple

import numpy as np

from opfgap.matpower import (BUS_I, PD, VM, VA, BASE_KV, BR_R, BR_X,
    is_transformer)

# =============================================================================

# (label, lower bound in kV, lower bound inclusive)
VOLTAGE_CLASSES = [
    ('>=330', 330.0, True),
    ('220-225', 200.0, True),
    ('90-154', 63.0, False),
    ('45-63', 27.0, False),
    ('<=27', -np.inf, False),
]

# radii of the rings drawn on voltage plots
VOLTAGE_RINGS = (0.9, 1.1)

Profiles = namedtuple('Profiles', ['impedance', 'voltage'])


def voltage_class(base_kv):
    """Returns the index into :data:`VOLTAGE_CLASSES` for each voltage."""
    base_kv = np.asarray(base_kv, dtype=float)
    result = np.full(base_kv.shape, len(VOLTAGE_CLASSES) - 1)
    for count, (_, lower, inclusive) in reversed(
            list(enumerate(VOLTAGE_CLASSES[:-1]))):
        above = base_kv >= lower if inclusive else base_kv > lower
        result[above] = count

    return result


class CaseStats:
    """Figures describing a single case.

    :param name: case name
    :param n_bus, n_gen, n_branch, n_transformer: table row counts
    :param voltage_level_histogram: dict of voltage class label to count
    :param voltage_levels: distinct base voltages present, descending
    :param n_neg_r, n_neg_x: branches with r < 0 and x < 0
    :param total_load: sum of Pd in MW
    :param impedance_profile: |r + jx| of every branch, descending
    :param voltage_profile: list of (bus id, complex voltage) tuples
    :param n_bus_in_service: buses kept in the energized network
    """
    def __init__(self, name, n_bus, n_gen, n_branch, n_transformer,
            voltage_level_histogram, voltage_levels, n_neg_r, n_neg_x,
            total_load, impedance_profile, voltage_profile,
            n_bus_in_service=None):
        self.name = name
        self.n_bus = n_bus
        self.n_gen = n_gen
        self.n_branch = n_branch
        self.n_transformer = n_transformer
        self.voltage_level_histogram = voltage_level_histogram
        self.voltage_levels = voltage_levels
        self.n_neg_r = n_neg_r
        self.n_neg_x = n_neg_x
        self.total_load = total_load
        self.impedance_profile = impedance_profile
        self.voltage_profile = voltage_profile
        self.n_bus_in_service = n_bus_in_service

    def __repr__(self):
        return (f'CaseStats("{self.name}", {self.n_bus}, {self.n_gen}, '
            f'{self.n_branch}, {self.n_transformer})')


def compute_stats(net, case):
    """Computes the :class:`CaseStats` of a case.

    :param net: the :class:`opfgap.network.Network` built from `case`, or
                None when only the raw figures are wanted
    :param case: :class:`opfgap.matpower.CaseData`
    """
    bus, branch = case.bus, case.branch

    classes = voltage_class(bus[:, BASE_KV])
    counts = np.bincount(classes, minlength=len(VOLTAGE_CLASSES))
    histogram = {label:int(count) for (label, _, _), count in
        zip(VOLTAGE_CLASSES, counts)}

    levels = sorted(set(bus[:, BASE_KV].tolist()), reverse=True)

    z = np.abs(branch[:, BR_R] + 1j * branch[:, BR_X])
    impedance = sorted(z.tolist(), reverse=True)

    v = bus[:, VM] * np.exp(1j * np.deg2rad(bus[:, VA]))
    voltage = list(zip(bus[:, BUS_I].astype(int).tolist(), v.tolist()))

    return CaseStats(
        name=case.name,
        n_bus=len(bus),
        n_gen=len(case.gen),
        n_branch=len(branch),
        n_transformer=int(is_transformer(branch).sum()),
        voltage_level_histogram=histogram,
        voltage_levels=levels,
        n_neg_r=int((branch[:, BR_R] < 0).sum()),
        n_neg_x=int((branch[:, BR_X] < 0).sum()),
        total_load=float(bus[:, PD].sum()),
        impedance_profile=impedance,
        voltage_profile=voltage,
        n_bus_in_service=None if net is None else net.n_bus,
    )

# =============================================================================
# CSV Profiles
# =============================================================================

def _csv(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def emit_profiles(stats):
    """Returns the impedance and voltage profiles as CSV text.

    :returns: :class:`Profiles` namedtuple; `impedance` has rows of
              (rank, |z|) in descending order, `voltage` has rows of
              (bus id, Re V, Im V, outside) where outside is 1 for a
              magnitude beyond the 0.9/1.1 pu rings
    """
    impedance = _csv(['rank', 'impedance'],
        [(rank, repr(z)) for rank, z in enumerate(stats.impedance_profile,
            start=1)])

    low, high = VOLTAGE_RINGS
    rows = []
    for bus_id, v in stats.voltage_profile:
        outside = int(not low <= abs(v) <= high)
        rows.append((bus_id, repr(v.real), repr(v.imag), outside))

    voltage = _csv(['bus', 're_v', 'im_v', 'outside'], rows)
    return Profiles(impedance, voltage)
