"""
QCQP Module (opfgap.qcqp)
=========================

The AC-OPF as a quadratically constrained quadratic program over the bus
voltages, its triplet text format and its Shor relaxation in SDPA format.
"""
