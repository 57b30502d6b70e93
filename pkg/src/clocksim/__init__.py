"""Parallel-in-time quantum simulation toolkit.

Subpackages cover the dense linear-algebra substrate (`qcore`), model
builders (`hamiltonians`), history states and system-time entanglement
(`histstate`), clock-register estimator circuits (`protocols`), the
large-n free-fermion engine (`freefermion`), Cartan-ansatz variational
diagonalization (`vhd`), gate-count models (`depth`), and the batch
experiment runner (`cli`).
"""

__version__ = "0.1.0"
