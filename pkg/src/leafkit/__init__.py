"""leafkit: dataset engineering and evaluation toolkit for plant leaf
disease classification experiments.

Subpackages and modules:

- ``tensorkit``: SiLU/attention numerical kernels and parameter accounting
- ``augment``: deterministic image augmentation (ops, plans, execution)
- ``dataset``: manifest construction, class cleanup, splits, balancing
- ``metrics``: confusion-matrix metrics and leaderboard aggregation
- ``protoclass``: nearest-prototype one/few-shot classification
- ``harness``: two-phase train/evaluate control loop over abstract trainers
- ``cli``: the ``leafkit`` command-line entry point
"""

__version__ = "0.1.0"
