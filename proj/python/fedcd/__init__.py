"""Federated cognitive-diagnosis simulator.

Thin wrapper over the compiled `_fedcd` module. The heavy lifting (data
generation, the federated round loop, metrics) happens in C++; this package
just re-exports the operations and keeps JSON plumbing pythonic.
"""

import json as _json

try:  # installed layout: the extension lives inside the package
    from ._fedcd import (  # noqa: F401
        FedcdError,
        __version__,
        accuracy,
        auc,
        compare_runs,
        fairness_weights,
        generate_dataset,
        group_fairness,
        rmse,
    )
    from ._fedcd import run_experiment as _run_experiment
except ImportError:  # build-tree layout: extension on sys.path
    from _fedcd import (  # noqa: F401
        FedcdError,
        __version__,
        accuracy,
        auc,
        compare_runs,
        fairness_weights,
        generate_dataset,
        group_fairness,
        rmse,
    )
    from _fedcd import run_experiment as _run_experiment


def run_experiment(config):
    """Run a full experiment.

    `config` may be a dict or a JSON string; returns the run record as a dict.
    """
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _json.loads(_run_experiment(config))


__all__ = [
    "FedcdError",
    "__version__",
    "accuracy",
    "auc",
    "compare_runs",
    "fairness_weights",
    "generate_dataset",
    "group_fairness",
    "rmse",
    "run_experiment",
]
