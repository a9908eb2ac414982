"""Decision-tree policies learned through iterative bounding MDPs.

Thin wrappers over the compiled ``_ibtree`` module that accept plain Python
dicts wherever the core expects JSON text.
"""

import json as _json

from . import _ibtree
from ._ibtree import CSV_HEADER, InvalidInput, ParseError, WrappedEnv as _WrappedEnv

__all__ = [
    "CSV_HEADER",
    "InvalidInput",
    "ParseError",
    "WrappedEnv",
    "evaluate_tree",
    "extract_from_run",
    "fit_tree",
    "optimal_start_value",
    "run_experiment",
    "run_trial",
    "tree_act",
    "tree_metrics",
]


def _text(value):
    return value if isinstance(value, str) else _json.dumps(value)


def _tree(value):
    return _json.loads(value)


def run_experiment(config):
    """Run all trials of a config dict; returns {"rows": [...], "failures": [...]}."""
    return _ibtree.run_experiment(_text(config))


def run_trial(config, trial=0):
    out = _ibtree.run_trial(_text(config), trial)
    out["tree"] = _tree(out["tree"])
    return out


def evaluate_tree(tree, env, episodes=100, seed=0):
    """(mean, std) of returns of ``tree`` on the base environment ``env``."""
    return _ibtree.evaluate_tree(_text(tree), _text(env), episodes, seed)


def tree_metrics(tree):
    return _ibtree.tree_metrics(_text(tree))


def tree_act(tree, features):
    return _ibtree.tree_act(_text(tree), list(features))


def optimal_start_value(config):
    return _ibtree.optimal_start_value(_text(config))


def fit_tree(features, labels, n_classes, weights=None, max_depth=None):
    return _tree(_ibtree.fit_tree(features, labels, weights or [], n_classes, max_depth))


def extract_from_run(run_dir, trial=0):
    return _tree(_ibtree.extract_from_run(str(run_dir), trial))


class WrappedEnv(_WrappedEnv):
    def __init__(self, env, ibmdp=None, seed=0):
        super().__init__(_text(env), _text(ibmdp or {}), seed)
