"""Python bindings for the tracklabel engine.

Structured values (configs, queries, metrics) cross the boundary as JSON;
these wrappers turn them into dicts.
"""

import json

from tracklabel import _core
from tracklabel._core import OracleAnnotator, Sequence, TracklabelError, entropy

__all__ = [
    "OracleAnnotator",
    "Sequence",
    "TracklabelError",
    "allocate_budget",
    "entropy",
    "evaluate",
    "full_manual_cost",
    "generate",
    "interp_benchmark",
    "interp_study",
    "oracle_answer",
    "pipeline_target",
    "run_pipeline",
    "standard_benchmark",
]


def allocate_budget(budget, levels, policy="mot17-style"):
    return json.loads(_core.allocate_budget(budget, levels, policy))


def full_manual_cost(gt_text):
    return _core.full_manual_cost(gt_text)


def evaluate(pred_text, gt_text):
    return json.loads(_core.evaluate(pred_text, gt_text))


def standard_benchmark(seed_index):
    return json.loads(_core.standard_benchmark(seed_index))


def interp_benchmark():
    return json.loads(_core.interp_benchmark())


def generate(world=None):
    return _core.generate(json.dumps(world or {}))


def pipeline_target(config):
    return _core.pipeline_target(json.dumps(config))


def oracle_answer(oracle, query):
    """Answer a query dict (as served by the session service)."""
    return json.loads(oracle.answer(json.dumps(query)))


def run_pipeline(config, out_dir="", stop_after="evaluate"):
    return json.loads(_core.run_pipeline(json.dumps(config), str(out_dir), stop_after))


def interp_study(world, ratios=(1.0, 0.5, 0.2, 0.1, 0.05)):
    return json.loads(_core.interp_study(json.dumps(world), list(ratios)))
