"""Deterministic simulation of a lease-coordinated personal cloud storage fleet."""

import json

from ._decloud import metrics_csv, presets, run_scenario_json


def run(preset, seed=1, **overrides):
    """Run one scenario preset; returns the result as a dict.

    Overrides mirror the CLI's --set flags, e.g. run("swrite", devices=4,
    scheme="rsa"). Values are stringified.
    """
    ov = {k: str(v) for k, v in overrides.items()}
    return json.loads(run_scenario_json(preset, seed, ov))


__all__ = ["run", "run_scenario_json", "metrics_csv", "presets"]
