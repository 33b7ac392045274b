"""Convex-hull geometry probes for labeled embeddings."""

import json

from ._core import *  # noqa: F401,F403
from ._core import ClusterSet, cross_task_report as _cross_task_report, track_series as _track_series


def cluster_json(cs: ClusterSet) -> dict:
    return json.loads(cs.to_json())


def cross_task(baseline: ClusterSet, tuned: ClusterSet) -> dict:
    return json.loads(_cross_task_report(baseline, tuned))


def track(run_dir, config=None, threads=1) -> dict:
    if config is None:
        config = SeparabilityConfig()  # noqa: F405
    return json.loads(_track_series(str(run_dir), config, threads))
