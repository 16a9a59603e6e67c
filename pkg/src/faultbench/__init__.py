"""Deterministic fault-injection benchmark for tool-using agents."""

from __future__ import annotations

from faultbench.baselines import BASELINES, make_baseline
from faultbench.generator import GenerationProfile, generate, make_profile
from faultbench.model import BENCHMARK_VERSION, TaskRecord, validate_task
from faultbench.runner import FINISH, Call, EpisodeTrace, replay_trace, run_episode
from faultbench.scoring import aggregate, score_task

__version__ = "0.1.0"

__all__ = [
    "BASELINES",
    "BENCHMARK_VERSION",
    "Call",
    "EpisodeTrace",
    "FINISH",
    "GenerationProfile",
    "TaskRecord",
    "aggregate",
    "generate",
    "make_baseline",
    "make_profile",
    "replay_trace",
    "run_episode",
    "score_task",
    "validate_task",
]
