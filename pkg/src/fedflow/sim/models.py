"""Stochastic and fluid models behind the simulated platform.

Queue waits are lognormal parameterized by their median (median = exp(mu),
so sigma = 0 degenerates to a constant). App runtimes are normals truncated
to positive values by resampling. Transfers follow a fluid model: a task
moving n files runs at rate x min(n, streams)/streams, so small batches
underuse the route and task-level concurrency is the only way past the
per-task ceiling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fedflow.core.errors import ConfigError


class UnknownQueue(ConfigError):
    pass


class UnknownApp(ConfigError):
    pass


@dataclass(frozen=True)
class QueueDelayModel:
    median: float  # seconds
    sigma: float = 1.0

    def __post_init__(self):
        if self.median < 0 or self.sigma < 0:
            raise ConfigError("queue delay median and sigma must be >= 0")


@dataclass(frozen=True)
class RuntimeModel:
    mean: float  # seconds
    sd: float = 0.0

    def __post_init__(self):
        if self.mean <= 0 or self.sd < 0:
            raise ConfigError("runtime mean must be > 0 and sd >= 0")


@dataclass(frozen=True)
class RouteSpec:
    rate_mbps: float  # per-task ceiling, MB/s
    latency: float = 0.0  # seconds of per-task setup
    per_task_streams: int = 4
    max_active_tasks: int = 3

    def __post_init__(self):
        if self.rate_mbps <= 0:
            raise ConfigError("route rate must be > 0")
        if self.latency < 0 or self.per_task_streams < 1 or self.max_active_tasks < 1:
            raise ConfigError("route latency/streams/active limits out of range")


def sample_queue_delay(model: QueueDelayModel, rng: np.random.Generator) -> float:
    if model.sigma == 0.0:
        return model.median
    return float(model.median * np.exp(model.sigma * rng.standard_normal()))


def sample_runtime(model: RuntimeModel, rng: np.random.Generator) -> float:
    if model.sd == 0.0:
        return model.mean
    while True:
        x = float(rng.normal(model.mean, model.sd))
        if x > 0.0:
            return x


def sample_positive_normal(mean: float, sd: float, rng: np.random.Generator) -> float:
    """Truncated-at-zero normal; mean/sd may describe a non-runtime quantity."""
    if sd == 0.0:
        return mean
    while True:
        x = float(rng.normal(mean, sd))
        if x > 0.0:
            return x


def effective_task_rate(route: RouteSpec, n_files: int) -> float:
    share = min(n_files, route.per_task_streams) / route.per_task_streams
    return route.rate_mbps * min(share, 1.0)


def task_duration(route: RouteSpec, n_files: int, total_mb: float) -> float:
    if n_files <= 0:
        return route.latency
    return route.latency + total_mb / effective_task_rate(route, n_files)
