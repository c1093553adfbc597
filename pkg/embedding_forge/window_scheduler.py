"""
Context-window strategies.

Fixed          r for every center.
RandomDynamic  r' drawn uniformly from 1..r for each center word, so offset
               |i| is used with probability (r - |i| + 1) / r.
EpochBased     EDWS: r'_k = ceil(P k / K) * r / P for 1-based epoch k, with
               P phases (3 by default, window ratio 1:2:3) of equal length.
"""
from dataclasses import dataclass
from enum import Enum
from typing import List

import numpy as np

from .errors import ScheduleError

DEFAULT_PHASES = 3


class WindowStrategy(str, Enum):
    FIXED = "fixed"
    RANDOM_DYNAMIC = "random"
    EPOCH_BASED = "edws"


@dataclass(frozen=True)
class WindowSchedule:
    strategy: WindowStrategy
    max_window: int
    total_epochs: int = 1
    phase_count: int = DEFAULT_PHASES

    def __post_init__(self):
        object.__setattr__(self, "strategy", WindowStrategy(self.strategy))
        if self.max_window < 1:
            raise ScheduleError(f"max window must be >= 1, got {self.max_window}")
        if self.total_epochs < 1:
            raise ScheduleError(f"total epochs must be >= 1, got {self.total_epochs}")
        if self.strategy is WindowStrategy.EPOCH_BASED:
            if self.phase_count < 1:
                raise ScheduleError(f"phase count must be >= 1, got {self.phase_count}")
            if self.total_epochs % self.phase_count or self.max_window % self.phase_count:
                raise ScheduleError(
                    f"EDWS needs epochs ({self.total_epochs}) and window ({self.max_window}) to be "
                    f"multiples of the phase count ({self.phase_count}); e.g. --epochs 6 --window 15 "
                    f"for 3 phases, or change --edws-phases"
                )


def window_for_center(schedule: WindowSchedule, rng: np.random.Generator) -> int:
    """One uniform draw of r' from 1..r."""
    if schedule.strategy is not WindowStrategy.RANDOM_DYNAMIC:
        raise ScheduleError(f"window_for_center needs the random strategy, got {schedule.strategy.value}")
    return int(rng.integers(1, schedule.max_window + 1))


def window_for_epoch(schedule: WindowSchedule, k: int) -> int:
    """EDWS window for 1-based epoch k."""
    if schedule.strategy is not WindowStrategy.EPOCH_BASED:
        raise ScheduleError(f"window_for_epoch needs the edws strategy, got {schedule.strategy.value}")
    if not 1 <= k <= schedule.total_epochs:
        raise ScheduleError(f"epoch must be in 1..{schedule.total_epochs}, got {k}")
    phases = schedule.phase_count
    phase = -(-phases * k // schedule.total_epochs)
    return phase * (schedule.max_window // phases)


def epoch_window(schedule: WindowSchedule, k: int) -> int:
    """Upper bound in effect for epoch k under any strategy."""
    if schedule.strategy is WindowStrategy.EPOCH_BASED:
        return window_for_epoch(schedule, k)
    return schedule.max_window


def schedule_table(schedule: WindowSchedule) -> List[int]:
    return [epoch_window(schedule, k) for k in range(1, schedule.total_epochs + 1)]
