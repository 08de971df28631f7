"""
Piecewise-constant sample paths and their CSV form.
"""
import bisect
import csv
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO

import numpy as np

#: channel index recorded for an aggregated tau-leap update
LEAP = 0


@dataclass(frozen=True)
class TrajectoryPath:
    """Right-continuous piecewise-constant path on ``[0, t_end]``.

    ``states[i]`` is the state right after the jump at ``jump_times[i]``,
    caused by 1-based channel ``channel_indices[i]``. Phantom firings are not
    recorded. Tau-leap paths record their aggregated step updates with
    channel index :data:`LEAP`.
    """
    t_end: float
    initial_state: np.ndarray
    jump_times: np.ndarray
    channel_indices: np.ndarray
    states: np.ndarray

    @property
    def jump_count(self) -> int:
        return len(self.jump_times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1] if len(self.states) else self.initial_state

    def value_at(self, t: float) -> np.ndarray:
        """State at time ``t`` (right-continuous)."""
        index = bisect.bisect_right(self.jump_times, t)
        return self.states[index - 1] if index else self.initial_state

    def species_at(self, species: int, t: float) -> int:
        return int(self.value_at(t)[species])

    def on_grid(self, times: Sequence[float]) -> np.ndarray:
        """States at each grid time, shape ``(len(times), d)``."""
        indices = np.searchsorted(self.jump_times, np.asarray(times, dtype=float), side="right")
        table = np.vstack([self.initial_state[np.newaxis, :], self.states]) if len(self.states) \
            else self.initial_state[np.newaxis, :]
        return table[indices]

    def first_time_at(self, species: int, level: int = 0) -> Optional[float]:
        """First time the species count equals ``level``; None if it never does."""
        if self.initial_state[species] == level:
            return 0.0
        if not len(self.states):
            return None
        hits = np.flatnonzero(self.states[:, species] == level)
        return float(self.jump_times[hits[0]]) if len(hits) else None

    def jump_counts(self, channel_count: int) -> np.ndarray:
        """``R_k(t_end)`` for channels 1..K (leap records excluded)."""
        counts = np.bincount(self.channel_indices, minlength=channel_count + 1)
        return counts[1:channel_count + 1]

    def check_invariants(self, change_matrix: np.ndarray) -> None:
        """Raise AssertionError unless times, states and channel updates are consistent."""
        times = self.jump_times
        assert np.all(np.diff(times) > 0), "jump times must be strictly increasing"
        assert len(times) == 0 or (times[0] > 0 and times[-1] <= self.t_end), "jump times outside (0, T]"
        assert np.all(self.states >= 0), "negative state"
        previous = self.initial_state
        for state, channel in zip(self.states, self.channel_indices):
            if channel != LEAP:
                assert np.array_equal(state, previous + change_matrix[channel - 1]), \
                    f"state update does not match channel {channel}"
            previous = state

    def rows(self) -> Iterable[List[float]]:
        """(time, counts...) rows: t=0, one per jump, and t=T."""
        yield [0.0] + self.initial_state.tolist()
        for t, state in zip(self.jump_times.tolist(), self.states.tolist()):
            yield [t] + state
        yield [float(self.t_end)] + self.final_state.tolist()


class PathRecorder:
    """Collects jumps while a simulator runs."""

    __slots__ = ("initial_state", "times", "channels", "states")

    def __init__(self, initial_state: np.ndarray):
        self.initial_state = initial_state.copy()
        self.times: List[float] = []
        self.channels: List[int] = []
        self.states: List[np.ndarray] = []

    def record(self, t: float, channel: int, state: np.ndarray) -> None:
        self.times.append(t)
        self.channels.append(channel)
        self.states.append(state)

    def build(self, t_end: float) -> TrajectoryPath:
        d = len(self.initial_state)
        states = np.array(self.states, dtype=np.int64).reshape(len(self.states), d)
        return TrajectoryPath(
            t_end=float(t_end),
            initial_state=self.initial_state,
            jump_times=np.array(self.times, dtype=float),
            channel_indices=np.array(self.channels, dtype=np.int64),
            states=states,
        )


@dataclass(frozen=True)
class EnvironmentPath:
    """Realized Markov-modulated environment on ``[0, horizon]``.

    ``values[0]`` holds on ``[0, switch_times[0])`` and ``values[i]`` from
    ``switch_times[i-1]`` on.
    """
    switch_times: Sequence[float]
    values: Sequence[float]
    horizon: float

    def value_at(self, t: float) -> float:
        return self.values[bisect.bisect_right(self.switch_times, t)]

    @property
    def maximum(self) -> float:
        return max(self.values)


def format_number(value) -> str:
    """Shortest round-trip text for a number (``repr`` for floats)."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_path_csv(path: TrajectoryPath, species: Sequence[str], out: TextIO) -> None:
    """Write ``path`` as CSV with columns ``time, <species>...``."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["time"] + list(species))
    for row in path.rows():
        writer.writerow([format_number(row[0])] + [format_number(v) for v in row[1:]])
