# sampling/records.py
from dataclasses import dataclass, field

import numpy as np

from .exceptions import StaleBufferError


@dataclass(frozen=True)
class ScoreBuffer:
    """The buffer Q: p score batches tagged with the interval they were computed for"""
    scores: tuple
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.scores:
            raise StaleBufferError('A score buffer holds at least one score batch')
        if not self.t_end < self.t_start:
            raise StaleBufferError(f"Buffer interval must descend, got ({self.t_start}, {self.t_end})")

    @property
    def order(self):
        return len(self.scores)

    @property
    def tag(self):
        return (self.t_start, self.t_end)


@dataclass
class TrajectoryRecord:
    """States of a batch of chains at recorded time indices"""
    times: np.ndarray
    states: np.ndarray
    chain_ids: np.ndarray
    scores: np.ndarray = None
    grid: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        self.states = np.asarray(self.states, dtype=np.float64)
        self.chain_ids = np.asarray(self.chain_ids, dtype=np.int64)
        if len(self.states) != len(self.times):
            raise ValueError(f"{len(self.states)} recorded states for {len(self.times)} time points")
        if self.scores is not None and np.shape(self.scores) != self.states.shape:
            raise ValueError('Scores must align with recorded states')

    @property
    def endpoint(self):
        return self.states[-1]

    @property
    def n_chains(self):
        return self.states.shape[1]

    @property
    def dim(self):
        return self.states.shape[2]

    def _index(self, t):
        hits = np.flatnonzero(self.times == t)
        if not len(hits):
            raise KeyError(t)
        return hits[0]

    def at(self, t):
        """States recorded at time index t"""
        return self.states[self._index(t)]

    def score_at(self, t):
        if self.scores is None:
            raise KeyError(f"No scores logged at {t}")
        return self.scores[self._index(t)]


@dataclass
class SampleResult:
    """Endpoint, recorded trajectory and NFE accounting of one sampling run"""
    x_0: np.ndarray
    trajectory: TrajectoryRecord
    nfe_batches: int
    nfe_evals: int
