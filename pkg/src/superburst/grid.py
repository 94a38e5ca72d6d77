"""Time grid for the fixed-step integrator.

The grid is piecewise uniform: a fine step during the excitation pulse
(t <= 0) and a coarser step during the decay (t > 0). t = 0, the pulse
switch-off, is always a grid node.

Every sampled quantity is stored as a *stage array* of shape
(..., n_steps, 3): its value at the left node, the midpoint, and the
right node of each step, where the boundary values are one-sided limits
taken from inside the step. This representation does two things:

* discontinuous drives (rectangular pulse edges) stay exact, because no
  integrator stage ever straddles a jump;
* the classical RK4 step, which needs the drive at t, t + h/2 and t + h,
  gets exact stage samples, so cascading grid-sampled fields from atom
  to atom keeps the full fourth-order accuracy.

Node-resolution views use the right-limit convention: the value reported
at a node is the limit from the following step (the last node uses the
final left-limit). At t = 0 this reports the pulse-off value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_ALIGN_TOL = 1e-9


def _segment_count(length: float, dt: float, what: str) -> int:
    n = int(round(length / dt))
    if n < 1 or abs(n * dt - length) > _ALIGN_TOL * max(1.0, length):
        raise ConfigError(
            f"{what}: step {dt} does not evenly divide the interval of length {length}"
        )
    return n


@dataclass(frozen=True)
class TimeGrid:
    """User-facing grid specification (times in ns).

    dt_pulse applies for t <= 0, dt_decay for t > 0. A single-step grid
    can be built with TimeGrid.uniform().
    """

    t_start: float
    t_end: float
    dt_pulse: float = 0.02
    dt_decay: float = 0.1

    def __post_init__(self) -> None:
        if not self.t_start < self.t_end:
            raise ConfigError("need t_start < t_end")
        if self.t_start > 0.0 or self.t_end < 0.0:
            raise ConfigError("the grid must contain t = 0 (pulse switch-off)")
        if self.dt_pulse <= 0.0 or self.dt_decay <= 0.0:
            raise ConfigError("time steps must be positive")

    @staticmethod
    def uniform(t_start: float, t_end: float, dt: float) -> "TimeGrid":
        return TimeGrid(t_start, t_end, dt, dt)

    def build(self) -> "StepGrid":
        return StepGrid(self)


@dataclass(frozen=True)
class StepGrid:
    """Concrete node/stage layout derived from a TimeGrid."""

    spec: TimeGrid
    nodes: np.ndarray = field(init=False, repr=False)
    h: np.ndarray = field(init=False, repr=False)
    mids: np.ndarray = field(init=False, repr=False)
    i_zero: int = field(init=False)

    def __post_init__(self) -> None:
        tg = self.spec
        parts = []
        n_pre = 0
        if tg.t_start < 0.0:
            n_pre = _segment_count(-tg.t_start, tg.dt_pulse, "pulse segment")
            parts.append(np.linspace(tg.t_start, 0.0, n_pre + 1))
        if tg.t_end > 0.0:
            n_post = _segment_count(tg.t_end, tg.dt_decay, "decay segment")
            post = np.linspace(0.0, tg.t_end, n_post + 1)
            parts.append(post if not parts else post[1:])
        nodes = np.concatenate(parts)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "h", np.diff(nodes))
        object.__setattr__(self, "mids", 0.5 * (nodes[:-1] + nodes[1:]))
        object.__setattr__(self, "i_zero", n_pre)

    @property
    def n_steps(self) -> int:
        return len(self.h)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def times(self) -> np.ndarray:
        return self.nodes

    @property
    def times_decay(self) -> np.ndarray:
        """Node times from t = 0 on."""
        return self.nodes[self.i_zero :]

    def stage_times(self) -> np.ndarray:
        """(n_steps, 3) array of left/mid/right times per step."""
        return np.stack([self.nodes[:-1], self.mids, self.nodes[1:]], axis=-1)

    def sample_stages(self, fn) -> np.ndarray:
        """Stage-sample a continuous vectorized function of time."""
        return fn(self.stage_times())

    def node_values(self, stages: np.ndarray) -> np.ndarray:
        """Right-limit node view of a stage array (..., n_steps, 3)."""
        out = np.empty(stages.shape[:-2] + (self.n_nodes,), dtype=stages.dtype)
        out[..., :-1] = stages[..., :, 0]
        out[..., -1] = stages[..., -1, 2]
        return out

    def integrate(self, stages: np.ndarray, start_step: int = 0) -> np.ndarray:
        """Simpson integral of a stage array over steps[start_step:]."""
        w = self.h[start_step:] / 6.0
        f = stages[..., start_step:, :]
        per_step = w * (f[..., 0] + 4.0 * f[..., 1] + f[..., 2])
        return per_step.sum(axis=-1)

    def integrate_decay(self, stages: np.ndarray) -> np.ndarray:
        """Simpson integral over t > 0 only."""
        return self.integrate(stages, start_step=self.i_zero)

    def index_of(self, t: float) -> int:
        """Index of the node closest to time t."""
        i = int(np.argmin(np.abs(self.nodes - t)))
        return i
