"""Time-stamped sequences of fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InsufficientDataError


@dataclass
class Trajectory:
    """Snapshots ``(times[i], fields[i])`` plus per-step scalar diagnostics.

    ``fields`` holds :class:`~sqg.spectral.SpectralField` objects, or tuples of
    them for vector-valued series (velocities, gradients).  ``diagnostics``
    maps a name to an array sampled at ``diag_times``.
    """

    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    diag_times: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    status: str = "completed"
    last_reliable_time: float | None = None
    warnings: list = field(default_factory=list)

    def append(self, t, f):
        if self.times and not t > self.times[-1]:
            raise ConfigurationError("snapshot times must be strictly increasing")
        self.times.append(float(t))
        self.fields.append(f)

    def record(self, t, **values):
        self.diag_times.append(float(t))
        for k, v in values.items():
            self.diagnostics.setdefault(k, []).append(float(v))

    def __len__(self):
        return len(self.times)

    @property
    def grid(self):
        f = self.fields[0]
        return f.grid if not isinstance(f, tuple) else f[0].grid

    @property
    def duration(self):
        return self.times[-1] - self.times[0]

    def diagnostic(self, name):
        return np.asarray(self.diag_times), np.asarray(self.diagnostics[name])

    def require(self, count=2):
        if len(self.times) < count:
            raise InsufficientDataError(
                f"need at least {count} snapshots, trajectory has {len(self.times)}"
            )
        t = np.asarray(self.times)
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("snapshot times must be strictly increasing")
        return self

    def map(self, func):
        """New trajectory with ``func`` applied to every snapshot."""
        return Trajectory(list(self.times), [func(f) for f in self.fields])

    def truncated(self, t_max):
        """Snapshots with ``t <= t_max``."""
        keep = [i for i, t in enumerate(self.times) if t <= t_max + 1e-14]
        return Trajectory([self.times[i] for i in keep], [self.fields[i] for i in keep])

    def __sub__(self, other):
        if len(self) != len(other) or not np.allclose(self.times, other.times, rtol=0, atol=1e-12):
            raise ConfigurationError("trajectories are sampled at different times")
        return Trajectory(list(self.times), [a - b for a, b in zip(self.fields, other.fields)])

    @classmethod
    def constant(cls, f, duration, count=2):
        times = np.linspace(0.0, duration, count)
        return cls(list(times), [f] * count)
