"""Shared numeric substrate: regularization schedules, trajectories, small helpers.

Time-varying regularization is described by a `Schedule`, which exposes both the
instantaneous strength ``alpha(t)`` and the accumulated (negated) integral
``a(t) = -int_0^t alpha(s) ds`` in closed form.  ``a`` is the single scalar that
parameterizes every time-dependent mirror geometry in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MirrorlabError(Exception):
    """Base class for errors raised by this package."""


class InputError(MirrorlabError, ValueError):
    """Invalid argument or configuration."""


class DomainError(MirrorlabError, ValueError):
    """A point lies outside the domain of the function being evaluated."""


class UnsupportedOperation(MirrorlabError, NotImplementedError):
    """The requested closed form does not exist for this family."""


class DivergedError(MirrorlabError, RuntimeError):
    """A flow left the finite range; carries the last valid time."""

    def __init__(self, message, last_valid_time, trajectory=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
        self.trajectory = trajectory


class DomainExitError(MirrorlabError, RuntimeError):
    """A dual iterate left the (possibly shrinking) domain of the dual map."""

    def __init__(self, message, time, bounds=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.bounds = bounds
        self.trajectory = trajectory


SCHEDULE_KINDS = ("constant", "turnoff", "linear-decay", "cosine-decay")


@dataclass(frozen=True)
class Schedule:
    """Regularization strength alpha(t) >= 0 with closed-form accumulated integral.

    kind:
        "constant"       alpha(t) = alpha0
        "turnoff"        alpha(t) = alpha0 for t < T, 0 afterwards
        "linear-decay"   alpha(t) = alpha0 * (1 - t/T) on [0, T], 0 afterwards
        "cosine-decay"   alpha(t) = alpha0 * (1 + cos(pi t/T)) / 2 on [0, T], 0 afterwards

    The decaying kinds all satisfy alpha(t) = 0 for t >= T.  Linear and cosine
    decay both integrate to alpha0*T/2, so matching a total amount of applied
    regularization across kinds is a matter of choosing T.
    """

    kind: str
    alpha0: float
    turnoff_time: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise InputError(f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.alpha0 < 0:
            raise InputError(f"alpha0 must be nonnegative, got {self.alpha0}")
        if self.t_end <= 0:
            raise InputError(f"t_end must be positive, got {self.t_end}")
        if self.kind != "constant" and self.turnoff_time <= 0:
            raise InputError(f"{self.kind} schedule needs turnoff_time > 0, got {self.turnoff_time}")

    def alpha(self, t):
        """Instantaneous strength at time t (scalar or array)."""
        t = _check_time(t)
        T = self.turnoff_time
        if self.kind == "constant":
            return np.full(np.shape(t), self.alpha0) if np.ndim(t) else float(self.alpha0)
        if self.kind == "turnoff":
            out = np.where(t < T, self.alpha0, 0.0)
        elif self.kind == "linear-decay":
            out = np.where(t < T, self.alpha0 * (1.0 - t / T), 0.0)
        else:  # cosine-decay
            out = np.where(t < T, self.alpha0 * (1.0 + np.cos(np.pi * np.minimum(t, T) / T)) / 2.0, 0.0)
        return out[()] if np.ndim(t) == 0 else out

    def alpha_left(self, t):
        """Left limit of alpha at t; differs from alpha only at the turn-off jump.

        Fixed-step integrators evaluate right-endpoint stages with this so
        that a step ending exactly at the discontinuity integrates the smooth
        left segment (full order is retained when the turn-off time is a grid
        node).
        """
        t = _check_time(t)
        if self.kind == "turnoff":
            out = np.where(t <= self.turnoff_time, self.alpha0, 0.0)
            return out[()] if np.ndim(t) == 0 else out
        return self.alpha(t)

    def a(self, t):
        """Accumulated integral a(t) = -int_0^t alpha(s) ds, in closed form."""
        t = _check_time(t)
        T = self.turnoff_time
        if self.kind == "constant":
            out = -self.alpha0 * t
        elif self.kind == "turnoff":
            out = -self.alpha0 * np.minimum(t, T)
        elif self.kind == "linear-decay":
            tc = np.minimum(t, T)
            out = -self.alpha0 * (tc - tc * tc / (2.0 * T))
        else:  # cosine-decay
            tc = np.minimum(t, T)
            out = -self.alpha0 * (tc / 2.0 + (T / (2.0 * np.pi)) * np.sin(np.pi * tc / T))
        return out[()] if np.ndim(t) == 0 else out

    def total_strength(self):
        """-a(inf): the total amount of regularization the schedule can apply."""
        if self.kind == "constant":
            return self.alpha0 * self.t_end
        if self.kind == "turnoff":
            return self.alpha0 * self.turnoff_time
        return self.alpha0 * self.turnoff_time / 2.0


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("time must be nonnegative")
    return t[()] if t.ndim == 0 else t


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings shared by the parameter and mirror flows."""

    method: str = "rk4"
    step: float = 1e-3
    t_end: float = 1.0
    record_every: int = 1

    def __post_init__(self):
        if self.method not in ("euler", "rk4"):
            raise InputError(f"method must be 'euler' or 'rk4', got {self.method!r}")
        if self.step <= 0:
            raise InputError("step must be positive")
        if self.t_end <= 0:
            raise InputError("t_end must be positive")
        if self.step > self.t_end:
            raise InputError("step must not exceed t_end")
        if self.record_every < 1:
            raise InputError("record_every must be >= 1")

    def grid(self):
        """Number of steps and the adjusted step landing exactly on t_end."""
        n = max(1, int(round(self.t_end / self.step)))
        return n, self.t_end / n


@dataclass
class Trajectory:
    """Time-stamped record of a flow.

    `params`, `x`, `mu` and `y` are stacked row-per-snapshot (or None when the
    flow does not produce them); `metrics` holds named scalar series of the
    same length as `times`.
    """

    times: np.ndarray
    a: np.ndarray
    x: np.ndarray
    params: np.ndarray | None = None
    mu: np.ndarray | None = None
    y: np.ndarray | None = None
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        n = len(self.times)
        if np.any(np.diff(self.times) <= 0):
            raise InputError("trajectory times must be strictly increasing")
        if np.any(np.diff(self.a) > 1e-12):
            raise InputError("accumulated strength series must be nonincreasing")
        for name, arr in [("a", self.a), ("x", self.x), ("params", self.params), ("mu", self.mu), ("y", self.y)]:
            if arr is not None and len(arr) != n:
                raise InputError(f"trajectory field {name!r} has length {len(arr)}, expected {n}")
        for name, series in self.metrics.items():
            if len(series) != n:
                raise InputError(f"metric {name!r} has length {len(series)}, expected {n}")

    def __len__(self):
        return len(self.times)

    @property
    def final_x(self):
        return self.x[-1]


def nuclear_frobenius_ratio(X):
    """||X||_nuclear / ||X||_frobenius; >= 1 always, == 1 exactly for rank one."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError("expected a matrix")
    s = np.linalg.svd(X, compute_uv=False)
    fro = np.sqrt(np.sum(s * s))
    if fro == 0.0:
        raise DomainError("norm ratio is undefined for the zero matrix")
    return float(np.sum(s) / fro)


def nuclear_norm(X):
    return float(np.sum(np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)))


def make_rng(seed):
    """Single 64-bit-seeded counter-based generator used everywhere."""
    return np.random.default_rng(np.uint64(seed) if seed is not None else None)


def sym(X):
    return 0.5 * (X + X.T)
