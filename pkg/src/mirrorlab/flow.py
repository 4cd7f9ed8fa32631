"""Time integration of regularized parameter flows and their dual mirror flows.

Two flows are implemented over the same fixed-step integrators:

* parameter space:  dw = -(Jg(w)^T grad_f(g(w)) + alpha_t grad_h(w)) dt
* dual space:       dmu = -grad_f(Q_{a_t}(mu)) dt,  x_t = Q_{a_t}(mu_t), mu_0 = 0

``verify_equivalence`` drives both on the same grid and reports the sup
deviation of the model-space iterates; it is the executable form of the
equivalence between the two descriptions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reparam
from .core import (DivergedError, DomainError, DomainExitError, InputError,
                   IntegratorConfig, Schedule, Trajectory)

DIVERGENCE_LIMIT = 1e12


class QuadraticLoss:
    """f(x) = (x - target)^T M (x - target) / 2 with M positive semidefinite."""

    def __init__(self, M, target):
        self.M = np.asarray(M, dtype=float)
        self.target = np.asarray(target, dtype=float).ravel()

    def value(self, x):
        r = np.asarray(x, dtype=float).ravel() - self.target
        return float(0.5 * r @ (self.M @ r))

    def grad(self, x):
        r = np.asarray(x, dtype=float).ravel() - self.target
        return self.M @ r


class LinearRegressionLoss:
    """Mean squared error f(x) = ||Z x - y||^2 / (2 d) over d rows of Z."""

    def __init__(self, Z, y):
        self.Z = np.asarray(Z, dtype=float)
        self.y = np.asarray(y, dtype=float).ravel()
        self.d = max(1, self.Z.shape[0])

    def value(self, x):
        r = self.Z @ np.asarray(x, dtype=float).ravel() - self.y
        return float(0.5 * r @ r / self.d)

    def grad(self, x):
        r = self.Z @ np.asarray(x, dtype=float).ravel() - self.y
        return self.Z.T @ r / self.d


class ZeroLoss:
    """Identically zero objective; isolates the pure regularization drift."""

    def __init__(self, n):
        self.n = n

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros(self.n)


def _integrate(rhs, state0, cfg: IntegratorConfig):
    """Fixed-step Euler/RK4 with a divergence guard.

    Returns (times, states, status) where status is None on success or
    ("diverged"|"domain", time, exc) on early exit; recorded data always
    includes the initial state and the last healthy step.
    """
    n_steps, h = cfg.grid()
    state = np.asarray(state0, dtype=float).copy()
    times = [0.0]
    states = [state.copy()]
    t = 0.0
    status = None
    for k in range(1, n_steps + 1):
        try:
            if cfg.method == "euler":
                state = state + h * rhs(t, state, False)
            else:
                # the final stage sits on the next grid node, where a schedule
                # may jump; evaluate its left limit there to integrate each
                # smooth segment at full order
                k1 = rhs(t, state, False)
                k2 = rhs(t + 0.5 * h, state + 0.5 * h * k1, False)
                k3 = rhs(t + 0.5 * h, state + 0.5 * h * k2, False)
                k4 = rhs(t + h, state + h * k3, True)
                state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        except DomainError as exc:
            status = ("domain", t, exc)
            break
        t = k * h
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > DIVERGENCE_LIMIT:
            status = ("diverged", times[-1], None)
            break
        if k % cfg.record_every == 0 or k == n_steps:
            times.append(t)
            states.append(state.copy())
    return np.array(times), np.array(states), status


def run_param_flow(p, loss, schedule: Schedule, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the regularized gradient flow in parameter space.

    Records w, x = g(w), y = h(w), the accumulated strength a and the loss.
    Raises DivergedError (with the partial trajectory attached) if the state
    leaves the finite range, DomainExitError if a variant's domain is left.
    """

    def rhs(t, w, left_limit):
        alpha = schedule.alpha_left(t) if left_limit else schedule.alpha(t)
        return p.flow_rhs(w, loss.grad(p.g(w)), alpha)

    times, params, status = _integrate(rhs, p.w_init, cfg)
    xs = []
    ys = []
    for w in params:
        try:
            xs.append(p.g(w))
            ys.append(p.h(w))
        except DomainError as exc:
            # a final step may overshoot the domain before any rhs call sees it
            if status is None:
                status = ("domain", times[len(xs)], exc)
            break
    m = len(xs)
    times, params = times[:m], params[:m]
    xs = np.asarray(xs)
    traj = Trajectory(
        times=times,
        a=schedule.a(times),
        x=xs,
        params=params,
        y=np.asarray(ys),
        metrics={"train_loss": np.array([loss.value(x) for x in xs])},
    )
    if hasattr(p, "inside_unit_region"):
        traj.metrics["unit_region"] = np.array([1.0 if p.inside_unit_region(w) else 0.0 for w in params])
    if status is not None:
        kind, t_bad, exc = status
        if kind == "diverged":
            raise DivergedError(f"parameter flow diverged near t={t_bad:.6g}", t_bad, traj)
        raise DomainExitError(f"parameter flow left its domain near t={t_bad:.6g}: {exc}", t_bad,
                              trajectory=traj)
    return traj


def run_mirror_flow(family, loss, schedule: Schedule, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the dual flow dmu = -grad_f(Q_{a_t}(mu)) dt from mu_0 = 0."""

    def rhs(t, mu, left_limit):
        return -loss.grad(family.dual_map(schedule.a(t), mu))

    times, mus, status = _integrate(rhs, np.zeros(family.n), cfg)
    xs = []
    for t, mu in zip(times, mus):
        try:
            xs.append(family.dual_map(schedule.a(t), mu))
        except DomainError as exc:
            # a final step may overshoot the domain before any rhs call sees it
            if status is None:
                status = ("domain", t, exc)
            break
    m = len(xs)
    times, mus = times[:m], mus[:m]
    xs = np.asarray(xs)
    traj = Trajectory(
        times=times,
        a=schedule.a(times),
        x=xs,
        mu=mus,
        metrics={"train_loss": np.array([loss.value(x) for x in xs])},
    )
    if status is not None:
        kind, t_bad, exc = status
        if kind == "diverged":
            raise DivergedError(f"mirror flow diverged near t={t_bad:.6g}", t_bad, traj)
        try:
            bounds = family.domain(schedule.a(t_bad))
        except DomainError:
            bounds = None
        raise DomainExitError(f"dual iterate left the domain near t={t_bad:.6g}: {exc}", t_bad,
                              bounds=bounds, trajectory=traj)
    return traj


@dataclass
class EquivalenceReport:
    pair: str
    max_deviation: float
    tol: float
    passed: bool
    n_points: int

    def to_json(self):
        import json

        return json.dumps(self.__dict__)


_MATCHED_PAIRS = {
    ("hadamard", "hyperbolic-entropy"),
    ("hadamard", "entropy"),
    ("deep-hadamard", "hyperbolic-entropy"),
    ("deep-hadamard", "entropy"),
    ("quadratic", "quadratic"),
    ("diff-powers", "diff-powers-flow"),
}


def verify_equivalence(p, family, loss, schedule: Schedule, cfg: IntegratorConfig,
                       tol=1e-4) -> EquivalenceReport:
    """Run the parameter flow and the mirror flow and compare model iterates.

    Only matched (parameterization, family) pairs are accepted; product
    parameterizations of depth three or more are refused outright since their
    coordinate fields do not commute with weight decay.
    """
    if isinstance(p, reparam.DeepHadamard) and p.depth >= 3:
        raise InputError("depth >= 3 products do not commute with weight decay; no matched family")
    if (p.tag, family.tag) not in _MATCHED_PAIRS:
        raise InputError(f"unmatched pair: parameterization {p.tag!r} with family {family.tag!r}")
    x0_param = p.g(p.w_init)
    x0_family = family.dual_map(0.0, np.zeros(family.n))
    scale = max(1.0, float(np.max(np.abs(x0_param))))
    if np.max(np.abs(x0_param - x0_family)) > 1e-8 * scale:
        raise InputError("family payload does not reproduce the parameterization's initialization")

    traj_p = run_param_flow(p, loss, schedule, cfg)
    traj_m = run_mirror_flow(family, loss, schedule, cfg)
    n = min(len(traj_p), len(traj_m))
    dev = float(np.max(np.abs(traj_p.x[:n] - traj_m.x[:n])))
    return EquivalenceReport(
        pair=f"{p.tag}/{family.tag}",
        max_deviation=dev,
        tol=tol,
        passed=dev <= tol,
        n_points=n,
    )


def riemannian_residual(family, traj: Trajectory, loss, schedule: Schedule, t_from):
    """Residual of dx/dt = -hess(R_{a_T})^(-1) grad_f(x) after the turn-off time.

    Velocities come from central differences on the recorded grid, the metric
    Hessian is analytic per family.  Only the frozen-geometry segment is
    checked, so t_from must not precede the schedule's turn-off.
    """
    if schedule.kind == "constant" and schedule.alpha0 > 0:
        raise InputError("constant nonzero schedules never turn off; no frozen-geometry segment")
    turnoff = 0.0 if schedule.alpha0 == 0 else schedule.turnoff_time
    if t_from < turnoff - 1e-12:
        raise InputError(f"t_from={t_from} precedes the turn-off time {turnoff}")
    a_T = float(schedule.a(traj.times[-1]))
    # the centered stencil must lie wholly in the frozen segment: the velocity
    # is kinked at the switch, so both neighbors must sit at or after t_from
    idx = [i for i in range(1, len(traj) - 1) if traj.times[i - 1] >= t_from - 1e-12]
    if not idx:
        raise InputError("no interior recorded points at or after t_from")
    times = traj.times[idx]
    residuals = np.empty(len(idx))
    for out, i in enumerate(idx):
        dt = traj.times[i + 1] - traj.times[i - 1]
        xdot = (traj.x[i + 1] - traj.x[i - 1]) / dt
        H = family.hess(a_T, traj.x[i])
        drift = np.linalg.solve(H, loss.grad(traj.x[i]))
        residuals[out] = np.linalg.norm(xdot + drift)
    return times, residuals
