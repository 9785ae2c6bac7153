"""Benchmark nonlinear systems and a fixed-step RK4 integrator.

Two systems are provided:

* a rigid-rod pendulum, state ``[theta, theta_dot]`` with ``theta = 0`` upright;
* a frictionless cart-pole, state ``[x, x_dot, theta, theta_dot]`` with
  ``theta = pi`` upright.

Angles are never wrapped, so trajectories stay continuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

GRAVITY = 9.81
DEFAULT_DT = 0.01
DEFAULT_HORIZON = 10.0
DIVERGENCE_LIMIT = 1e8

SYSTEMS = ("pendulum", "cartpole")
STATE_NAMES = {
    "pendulum": ("theta", "theta_dot"),
    "cartpole": ("x", "x_dot", "theta", "theta_dot"),
}

Deriv = Callable[[np.ndarray, float], np.ndarray]
Controller = Callable[[np.ndarray], float]


class DivergenceError(RuntimeError):
    """Raised when a simulated state leaves the representable range."""

    def __init__(self, step: int, state: np.ndarray):
        super().__init__(f"state diverged at step {step}: {state.tolist()}")
        self.step = step
        self.state = state


@dataclass(frozen=True)
class PendulumParams:
    m: float = 1.0
    L: float = 2.0
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("m", "L", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"pendulum parameter {name} must be positive")


@dataclass(frozen=True)
class CartPoleParams:
    m: float = 1.0
    M: float = 5.0
    L: float = 2.0
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("m", "M", "L", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"cart-pole parameter {name} must be positive")


def default_params(system: str):
    if system == "pendulum":
        return PendulumParams()
    if system == "cartpole":
        return CartPoleParams()
    raise ValueError(f"unknown system {system!r}; supported: {', '.join(SYSTEMS)}")


def state_dim(system: str) -> int:
    if system not in STATE_NAMES:
        raise ValueError(f"unknown system {system!r}; supported: {', '.join(SYSTEMS)}")
    return len(STATE_NAMES[system])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled states, sample ``k`` taken at time ``k * dt``.

    ``states`` is stored as an ``(m, n)`` array and ``inputs`` (if any) as
    ``(m, l)``.
    """

    dt: float
    states: np.ndarray
    inputs: Optional[np.ndarray] = None
    state_names: tuple = field(default=())
    system: Optional[str] = None

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2:
            raise ValueError("states must be a 2-D (m, n) array")
        if states.shape[0] < 2:
            raise ValueError(f"a trajectory needs at least 2 samples, got {states.shape[0]}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not np.all(np.isfinite(states)):
            raise ValueError("states contain non-finite entries")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

        if self.inputs is not None:
            inputs = np.array(self.inputs, dtype=float)
            if inputs.ndim == 1:
                inputs = inputs[:, None]
            if inputs.shape[0] != states.shape[0]:
                raise ValueError(
                    f"inputs have {inputs.shape[0]} samples but states have {states.shape[0]}"
                )
            inputs.setflags(write=False)
            object.__setattr__(self, "inputs", inputs)

        names = tuple(self.state_names)
        if not names:
            if self.system in STATE_NAMES:
                names = STATE_NAMES[self.system]
            else:
                names = tuple(f"x{i + 1}" for i in range(states.shape[1]))
        if len(names) != states.shape[1]:
            raise ValueError(f"{len(names)} state names for {states.shape[1]} states")
        object.__setattr__(self, "state_names", names)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m) * self.dt

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        same_inputs = (self.inputs is None and other.inputs is None) or (
            self.inputs is not None
            and other.inputs is not None
            and np.array_equal(self.inputs, other.inputs)
        )
        return (
            self.dt == other.dt
            and np.array_equal(self.states, other.states)
            and same_inputs
            and self.state_names == other.state_names
        )


def _check_finite(state, u):
    if not np.all(np.isfinite(state)) or not np.isfinite(u):
        raise ValueError("non-finite state or input")


def pendulum_deriv(state, u: float, params: PendulumParams) -> np.ndarray:
    """Rigid-rod pendulum with torque ``u``; ``theta = 0`` is upright."""
    state = np.asarray(state, dtype=float)
    if state.shape != (2,):
        raise ValueError(f"pendulum state must have length 2, got shape {state.shape}")
    _check_finite(state, u)
    theta, theta_dot = state
    theta_ddot = params.g / params.L * np.sin(theta) + u / (params.m * params.L**2)
    return np.array([theta_dot, theta_ddot])


def cartpole_deriv(state, u: float, params: CartPoleParams) -> np.ndarray:
    """Frictionless cart-pole with horizontal cart force ``u``.

    ``theta`` is measured from the hanging position, so ``theta = pi`` is the
    inverted (unstable) equilibrium.
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (4,):
        raise ValueError(f"cart-pole state must have length 4, got shape {state.shape}")
    _check_finite(state, u)
    m, M, L, g = params.m, params.M, params.L, params.g
    _, x_dot, theta, theta_dot = state
    s, c = np.sin(theta), np.cos(theta)
    D = m * L**2 * (M + m * s**2)
    swing = m * L * theta_dot**2 * s
    x_ddot = (m**2 * L**2 * g * c * s + m * L**2 * swing + m * L**2 * u) / D
    theta_ddot = (-(m + M) * m * g * L * s - m * L * c * swing - m * L * c * u) / D
    return np.array([x_dot, x_ddot, theta_dot, theta_ddot])


def system_deriv(system: str, params) -> Deriv:
    """Bind parameters, returning ``f(state, u)``."""
    if system == "pendulum":
        return lambda x, u: pendulum_deriv(x, u, params)
    if system == "cartpole":
        return lambda x, u: cartpole_deriv(x, u, params)
    raise ValueError(f"unknown system {system!r}; supported: {', '.join(SYSTEMS)}")


def rk4_step(deriv: Deriv, state, u: float, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step, ``u`` held constant over the step."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(state, dtype=float)
    k1 = deriv(x, u)
    k2 = deriv(x + 0.5 * dt * k1, u)
    k3 = deriv(x + 0.5 * dt * k2, u)
    k4 = deriv(x + dt * k3, u)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(
    system: str,
    params,
    x0: Sequence[float],
    dt: float = DEFAULT_DT,
    steps: int = int(round(DEFAULT_HORIZON / DEFAULT_DT)),
    controller: Optional[Controller] = None,
) -> Trajectory:
    """Integrate ``system`` from ``x0`` for ``steps`` RK4 steps.

    When ``controller`` is given it is evaluated once per step on the current
    state and the result held over the step. The recorded input array has one
    row per state; the final row is the input the controller would apply next
    (zero without a controller).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    n = state_dim(system)
    x = np.asarray(x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"{system} initial state must have length {n}, got {x.size}")
    f = system_deriv(system, params)

    states = np.empty((steps + 1, n))
    inputs = np.zeros((steps + 1, 1))
    states[0] = x
    for k in range(steps):
        u = float(controller(x)) if controller is not None else 0.0
        inputs[k, 0] = u
        try:
            x = rk4_step(f, x, u, dt)
        except ValueError:
            # intermediate stage overflowed to inf/nan
            raise DivergenceError(k + 1, x) from None
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            raise DivergenceError(k + 1, x)
        states[k + 1] = x
    if controller is not None:
        inputs[steps, 0] = float(controller(x))
    return Trajectory(dt=dt, states=states, inputs=inputs, system=system)
