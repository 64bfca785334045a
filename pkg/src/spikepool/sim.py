"""Fixed-step simulation primitives: time base, spike trains, synapses, IF neurons.

Conventions
-----------
Spike trains and current traces are float64 arrays with time on axis 0, either
``(n_steps,)`` for a single unit or ``(n_steps, n_units)``. A spike is stored as
its amplitude in the step it occurs; a low-pass synapse weights its input by
``1 - alpha`` so that a train spiking every step with amplitude ``a`` settles to
a current of exactly ``a``. Under this convention a neuron firing at ``p``
spikes/step with amplitude ``a`` produces a mean current ``p * a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidStateError


@dataclass(frozen=True)
class TimeBase:
    n_steps: int
    dt: float = 0.001

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def t(self) -> np.ndarray:
        """Step times in seconds."""
        return np.arange(self.n_steps) * self.dt


@dataclass(frozen=True)
class SynapseFilter:
    """First-order low-pass synapse with time constant ``tau`` (seconds)."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"synapse tau must be positive, got {self.tau}")

    def alpha(self, dt: float) -> float:
        return math.exp(-dt / self.tau)

    def apply(self, x, dt: float, state=None) -> np.ndarray:
        a = self.alpha(dt)
        return kernels.lowpass(x, a, 1.0 - a, state=state)


@dataclass
class IfNeuron:
    """Non-leaky integrate-and-fire neuron with a unit threshold.

    The voltage grows by ``dt * (gain * input + bias)`` per step, is floored at
    zero and reset by subtraction. ``max_rate`` (spikes/step) optionally clips
    the per-step drive, which is how tuning-curve saturation is modelled.
    """

    gain: float = 1000.0
    bias: float = 0.0
    amplitude: float = 1.0
    voltage: float = 0.0
    max_rate: float | None = None

    def drive(self, input_current, dt: float):
        d = dt * (self.gain * np.asarray(input_current, dtype=np.float64) + self.bias)
        if self.max_rate is not None:
            d = np.minimum(d, self.max_rate)
        return d

    def step(self, input_current: float, tb: TimeBase) -> float:
        return step_if_neuron(self, input_current, tb)

    def run(self, input_currents, tb: TimeBase) -> np.ndarray:
        """Simulate a whole input sequence; the neuron's voltage is carried over."""
        v = np.array([self.voltage])
        out = kernels.integrate_fire(self.drive(input_currents, tb.dt), v, amplitude=self.amplitude)
        self.voltage = float(v[0])
        return out

    def reset(self):
        self.voltage = 0.0


def make_periodic_train(period: int, amplitude: float, phase: int, tb: TimeBase) -> np.ndarray:
    """Spikes of ``amplitude`` at steps ``phase, phase + period, ...``."""
    if period < 1 or int(period) != period:
        raise ValueError(f"period must be a positive integer, got {period}")
    if phase < 0:
        raise ValueError(f"phase must be non-negative, got {phase}")
    train = np.zeros(tb.n_steps)
    train[int(phase)::int(period)] = amplitude
    return train


def periodic_trains(periods, tb: TimeBase, phases=None, amplitude: float = 1.0) -> np.ndarray:
    """Stack periodic trains column-wise into a ``(n_steps, len(periods))`` array."""
    periods = np.asarray(periods, dtype=int).ravel()
    phases = np.zeros_like(periods) if phases is None else np.asarray(phases, dtype=int).ravel()
    return np.column_stack(
        [make_periodic_train(p, amplitude, ph, tb) for p, ph in zip(periods, phases)]
    )


def filter_spikes(train, f: SynapseFilter, tb: TimeBase) -> np.ndarray:
    train = np.asarray(train, dtype=np.float64)
    if train.shape[0] != tb.n_steps:
        raise ValueError(f"train has {train.shape[0]} steps, time base has {tb.n_steps}")
    return f.apply(train, tb.dt)


def step_if_neuron(neuron: IfNeuron, input_current: float, tb: TimeBase) -> float:
    """Advance ``neuron`` one step; returns the emitted amplitude (0 if silent)."""
    if not math.isfinite(input_current):
        raise InvalidStateError(f"non-finite input current {input_current!r}")
    v = np.array([neuron.voltage])
    out = kernels.integrate_fire(
        np.array([[float(neuron.drive(input_current, tb.dt))]]), v, amplitude=neuron.amplitude
    )
    neuron.voltage = float(v[0])
    return float(out[0, 0])


def rate_model_if(input_current, neuron: IfNeuron, tb: TimeBase):
    """Firing rate in spikes/step that the spiking neuron approximates."""
    return np.clip(neuron.drive(input_current, tb.dt), 0.0, 1.0)


def steady_state_mean(trace, frac: float = 0.5, axis: int = 0):
    """Mean over the final ``frac`` of the steps."""
    trace = np.asarray(trace)
    n = trace.shape[axis]
    start = n - max(1, int(round(n * frac)))
    return np.take(trace, np.arange(start, n), axis=axis).mean(axis=axis)


def tracking_error(estimate, reference, dt: float = 0.001, burn_in: int = 20,
                   readout_tau: float | None = 0.01) -> float:
    """Mean absolute error relative to the reference's mean magnitude.

    Both traces first pass through the same readout low-pass (a probe synapse),
    unless ``readout_tau`` is None. The first ``burn_in`` steps are skipped.
    """
    est = np.asarray(estimate, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if readout_tau is not None:
        probe = SynapseFilter(readout_tau)
        est, ref = probe.apply(est, dt), probe.apply(ref, dt)
    est, ref = est[burn_in:], ref[burn_in:]
    scale = np.abs(ref).mean()
    return float(np.abs(est - ref).mean() / scale) if scale > 0 else float(np.abs(est).mean())
