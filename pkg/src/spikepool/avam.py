"""Absolute-value based associative max (AVAM) nets.

``max(a, b) = (a + b) / 2 + |a - b| / 2``. The average term is a pair of fixed
connection weights; ``|x|`` comes from two IF neurons with opposite encoders
whose rectified-linear tuning curves reach ``phi`` at ``x = +-radius``.
Filtering their spikes and weighting each by ``radius / phi`` gives back
``min(|x|, radius)`` on average. Windows of ``k`` inputs are reduced by a binary
tree of these pairwise nets.

``mode="rate"`` replaces each spiking neuron with its rate model (no spikes, no
output filter), which makes the identities above hold exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .sim import IfNeuron, SynapseFilter, TimeBase, filter_spikes

MODES = ("spiking", "rate")


@dataclass(frozen=True)
class Ensemble2:
    """Two-neuron ensemble with encoders ``(+1, -1)`` and zero intercepts."""

    phi: float = 500.0
    radius: float = 0.25

    ENCODERS = (1.0, -1.0)

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError(f"max firing rate must be positive, got {self.phi}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def neuron(self, dt: float) -> IfNeuron:
        return IfNeuron(gain=self.phi / self.radius, amplitude=1.0, max_rate=self.phi * dt)

    def rates(self, x, dt: float):
        """Rate-model responses in spikes/step, one array per encoder."""
        peak = self.phi * dt
        return [peak * np.clip(e * np.asarray(x) / self.radius, 0.0, 1.0) for e in self.ENCODERS]

    def decode_weight(self, dt: float) -> float:
        """Connection weight from a neuron's filtered spikes to the output node."""
        return self.radius / (self.phi * dt)


def abs_estimate(x_trace, ens: Ensemble2, tau_e: SynapseFilter, tb: TimeBase,
                 mode: str = "spiking") -> np.ndarray:
    """Estimate ``|x|`` for a current trace of shape ``(n_steps, ...)``.

    Accurate for ``|x|`` up to ``ens.radius``; larger inputs saturate at the radius.
    """
    x = np.asarray(x_trace, dtype=np.float64)
    w = ens.decode_weight(tb.dt)
    if mode == "rate":
        r_pos, r_neg = ens.rates(x, tb.dt)
        return w * r_pos + w * r_neg
    if mode != "spiking":
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    flat = x.reshape(x.shape[0], -1)
    neuron = ens.neuron(tb.dt)
    out = np.zeros_like(flat)
    for e in ens.ENCODERS:
        spikes = kernels.integrate_fire(neuron.drive(e * flat, tb.dt), amplitude=neuron.amplitude)
        out += w * filter_spikes(spikes, tau_e, tb)
    return out.reshape(x.shape)


@dataclass
class PairMaxNet:
    """Nodes A, B feed O directly (weight 1/2 each) and via the ensemble (1/2, -1/2)."""

    ensemble: Ensemble2 = field(default_factory=Ensemble2)
    tau_e: SynapseFilter = field(default_factory=lambda: SynapseFilter(0.001))

    W_DIRECT = 0.5
    W_ENS_A = 0.5
    W_ENS_B = -0.5

    def run(self, a, b, tb: TimeBase, mode: str = "spiking"):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        diff = self.W_ENS_A * a + self.W_ENS_B * b
        out = self.W_DIRECT * a + self.W_DIRECT * b + abs_estimate(diff, self.ensemble, self.tau_e, tb, mode)
        return out, np.count_nonzero(np.abs(diff) > self.ensemble.radius, axis=0)


def pair_max(a_trace, b_trace, net: PairMaxNet, tb: TimeBase, mode: str = "spiking") -> np.ndarray:
    return net.run(a_trace, b_trace, tb, mode)[0]


@dataclass
class PairNode:
    left: "int | PairNode"
    right: "int | PairNode"
    net: PairMaxNet
    level: int


@dataclass
class AvamEvaluation:
    output: np.ndarray
    # steps on which each pair net's ensemble input exceeded its radius, in
    # the order of AvamNet.pairs
    saturation: list


@dataclass
class AvamNet:
    k: int
    root: "int | PairNode"
    pairs: list

    @property
    def n_neurons(self) -> int:
        return 2 * len(self.pairs)

    @property
    def depth(self) -> int:
        return max((p.level for p in self.pairs), default=0)

    def evaluate(self, currents, tb: TimeBase, mode: str = "spiking") -> AvamEvaluation:
        """Reduce currents of shape ``(n_steps, ..., k)`` to the root node's trace."""
        u = np.asarray(currents, dtype=np.float64)
        if u.shape[-1] != self.k:
            raise ValueError(f"net expects {self.k} inputs, got trailing dim {u.shape[-1]}")
        sat = {}

        def visit(node):
            if isinstance(node, int):
                return u[..., node]
            left, right = visit(node.left), visit(node.right)
            out, n_sat = node.net.run(left, right, tb, mode)
            sat[id(node)] = n_sat
            return out

        out = visit(self.root)
        return AvamEvaluation(out, [sat[id(p)] for p in self.pairs])


def _radius_at(radius, level: int) -> float:
    if np.ndim(radius) == 0:
        return float(radius)
    radius = list(radius)
    if level > len(radius):
        raise ValueError(f"no radius given for tree level {level} (got {len(radius)} levels)")
    return float(radius[level - 1])


def build_avam_tree(k: int, phi: float = 500.0, radius=0.25, shape: str = "balanced",
                    tau_e: float = 0.001) -> AvamNet:
    """Binary reduction tree of pairwise max nets over ``k`` inputs.

    ``shape="balanced"`` pairs neighbours level by level (an odd node out is
    carried up), giving ``max(max(a1, a2), max(a3, a4))`` for ``k = 4``.
    ``shape="sequential"`` folds from the left. ``radius`` may be a list with one
    entry per tree level, leaves-first. Every shape uses ``k - 1`` pair nets.
    """
    if k < 1 or int(k) != k:
        raise ValueError(f"input count must be a positive integer, got {k}")
    pairs = []

    def make(left, right, level):
        net = PairMaxNet(Ensemble2(phi, _radius_at(radius, level)), SynapseFilter(tau_e))
        node = PairNode(left, right, net, level)
        pairs.append(node)
        return node

    def level_of(node):
        return 0 if isinstance(node, int) else node.level

    nodes = list(range(k))
    if shape == "balanced":
        while len(nodes) > 1:
            nxt = []
            for i in range(0, len(nodes) - 1, 2):
                a, b = nodes[i], nodes[i + 1]
                nxt.append(make(a, b, max(level_of(a), level_of(b)) + 1))
            if len(nodes) % 2:
                nxt.append(nodes[-1])
            nodes = nxt
    elif shape == "sequential":
        acc = nodes[0]
        for b in nodes[1:]:
            acc = make(acc, b, level_of(acc) + 1)
        nodes = [acc]
    else:
        raise ValueError(f"unknown tree shape {shape!r}")
    return AvamNet(k, nodes[0], pairs)


def run_avam_net(net: AvamNet, inputs, f_in: SynapseFilter, tb: TimeBase,
                 mode: str = "spiking") -> np.ndarray:
    """Filter spike trains of shape ``(n_steps, ..., k)`` and reduce them through ``net``."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim < 2 or inputs.shape[0] != tb.n_steps or inputs.shape[-1] != net.k:
        raise ValueError(
            f"expected spike trains of shape ({tb.n_steps}, ..., {net.k}), got {inputs.shape}")
    currents = filter_spikes(inputs.reshape(tb.n_steps, -1), f_in, tb).reshape(inputs.shape)
    return net.evaluate(currents, tb, mode).output
