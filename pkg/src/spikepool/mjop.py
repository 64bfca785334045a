"""Multi-compartment neurons with join operations, and the MAX join-op pooling net.

Each compartment ``X`` combines its own current ``U' = U + bias`` with the
values forwarded by its (at most two) children using its join-op; the result
is ``X.dV``. Non-root compartments accumulate ``V = V * (1 - decay) + dV`` and
forward either that join result (CURRENT) or their voltage (VOLTAGE) to the
parent. The root is the soma: its ``dV`` drives an integrate-and-fire unit.

With zero biases and CURRENT forwarding everywhere the soma's ``dV`` is simply
the largest injected current, which is what the pooling net relies on.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidStateError, InvalidStructureError
from .sim import IfNeuron, SynapseFilter, TimeBase, filter_spikes

MAX_COMPARTMENTS = 1024


class JoinOp(enum.Enum):
    ADD = "add"
    MAX = "max"
    MIN = "min"

    def reduce(self, args):
        if self is JoinOp.MAX:
            return np.maximum.reduce(args)
        if self is JoinOp.MIN:
            return np.minimum.reduce(args)
        return np.add.reduce(args)


class Forward(enum.Enum):
    CURRENT = "current"
    VOLTAGE = "voltage"


@dataclass
class Compartment:
    decay: float = 0.0
    bias: float = 0.0
    forward: Forward = Forward.CURRENT
    join: JoinOp = JoinOp.MAX
    u: float = 0.0
    v: float = 0.0
    dv: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError(f"compartment decay must lie in [0, 1], got {self.decay}")


class McTree:
    """A rooted binary tree of compartments; the root is the spiking soma.

    Parameters
    ----------
    compartments : list of Compartment
    parents : list of int
        ``parents[i]`` is the index of compartment ``i``'s parent, ``-1`` for the
        root. Exactly one root is allowed, and no node may have more than two
        children.
    soma : IfNeuron, optional
        Gain, bias and spike amplitude of the root. Its voltage is the soma's
        voltage; the root compartment's ``decay`` applies to it.
    dt : float
    """

    def __init__(self, compartments, parents, soma: IfNeuron | None = None, dt: float = 0.001):
        self.compartments = list(compartments)
        self.parents = [int(p) for p in parents]
        self.soma = soma if soma is not None else IfNeuron(gain=1000.0)
        self.dt = float(dt)
        self._validate()

    @classmethod
    def chain(cls, k: int, join: JoinOp = JoinOp.MAX, soma: IfNeuron | None = None,
              soma_decay: float = 0.0, dt: float = 0.001) -> "McTree":
        """Compartments ``0 <- 1 <- ... <- k-1`` with the soma at index 0."""
        comps = [Compartment(join=join) for _ in range(k)]
        comps[0].decay = soma_decay
        return cls(comps, [-1] + list(range(k - 1)), soma=soma, dt=dt)

    def _validate(self):
        n = len(self.compartments)
        if n == 0:
            raise InvalidStructureError("a compartment tree needs at least one compartment")
        if n > MAX_COMPARTMENTS:
            raise InvalidStructureError(
                f"{n} compartments exceed the {MAX_COMPARTMENTS} available on one core")
        if len(self.parents) != n:
            raise InvalidStructureError("need exactly one parent entry per compartment")
        roots = [i for i, p in enumerate(self.parents) if p == -1]
        if len(roots) != 1:
            raise InvalidStructureError(f"expected exactly one root, found {len(roots)}")
        children = [[] for _ in range(n)]
        for i, p in enumerate(self.parents):
            if p == -1:
                continue
            if not 0 <= p < n or p == i:
                raise InvalidStructureError(f"compartment {i} has invalid parent {p}")
            children[p].append(i)
        for i, ch in enumerate(children):
            if len(ch) > 2:
                raise InvalidStructureError(f"compartment {i} has {len(ch)} children (max 2)")
        order = []
        stack = [(roots[0], False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            stack.append((node, True))
            stack.extend((c, False) for c in children[node])
        if len(order) != n:
            raise InvalidStructureError("parent links contain a cycle or a detached subtree")
        self.root = roots[0]
        self.children = children
        self._order = order

    def __len__(self):
        return len(self.compartments)

    def _join_pass(self, injected, voltage_update):
        """Leaf-to-root pass; returns the root's dV. Works on scalars or arrays."""
        outputs = [None] * len(self)
        dv_root = None
        for i in self._order:
            c = self.compartments[i]
            u_prime = injected[i] + c.bias
            dv = c.join.reduce([u_prime] + [outputs[j] for j in self.children[i]])
            if i == self.root:
                dv_root = dv
            else:
                v = voltage_update(c, dv)
                outputs[i] = dv if c.forward is Forward.CURRENT else v
            c.u, c.dv = _last(u_prime), _last(dv)
        return dv_root

    def _check_currents(self, currents):
        currents = np.asarray(currents, dtype=np.float64)
        if currents.shape[-1] != len(self):
            raise ValueError(
                f"expected {len(self)} injected currents, got trailing dim {currents.shape[-1]}")
        if not np.all(np.isfinite(currents)):
            raise InvalidStateError("injected currents must be finite")
        return np.maximum(currents, 0.0)

    def step(self, injected) -> float:
        """Advance one step. Returns the soma's spike amplitude (0 when silent)."""
        inj = self._check_currents(injected)

        def update(c, dv):
            c.v = c.v * (1.0 - c.decay) + dv
            return c.v

        dv = float(self._join_pass(list(inj), update))
        return self._fire(np.array([[dv]]))[0, 0]

    def run(self, currents) -> tuple[np.ndarray, np.ndarray]:
        """Simulate a whole ``(n_steps, k)`` block of injected currents.

        Returns ``(soma_dv, soma_spikes)``, each of shape ``(n_steps,)``. Extra
        batch axes between time and compartments, ``(n_steps, ..., k)``, are
        simulated as independent trees sharing this configuration; in that case
        the stored compartment state is not advanced.
        """
        cur = self._check_currents(currents)
        batched = cur.ndim > 2
        if cur.ndim == 1:
            cur = cur[None, :]
        inj = np.moveaxis(cur, -1, 0)
        batch_shape = inj.shape[1:]

        def update(c, dv):
            flat = dv.reshape(dv.shape[0], -1)
            state = np.full(flat.shape[1], c.v)
            v = kernels.lowpass(flat, 1.0 - c.decay, 1.0, state=state).reshape(dv.shape)
            if not batched:
                c.v = float(state[0])
            return v

        dv = self._join_pass(list(inj), update)
        spikes = self._fire(dv.reshape(dv.shape[0], -1), keep_state=not batched)
        return dv, spikes.reshape(batch_shape)

    def _fire(self, dv2d, keep_state=True):
        soma = self.soma
        drive = self.dt * (soma.gain * dv2d + soma.bias)
        v = np.full(dv2d.shape[1], soma.voltage)
        spikes = kernels.integrate_fire(
            drive, v, decay=self.compartments[self.root].decay, amplitude=soma.amplitude)
        if keep_state:
            soma.voltage = float(v[0])
            self.compartments[self.root].v = soma.voltage
        return spikes

    def reset(self):
        self.soma.voltage = 0.0
        for c in self.compartments:
            c.u = c.v = c.dv = 0.0


def _last(x):
    x = np.asarray(x)
    return float(x.ravel()[-1]) if x.size else 0.0


def step_mc_tree(tree: McTree, injected_currents) -> float:
    return tree.step(injected_currents)


@dataclass
class MjopTrace:
    currents: np.ndarray
    soma_dv: np.ndarray
    spikes: np.ndarray
    u_out: np.ndarray
    scale: float

    @property
    def scaled(self) -> np.ndarray:
        return self.scale * self.u_out


@dataclass
class MjopNet:
    """Chain of ``k`` MAX-joined compartments whose filtered soma spikes are scaled.

    The soma has gain 1000 and unit spike amplitude; with ``dt = 1 ms`` it fires
    at a rate (spikes/step) equal to the largest input current, so ``scale``
    absorbs what is lost to spike quantization and to the gap between the
    instantaneous and the rate-averaged maximum.
    """

    tree: McTree
    scale: float = 2.0

    @classmethod
    def build(cls, k: int, scale: float = 2.0, gain: float = 1000.0, soma_decay: float = 0.0,
              dt: float = 0.001) -> "MjopNet":
        soma = IfNeuron(gain=gain, amplitude=1.0)
        return cls(McTree.chain(k, JoinOp.MAX, soma=soma, soma_decay=soma_decay, dt=dt), scale)

    @property
    def k(self) -> int:
        return len(self.tree)

    def simulate(self, inputs, f_in: SynapseFilter, f_out: SynapseFilter, tb: TimeBase) -> MjopTrace:
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim < 2 or inputs.shape[0] != tb.n_steps or inputs.shape[-1] != self.k:
            raise ValueError(
                f"expected spike trains of shape ({tb.n_steps}, ..., {self.k}), got {inputs.shape}")
        if np.any(inputs < 0):
            raise ValueError("input spike trains must be non-negative")
        currents = filter_spikes(inputs.reshape(tb.n_steps, -1), f_in, tb).reshape(inputs.shape)
        dv, spikes = self.tree.run(currents)
        u_out = filter_spikes(spikes.reshape(tb.n_steps, -1), f_out, tb).reshape(spikes.shape)
        return MjopTrace(currents, dv, spikes, u_out, self.scale)


def run_mjop_net(net: MjopNet, inputs, f_in: SynapseFilter, f_out: SynapseFilter,
                 tb: TimeBase) -> np.ndarray:
    """Scaled output current of ``net`` driven by ``inputs`` of shape ``(n_steps, k)``."""
    return net.simulate(inputs, f_in, f_out, tb).scaled


def mjop_tree_size(window) -> int:
    r, c = window
    if r < 1 or c < 1:
        raise ValueError(f"window dims must be positive, got {window}")
    return int(r) * int(c)


def quantize_weights(weights, bits: int = 8) -> np.ndarray:
    """Symmetric uniform quantization to ``2**bits`` levels over ``[-m, m]``.

    ``m`` is the largest magnitude in ``weights``; the returned array holds the
    dequantized values. Both endpoints are exactly representable.
    """
    if not 2 <= bits <= 16:
        raise ValueError(f"bits must lie in [2, 16], got {bits}")
    w = np.asarray(weights, dtype=np.float64)
    m = np.abs(w).max() if w.size else 0.0
    if m == 0:
        return w.copy()
    step = 2.0 * m / (2 ** bits - 1)
    idx = np.clip(np.round((w + m) / step), 0, 2 ** bits - 1)
    return idx * step - m
