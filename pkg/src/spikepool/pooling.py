"""Pooling-layer plumbing: windows over channel tensors, neuro-core placement,
and dispatch of each window to a pooling backend.

Units of a layer are addressed by their flat *storage* index, which depends on
the layout: ``c*H*W + h*W + w`` for channels-first, ``(h*W + w)*C + c`` for
channels-last. Pooled outputs use the same layout as the input.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .avam import build_avam_tree
from .errors import InfeasibleMappingError
from .mjop import MAX_COMPARTMENTS, MjopNet
from .sim import SynapseFilter, TimeBase, filter_spikes


class Layout(enum.Enum):
    CHANNELS_FIRST = "channels_first"
    CHANNELS_LAST = "channels_last"


class PoolMethod(enum.Enum):
    MJOP = "mjop"
    AVAM = "avam"
    AVERAGE = "average"
    TRUE_MAX = "true_max"


@dataclass(frozen=True)
class TensorShape:
    channels: int
    height: int
    width: int
    layout: Layout = Layout.CHANNELS_FIRST

    def __post_init__(self):
        if min(self.channels, self.height, self.width) < 1:
            raise ValueError(f"tensor dims must be positive, got {self.dims}")

    @property
    def dims(self):
        return (self.channels, self.height, self.width)

    @property
    def size(self) -> int:
        return self.channels * self.height * self.width

    def flat_index(self, c, h, w):
        """Storage index of logical position ``(c, h, w)``; broadcasts over arrays."""
        C, H, W = self.dims
        if self.layout is Layout.CHANNELS_FIRST:
            return (c * H + h) * W + w
        return (h * W + w) * C + c

    def to_logical(self, flat):
        """Reorder the last axis of ``flat`` (storage order) into ``(..., C, H, W)``."""
        flat = np.asarray(flat)
        c, h, w = np.indices(self.dims)
        return flat[..., self.flat_index(c, h, w)]

    def from_logical(self, logical):
        logical = np.asarray(logical)
        lead = logical.shape[:-3]
        out = np.empty(lead + (self.size,), dtype=logical.dtype)
        c, h, w = np.indices(self.dims)
        out[..., self.flat_index(c, h, w).ravel()] = logical.reshape(lead + (-1,))
        return out

    def with_layout(self, layout: Layout) -> "TensorShape":
        return TensorShape(*self.dims, layout)


@dataclass(frozen=True)
class PoolSpec:
    window: tuple = (2, 2)
    method: PoolMethod = PoolMethod.TRUE_MAX
    stride: tuple | None = None

    def __post_init__(self):
        r, c = self.window
        if r < 1 or c < 1:
            raise ValueError(f"window dims must be positive, got {self.window}")
        if self.stride is not None and tuple(self.stride) != tuple(self.window):
            raise ValueError("only non-overlapping pooling (stride == window) is supported")

    @property
    def size(self) -> int:
        return self.window[0] * self.window[1]

    def output_shape(self, shape: TensorShape) -> TensorShape:
        _check_divisible(shape, self)
        r, c = self.window
        return TensorShape(shape.channels, shape.height // r, shape.width // c, shape.layout)


def _check_divisible(shape: TensorShape, spec: PoolSpec):
    r, c = spec.window
    if shape.height % r or shape.width % c:
        raise ValueError(
            f"{shape.height}x{shape.width} channel is not divisible into {r}x{c} windows "
            "(padding is not supported)")


def extract_windows(shape: TensorShape, spec: PoolSpec) -> np.ndarray:
    """Storage indices grouped per window, shape ``(n_windows, r*c)``.

    Windows are ordered channel-major, then row-major over window positions;
    inside a window the indices are row-major. Row ``i`` of the result feeds
    pooled logical position ``i`` (channel-first enumeration).
    """
    _check_divisible(shape, spec)
    C, H, W = shape.dims
    r, c = spec.window
    ch, wr, wc, dr, dc = np.meshgrid(
        np.arange(C), np.arange(H // r), np.arange(W // c), np.arange(r), np.arange(c),
        indexing="ij")
    idx = shape.flat_index(ch, wr * r + dr, wc * c + dc)
    return idx.reshape(-1, r * c)


def pooled_storage_order(shape: TensorShape, spec: PoolSpec) -> np.ndarray:
    """For each window (in extract_windows order), its storage index in the pooled tensor."""
    out = spec.output_shape(shape)
    c, h, w = np.indices(out.dims)
    return out.flat_index(c, h, w).ravel()


@dataclass(frozen=True)
class CoreAssignment:
    core: int
    channel: int
    rows: tuple
    cols: tuple

    @property
    def compartments(self) -> int:
        return (self.rows[1] - self.rows[0]) * (self.cols[1] - self.cols[0])


@dataclass
class CoreMap:
    assignments: list
    capacity: int = MAX_COMPARTMENTS

    @property
    def n_cores(self) -> int:
        return len(self.assignments)

    @property
    def max_load(self) -> int:
        return max((a.compartments for a in self.assignments), default=0)

    def core_of(self, shape: TensorShape) -> np.ndarray:
        """Core id of every unit, indexed by storage index (-1 if unassigned)."""
        owner = np.full(shape.size, -1, dtype=int)
        for a in self.assignments:
            hh, ww = np.meshgrid(np.arange(*a.rows), np.arange(*a.cols), indexing="ij")
            owner[shape.flat_index(a.channel, hh, ww).ravel()] = a.core
        return owner

    def straddling_windows(self, shape: TensorShape, spec: PoolSpec) -> int:
        owner = self.core_of(shape)[extract_windows(shape, spec)]
        return int(np.count_nonzero((owner != owner[:, :1]).any(axis=1) | (owner[:, 0] < 0)))

    def to_dict(self):
        return {
            "capacity": self.capacity,
            "n_cores": self.n_cores,
            "max_load": self.max_load,
            "cores": [
                {"core": a.core, "channel": a.channel, "rows": list(a.rows),
                 "cols": list(a.cols), "compartments": a.compartments}
                for a in self.assignments
            ],
        }


def _even_split(n_units: int, per_core: int):
    """Cut ``n_units`` into the fewest runs of at most ``per_core``, sizes within one."""
    n_parts = -(-n_units // per_core)
    base, extra = divmod(n_units, n_parts)
    start = 0
    for i in range(n_parts):
        stop = start + base + (i < extra)
        yield start, stop
        start = stop


def plan_core_map(shape: TensorShape, spec: PoolSpec, capacity: int = MAX_COMPARTMENTS) -> CoreMap:
    """Place each channel on neuro-cores without splitting any pooling window.

    A channel that fits goes to one core. Larger channels are cut into bands of
    whole window-rows, using as few cores as possible with the bands spread
    evenly; if a single band is too wide it is further cut between window
    columns the same way.
    """
    _check_divisible(shape, spec)
    r, c = spec.window
    if r * c > capacity:
        raise InfeasibleMappingError(
            f"a {r}x{c} window needs {r * c} compartments, more than the {capacity} on one core")
    C, H, W = shape.dims
    out = []

    def add(ch, rows, cols):
        out.append(CoreAssignment(len(out), ch, rows, cols))

    for ch in range(C):
        if H * W <= capacity:
            add(ch, (0, H), (0, W))
            continue
        band = r * W
        if band <= capacity:
            for b0, b1 in _even_split(H // r, capacity // band):
                add(ch, (b0 * r, b1 * r), (0, W))
        else:
            for r0 in range(0, H, r):
                for w0, w1 in _even_split(W // c, capacity // (r * c)):
                    add(ch, (r0, r0 + r), (w0 * c, w1 * c))
    return CoreMap(out, capacity)


@dataclass
class PoolParams:
    """Backend settings for :func:`pool_layer`."""

    f_in: SynapseFilter = field(default_factory=lambda: SynapseFilter(0.005))
    # MJOP
    scale: float = 2.0
    f_out: SynapseFilter = field(default_factory=lambda: SynapseFilter(0.005))
    soma_decay: float = 0.0
    # AVAM
    phi: float = 500.0
    radius: float | list = 0.25
    tau_e: float = 0.001
    mode: str = "spiking"


def pool_window_currents(currents, method: PoolMethod, params: PoolParams, tb: TimeBase):
    """Pool already-filtered currents of shape ``(n_steps, ..., k)`` over the last axis."""
    currents = np.asarray(currents, dtype=np.float64)
    k = currents.shape[-1]
    if method is PoolMethod.TRUE_MAX:
        return currents.max(axis=-1)
    if method is PoolMethod.AVERAGE:
        return currents.mean(axis=-1)
    if method is PoolMethod.AVAM:
        net = build_avam_tree(k, params.phi, params.radius, tau_e=params.tau_e)
        return net.evaluate(currents, tb, params.mode).output
    if method is PoolMethod.MJOP:
        net = MjopNet.build(k, params.scale, soma_decay=params.soma_decay, dt=tb.dt)
        _, spikes = net.tree.run(currents)
        u_out = filter_spikes(spikes.reshape(tb.n_steps, -1), params.f_out, tb)
        return net.scale * u_out.reshape(spikes.shape)
    raise ValueError(f"unknown pooling method {method!r}")


def pool_layer(input_trains, shape: TensorShape, spec: PoolSpec, params: PoolParams | None,
               tb: TimeBase) -> np.ndarray:
    """Pool a layer's spike trains, shape ``(n_steps, shape.size)`` in storage order.

    Returns current traces of shape ``(n_steps, pooled.size)`` where ``pooled =
    spec.output_shape(shape)``, again in storage order.
    """
    params = params or PoolParams()
    trains = np.asarray(input_trains, dtype=np.float64)
    if trains.shape != (tb.n_steps, shape.size):
        raise ValueError(f"expected trains of shape {(tb.n_steps, shape.size)}, got {trains.shape}")
    groups = extract_windows(shape, spec)
    currents = filter_spikes(trains, params.f_in, tb)
    pooled = pool_window_currents(currents[:, groups], spec.method, params, tb)
    out = np.empty((tb.n_steps, groups.shape[0]))
    out[:, pooled_storage_order(shape, spec)] = pooled
    return out
