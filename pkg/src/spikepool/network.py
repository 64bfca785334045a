"""Feedforward networks of linear maps, pooling layers and a linear readout.

Every hidden linear layer feeds IF neurons with gain ``sigma`` (the firing-rate
scale) and spike amplitude ``1 / (sigma * dt)``, so a unit whose ANN activation
is ``h`` fires ``sigma * dt * h`` spikes/step and its filtered output settles at
``h``. The rate model :func:`rate_forward` is the conversion oracle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import BundleError
from .pooling import (
    Layout,
    PoolMethod,
    PoolParams,
    PoolSpec,
    TensorShape,
    extract_windows,
    pool_layer,
    pooled_storage_order,
)
from .sim import SynapseFilter, TimeBase, filter_spikes, steady_state_mean


@dataclass
class Linear:
    weight: np.ndarray
    bias: np.ndarray | None = None
    out_shape: TensorShape | None = None
    name: str = "linear"

    @property
    def n_out(self):
        return self.weight.shape[0]

    @property
    def n_in(self):
        return self.weight.shape[1]


@dataclass
class Pool:
    shape: TensorShape
    spec: PoolSpec = field(default_factory=PoolSpec)
    name: str = "pool"

    @property
    def n_in(self):
        return self.shape.size

    @property
    def n_out(self):
        return self.spec.output_shape(self.shape).size


@dataclass
class Output(Linear):
    name: str = "output"


@dataclass
class LayerGraph:
    layers: list
    sigma: float = 400.0
    dt: float = 0.001
    synapse_tau: float = 0.005

    def __post_init__(self):
        if not self.layers or not isinstance(self.layers[0], Linear) or isinstance(self.layers[0], Output):
            raise ValueError("the first layer must be a hidden Linear layer (the spike encoder)")
        if not isinstance(self.layers[-1], Output):
            raise ValueError("the last layer must be an Output layer")
        prev = None
        for layer in self.layers:
            if isinstance(layer, Linear):
                layer.weight = np.asarray(layer.weight, dtype=np.float64)
                if layer.weight.ndim != 2 or not np.all(np.isfinite(layer.weight)):
                    raise ValueError(f"layer {layer.name!r}: weights must be a finite 2-D matrix")
                if layer.bias is not None:
                    layer.bias = np.asarray(layer.bias, dtype=np.float64)
                    if layer.bias.shape != (layer.n_out,):
                        raise ValueError(f"layer {layer.name!r}: bias must have shape ({layer.n_out},)")
                if layer.out_shape is not None and layer.out_shape.size != layer.n_out:
                    raise ValueError(f"layer {layer.name!r}: out_shape does not match {layer.n_out} outputs")
            elif isinstance(layer, Pool):
                if not isinstance(prev, Linear):
                    raise ValueError(f"layer {layer.name!r}: pooling must follow a linear layer")
            else:
                raise TypeError(f"unsupported layer {layer!r}")
            if prev is not None and prev.n_out != layer.n_in:
                raise ValueError(
                    f"layer {layer.name!r} expects {layer.n_in} inputs but {prev.name!r} "
                    f"produces {prev.n_out}")
            prev = layer
        if any(isinstance(layer, Output) for layer in self.layers[:-1]):
            raise ValueError("only the last layer may be an Output layer")

    @property
    def input_size(self) -> int:
        return self.layers[0].n_in

    @property
    def n_classes(self) -> int:
        return self.layers[-1].n_out

    @property
    def rate_cap(self) -> float:
        """Largest representable activation: one spike per step."""
        return 1.0 / (self.sigma * self.dt)


def conv_to_linear(kernel, in_shape: TensorShape, stride=(1, 1), padding: str = "valid"):
    """Matrix ``M`` with ``M @ x == conv2d(x)`` for storage-ordered ``x``.

    ``kernel`` has shape ``(k_h, k_w, c_in, c_out)`` and computes a
    cross-correlation. Returns ``(M, out_shape)``; the output keeps the input's
    layout.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 4:
        raise ValueError(f"kernel must have shape (k_h, k_w, c_in, c_out), got {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if cin != in_shape.channels:
        raise ValueError(f"kernel expects {cin} input channels, tensor has {in_shape.channels}")
    sh, sw = stride
    if sh < 1 or sw < 1:
        raise ValueError(f"strides must be positive, got {stride}")
    H, W = in_shape.height, in_shape.width
    if padding == "valid":
        oh, ow = (H - kh) // sh + 1, (W - kw) // sw + 1
        pt = pl = 0
    elif padding == "same":
        oh, ow = math.ceil(H / sh), math.ceil(W / sw)
        pt = max((oh - 1) * sh + kh - H, 0) // 2
        pl = max((ow - 1) * sw + kw - W, 0) // 2
    else:
        raise ValueError(f"padding must be 'valid' or 'same', got {padding!r}")
    if oh < 1 or ow < 1:
        raise ValueError(f"a {kh}x{kw} kernel does not fit a {H}x{W} input without padding")
    out_shape = TensorShape(cout, oh, ow, in_shape.layout)
    M = np.zeros((out_shape.size, in_shape.size))
    co, y, x, dy, dx, ci = np.meshgrid(
        np.arange(cout), np.arange(oh), np.arange(ow), np.arange(kh), np.arange(kw),
        np.arange(cin), indexing="ij")
    iy, ix = y * sh + dy - pt, x * sw + dx - pl
    ok = (iy >= 0) & (iy < H) & (ix >= 0) & (ix < W)
    rows = out_shape.flat_index(co, y, x)[ok]
    cols = in_shape.flat_index(ci, iy, ix)[ok]
    M[rows, cols] = kernel[dy[ok], dx[ok], ci[ok], co[ok]]
    return M, out_shape


def _affine(layer: Linear, h):
    y = h @ layer.weight.T
    return y if layer.bias is None else y + layer.bias


def _pool_exact(layer: Pool, h, method: PoolMethod):
    groups = h[..., extract_windows(layer.shape, layer.spec)]
    pooled = groups.mean(axis=-1) if method is PoolMethod.AVERAGE else groups.max(axis=-1)
    out = np.empty(h.shape[:-1] + (groups.shape[-2],))
    out[..., pooled_storage_order(layer.shape, layer.spec)] = pooled
    return out


def rate_forward(graph: LayerGraph, x, pool_method: PoolMethod | None = None) -> np.ndarray:
    """Non-spiking forward pass: clipped ReLU units, exact pooling, linear readout.

    ``x`` may carry leading batch axes. Pooling uses the exact windowed mean
    for AVERAGE and the exact max for every other method.
    """
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != graph.input_size:
        raise ValueError(f"input has {h.shape[-1]} features, graph expects {graph.input_size}")
    cap = 1.0 / graph.dt
    for layer in graph.layers:
        if isinstance(layer, Output):
            h = _affine(layer, h)
        elif isinstance(layer, Linear):
            h = np.minimum(cap, np.maximum(0.0, graph.sigma * _affine(layer, h))) / graph.sigma
        else:
            h = _pool_exact(layer, h, pool_method or layer.spec.method)
    return h


@dataclass
class SpikingResult:
    output_traces: np.ndarray
    scores: np.ndarray


def spiking_forward(graph: LayerGraph, x, tb: TimeBase, pool_method: PoolMethod | None = None,
                    pool_params: PoolParams | None = None) -> SpikingResult:
    """Run the converted spiking network on a constant input ``x``.

    The first linear layer's IF neurons encode ``x`` into spikes. Spikes pass
    through a low-pass synapse before every linear map; pooling layers filter
    their own inputs. Scores are the filtered output-layer drive averaged over
    the last half of the run.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (graph.input_size,):
        raise ValueError(f"expected an input vector of length {graph.input_size}, got {x.shape}")
    if not math.isclose(tb.dt, graph.dt):
        raise ValueError(f"time base dt {tb.dt} differs from the graph's dt {graph.dt}")
    syn = SynapseFilter(graph.synapse_tau)
    if pool_params is None:
        pool_params = PoolParams(f_in=syn)
    amplitude = 1.0 / (graph.sigma * tb.dt)
    signal = np.broadcast_to(x, (tb.n_steps, x.size))
    is_spikes = False
    traces = None
    for layer in graph.layers:
        if isinstance(layer, Pool):
            spec = layer.spec if pool_method is None else PoolSpec(layer.spec.window, pool_method)
            signal = pool_layer(signal, layer.shape, spec, pool_params, tb)
            is_spikes = False
            continue
        current = filter_spikes(signal, syn, tb) if is_spikes else signal
        drive = _affine(layer, current)
        if isinstance(layer, Output):
            traces = filter_spikes(drive, syn, tb)
            break
        signal = kernels.integrate_fire(tb.dt * graph.sigma * drive, amplitude=amplitude)
        is_spikes = True
    return SpikingResult(traces, steady_state_mean(traces, 0.5))


def argmax_class(scores) -> int:
    """Index of the largest score; ties go to the lowest index."""
    scores = np.asarray(scores)
    if scores.size == 0:
        raise ValueError("cannot take the argmax of an empty score vector")
    return int(np.argmax(scores))


def relative_error(estimate, reference) -> float:
    estimate, reference = np.asarray(estimate), np.asarray(reference)
    norm = np.linalg.norm(reference)
    return float(np.linalg.norm(estimate - reference) / norm) if norm > 0 else float(np.linalg.norm(estimate))


def random_graph(rng, n_in: int = 16, n_hidden: int = 16, pool_shape=(2, 4, 4), n_classes: int = 5,
                 sigma: float = 1000.0, level: float = 0.75, spread: float = 0.4,
                 layout: Layout = Layout.CHANNELS_FIRST) -> LayerGraph:
    """Small random graph: encoder, linear layer, 2x2 max pool, readout.

    The second layer's weights are positive-mean and normalised so that pooled
    activations sit around ``level`` (relative to the rate cap) for inputs
    uniform in ``[-1, 1]``; ``spread`` sets their relative dispersion.
    """
    rng = np.random.default_rng(rng)
    shape = TensorShape(*pool_shape, layout)
    w1 = rng.normal(0.0, 1.5 / np.sqrt(n_in), (n_hidden, n_in))
    # E[relu(N(0, s^2))] = s / sqrt(2 pi) with s^2 = 1.5^2 / 3 for uniform inputs
    mean_h1 = 1.5 / np.sqrt(3.0) / np.sqrt(2.0 * np.pi)
    cap = 1.0 / (sigma * 0.001)
    w2 = rng.normal(1.0, spread, (shape.size, n_hidden)) * level * cap / (n_hidden * mean_h1)
    n_pooled = shape.size // 4
    wo = rng.normal(0.0, 1.0 / np.sqrt(n_pooled), (n_classes, n_pooled))
    return LayerGraph(
        [
            Linear(w1, name="encoder"),
            Linear(w2, out_shape=shape, name="hidden"),
            Pool(shape, PoolSpec((2, 2), PoolMethod.TRUE_MAX), name="pool"),
            Output(wo, name="output"),
        ],
        sigma=sigma,
    )


# --- weight bundles ---------------------------------------------------------

BUNDLE_FORMAT = "spikepool-bundle"
BUNDLE_VERSION = 1


def _shape_to_json(shape: TensorShape | None):
    return None if shape is None else [*shape.dims, shape.layout.value]


def _shape_from_json(obj, where):
    if obj is None:
        return None
    try:
        c, h, w, layout = obj
        return TensorShape(int(c), int(h), int(w), Layout(layout))
    except (TypeError, ValueError) as exc:
        raise BundleError(f"layer {where!r}: bad tensor shape {obj!r}") from exc


@dataclass
class WeightBundle:
    """Named weight matrices plus the manifest describing how they form a graph.

    On disk a bundle is a UTF-8 JSON manifest and a sibling binary file holding
    each array as row-major little-endian float64, at the byte offsets the
    manifest records.
    """

    manifest: dict
    arrays: dict

    @classmethod
    def from_graph(cls, graph: LayerGraph, source: str = "spikepool") -> "WeightBundle":
        layers, arrays = [], {}
        for layer in graph.layers:
            if isinstance(layer, Pool):
                layers.append({"kind": "pool", "name": layer.name,
                               "input_shape": _shape_to_json(layer.shape),
                               "window": list(layer.spec.window),
                               "method": layer.spec.method.value})
                continue
            entry = {"kind": "output" if isinstance(layer, Output) else "linear",
                     "name": layer.name, "weight": f"{layer.name}.weight",
                     "shape": list(layer.weight.shape), "bias": None,
                     "out_shape": _shape_to_json(layer.out_shape)}
            arrays[entry["weight"]] = layer.weight
            if layer.bias is not None:
                entry["bias"] = f"{layer.name}.bias"
                arrays[entry["bias"]] = layer.bias
            layers.append(entry)
        manifest = {"format": BUNDLE_FORMAT, "version": BUNDLE_VERSION, "source": source,
                    "sigma": graph.sigma, "dt": graph.dt, "synapse_tau": graph.synapse_tau,
                    "layers": layers}
        return cls(manifest, arrays)

    def save(self, path) -> Path:
        """Write ``path`` (manifest) and ``path`` with suffix ``.bin`` (data)."""
        path = Path(path)
        data_path = path.with_suffix(".bin")
        manifest = dict(self.manifest, data_file=data_path.name, arrays=[])
        chunks, offset = [], 0
        for name, arr in self.arrays.items():
            buf = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            manifest["arrays"].append({"name": name, "shape": list(np.shape(arr)),
                                       "offset": offset, "nbytes": len(buf)})
            chunks.append(buf)
            offset += len(buf)
        data_path.write_bytes(b"".join(chunks))
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return data_path

    @classmethod
    def load(cls, path) -> "WeightBundle":
        path = Path(path)
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BundleError(f"cannot read bundle manifest {path}: {exc}") from exc
        if not isinstance(manifest, dict) or manifest.get("format") != BUNDLE_FORMAT:
            raise BundleError(f"{path} is not a {BUNDLE_FORMAT} manifest")
        if manifest.get("version") != BUNDLE_VERSION:
            raise BundleError(f"unsupported bundle version {manifest.get('version')!r}")
        try:
            data = (path.parent / manifest["data_file"]).read_bytes()
            entries = manifest["arrays"]
        except (KeyError, OSError, TypeError) as exc:
            raise BundleError(f"bundle data for {path} is missing: {exc}") from exc
        arrays = {}
        for e in entries:
            try:
                shape, offset, nbytes = tuple(e["shape"]), int(e["offset"]), int(e["nbytes"])
            except (KeyError, TypeError, ValueError) as exc:
                raise BundleError(f"malformed array entry {e!r}") from exc
            if nbytes != 8 * int(np.prod(shape)) or offset < 0 or offset + nbytes > len(data):
                raise BundleError(f"array {e.get('name')!r}: shape {list(shape)} does not match its data")
            arrays[e["name"]] = np.frombuffer(data, dtype="<f8", count=nbytes // 8,
                                              offset=offset).reshape(shape).astype(np.float64)
        return cls(manifest, arrays)

    def to_graph(self) -> LayerGraph:
        layers = []
        for i, spec in enumerate(self.manifest.get("layers", [])):
            name = spec.get("name", f"layer{i}") if isinstance(spec, dict) else f"layer{i}"
            try:
                kind = spec["kind"]
                if kind == "pool":
                    layers.append(Pool(_shape_from_json(spec["input_shape"], name),
                                       PoolSpec(tuple(spec["window"]), PoolMethod(spec["method"])),
                                       name=name))
                    continue
                weight = self.arrays[spec["weight"]]
                if list(weight.shape) != list(spec["shape"]):
                    raise BundleError(f"layer {name!r}: weight shape {list(weight.shape)} "
                                      f"differs from declared {spec['shape']}")
                bias = self.arrays[spec["bias"]] if spec.get("bias") else None
                layer_cls = {"linear": Linear, "output": Output}[kind]
                layers.append(layer_cls(weight, bias, _shape_from_json(spec.get("out_shape"), name), name=name))
            except BundleError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise BundleError(f"layer {name!r}: {exc}") from exc
        try:
            return LayerGraph(layers, sigma=float(self.manifest["sigma"]),
                              dt=float(self.manifest["dt"]),
                              synapse_tau=float(self.manifest["synapse_tau"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleError(f"bundle does not describe a valid graph: {exc}") from exc


def save_bundle(graph: LayerGraph, path) -> Path:
    return WeightBundle.from_graph(graph).save(path)


def load_bundle(path) -> LayerGraph:
    return WeightBundle.load(path).to_graph()
