"""Single-file checkpoint format: text manifest, separator, raw parameter bytes.

The manifest lists layer topology and optimizer scalars as key=value lines,
then a line containing only ---, then the little-endian parameter block in
layer order. Adam moments (float64) follow the parameters so a resumed run
continues bit-for-bit. Floats in the manifest are written with repr(), which
round-trips exactly, making save -> load -> save byte-identical.
"""

from __future__ import annotations

import numpy as np

from .layers import Conv2D, Dense, Dropout, Flatten, Layer, ReLU, Sigmoid
from .network import Network
from .optim import Adam, Sgd

_SEPARATOR = b"\n---\n"
FORMAT_VERSION = 1


class CorruptCheckpoint(ValueError):
    """Checkpoint file is truncated, malformed, or from an unknown format."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _layer_line(layer: Layer) -> str:
    parts = [layer.kind]
    for key, value in layer.config().items():
        parts.append(f"{key}={_fmt(value)}")
    return " ".join(parts)


def _layer_from_line(line: str, dtype) -> Layer:
    tokens = line.split()
    if not tokens:
        raise CorruptCheckpoint("empty layer line")
    kind = tokens[0]
    try:
        kv = dict(tok.split("=", 1) for tok in tokens[1:])
    except ValueError as exc:
        raise CorruptCheckpoint(f"bad layer line {line!r}") from exc
    try:
        if kind == "conv2d":
            return Conv2D(int(kv["in"]), int(kv["out"]), int(kv["k"]), dtype=dtype)
        if kind == "relu":
            return ReLU()
        if kind == "dropout":
            return Dropout(float(kv["rate"]))
        if kind == "flatten":
            return Flatten()
        if kind == "dense":
            return Dense(int(kv["in"]), int(kv["out"]), dtype=dtype)
        if kind == "sigmoid":
            return Sigmoid()
    except KeyError as exc:
        raise CorruptCheckpoint(f"layer line {line!r} missing field {exc}") from exc
    raise CorruptCheckpoint(f"unknown layer kind {kind!r}")


def _optimizer_line(optimizer) -> str:
    if optimizer is None:
        return "optimizer=none"
    parts = [f"optimizer={optimizer.kind}"]
    for key, value in optimizer.config().items():
        parts.append(f"{key}={_fmt(value)}")
    if isinstance(optimizer, Adam):
        parts.append(f"step_count={optimizer.step_count}")
    return " ".join(parts)


def save_checkpoint(net: Network, path, optimizer=None) -> None:
    lines = [
        f"format_version={FORMAT_VERSION}",
        f"dtype={np.dtype(net.dtype).name}",
        f"seed={net.seed}",
        f"n_layers={len(net.layers)}",
    ]
    for i, layer in enumerate(net.layers):
        lines.append(f"layer.{i}={_layer_line(layer)}")
    lines.append(_optimizer_line(optimizer))
    manifest = "\n".join(lines).encode("ascii")

    blocks = [np.ascontiguousarray(p).tobytes() for p in net.params()]
    if isinstance(optimizer, Adam):
        if optimizer.m is None:
            optimizer._init_state(net.params())
        blocks.extend(np.ascontiguousarray(m).tobytes() for m in optimizer.m)
        blocks.extend(np.ascontiguousarray(v).tobytes() for v in optimizer.v)
    with open(path, "wb") as fh:
        fh.write(manifest)
        fh.write(_SEPARATOR)
        fh.write(b"".join(blocks))


def _parse_manifest(head: bytes) -> dict[str, str]:
    entries: dict[str, str] = {}
    for raw in head.decode("ascii").splitlines():
        line = raw.strip()
        if not line:
            continue
        if "=" not in line:
            raise CorruptCheckpoint(f"manifest line {line!r} is not key=value")
        key, value = line.split("=", 1)
        entries[key] = value
    return entries


def load_checkpoint(path) -> tuple[Network, Adam | Sgd | None]:
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = blob.find(_SEPARATOR)
    if sep < 0:
        raise CorruptCheckpoint("missing manifest separator")
    entries = _parse_manifest(blob[:sep])
    body = blob[sep + len(_SEPARATOR):]

    if entries.get("format_version") != str(FORMAT_VERSION):
        raise CorruptCheckpoint(f"unsupported format_version {entries.get('format_version')!r}")
    try:
        dtype = {"float32": np.float32, "float64": np.float64}[entries["dtype"]]
        seed = int(entries["seed"])
        n_layers = int(entries["n_layers"])
    except KeyError as exc:
        raise CorruptCheckpoint(f"manifest missing key {exc}") from exc

    layers = []
    for i in range(n_layers):
        key = f"layer.{i}"
        if key not in entries:
            raise CorruptCheckpoint(f"manifest missing {key}")
        layers.append(_layer_from_line(entries[key], dtype))
    net = Network(layers, seed=seed, dtype=dtype)

    optimizer = _parse_optimizer(entries)

    itemsize = np.dtype(dtype).itemsize
    params = net.params()
    expected = sum(p.size for p in params) * itemsize
    if isinstance(optimizer, Adam):
        expected += 2 * sum(p.size for p in params) * 8
    if len(body) != expected:
        raise CorruptCheckpoint(f"parameter block holds {len(body)} bytes, expected {expected}")

    offset = 0
    for p in params:
        nbytes = p.size * itemsize
        flat = np.frombuffer(body[offset:offset + nbytes], dtype=dtype)
        np.copyto(p, flat.reshape(p.shape))
        offset += nbytes
    if isinstance(optimizer, Adam):
        optimizer.m = []
        optimizer.v = []
        for target in (optimizer.m, optimizer.v):
            for p in params:
                nbytes = p.size * 8
                flat = np.frombuffer(body[offset:offset + nbytes], dtype=np.float64)
                target.append(flat.reshape(p.shape).copy())
                offset += nbytes
    return net, optimizer


def _parse_optimizer(entries: dict[str, str]) -> Adam | Sgd | None:
    line = entries.get("optimizer")
    if line is None:
        raise CorruptCheckpoint("manifest missing optimizer line")
    tokens = line.split()
    kind = tokens[0]
    try:
        kv = dict(tok.split("=", 1) for tok in tokens[1:])
    except ValueError as exc:
        raise CorruptCheckpoint(f"bad optimizer line {line!r}") from exc
    try:
        if kind == "none":
            return None
        if kind == "sgd":
            return Sgd(learning_rate=float(kv["learning_rate"]))
        if kind == "adam":
            opt = Adam(learning_rate=float(kv["learning_rate"]),
                       beta1=float(kv["beta1"]), beta2=float(kv["beta2"]),
                       epsilon=float(kv["epsilon"]))
            opt.step_count = int(kv["step_count"])
            return opt
    except KeyError as exc:
        raise CorruptCheckpoint(f"optimizer line {line!r} missing field {exc}") from exc
    raise CorruptCheckpoint(f"unknown optimizer kind {kind!r}")
