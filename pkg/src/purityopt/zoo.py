"""Built-in channels and encoder families, plus JSON (de)serialization.

The interchange format is UTF-8 JSON::

    {"name": ..., "dim_in": n, "dim_out": m,
     "kraus": [op][row][entry], "params": {...}}

where each matrix entry is a two-element list ``[re, im]`` of decimal strings
carrying at least 17 significant digits, so round-trips are bitwise exact.
Encoder files use the same layout with a single operator and ``dim_in = r``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .channels import KrausChannel
from .errors import DimensionError, ParameterError, SchemaError, ValidationError

__all__ = [
    "EncoderSpec",
    "make_bit_flip",
    "make_amplitude_damping",
    "tensor_power",
    "builtin_channel",
    "builtin_encoder",
    "BUILTIN_CHANNELS",
    "BUILTIN_ENCODERS",
    "save_channel",
    "load_channel",
    "save_encoder",
    "load_encoder",
    "MAX_TENSOR_KRAUS",
]

MAX_TENSOR_KRAUS = 4096


@dataclass
class EncoderSpec:
    """A named isometry from the codespace into the ambient space."""

    name: str
    params: dict
    kraus: np.ndarray = field(repr=False)
    atol: float = 1e-10

    def __post_init__(self):
        e = np.asarray(self.kraus, dtype=complex)
        if e.ndim != 2:
            raise DimensionError("encoder must be a matrix")
        r = e.shape[1]
        defect = np.abs(e.conj().T @ e - np.eye(r)).max()
        if defect > self.atol:
            raise ValidationError(
                f"encoder is not an isometry: max |E^dag E - I| = {defect:.3e}"
            )
        e.setflags(write=False)
        self.kraus = e

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[0]


def make_bit_flip(p: float) -> KrausChannel:
    """Single-qubit bit flip: applies the X gate with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"bit-flip probability must be in [0, 1], got {p}")
    q = 1.0 - p
    flip = np.sqrt(p) * np.array([[0.0, 1.0], [1.0, 0.0]])
    keep = np.sqrt(q) * np.eye(2)
    return KrausChannel(kraus=(flip, keep))


def make_amplitude_damping(p: float) -> KrausChannel:
    """Single-qubit amplitude damping with survival amplitude sqrt(p) on the
    excited level; the complementary operator transfers |1> to |0>."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"damping parameter must be in (0, 1), got {p}")
    h1 = np.diag([1.0, np.sqrt(p)])
    h2 = np.zeros((2, 2))
    h2[0, 1] = np.sqrt(1.0 - p)
    return KrausChannel(kraus=(h1, h2))


def tensor_power(ch: KrausChannel, k: int) -> KrausChannel:
    """k-fold tensor power; Kraus set is every k-fold product of factors."""
    if k < 1:
        raise ParameterError(f"tensor power needs k >= 1, got {k}")
    count = len(ch.kraus) ** k
    if count > MAX_TENSOR_KRAUS:
        raise ParameterError(
            f"tensor power would create {count} Kraus operators "
            f"(limit {MAX_TENSOR_KRAUS})"
        )
    ops = []
    for combo in itertools.product(ch.kraus, repeat=k):
        op = combo[0]
        for factor in combo[1:]:
            op = np.kron(op, factor)
        ops.append(op)
    return KrausChannel(kraus=tuple(ops), atol=max(ch.atol, 1e-10 * k))


# name -> (factory, parameter documentation)
BUILTIN_CHANNELS = {
    "bitflip": (lambda p=0.1: make_bit_flip(p), "p in [0, 1], default 0.1"),
    "bitflip2": (lambda p=0.1: tensor_power(make_bit_flip(p), 2), "p in [0, 1], default 0.1"),
    "ad": (lambda p=0.1: make_amplitude_damping(p), "p in (0, 1), default 0.1"),
    "ad2": (lambda p=0.1: tensor_power(make_amplitude_damping(p), 2), "p in (0, 1), default 0.1"),
}


def builtin_channel(name: str, **params) -> KrausChannel:
    if name not in BUILTIN_CHANNELS:
        raise ParameterError(
            f"unknown builtin channel {name!r}; known: {sorted(BUILTIN_CHANNELS)}"
        )
    factory, _ = BUILTIN_CHANNELS[name]
    try:
        return factory(**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for channel {name!r}: {exc}") from None


def _rot2(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def _bf_family(rows) -> np.ndarray:
    # Each family stacks rows of a 2x2 rotation, scaled to an isometry.
    return np.vstack(rows) / np.sqrt(2.0)


def _encoder_matrix(name: str, alpha: float, beta: float) -> np.ndarray:
    if name == "repetition":
        e = np.zeros((4, 2))
        e[0, 0] = 1.0
        e[3, 1] = 1.0
        return e
    if name in ("a", "b", "c"):
        r = _rot2(alpha)
        top, bot = r[0], r[1]
        layout = {
            "a": (top, top, bot, bot),
            "b": (top, bot, top, bot),
            "c": (top, bot, bot, top),
        }[name]
        return _bf_family(layout)
    if name in ("d", "e", "f"):
        ca, sa = np.cos(alpha), np.sin(alpha)
        cb, sb = np.cos(beta), np.sin(beta)
        first = np.array([ca, 0.0])
        last = np.array([sa, 0.0])
        mid1 = np.array([0.0, cb])
        mid2 = np.array([0.0, sb])
        layout = {
            "d": (first, mid1, last, mid2),
            "e": (first, last, mid1, mid2),
            "f": (first, mid1, mid2, last),
        }[name]
        return np.vstack(layout)
    raise ParameterError(
        f"unknown builtin encoder {name!r}; known: {sorted(BUILTIN_ENCODERS)}"
    )


BUILTIN_ENCODERS = {
    "repetition": "no parameters",
    "a": "alpha, default 0",
    "b": "alpha, default 0",
    "c": "alpha, default 0",
    "d": "alpha and beta, defaults 0",
    "e": "alpha and beta, defaults 0",
    "f": "alpha and beta, defaults 0",
}


def builtin_encoder(name: str, alpha: float = 0.0, beta: float = 0.0) -> EncoderSpec:
    """One of the built-in 4x2 encoder families.

    `repetition` ignores the angles; families a/b/c use alpha only; d/e/f
    use alpha and beta.
    """
    matrix = _encoder_matrix(name, float(alpha), float(beta))
    params = {}
    if name in ("a", "b", "c"):
        params["alpha"] = float(alpha)
    elif name in ("d", "e", "f"):
        params["alpha"] = float(alpha)
        params["beta"] = float(beta)
    return EncoderSpec(name=name, params=params, kraus=matrix)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _matrix_to_json(op: np.ndarray):
    return [[[_fmt(v.real), _fmt(v.imag)] for v in row] for row in np.asarray(op, dtype=complex)]


def _entry_from_json(entry, where: str) -> complex:
    if not isinstance(entry, (list, tuple)) or len(entry) != 2:
        raise SchemaError(f"{where}: entry must be a [re, im] pair, got {entry!r}")
    try:
        return complex(float(entry[0]), float(entry[1]))
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: entries must be decimal strings or numbers") from None


def _matrix_from_json(rows, where: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise SchemaError(f"{where}: operator must be a non-empty list of rows")
    width = None
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise SchemaError(f"{where} row {i}: expected a list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError(f"{where} row {i}: ragged row (got {len(row)}, expected {width})")
        out.append([_entry_from_json(e, f"{where} row {i}") for e in row])
    return np.array(out, dtype=complex)


def _load_document(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    for key in ("name", "dim_in", "dim_out", "kraus"):
        if key not in doc:
            raise SchemaError(f"{path}: missing required key {key!r}")
    if not isinstance(doc["kraus"], list) or not doc["kraus"]:
        raise SchemaError(f"{path}: 'kraus' must be a non-empty list of operators")
    return doc


def _check_dims(ops, doc, path):
    m, n = int(doc["dim_out"]), int(doc["dim_in"])
    for idx, op in enumerate(ops):
        if op.shape != (m, n):
            raise SchemaError(
                f"{path}: operator {idx} has shape {op.shape}, header says ({m}, {n})"
            )
    return n, m


def save_channel(ch: KrausChannel, path, name: str = "channel", params: dict | None = None):
    doc = {
        "name": name,
        "dim_in": ch.dim_in,
        "dim_out": ch.dim_out,
        "kraus": [_matrix_to_json(a) for a in ch.kraus],
    }
    if params:
        doc["params"] = {k: _fmt(v) for k, v in params.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_channel(path) -> KrausChannel:
    doc = _load_document(path)
    ops = [_matrix_from_json(op, f"{path}: operator {i}") for i, op in enumerate(doc["kraus"])]
    _check_dims(ops, doc, path)
    try:
        return KrausChannel(kraus=tuple(ops), atol=1e-8)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def save_encoder(spec: EncoderSpec, path):
    doc = {
        "name": spec.name,
        "dim_in": spec.dim_in,
        "dim_out": spec.dim_out,
        "kraus": [_matrix_to_json(spec.kraus)],
        "params": {k: _fmt(v) for k, v in spec.params.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_encoder(path) -> EncoderSpec:
    doc = _load_document(path)
    if len(doc["kraus"]) != 1:
        raise SchemaError(f"{path}: an encoder file must hold exactly one operator")
    matrix = _matrix_from_json(doc["kraus"][0], f"{path}: operator 0")
    _check_dims([matrix], doc, path)
    params = {k: float(v) for k, v in doc.get("params", {}).items()}
    try:
        return EncoderSpec(name=str(doc["name"]), params=params, kraus=matrix, atol=1e-8)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
