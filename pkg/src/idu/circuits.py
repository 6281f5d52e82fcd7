"""Circuit architectures: incremental data-uploading (IDU) and data re-uploading (DRU).

All full-size builders default to 10 qubits, 10 image rows and 10
variational layers.  The ``num_qubits``/``num_rows`` arguments exist so the
same layouts can be built at toy size for Fourier probes and exact oracles.

Feature ``row * num_qubits + q`` is pixel ``(row, q)``, and always lands on
qubit ``q``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .qsim import GateKind, GateSpec, Plan, Source, compile_plan

STANDARD_SPLITS = (1, 2, 4, 8, 10)
DEPTHS = (20, 60)


class Encoding(enum.Enum):
    RX = "rx"
    RXRY = "rxry"
    RX_CRZ_RY = "rxcrzry"


class Architecture(enum.Enum):
    IDU = "idu"
    DRU = "dru"


@dataclass(frozen=True)
class CircuitMeta:
    architecture: Architecture
    splits: int
    encoding: Encoding
    layer_depth: int

    @property
    def label(self) -> str:
        if self.architecture is Architecture.DRU:
            return "DRU"
        return f"IDU_{self.splits}"


@dataclass(frozen=True)
class CircuitTemplate:
    num_qubits: int
    gates: tuple
    num_features: int
    num_params: int
    meta: CircuitMeta | None = None

    @cached_property
    def plan(self) -> Plan:
        return compile_plan(self.num_qubits, self.gates, self.num_features, self.num_params)

    def feature_counts(self) -> list[int]:
        counts = [0] * self.num_features
        for g in self.gates:
            if g.source is Source.FEATURE:
                counts[int(g.value)] += 1
        return counts

    def param_counts(self) -> list[int]:
        counts = [0] * self.num_params
        for g in self.gates:
            if g.source is Source.PARAM:
                counts[int(g.value)] += 1
        return counts


def _chain(num_qubits: int, angle: float = math.pi) -> list[GateSpec]:
    return [GateSpec(GateKind.CRZ, q + 1, Source.FIXED, angle, control=q)
            for q in range(num_qubits - 1)]


def _coerce_encoding(kind) -> Encoding:
    return kind if isinstance(kind, Encoding) else Encoding(kind)


def encoding_layer(row: int, kind=Encoding.RX, num_qubits: int = 10,
                   num_rows: int = 10) -> list[GateSpec]:
    """Gates encoding image row ``row``, one rotation per qubit.

    RXRY alternates per row (even rows RX, odd rows RY).  RX_CRZ_RY is the same
    alternation with a fixed CRZ chain appended to each RX row, so it sits
    between that row and the following RY row.
    """
    kind = _coerce_encoding(kind)
    if not 0 <= row < num_rows:
        raise ValueError(f"row {row} out of range [0, {num_rows})")
    axis = GateKind.RX
    if kind is not Encoding.RX and row % 2 == 1:
        axis = GateKind.RY
    gates = [GateSpec(axis, q, Source.FEATURE, row * num_qubits + q) for q in range(num_qubits)]
    if kind is Encoding.RX_CRZ_RY and axis is GateKind.RX:
        gates += _chain(num_qubits)
    return gates


def variational_layer(layer_index: int, depth: int = 20, num_qubits: int = 10) -> list[GateSpec]:
    """Trainable RY/RZ rotations followed by a CRZ(pi) nearest-neighbour chain.

    ``depth`` is the trainable parameter count of the layer; each qubit gets
    ``depth / (2 * num_qubits)`` alternating RY, RZ pairs (one pair at depth
    20, three at depth 60 for 10 qubits).
    """
    if depth <= 0 or depth % (2 * num_qubits):
        raise ValueError(f"depth {depth} is not a positive multiple of {2 * num_qubits}")
    pairs = depth // (2 * num_qubits)
    base = depth * layer_index
    gates = []
    for q in range(num_qubits):
        for j in range(pairs):
            offset = base + q * 2 * pairs + 2 * j
            gates.append(GateSpec(GateKind.RY, q, Source.PARAM, offset))
            gates.append(GateSpec(GateKind.RZ, q, Source.PARAM, offset + 1))
    return gates + _chain(num_qubits)


def group_sizes(num_rows: int, splits: int) -> list[int]:
    """Contiguous row groups, largest first: 10 rows in 4 groups -> 3, 3, 2, 2."""
    base, extra = divmod(num_rows, splits)
    return [base + 1] * extra + [base] * (splits - extra)


def _check_splits(splits: int, num_rows: int) -> None:
    allowed = STANDARD_SPLITS if num_rows == 10 else range(1, num_rows + 1)
    if splits not in allowed:
        raise ValueError(f"splits must be one of {tuple(allowed)}, got {splits}")


def _check_depth(depth: int, num_qubits: int) -> None:
    if num_qubits == 10 and depth not in DEPTHS:
        raise ValueError(f"depth must be one of {DEPTHS}, got {depth}")


def build_idu(splits: int, encoding=Encoding.RX, depth: int = 20, *,
              num_qubits: int = 10, num_rows: int = 10) -> CircuitTemplate:
    """IDU circuit: row groups separated by one variational layer each.

    Layout is ``[g1][V][g2][V]...[gk][V]`` followed by the remaining
    ``num_rows - k`` variational layers, ``num_rows`` layers in total.
    """
    encoding = _coerce_encoding(encoding)
    _check_splits(splits, num_rows)
    _check_depth(depth, num_qubits)
    gates: list[GateSpec] = []
    row = 0
    layer = 0
    for size in group_sizes(num_rows, splits):
        for _ in range(size):
            gates += encoding_layer(row, encoding, num_qubits, num_rows)
            row += 1
        gates += variational_layer(layer, depth, num_qubits)
        layer += 1
    while layer < num_rows:
        gates += variational_layer(layer, depth, num_qubits)
        layer += 1
    return CircuitTemplate(
        num_qubits=num_qubits,
        gates=tuple(gates),
        num_features=num_rows * num_qubits,
        num_params=depth * num_rows,
        meta=CircuitMeta(Architecture.IDU, splits, encoding, depth),
    )


def build_dru(encoding=Encoding.RX, depth: int = 20, *, num_qubits: int = 10,
              num_rows: int = 10, repetitions: int | None = None) -> CircuitTemplate:
    """DRU circuit: the full encoding block before every variational layer.

    ``repetitions`` defaults to ``num_rows`` so the parameter count matches
    the IDU circuits of the same depth.
    """
    encoding = _coerce_encoding(encoding)
    _check_depth(depth, num_qubits)
    reps = num_rows if repetitions is None else repetitions
    gates: list[GateSpec] = []
    for r in range(reps):
        for row in range(num_rows):
            gates += encoding_layer(row, encoding, num_qubits, num_rows)
        gates += variational_layer(r, depth, num_qubits)
    return CircuitTemplate(
        num_qubits=num_qubits,
        gates=tuple(gates),
        num_features=num_rows * num_qubits,
        num_params=depth * reps,
        meta=CircuitMeta(Architecture.DRU, reps, encoding, depth),
    )


def build(architecture, splits: int | None = None, encoding=Encoding.RX,
          depth: int = 20) -> CircuitTemplate:
    architecture = architecture if isinstance(architecture, Architecture) else Architecture(architecture)
    if architecture is Architecture.DRU:
        return build_dru(encoding, depth)
    if splits is None:
        raise ValueError("IDU needs a split count")
    return build_idu(splits, encoding, depth)


def build_row_summed(architecture, depth: int = 20, *, num_qubits: int = 10,
                     num_rows: int = 10) -> CircuitTemplate:
    """Compressed variant of IDU_1 or RX-encoded DRU.

    Every encoding block is replaced by a single RX per qubit whose feature is
    the column sum of the image (see :func:`sum_rows`).  The circuit takes
    ``num_qubits`` features.
    """
    architecture = architecture if isinstance(architecture, Architecture) else Architecture(architecture)
    block = [GateSpec(GateKind.RX, q, Source.FEATURE, q) for q in range(num_qubits)]
    gates: list[GateSpec] = []
    if architecture is Architecture.IDU:
        gates += block
        for layer in range(num_rows):
            gates += variational_layer(layer, depth, num_qubits)
    else:
        for layer in range(num_rows):
            gates += block + variational_layer(layer, depth, num_qubits)
    return CircuitTemplate(num_qubits, tuple(gates), num_qubits, depth * num_rows, None)


def sum_rows(features, num_qubits: int = 10):
    """Column sums of flattened images, shape ``(..., num_qubits)``."""
    x = np.asarray(features, dtype=np.float64)
    return x.reshape(x.shape[:-1] + (-1, num_qubits)).sum(axis=-2)


# --------------------------------------------------------------------------
# text serialization
# --------------------------------------------------------------------------

_SOURCE_TOKENS = {Source.FEATURE: "feature", Source.PARAM: "param", Source.FIXED: "fixed"}
_TOKEN_SOURCES = {v: k for k, v in _SOURCE_TOKENS.items()}


def to_text(circuit: CircuitTemplate) -> str:
    """Line-oriented dump: ``KIND target [control] SOURCE index|value``.

    A leading ``#`` header carries qubit, feature and parameter counts.
    """
    head = (f"# qubits={circuit.num_qubits} features={circuit.num_features} "
            f"params={circuit.num_params}")
    if circuit.meta is not None:
        m = circuit.meta
        head += (f" arch={m.architecture.value} splits={m.splits} "
                 f"encoding={m.encoding.value} depth={m.layer_depth}")
    lines = [head]
    for g in circuit.gates:
        parts = [g.kind.value, str(g.target)]
        if g.control is not None:
            parts.append(str(g.control))
        parts.append(_SOURCE_TOKENS[g.source])
        parts.append(repr(float(g.value)) if g.source is Source.FIXED else str(int(g.value)))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> CircuitTemplate:
    header: dict[str, str] = {}
    gates = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                header[key] = val
            continue
        parts = line.split()
        try:
            kind = GateKind(parts[0])
            if kind is GateKind.CRZ:
                target, control, src, val = int(parts[1]), int(parts[2]), parts[3], parts[4]
                if len(parts) != 5:
                    raise ValueError("trailing tokens")
            else:
                if len(parts) != 4:
                    raise ValueError("wrong token count")
                target, control, src, val = int(parts[1]), None, parts[2], parts[3]
            source = _TOKEN_SOURCES[src]
            value = float(val) if source is Source.FIXED else int(val)
        except (KeyError, ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: cannot parse gate {line!r}") from exc
        gates.append(GateSpec(kind, target, source, value, control=control))
    try:
        nq, nf, npar = int(header["qubits"]), int(header["features"]), int(header["params"])
    except KeyError as exc:
        raise ValueError(f"missing header field {exc}") from exc
    meta = None
    if "arch" in header:
        meta = CircuitMeta(Architecture(header["arch"]), int(header["splits"]),
                           Encoding(header["encoding"]), int(header["depth"]))
    return CircuitTemplate(nq, tuple(gates), nf, npar, meta)
