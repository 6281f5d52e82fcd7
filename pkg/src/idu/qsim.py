"""Dense statevector simulation of rotation/controlled-Rz circuits.

Qubit ``q`` corresponds to bit ``q`` of the basis-state index (little-endian),
so amplitude ``i`` of an ``n``-qubit state belongs to the basis state whose
qubit ``q`` reads ``(i >> q) & 1``.

Conventions: ``R_a(t) = exp(-i t A / 2)`` for ``A`` in {X, Y, Z} and
``CRZ(t) = diag(1, 1, exp(-i t/2), exp(i t/2))`` in (control, target) order.

Two execution paths exist.  :func:`apply_gate` is a straightforward in-place
stride update on a single state, meant as a readable reference.  The batched
path (:func:`simulate`, :func:`expectations`, :func:`value_and_gradient`)
compiles a circuit into a short list of fused operations: runs of single-qubit
gates on the same qubit collapse into one 2x2 matrix and runs of CRZ gates
collapse into one diagonal phase.  Gradients use the reverse-mode adjoint
method over that fused list.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numba as nb
import numpy as np

MAX_QUBITS = 16


class GateKind(enum.Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CRZ = "CRZ"


class Source(enum.Enum):
    FEATURE = "feature"
    PARAM = "param"
    FIXED = "fixed"


@dataclass(frozen=True)
class GateSpec:
    """One gate with its angle binding.

    ``value`` is an index into the feature or parameter vector for
    ``FEATURE``/``PARAM`` sources and an angle in radians for ``FIXED``.
    """

    kind: GateKind
    target: int
    source: Source
    value: float
    control: int | None = None

    def __post_init__(self):
        if self.kind is GateKind.CRZ:
            if self.control is None:
                raise ValueError("CRZ gate needs a control qubit")
            if self.control == self.target:
                raise ValueError(f"control and target coincide (qubit {self.target})")
        elif self.control is not None:
            raise ValueError(f"{self.kind.value} gate takes no control qubit")
        if self.source is not Source.FIXED:
            if int(self.value) != self.value or self.value < 0:
                raise ValueError(f"{self.source.value} index must be a non-negative integer")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    def check(self, num_qubits: int) -> None:
        for q in self.qubits:
            if not 0 <= q < num_qubits:
                raise IndexError(f"qubit {q} out of range for {num_qubits} qubits")


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def init_zero(num_qubits: int) -> StateVector:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


_PAULI = {
    GateKind.RX: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    GateKind.RY: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    GateKind.RZ: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def rotation_matrix(kind: GateKind, angle: float) -> np.ndarray:
    """2x2 matrix of a single-axis rotation."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return c * np.eye(2, dtype=np.complex128) - 1j * s * _PAULI[kind]


def apply_gate(state: StateVector, gate: GateSpec, angle: float) -> StateVector:
    """Return ``state`` transformed by ``gate`` at the given angle.

    The input state is left untouched; the update runs in place on a copy.
    """
    gate.check(state.num_qubits)
    n = state.num_qubits
    amps = state.amplitudes.copy()
    t = gate.target
    # view as (high bits, target bit, low bits)
    view = amps.reshape(2 ** (n - 1 - t), 2, 2**t)
    if gate.kind is GateKind.CRZ:
        c = gate.control
        ctrl = (np.arange(2**n) >> c) & 1
        ctrl = ctrl.reshape(view.shape).astype(bool)
        phase = np.exp(np.array([-0.5j, 0.5j]) * angle)
        for bit in (0, 1):
            sel = ctrl[:, bit, :]
            view[:, bit, :][sel] *= phase[bit]
    else:
        u = rotation_matrix(gate.kind, angle)
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
        view[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1
    return StateVector(n, amps)


def z_signs(num_qubits: int) -> np.ndarray:
    """Matrix ``(num_qubits, 2**num_qubits)`` of Pauli-Z eigenvalues."""
    idx = np.arange(2**num_qubits)
    bits = (idx[None, :] >> np.arange(num_qubits)[:, None]) & 1
    return (1 - 2 * bits).astype(np.float64)


def resolve_angle(gate: GateSpec, features, params) -> float:
    if gate.source is Source.FEATURE:
        return float(features[int(gate.value)])
    if gate.source is Source.PARAM:
        return float(params[int(gate.value)])
    return float(gate.value)


# --------------------------------------------------------------------------
# fused execution plan
# --------------------------------------------------------------------------


@dataclass
class _SingleOp:
    qubit: int
    positions: np.ndarray  # gate positions in circuit order
    paulis: np.ndarray  # (m, 2, 2)
    param_slots: list  # (component index, param index)
    batched: bool


@dataclass
class _DiagOp:
    positions: np.ndarray
    signs: np.ndarray  # (m, 2**n), phase exponent is 0.5j * angle * sign
    param_slots: list
    batched: bool


@dataclass
class Plan:
    num_qubits: int
    num_features: int
    num_params: int
    ops: list
    source_kind: np.ndarray  # per gate: 0 feature, 1 param, 2 fixed
    source_index: np.ndarray
    fixed_value: np.ndarray
    zsign: np.ndarray = field(repr=False)


def _diag_signs(gate: GateSpec, n: int) -> np.ndarray:
    idx = np.arange(2**n)
    t = (idx >> gate.target) & 1
    s = (2 * t - 1).astype(np.float64)
    if gate.control is not None:
        s *= (idx >> gate.control) & 1
    return s


def compile_plan(num_qubits: int, gates, num_features: int, num_params: int) -> Plan:
    """Fuse a gate list into single-qubit and diagonal operations.

    Single-qubit gates accumulate per qubit until a CRZ touches that qubit;
    consecutive CRZ gates share one diagonal.  Only commuting gates are
    reordered, so the plan is exactly equivalent to the gate list.
    """
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    gates = list(gates)
    kinds = {Source.FEATURE: 0, Source.PARAM: 1, Source.FIXED: 2}
    source_kind = np.array([kinds[g.source] for g in gates], dtype=np.int64)
    source_index = np.array(
        [int(g.value) if g.source is not Source.FIXED else -1 for g in gates], dtype=np.int64
    )
    fixed_value = np.array(
        [g.value if g.source is Source.FIXED else 0.0 for g in gates], dtype=np.float64
    )
    for g in gates:
        g.check(num_qubits)
        if g.source is Source.FEATURE and g.value >= num_features:
            raise IndexError(f"feature index {int(g.value)} >= {num_features}")
        if g.source is Source.PARAM and g.value >= num_params:
            raise IndexError(f"param index {int(g.value)} >= {num_params}")

    ops: list = []
    pending: dict[int, list[int]] = {q: [] for q in range(num_qubits)}
    # the open diagonal is kept out of ``ops`` until closed, so a flush of a
    # qubit it does not touch can still be emitted ahead of it
    open_diag: list[int] = []
    diag_qubits: set[int] = set()

    def slots(positions):
        return [(j, int(gates[p].value)) for j, p in enumerate(positions)
                if gates[p].source is Source.PARAM]

    def batched(positions):
        return any(gates[p].source is Source.FEATURE for p in positions)

    def close_diag():
        if open_diag:
            pos = np.array(open_diag)
            ops.append(_DiagOp(
                positions=pos,
                signs=np.stack([_diag_signs(gates[p], num_qubits) for p in pos]),
                param_slots=slots(pos),
                batched=batched(pos),
            ))
        open_diag.clear()
        diag_qubits.clear()

    def flush(q):
        if not pending[q]:
            return
        if q in diag_qubits:
            close_diag()
        pos = np.array(pending[q])
        ops.append(_SingleOp(
            qubit=q,
            positions=pos,
            paulis=np.stack([_PAULI[gates[p].kind] for p in pos]),
            param_slots=slots(pos),
            batched=batched(pos),
        ))
        pending[q] = []

    for pos, g in enumerate(gates):
        if g.kind is GateKind.CRZ:
            flush(g.control)
            flush(g.target)
            open_diag.append(pos)
            diag_qubits.update(g.qubits)
        else:
            pending[g.target].append(pos)
    close_diag()
    for q in range(num_qubits):
        flush(q)

    return Plan(num_qubits, num_features, num_params, ops,
                source_kind, source_index, fixed_value, z_signs(num_qubits))


def plan_for(circuit) -> Plan:
    plan = getattr(circuit, "plan", None)
    if plan is None:
        plan = compile_plan(circuit.num_qubits, circuit.gates,
                            circuit.num_features, circuit.num_params)
    return plan


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def _apply_single(psi, u, q, out):
    nb_, dim = psi.shape
    shared = u.shape[0] == 1
    lo = 1 << q
    for b in range(nb_):
        k = 0 if shared else b
        u00 = u[k, 0, 0]
        u01 = u[k, 0, 1]
        u10 = u[k, 1, 0]
        u11 = u[k, 1, 1]
        for h in range(0, dim, 2 * lo):
            for l in range(lo):
                i0 = h + l
                i1 = i0 + lo
                a0 = psi[b, i0]
                a1 = psi[b, i1]
                out[b, i0] = u00 * a0 + u01 * a1
                out[b, i1] = u10 * a0 + u11 * a1


@nb.njit(cache=True)
def _backprop_single(psi_prev, lam, u, q, need_m, m_out, lam_out):
    # lam_out = u^dagger lam;  m_out[b, a, c] = sum_rest psi_prev[a] conj(lam[c])
    nb_, dim = psi_prev.shape
    shared = u.shape[0] == 1
    lo = 1 << q
    for b in range(nb_):
        k = 0 if shared else b
        v00 = np.conj(u[k, 0, 0])
        v01 = np.conj(u[k, 1, 0])
        v10 = np.conj(u[k, 0, 1])
        v11 = np.conj(u[k, 1, 1])
        m00 = 0j
        m01 = 0j
        m10 = 0j
        m11 = 0j
        for h in range(0, dim, 2 * lo):
            for l in range(lo):
                i0 = h + l
                i1 = i0 + lo
                l0 = lam[b, i0]
                l1 = lam[b, i1]
                if need_m:
                    p0 = psi_prev[b, i0]
                    p1 = psi_prev[b, i1]
                    c0 = np.conj(l0)
                    c1 = np.conj(l1)
                    m00 += p0 * c0
                    m01 += p0 * c1
                    m10 += p1 * c0
                    m11 += p1 * c1
                lam_out[b, i0] = v00 * l0 + v01 * l1
                lam_out[b, i1] = v10 * l0 + v11 * l1
        m_out[b, 0, 0] = m00
        m_out[b, 0, 1] = m01
        m_out[b, 1, 0] = m10
        m_out[b, 1, 1] = m11


def _resolve_angles(plan: Plan, features: np.ndarray, params: np.ndarray) -> np.ndarray:
    nb_ = features.shape[0]
    angles = np.empty((nb_, len(plan.source_kind)), dtype=np.float64)
    is_f = plan.source_kind == 0
    is_p = plan.source_kind == 1
    is_c = plan.source_kind == 2
    angles[:, is_f] = features[:, plan.source_index[is_f]]
    angles[:, is_p] = params[plan.source_index[is_p]]
    angles[:, is_c] = plan.fixed_value[is_c]
    return angles


def _component_matrices(op: _SingleOp, angles: np.ndarray) -> np.ndarray:
    th = angles[:, op.positions] if op.batched else angles[:1, op.positions]
    c = np.cos(th / 2)[..., None, None]
    s = np.sin(th / 2)[..., None, None]
    return c * np.eye(2) - 1j * s * op.paulis  # (B, m, 2, 2)


def _product(mats: np.ndarray) -> np.ndarray:
    u = mats[:, 0]
    for j in range(1, mats.shape[1]):
        u = mats[:, j] @ u
    return u


def _diag_phase(op: _DiagOp, angles: np.ndarray) -> np.ndarray:
    th = angles[:, op.positions] if op.batched else angles[:1, op.positions]
    return np.exp(0.5j * (th @ op.signs))  # (B or 1, 2**n)


def _check_inputs(plan: Plan, features, params):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[None, :]
    params = np.asarray(params, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != plan.num_features:
        raise ValueError(
            f"expected {plan.num_features} features per sample, got shape {features.shape}")
    if params.shape != (plan.num_params,):
        raise ValueError(f"expected {plan.num_params} params, got shape {params.shape}")
    return features, params


def _forward(plan: Plan, features, params, keep: bool):
    angles = _resolve_angles(plan, features, params)
    nb_ = features.shape[0]
    psi = np.zeros((nb_, 2**plan.num_qubits), dtype=np.complex128)
    psi[:, 0] = 1.0
    states = [psi] if keep else None
    cache = []
    for op in plan.ops:
        if isinstance(op, _SingleOp):
            mats = _component_matrices(op, angles)
            u = _product(mats)
            nxt = np.empty_like(psi)
            _apply_single(psi, u, op.qubit, nxt)
            cache.append((mats, u))
        else:
            phase = _diag_phase(op, angles)
            nxt = psi * phase
            cache.append(phase)
        psi = nxt
        if keep:
            states.append(psi)
    return psi, states, cache


def simulate(circuit, features, params) -> np.ndarray:
    """Final statevectors, shape ``(batch, 2**num_qubits)``."""
    plan = plan_for(circuit)
    features, params = _check_inputs(plan, features, params)
    psi, _, _ = _forward(plan, features, params, keep=False)
    return psi


def expectations_from_states(states: np.ndarray, zsign: np.ndarray) -> np.ndarray:
    probs = states.real**2 + states.imag**2
    return probs @ zsign.T


def expectations(circuit, features, params) -> np.ndarray:
    """Pauli-Z expectation per qubit, shape ``(batch, num_qubits)``."""
    plan = plan_for(circuit)
    return expectations_from_states(simulate(circuit, features, params), plan.zsign)


def evaluate(circuit, features, params) -> np.ndarray:
    """Z expectations of a single input, shape ``(num_qubits,)``."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 1:
        raise ValueError("evaluate takes one feature vector; use expectations() for batches")
    return expectations(circuit, features, params)[0]


def value_and_gradient(circuit, features, params, cotangent):
    """Expectations and per-sample gradients of ``sum_q cot_q <Z_q>``.

    ``cotangent`` is either an array ``(batch, num_qubits)`` or a callable
    mapping the expectation array to one; the callable form lets a loss
    choose its weights after seeing the forward pass.

    Returns ``(expvals, grads)`` with ``grads`` of shape ``(batch, num_params)``.
    """
    plan = plan_for(circuit)
    features, params = _check_inputs(plan, features, params)
    psi, states, cache = _forward(plan, features, params, keep=True)
    ez = expectations_from_states(psi, plan.zsign)
    cot = cotangent(ez) if callable(cotangent) else cotangent
    cot = np.asarray(cot, dtype=np.float64)
    if cot.ndim == 1:
        cot = np.broadcast_to(cot, ez.shape)
    if cot.shape != ez.shape:
        raise ValueError(f"cotangent shape {cot.shape} does not match {ez.shape}")

    nb_ = features.shape[0]
    grads = np.zeros((nb_, plan.num_params), dtype=np.float64)
    lam = psi * (cot @ plan.zsign)
    m = np.empty((nb_, 2, 2), dtype=np.complex128)
    for k in range(len(plan.ops) - 1, -1, -1):
        op = plan.ops[k]
        psi_prev = states[k]
        if isinstance(op, _SingleOp):
            mats, u = cache[k]
            need = bool(op.param_slots)
            lam_new = np.empty_like(lam)
            _backprop_single(psi_prev, lam, u, op.qubit, need, m, lam_new)
            if need:
                _single_param_grads(op, mats, m, grads)
            lam = lam_new
        else:
            phase = cache[k]
            if op.param_slots:
                w = np.conj(lam) * states[k + 1]
                for j, p in op.param_slots:
                    grads[:, p] -= (w.imag @ op.signs[j])
            lam = lam * np.conj(phase)
    return ez, grads


def _single_param_grads(op: _SingleOp, mats, m, grads):
    # d/dt_j <lam|U|psi> = Tr(-i/2 A_j R_j ... R_1 M R_m ... R_{j+1})
    mcount = mats.shape[1]
    nb_ = m.shape[0]
    suffix = [None] * mcount
    acc = np.broadcast_to(np.eye(2, dtype=np.complex128), (mats.shape[0], 2, 2))
    for j in range(mcount - 1, -1, -1):
        suffix[j] = acc
        acc = acc @ mats[:, j]
    prefix = mats[:, 0]
    wanted = dict(op.param_slots)
    for j in range(mcount):
        if j > 0:
            prefix = mats[:, j] @ prefix
        if j in wanted:
            inner = np.broadcast_to(prefix, (nb_, 2, 2)) @ m @ suffix[j]
            # Tr(A inner) with A hermitian Pauli
            tr = np.einsum("ab,nba->n", op.paulis[j], inner)
            grads[:, wanted[j]] += 2.0 * np.real(-0.5j * tr)


def gradient(circuit, features, params, cotangent) -> np.ndarray:
    """Gradient of ``sum_q cotangent[q] * <Z_q>`` for one input."""
    features = np.asarray(features, dtype=np.float64)
    cotangent = np.asarray(cotangent, dtype=np.float64)
    if features.ndim != 1:
        raise ValueError("gradient takes one feature vector")
    if cotangent.shape != (circuit.num_qubits,):
        raise ValueError(f"cotangent must have length {circuit.num_qubits}")
    _, g = value_and_gradient(circuit, features, params, cotangent[None, :])
    return g[0]
