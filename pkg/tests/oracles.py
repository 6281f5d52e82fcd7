"""Independent reference implementations used only by the tests.

The statevector oracles never call into the fused simulator; gates are
built as full ``2**n x 2**n`` matrices from Kronecker products.  The Fisher
oracle reuses library score vectors but replaces label sampling with exact
enumeration over every label.
"""
import math

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)
AXES = {"RX": X, "RY": Y, "RZ": Z}


def rot(axis, theta):
    return math.cos(theta / 2) * I2 - 1j * math.sin(theta / 2) * AXES[axis]


def embed(n, ops):
    """Kronecker product with qubit 0 as the least significant factor."""
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def gate_matrix(n, kind, target, control, theta):
    if kind == "CRZ":
        return embed(n, {control: P0}) + embed(n, {control: P1, target: rot("RZ", theta)})
    return embed(n, {target: rot(kind, theta)})


def angle_of(gate, features, params):
    src = gate.source.value
    if src == "feature":
        return features[int(gate.value)]
    if src == "param":
        return params[int(gate.value)]
    return gate.value


def dense_state(circuit, features, params):
    n = circuit.num_qubits
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    for g in circuit.gates:
        psi = gate_matrix(n, g.kind.value, g.target, g.control,
                          angle_of(g, features, params)) @ psi
    return psi


def dense_unitary(circuit, features, params):
    n = circuit.num_qubits
    u = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        u = gate_matrix(n, g.kind.value, g.target, g.control,
                        angle_of(g, features, params)) @ u
    return u


def z_expectations(psi, n):
    p = np.abs(psi) ** 2
    out = []
    for q in range(n):
        zq = embed(n, {q: Z}).diagonal().real
        out.append(float(p @ zq))
    return np.array(out)


def bilinear_reference(img, out_size=10):
    """Direct transcription of the half-pixel bilinear sampling formula."""
    h, w = len(img), len(img[0])
    out = [[0.0] * out_size for _ in range(out_size)]
    for i in range(out_size):
        for j in range(out_size):
            y = (i + 0.5) * (h / out_size) - 0.5
            x = (j + 0.5) * (w / out_size) - 0.5
            y = min(max(y, 0.0), h - 1.0)
            x = min(max(x, 0.0), w - 1.0)
            y0, x0 = int(math.floor(y)), int(math.floor(x))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            dy, dx = y - y0, x - x0
            top = img[y0][x0] * (1 - dx) + img[y0][x1] * dx
            bot = img[y1][x0] * (1 - dx) + img[y1][x1] * dx
            out[i][j] = top * (1 - dy) + bot * dy
    return out


def checkerboard(size=28, cell=4):
    return [[255 if ((r // cell) + (c // cell)) % 2 == 0 else 0 for c in range(size)]
            for r in range(size)]


def central_difference(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def assert_grad_close(analytic, numeric, rtol=1e-5, atol=1e-7):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    err = np.abs(analytic - numeric)
    ok = err <= np.maximum(rtol * np.abs(numeric), atol)
    assert ok.all(), f"max abs err {err.max():.3e} at {np.argmax(err)}"


def toy3():
    """Three qubits, two features, three trainable angles."""
    from idu.circuits import CircuitTemplate
    from idu.qsim import GateKind, GateSpec, Source
    g = [GateSpec(GateKind.RX, 0, Source.FEATURE, 0), GateSpec(GateKind.RX, 1, Source.FEATURE, 1),
         GateSpec(GateKind.RY, 0, Source.PARAM, 0), GateSpec(GateKind.RY, 1, Source.PARAM, 1),
         GateSpec(GateKind.CRZ, 2, Source.FIXED, math.pi, control=0),
         GateSpec(GateKind.RX, 2, Source.PARAM, 2),
         GateSpec(GateKind.CRZ, 2, Source.FIXED, 1.1, control=1)]
    return CircuitTemplate(3, tuple(g), 2, 3)


def exact_fisher(circuit, params, features):
    """Fisher matrix summed over every label with exact model probabilities."""
    from idu import analysis, train
    probs = train.forward(circuit, features, params)
    fim = np.zeros((circuit.num_params, circuit.num_params))
    for y in range(circuit.num_qubits):
        g = analysis.loglik_gradients(circuit, params, features, np.full(len(features), y))
        fim += (g * probs[:, y:y + 1]).T @ g
    return fim / len(features)
