"""Fourier coefficients of small circuit models by sampling on a regular grid.

A model whose every input enters through single-axis rotations is a
trigonometric polynomial in its inputs; a feature encoded ``r`` times has
integer frequencies in ``[-r, r]``.  Sampling ``2B + 1`` points per input on
``[0, 2 pi)`` and taking the multidimensional DFT recovers the coefficients
exactly when the true spectrum lies inside ``[-B, B]``, and exposes anything
outside the predicted support as energy at the extra frequencies.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .. import qsim
from ..circuits import CircuitTemplate, build_idu, build_row_summed
from ..qsim import GateKind, GateSpec, Source

MAX_DIMS = 6
MAX_GRID_POINTS = 2_000_000


class GridTooLarge(ValueError):
    pass


@dataclass
class FourierSpectrum:
    """Coefficient array indexed by ``omega + bound`` along each input axis."""

    grid: np.ndarray
    bound: int
    shape: tuple[int, int]

    @property
    def dims(self) -> int:
        return self.grid.ndim

    def coefficient(self, omega) -> complex:
        omega = np.asarray(omega).reshape(-1)
        return complex(self.grid[tuple(omega + self.bound)])

    def frequencies(self):
        return itertools.product(range(-self.bound, self.bound + 1), repeat=self.dims)

    @property
    def coefficients(self) -> dict:
        """Map ``omega`` (rows x cols nested tuple) -> complex coefficient."""
        rows, cols = self.shape
        out = {}
        for w in self.frequencies():
            key = tuple(tuple(w[r * cols:(r + 1) * cols]) for r in range(rows))
            out[key] = self.coefficient(w)
        return out

    def hermitian_error(self) -> float:
        # c_{-w} is the grid reversed along every axis
        flipped = self.grid[(slice(None, None, -1),) * self.dims]
        return float(np.abs(flipped - np.conj(self.grid)).max())

    def support_mask(self, bounds) -> np.ndarray:
        bounds = np.broadcast_to(np.asarray(bounds), (self.dims,))
        w = np.arange(-self.bound, self.bound + 1)
        mask = np.ones(self.grid.shape, dtype=bool)
        for axis, b in enumerate(bounds):
            shape = [1] * self.dims
            shape[axis] = -1
            mask &= (np.abs(w) <= b).reshape(shape)
        return mask

    def energy_outside(self, bounds) -> float:
        """Fraction of total squared coefficient mass outside ``|omega_i| <= bounds[i]``."""
        power = np.abs(self.grid) ** 2
        total = power.sum()
        if total == 0:
            return 0.0
        return float(power[~self.support_mask(bounds)].sum() / total)

    def max_outside(self, bounds) -> float:
        outside = np.abs(self.grid)[~self.support_mask(bounds)]
        return float(outside.max()) if outside.size else 0.0

    def reconstruct(self, x) -> np.ndarray:
        """Evaluate the Fourier sum at points ``x`` of shape ``(K, dims)``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        w = np.array(list(self.frequencies()), dtype=np.float64)
        c = np.array([self.coefficient(o) for o in w.astype(int)])
        return (np.exp(1j * x @ w.T) @ c).real


def predicted_bounds(circuit: CircuitTemplate) -> list[int]:
    """Per-feature frequency bound: the number of gates carrying that feature."""
    return circuit.feature_counts()


def fourier_probe(circuit: CircuitTemplate, params, bound: int, rows: int | None = None,
                  cols: int | None = None, readout: int = 0) -> FourierSpectrum:
    """Fourier coefficients of ``<Z_readout>`` as a function of all features."""
    dims = circuit.num_features
    if rows is None or cols is None:
        rows, cols = 1, dims
    if rows * cols != dims:
        raise ValueError(f"rows*cols = {rows * cols} but circuit has {dims} features")
    length = 2 * bound + 1
    npoints = length**dims
    if dims > MAX_DIMS or npoints > MAX_GRID_POINTS:
        raise GridTooLarge(
            f"grid of {length}^{dims} = {npoints} points exceeds limits "
            f"({MAX_DIMS} inputs, {MAX_GRID_POINTS} points)")
    axis = 2 * np.pi * np.arange(length) / length
    mesh = np.meshgrid(*([axis] * dims), indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)
    values = np.empty(npoints)
    for a in range(0, npoints, 4096):
        values[a:a + 4096] = qsim.expectations(circuit, points[a:a + 4096], params)[:, readout]
    coeffs = np.fft.fftn(values.reshape((length,) * dims)) / npoints
    return FourierSpectrum(np.fft.fftshift(coeffs), bound, (rows, cols))


# --------------------------------------------------------------------------
# toy circuits
# --------------------------------------------------------------------------


def cosine_circuit() -> CircuitTemplate:
    """One qubit, one RX carrying feature 0: ``<Z> = cos x``."""
    return CircuitTemplate(1, (GateSpec(GateKind.RX, 0, Source.FEATURE, 0),), 1, 0)


def toy_idu(num_qubits: int, rows: int, splits: int | None = None) -> CircuitTemplate:
    """IDU layout at toy size with one RY/RZ pair per qubit per layer."""
    return build_idu(rows if splits is None else splits, "rx", 2 * num_qubits,
                     num_qubits=num_qubits, num_rows=rows)


def toy_dru(num_qubits: int, repetitions: int) -> CircuitTemplate:
    """Row-summed input re-uploaded ``repetitions`` times."""
    return build_row_summed("dru", 2 * num_qubits, num_qubits=num_qubits, num_rows=repetitions)


def format_report(spec: FourierSpectrum, bounds=None, recon_error: float | None = None) -> str:
    """``omega re im`` sorted by magnitude, then a residual summary line."""
    entries = sorted(spec.coefficients.items(), key=lambda kv: -abs(kv[1]))
    lines = ["omega re im"]
    for omega, c in entries:
        label = ";".join(",".join(str(w) for w in row) for row in omega)
        lines.append(f"[{label}] {c.real:.12e} {c.imag:.12e}")
    summary = f"# hermitian_error {spec.hermitian_error():.3e}"
    if bounds is not None:
        summary += (f" energy_outside {spec.energy_outside(bounds):.3e}"
                    f" max_outside {spec.max_outside(bounds):.3e}")
    if recon_error is not None:
        summary += f" reconstruction_error {recon_error:.3e}"
    lines.append(summary)
    return "\n".join(lines) + "\n"
