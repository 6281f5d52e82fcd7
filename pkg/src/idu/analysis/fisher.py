"""Empirical Fisher information, its eigenvalue spectrum, and the normalized
effective dimension."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .. import qsim
from ..train import softmax

JITTER = 1e-10
DEFAULT_NS = (10**3, 10**4, 10**5, 10**6)


def loglik_gradients(circuit, params, features, labels) -> np.ndarray:
    """Rows are d/dtheta ln p(y|x) for each (x, y); shape ``(B, P)``."""
    onehot = np.eye(circuit.num_qubits)[np.asarray(labels)]
    _, g = qsim.value_and_gradient(circuit, features, params,
                                   lambda ez: onehot - softmax(ez))
    return g


def loglik_gradient(circuit, params, x, y) -> np.ndarray:
    return loglik_gradients(circuit, params, np.asarray(x, dtype=np.float64)[None, :], [y])[0]


def sampled_scores(circuit, params, features, rng: np.random.Generator):
    """Score vectors with labels drawn from the model's own p(y|x).

    Returns ``(scores, labels)``.
    """
    box = {}

    def cotangent(ez):
        p = softmax(ez)
        u = rng.random(len(p))[:, None]
        # inverse-CDF draw, clipped against round-off in the last bin
        y = np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), p.shape[1] - 1)
        box["y"] = y
        return np.eye(p.shape[1])[y] - p

    _, g = qsim.value_and_gradient(circuit, features, params, cotangent)
    return g, box["y"]


@dataclass
class FimEstimate:
    matrix: np.ndarray
    k: int
    theta: np.ndarray

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def empirical_fim(circuit, params, features, k: int, seed: int,
                  chunk: int = 256) -> FimEstimate:
    """Average outer product of score vectors over ``k`` sampled (x, y) pairs.

    Inputs are drawn from ``features`` without replacement; each label is
    drawn from the model conditional at ``params``.
    """
    features = np.asarray(features, dtype=np.float64)
    if not 1 <= k <= len(features):
        raise ValueError(f"k={k} must lie in [1, {len(features)}]")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(features), size=k, replace=False)
    params = np.asarray(params, dtype=np.float64)
    fim = np.zeros((circuit.num_params, circuit.num_params))
    for a in range(0, k, chunk):
        g, _ = sampled_scores(circuit, params, features[idx[a:a + chunk]], rng)
        fim += g.T @ g
    fim /= k
    return FimEstimate(0.5 * (fim + fim.T), k, params.copy())


def fims_over_thetas(circuit, features, num_thetas: int, k: int, seed: int):
    """FIMs at ``num_thetas`` parameter points drawn uniformly from [0, pi]^d."""
    ss = np.random.SeedSequence(seed)
    theta_seq, *fim_seqs = ss.spawn(num_thetas + 1)
    thetas = np.random.default_rng(theta_seq).uniform(0, np.pi, (num_thetas, circuit.num_params))
    return [empirical_fim(circuit, th, features, k, int(fs.generate_state(1)[0]))
            for th, fs in zip(thetas, fim_seqs)]


def _matrix(f) -> np.ndarray:
    return f.matrix if isinstance(f, FimEstimate) else np.asarray(f, dtype=np.float64)


def normalize_fims(fims) -> list[np.ndarray]:
    """Scale so the average trace over parameter points equals ``d``."""
    mats = [_matrix(f) for f in fims]
    d = mats[0].shape[0]
    mean_trace = np.mean([np.trace(m) for m in mats])
    if mean_trace <= 0:
        return [np.zeros_like(m) for m in mats]
    return [d * m / mean_trace for m in mats]


# --------------------------------------------------------------------------
# spectrum
# --------------------------------------------------------------------------


@dataclass
class Spectrum:
    edges: np.ndarray
    counts: np.ndarray
    above_cut: int
    eigenvalues: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts)


def eigenvalues(fims) -> np.ndarray:
    out = []
    for i, f in enumerate(fims):
        try:
            out.append(np.linalg.eigvalsh(_matrix(f)))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"eigendecomposition failed for matrix {i}: {exc}")
    return np.concatenate(out)


def fim_spectrum(fims, bins: int = 6, cut: float = 1.0) -> Spectrum:
    """Histogram of pooled eigenvalues over [0, cut]; larger ones are only counted.

    Round-off negatives are placed in the first bin.
    """
    if len(fims) == 0:
        raise ValueError("need at least one matrix")
    ev = eigenvalues(fims)
    kept = np.clip(ev[ev <= cut], 0.0, None)
    counts, edges = np.histogram(kept, bins=bins, range=(0.0, cut))
    return Spectrum(edges, counts, int((ev > cut).sum()), ev)


# --------------------------------------------------------------------------
# effective dimension
# --------------------------------------------------------------------------


def c_n(n) -> float | np.ndarray:
    n = np.asarray(n, dtype=np.float64)
    return n / (2 * np.pi * np.log(n))


@dataclass
class EffDimCurve:
    n: np.ndarray
    ed_normalized: np.ndarray
    d: int
    num_thetas: int

    @property
    def c_n(self) -> np.ndarray:
        return c_n(self.n)


def effective_dimension(fims, n_list=DEFAULT_NS) -> EffDimCurve:
    """Normalized effective dimension ``ed_n / d`` for each ``n``.

    The parameter-space integral is the Monte Carlo mean over the supplied
    FIMs (one per uniformly drawn parameter point), evaluated as a
    log-mean-exp of ``0.5 * logdet(I + c_n F_hat)``.
    """
    if len(fims) < 2:
        raise ValueError("need FIMs at two or more parameter points")
    n_arr = np.asarray(n_list, dtype=np.float64)
    if np.any(n_arr < 3):
        raise ValueError("every n must be >= 3")
    mats = normalize_fims(fims)
    d = mats[0].shape[0]
    spectra = [np.linalg.eigvalsh(m) for m in mats]
    out = []
    for c in c_n(n_arr):
        half_logdets = []
        for i, ev in enumerate(spectra):
            terms = 1.0 + JITTER + c * ev
            if np.any(terms <= 0):
                raise FloatingPointError(f"non-positive determinant at theta index {i}")
            val = 0.5 * np.log(terms).sum()
            if not np.isfinite(val):
                raise FloatingPointError(f"non-finite log-determinant at theta index {i}")
            half_logdets.append(val)
        lme = logsumexp(half_logdets) - np.log(len(mats))
        out.append(2.0 * lme / np.log(c) / d)
    return EffDimCurve(n_arr, np.array(out), d, len(mats))


# --------------------------------------------------------------------------
# text output
# --------------------------------------------------------------------------


def format_spectrum_table(spectra: dict) -> str:
    """``bin_center count_<label> ...`` with one row per bin."""
    labels = list(spectra)
    first = spectra[labels[0]]
    lines = ["bin_center " + " ".join(f"count_{lab}" for lab in labels)]
    for i, center in enumerate(first.centers):
        lines.append(f"{center:.10f} " + " ".join(str(int(spectra[lab].counts[i])) for lab in labels))
    lines.append("# above_cut " + " ".join(str(spectra[lab].above_cut) for lab in labels))
    return "\n".join(lines) + "\n"


def format_effdim_table(curves: dict) -> str:
    """``n ed_<label> ...``, one row per resolution ``n``."""
    labels = list(curves)
    lines = ["n " + " ".join(f"ed_{lab}" for lab in labels)]
    for i, n in enumerate(curves[labels[0]].n):
        lines.append(f"{int(n)} " + " ".join(f"{curves[lab].ed_normalized[i]:.10f}" for lab in labels))
    return "\n".join(lines) + "\n"
