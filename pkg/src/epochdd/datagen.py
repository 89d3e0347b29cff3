"""Synthetic datasets with a prescribed spectral structure, and spectral initialisation.

Orthogonal factors come from seeded Gaussians orthonormalised by
``numpy.linalg.qr``, with column signs fixed so the first nonzero entry of
every column is positive.  The generator is numpy's PCG64.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CovarianceError, DimensionError, InitError, ParameterError, RankViolation

FORMAT_VERSION = 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def fix_signs(Q: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Flip columns so the first entry with magnitude above ``tol`` is positive."""
    Q = np.array(Q, dtype=float)
    for j in range(Q.shape[1]):
        nz = np.flatnonzero(np.abs(Q[:, j]) > tol)
        if nz.size and Q[nz[0], j] < 0:
            Q[:, j] = -Q[:, j]
    return Q


def random_orthonormal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """A rows x cols matrix with orthonormal columns (rows >= cols)."""
    if cols > rows:
        raise DimensionError(f"cannot fit {cols} orthonormal columns in dimension {rows}")
    Q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return fix_signs(Q)


@dataclass(frozen=True)
class SpectralDataset:
    """Data matrices plus the truth they were generated from.

    ``Lambda`` (length d_x) and ``Sigma`` (length min(d_x, d_y)) hold the
    diagonals; ``Sigma[i]`` pairs with column ``i`` of ``V``.
    """

    X: np.ndarray
    Y: np.ndarray
    U: np.ndarray
    V: np.ndarray
    U_yx: np.ndarray
    Lambda: np.ndarray
    Sigma: np.ndarray
    Wbar: np.ndarray
    noise_diag: np.ndarray
    noise_cov: np.ndarray
    true_cov: np.ndarray
    seed: int
    construction: str  # "exact" or "sampled"
    rho: Optional[np.ndarray] = None
    misalignment: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d_x(self) -> int:
        return self.X.shape[1]

    @property
    def d_y(self) -> int:
        return self.Y.shape[1]

    @property
    def m(self) -> int:
        return min(self.d_x, self.d_y)

    @property
    def E(self) -> np.ndarray:
        """Realised in-sample noise Y - X Wbar^T."""
        return self.Y - self.X @ self.Wbar.T

    def sigma_matrix(self) -> np.ndarray:
        """Sigma as an m x d_x rectangular diagonal matrix."""
        S = np.zeros((self.m, self.d_x))
        S[np.arange(self.m), np.arange(self.m)] = self.Sigma
        return S


def _pinv_diag(d: np.ndarray) -> np.ndarray:
    out = np.zeros_like(d, dtype=float)
    pos = d > 0
    out[pos] = 1.0 / d[pos]
    return out


def synthesize_exact(n: int, d_x: int, d_y: int, lambda_diag: Sequence[float],
                     sigma_diag: Sequence[float], rho_diag: Sequence[float], seed: int,
                     orth_noise_scale: float = 0.0) -> SpectralDataset:
    """Build (X, Y) whose covariances have exactly the requested spectra.

    The noise is placed so that the true synaptic weights come out as
    ``(1 - rho_i) * sigma_i / lambda_i``.  ``orth_noise_scale > 0`` adds
    Gaussian noise orthogonal to the column space of X; it changes the noise
    covariance but none of the spectral identities.
    """
    lam = np.asarray(lambda_diag, dtype=float)
    sig = np.asarray(sigma_diag, dtype=float)
    rho = np.asarray(rho_diag, dtype=float)
    m = min(d_x, d_y)
    if lam.shape != (d_x,) or sig.shape != (m,) or rho.shape != (m,):
        raise DimensionError(f"need {d_x} lambdas and {m} sigmas/rhos, got {lam.shape}, {sig.shape}, {rho.shape}")
    if n < d_x:
        raise DimensionError(f"n={n} must be at least d_x={d_x}")
    if np.any(lam < 0) or np.any(sig < 0):
        raise ParameterError("spectra must be nonnegative")
    if np.any((rho < 0) | (rho > 1)):
        raise ParameterError("rho entries must lie in [0, 1]")
    bad = np.flatnonzero((lam[:m] == 0) & (sig > 0))
    if bad.size:
        raise RankViolation(f"sigma > 0 with lambda = 0 at indices {bad.tolist()}")

    rng = make_rng(seed)
    U = random_orthonormal(n, d_x, rng)
    V = random_orthonormal(d_x, d_x, rng)
    U_yx = random_orthonormal(d_y, m, rng)

    sqrt_lam = np.sqrt(lam)
    inv_sqrt = _pinv_diag(sqrt_lam)
    X = np.sqrt(n) * U @ np.diag(sqrt_lam) @ V.T

    # Y = sqrt(n) U M^T with M = U_yx Sigma Lambda^{-1/2}
    S_tilde = np.zeros((m, d_x))
    S_tilde[np.arange(m), np.arange(m)] = sig * inv_sqrt[:m]
    Y = np.sqrt(n) * U @ (U_yx @ S_tilde).T

    noise_diag = rho * sig * inv_sqrt[:m]
    D = np.zeros((d_x, m))
    D[np.arange(m), np.arange(m)] = noise_diag
    E = np.sqrt(n) * U @ D @ U_yx.T
    if orth_noise_scale > 0:
        K = rng.standard_normal((n, d_y)) * orth_noise_scale
        K -= U @ (U.T @ K)
        Y = Y + K
        E = E + K

    Zbar = np.zeros((m, d_x))
    Zbar[np.arange(m), np.arange(m)] = sig * _pinv_diag(lam[:m]) - noise_diag * inv_sqrt[:m]
    Wbar = U_yx @ Zbar @ V.T
    return SpectralDataset(
        X=X, Y=Y, U=U, V=V, U_yx=U_yx, Lambda=lam, Sigma=sig, Wbar=Wbar,
        noise_diag=noise_diag, noise_cov=E.T @ E / n, true_cov=V @ np.diag(lam) @ V.T,
        seed=int(seed), construction="exact", rho=rho,
    )


def psd_factor(C: np.ndarray, name: str, tol: float = 1e-10) -> np.ndarray:
    """Return A with A A^T = C, or raise CovarianceError."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise CovarianceError(f"{name} must be square, got {C.shape}")
    scale = max(1.0, float(np.max(np.abs(C)))) if C.size else 1.0
    if not np.allclose(C, C.T, atol=tol * scale):
        raise CovarianceError(f"{name} is not symmetric")
    w, Q = np.linalg.eigh(0.5 * (C + C.T))
    if w.size and w.min() < -tol * scale:
        raise CovarianceError(f"{name} has negative eigenvalue {w.min()!r}")
    return Q * np.sqrt(np.clip(w, 0.0, None))


def spectral_decomposition(X: np.ndarray, Y: np.ndarray):
    """Empirical SVD structure of (X, Y).

    Returns (U, V, Lambda, Sigma, U_yx, misalignment).  Each singular triple
    of n^-1 Y^T X is paired with the column of V it overlaps most; V is then
    reordered so paired columns come first.  ``misalignment`` is
    1 - min overlap, zero when the right singular vectors are shared.
    """
    n, d_x = X.shape
    d_y = Y.shape[1]
    m = min(d_x, d_y)
    Uf, s, Vt = np.linalg.svd(X / np.sqrt(n), full_matrices=False)
    V = Vt.T
    Syx = Y.T @ X / n
    Uy, sy, Vyt = np.linalg.svd(Syx, full_matrices=False)
    Uy, sy, Vyt = Uy[:, :m], sy[:m], Vyt[:m]
    overlap = Vyt @ V  # m x d_x
    order, used, sign, worst = [], set(), [], 1.0
    for i in range(m):
        cand = [j for j in np.argsort(-np.abs(overlap[i])) if j not in used]
        j = int(cand[0])
        used.add(j)
        order.append(j)
        sign.append(1.0 if overlap[i, j] >= 0 else -1.0)
        if sy[i] > 0:
            worst = min(worst, abs(overlap[i, j]))
    # remaining columns keep their eigenvalue order
    perm = order + [j for j in range(d_x) if j not in used]
    # Sort the paired block by eigenvalue so the result does not depend on sigma order.
    paired = sorted(range(m), key=lambda i: perm[i])
    perm = [perm[i] for i in paired] + perm[m:]
    U_yx = Uy[:, paired] * np.asarray(sign)[paired]
    Sigma = sy[paired]
    V = V[:, perm]
    Lambda = s[perm] ** 2
    U = Uf[:, perm]
    return U, V, Lambda, Sigma, U_yx, 1.0 - worst


def synthesize_sampled(n: int, d_x: int, d_y: int, true_cov, Wbar, noise_cov, seed: int) -> SpectralDataset:
    """Draw x ~ N(0, true_cov), y = x Wbar^T + eps with eps ~ N(0, noise_cov)."""
    Wbar = np.asarray(Wbar, dtype=float)
    if Wbar.shape != (d_y, d_x):
        raise DimensionError(f"Wbar must be {d_y}x{d_x}, got {Wbar.shape}")
    Ax = psd_factor(true_cov, "true_cov")
    Ae = psd_factor(noise_cov, "noise_cov")
    if Ax.shape[0] != d_x or Ae.shape[0] != d_y:
        raise DimensionError("covariance shapes do not match d_x, d_y")
    rng = make_rng(seed)
    X = rng.standard_normal((n, d_x)) @ Ax.T
    E = rng.standard_normal((n, d_y)) @ Ae.T
    Y = X @ Wbar.T + E
    U, V, Lambda, Sigma, U_yx, mis = spectral_decomposition(X, Y)
    m = min(d_x, d_y)
    noise_diag = np.diag(U.T @ E @ U_yx)[:m] / np.sqrt(n)
    return SpectralDataset(
        X=X, Y=Y, U=U, V=V, U_yx=U_yx, Lambda=Lambda, Sigma=Sigma, Wbar=Wbar,
        noise_diag=noise_diag, noise_cov=np.asarray(noise_cov, dtype=float),
        true_cov=np.asarray(true_cov, dtype=float), seed=int(seed), construction="sampled",
        misalignment=float(mis),
    )


def true_synaptic_weights(dataset: SpectralDataset) -> np.ndarray:
    """Zbar = U_yx^T Wbar V (m x d_x)."""
    return dataset.U_yx.T @ dataset.Wbar @ dataset.V


def noise_shifted_weights(dataset: SpectralDataset) -> np.ndarray:
    """The same matrix computed from the spectra and the realised noise.

    Uses E_tilde = n^{-1/2} U^T E U_yx (d_x x m), so that
    Zbar = Sigma Lambda^+ - E_tilde^T (Lambda^{1/2})^+.
    """
    E_tilde = dataset.U.T @ dataset.E @ dataset.U_yx / np.sqrt(dataset.n)
    return dataset.sigma_matrix() @ np.diag(_pinv_diag(dataset.Lambda)) \
        - E_tilde.T @ np.diag(_pinv_diag(np.sqrt(dataset.Lambda)))


@dataclass(frozen=True)
class InitSpec:
    """Spectral initialisation: mode i gets first-layer column a0[i] r_i and second-layer row b0[i] r_i."""

    h: int
    r_vectors: np.ndarray  # (k, h)
    a0: np.ndarray
    b0: np.ndarray

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.r_vectors, dtype=float))
        object.__setattr__(self, "r_vectors", R)
        object.__setattr__(self, "a0", np.asarray(self.a0, dtype=float))
        object.__setattr__(self, "b0", np.asarray(self.b0, dtype=float))
        k = len(self.a0)
        if len(self.b0) != k or R.shape != (k, self.h):
            raise InitError(f"need {k} r-vectors of length h={self.h}, got {R.shape}")
        norms = np.linalg.norm(R, axis=1)
        if np.any((norms > 0) & (np.abs(norms - 1) > 1e-12)):
            raise InitError("nonzero r-vectors must have unit length")
        G = R @ R.T
        if np.any(np.abs(G - np.diag(np.diag(G))) > 1e-12):
            raise InitError("r-vectors must be mutually orthogonal")

    @classmethod
    def standard(cls, h: int, a0: Sequence[float], b0: Sequence[float]) -> "InitSpec":
        """Mode i uses the i-th basis vector; modes beyond h get r = 0."""
        k = len(a0)
        R = np.zeros((k, h))
        idx = np.arange(min(k, h))
        R[idx, idx] = 1.0
        return cls(h, R, np.asarray(a0, dtype=float), np.asarray(b0, dtype=float))


def spectral_init(dataset: SpectralDataset, init: InitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return (W1, W2) with U_yx^T W2 W1 V diagonal, entries a0_i b0_i (where r_i != 0)."""
    k = len(init.a0)
    if k > dataset.m:
        raise InitError(f"{k} modes exceed min(d_x, d_y) = {dataset.m}")
    A = np.zeros((init.h, dataset.d_x))
    A[:, :k] = (init.r_vectors * init.a0[:, None]).T
    B = np.zeros((dataset.m, init.h))
    B[:k, :] = init.r_vectors * init.b0[:, None]
    return A @ dataset.V.T, dataset.U_yx @ B


def synaptic(dataset: SpectralDataset, W: np.ndarray) -> np.ndarray:
    """Z = U_yx^T W V; works on a stack of matrices too."""
    return dataset.U_yx.T @ W @ dataset.V


# ---------------------------------------------------------------- export / import

_MATRICES = ("X", "Y", "U", "V", "U_yx", "Lambda", "Sigma", "Wbar", "noise_diag", "noise_cov", "true_cov")


def export_dataset(dataset: SpectralDataset, directory: str, mode_params: Optional[list] = None) -> None:
    """Write one ``.npy`` file per matrix (little-endian float64, C order) plus ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    files = {}
    arrays = {name: getattr(dataset, name) for name in _MATRICES}
    if dataset.rho is not None:
        arrays["rho"] = dataset.rho
    for role, arr in arrays.items():
        fname = f"{role}.npy"
        np.save(os.path.join(directory, fname), np.ascontiguousarray(arr, dtype="<f8"), allow_pickle=False)
        files[role] = {"file": fname, "shape": list(np.shape(arr)), "dtype": "<f8"}
    manifest = {
        "format_version": FORMAT_VERSION,
        "construction": dataset.construction,
        "seed": dataset.seed,
        "n": dataset.n, "d_x": dataset.d_x, "d_y": dataset.d_y,
        "misalignment": dataset.misalignment,
        "matrices": files,
        "modes": mode_params or [],
        "meta": dataset.meta,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def import_dataset(directory: str) -> SpectralDataset:
    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    arrays = {}
    for role, info in manifest["matrices"].items():
        arr = np.load(os.path.join(directory, info["file"]), allow_pickle=False)
        if list(arr.shape) != info["shape"]:
            raise DimensionError(f"{role}: stored shape {arr.shape} disagrees with manifest")
        arrays[role] = arr
    return SpectralDataset(
        **{name: arrays[name] for name in _MATRICES},
        seed=int(manifest["seed"]), construction=manifest["construction"],
        rho=arrays.get("rho"), misalignment=float(manifest.get("misalignment", 0.0)),
        meta=manifest.get("meta", {}),
    )
