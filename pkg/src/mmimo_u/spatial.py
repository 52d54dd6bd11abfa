"""Covariance estimation, degree-of-freedom allocation and null-constrained precoding.

A BS that is silent observes only Wi-Fi transmissions plus noise. The sample
covariance of those observations reveals the subspace in which Wi-Fi devices
are heard; by reciprocity, transmitting in that subspace would interfere with
them. The BS therefore reserves its ``D`` dominant eigenvectors as nulls and
zero-forces ``K`` UEs on the remainder.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AllocationError, ConfigError, DataError


@dataclass(frozen=True)
class SilenceSnapshot:
    z_samples: np.ndarray  # (M, N)
    noise_var: float
    tx_powers: np.ndarray

    @property
    def M(self) -> int:
        return self.z_samples.shape[0]


@dataclass(frozen=True)
class CovarianceEstimate:
    Z_hat: np.ndarray
    U_hat: np.ndarray  # columns are eigenvectors, dominant first
    lambda_hat: np.ndarray  # descending
    M: int


@dataclass(frozen=True)
class SpatialAllocation:
    D: int
    K: int
    criterion: str


@dataclass(frozen=True)
class PrecoderSet:
    W: np.ndarray  # (N, K)
    zeta: float
    S: np.ndarray  # (N, K + D)
    regularized: bool = False

    @property
    def K(self) -> int:
        return self.W.shape[1]

    @property
    def D(self) -> int:
        return self.S.shape[1] - self.W.shape[1]


def simulate_silence(g, tx_powers, M, noise_var, rng, groups=None) -> SilenceSnapshot:
    """Signals received by a silent BS over ``M`` symbol periods.

    ``g`` holds one channel vector per row for each transmitting Wi-Fi
    device, ``tx_powers`` their powers in watts. Symbols are i.i.d. CN(0, 1).
    With ``groups`` (one label per device), only one device of each group,
    drawn uniformly and independently per sample, is on air in each period.
    """
    g = np.atleast_2d(np.asarray(g))
    tx_powers = np.asarray(tx_powers, dtype=float)
    n_dev, N = g.shape
    if M < 1:
        raise ConfigError("M must be >= 1")
    z = np.zeros((M, N), dtype=complex)
    if n_dev and groups is None:
        s = (rng.standard_normal((M, n_dev)) + 1j * rng.standard_normal((M, n_dev))) / np.sqrt(2)
        z += (s * np.sqrt(tx_powers)) @ g
    elif n_dev:
        active = _talkers(np.asarray(groups), M, rng)  # (M, n_groups) device ids
        s = (rng.standard_normal(active.shape) + 1j * rng.standard_normal(active.shape)) / np.sqrt(2)
        z += ((s * np.sqrt(tx_powers[active]))[:, None, :] @ g[active])[:, 0, :]
    if noise_var > 0:
        z += np.sqrt(noise_var / 2) * (rng.standard_normal((M, N))
                                       + 1j * rng.standard_normal((M, N)))
    return SilenceSnapshot(z_samples=z, noise_var=float(noise_var), tx_powers=tx_powers)


def _talkers(groups, M, rng):
    """Index of the device on air in every group, per sample, shape ``(M, n_groups)``."""
    _, inverse, counts = np.unique(groups, return_inverse=True, return_counts=True)
    members = np.argsort(inverse, kind="stable")
    start = np.cumsum(counts) - counts
    pick = np.floor(rng.random((M, counts.size)) * counts).astype(int)
    return members[start + pick]


def eigh_descending(Z):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order."""
    lam, U = np.linalg.eigh(Z)
    order = np.argsort(-lam, kind="stable")
    return lam[order], U[:, order]


def estimate_covariance(snap: SilenceSnapshot) -> CovarianceEstimate:
    z = np.asarray(snap.z_samples)
    if not np.all(np.isfinite(z)):
        raise DataError("non-finite samples in silence snapshot")
    M = z.shape[0]
    Z = (z.T @ z.conj()) / M
    Z = 0.5 * (Z + Z.conj().T)
    lam, U = eigh_descending(Z)
    return CovarianceEstimate(Z_hat=Z, U_hat=U, lambda_hat=lam, M=M)


def allocate_dof_fixed_k(N: int, K: int, c1: float) -> int:
    """Nulls granted to Wi-Fi when ``K`` UEs are scheduled: ``floor(c1 (N - K))``."""
    if not 1 <= K <= N:
        raise ConfigError(f"need 1 <= K <= N, got K={K}, N={N}")
    if not 0 < c1 < 1:
        raise ConfigError(f"c1 must be in (0, 1), got {c1}")
    return int(np.floor(c1 * (N - K)))


def allocate_dof_threshold(lambda_hat, gamma: float, c2: float, N: Optional[int] = None):
    """Null every eigen-direction above ``gamma``, then size the UE group.

    Returns ``(D, K)``. ``K == 0`` means the BS has no transmission
    opportunity in this block.
    """
    lam = np.asarray(lambda_hat, dtype=float)
    if N is None:
        N = lam.size
    if gamma < 0:
        raise ConfigError("gamma must be >= 0")
    if not 0 < c2 < 1:
        raise ConfigError(f"c2 must be in (0, 1), got {c2}")
    D = int(np.count_nonzero(lam > gamma))
    K = max(int(np.floor(c2 * (N - D))), 0)
    return D, K


def schedule_ues(associated, K: int, rng) -> np.ndarray:
    """Uniformly random subset of ``min(K, len(associated))`` UEs, in ascending id order."""
    associated = np.asarray(associated, dtype=int)
    if associated.size == 0:
        return associated
    if K < 1:
        raise ConfigError("K must be >= 1")
    pick = rng.choice(associated.size, size=min(K, associated.size), replace=False)
    return np.sort(associated[pick])


def compute_precoders(h_hat, U_hat, D: int, eps: float = 1e-10,
                      condition_cap: float = 1e12) -> PrecoderSet:
    """Zero-forcing precoders with ``D`` additional null constraints.

    ``h_hat`` holds the ``K`` estimated UE channels as rows. With
    ``S = [h_1, ..., h_K, u_1, ..., u_D]`` the unnormalised precoders are the
    first ``K`` columns of ``S (S^H S)^{-1}``; a single scalar then brings the
    total power to one.
    """
    H = np.atleast_2d(np.asarray(h_hat))
    K, N = H.shape
    if K < 1:
        raise AllocationError("at least one UE is required")
    if D < 0 or K + D > N:
        raise AllocationError(f"K + D = {K + D} exceeds N = {N}")
    if D:
        S = np.concatenate([H.T, np.asarray(U_hat)[:, :D]], axis=1)
    else:
        S = H.T.copy()
    G = S.conj().T @ S
    regularized = False
    if np.linalg.cond(G) > condition_cap:
        G = G + eps * np.real(np.trace(G)) / (K + D) * np.eye(K + D)
        regularized = True
    sel = np.eye(K + D, K)
    A = S @ np.linalg.solve(G, sel)
    zeta = float(np.sum(np.abs(A) ** 2))
    return PrecoderSet(W=A / np.sqrt(zeta), zeta=zeta, S=S, regularized=regularized)


def baseline_zf_precoders(h_hat, eps: float = 1e-10, condition_cap: float = 1e12) -> PrecoderSet:
    return compute_precoders(h_hat, None, 0, eps, condition_cap)
