"""Channel-access decisions for BSs and Wi-Fi devices."""

from dataclasses import dataclass

import numpy as np

CONVENTIONAL = "conventional"
ENHANCED = "enhanced"


@dataclass(frozen=True)
class LbtDecision:
    granted: bool
    sensed_power_w: float
    threshold_w: float
    mode: str


def total_power(z_samples) -> np.ndarray:
    """``||z[m]||^2`` for every sample (rows of ``z_samples``)."""
    z = np.atleast_2d(np.asarray(z_samples))
    return np.einsum("mn,mn->m", z.real, z.real) + np.einsum("mn,mn->m", z.imag, z.imag)


def filtered_power(z_samples, U_hat, D: int) -> np.ndarray:
    """Per-sample power left after projecting out the ``D`` dominant directions."""
    z = np.atleast_2d(np.asarray(z_samples))
    U = np.asarray(U_hat)
    if D <= 0:
        return total_power(z)
    if D >= U.shape[1]:
        return np.zeros(z.shape[0])
    y = z @ U[:, D:].conj()
    return np.sum(y.real**2 + y.imag**2, axis=1)


def conventional_lbt(z_samples, gamma_lbt: float) -> LbtDecision:
    """Energy detection: access only if every sample is strictly below threshold."""
    peak = float(np.max(total_power(z_samples)))
    return LbtDecision(peak < gamma_lbt, peak, float(gamma_lbt), CONVENTIONAL)


def enhanced_lbt(z_samples, U_hat, D: int, gamma_lbt: float) -> LbtDecision:
    """Energy detection restricted to the subspace orthogonal to the ``D`` nulls."""
    peak = float(np.max(filtered_power(z_samples, U_hat, D)))
    return LbtDecision(peak < gamma_lbt, peak, float(gamma_lbt), ENHANCED)


def wifi_defer(interference_w, gamma_lbt: float):
    """A Wi-Fi device defers when the power it receives reaches the threshold."""
    out = np.asarray(interference_w) >= gamma_lbt
    return bool(out) if out.ndim == 0 else out
