"""Observables: UE SINR, interference at Wi-Fi devices and BSs, rates, CDFs."""

from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np

from .errors import DataError
from .lbt import CONVENTIONAL, ENHANCED, filtered_power, total_power
from .spatial import PrecoderSet

SINR_CAP = 1e10


@dataclass(frozen=True)
class SectorPlan:
    """UEs served by one BS in a block and the precoders serving them (same order)."""

    ue_ids: np.ndarray
    precoders: PrecoderSet


@dataclass
class SinrTerms:
    signal: np.ndarray
    intra: np.ndarray
    inter: np.ndarray
    wifi: np.ndarray
    noise: float

    @property
    def interference_plus_noise(self):
        return self.intra + self.inter + self.wifi + self.noise

    @property
    def sinr(self):
        den = self.interference_plus_noise
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(den > 0, self.signal / np.where(den > 0, den, 1.0), SINR_CAP)
        return np.minimum(out, SINR_CAP)


def _received(channels_row, W):
    """``|h_u^H w_k|^2`` for all UEs (rows of ``channels_row``) and precoders."""
    y = channels_row.conj() @ W
    return y.real**2 + y.imag**2


def _wifi_term(wifi_power_w, q2, bs, ue_ids):
    p = wifi_power_w[bs] if wifi_power_w.ndim == 2 else wifi_power_w
    return p @ q2[:, ue_ids]


def sinr_terms(channels, plans: Dict[int, SectorPlan], active_bs: Iterable[int],
               wifi_power_w, bs_power_w: float, noise_var: float) -> Dict[int, SinrTerms]:
    """Per-term breakdown of the downlink SINR of every scheduled UE of every active BS.

    ``wifi_power_w`` gives the power of each Wi-Fi device as seen by UEs
    (zero for silent devices). A 2-D ``(n_bs, n_wifi)`` array instead sets
    the Wi-Fi activity separately for the UEs of each BS. Returns
    ``{bs: SinrTerms}`` with arrays aligned to ``plans[bs].ue_ids``.
    """
    active = sorted(set(int(b) for b in active_bs) & set(plans))
    wifi_power_w = np.asarray(wifi_power_w, dtype=float)
    q2 = channels.q.real**2 + channels.q.imag**2
    served = np.concatenate([plans[b].ue_ids for b in active]) if active else np.zeros(0, int)
    total_inter = np.zeros(served.size)
    out = {}
    offsets = {}
    pos = 0
    for b in active:
        offsets[b] = slice(pos, pos + plans[b].ue_ids.size)
        pos += plans[b].ue_ids.size
    for b in active:
        W = plans[b].precoders.W
        rx = bs_power_w * _received(channels.h[b, served], W)
        own = offsets[b]
        total_inter[:own.start] += rx[:own.start].sum(axis=1)
        total_inter[own.stop:] += rx[own.stop:].sum(axis=1)
        own_rx = rx[own]
        k = np.arange(own_rx.shape[0])
        signal = own_rx[k, k]
        # masked sum rather than total - signal: no cancellation when ZF is exact
        mask = ~np.eye(own_rx.shape[0], dtype=bool)
        intra = np.where(mask, own_rx, 0.0).sum(axis=1)
        out[b] = SinrTerms(signal=signal, intra=intra, inter=None,
                           wifi=_wifi_term(wifi_power_w, q2, b, plans[b].ue_ids),
                           noise=float(noise_var))
    for b in active:
        out[b].inter = total_inter[offsets[b]]
    return out


def ue_sinr(channels, plans: Dict[int, SectorPlan], active_bs, wifi_power_w,
            bs_power_w: float, noise_var: float, ue: int) -> float:
    """Linear SINR of a single scheduled UE."""
    terms = sinr_terms(channels, plans, active_bs, wifi_power_w, bs_power_w, noise_var)
    for b, t in terms.items():
        hit = np.flatnonzero(plans[b].ue_ids == ue)
        if hit.size:
            return float(t.sinr[hit[0]])
    raise DataError(f"UE {ue} is not scheduled by an active BS")


def wifi_interference_matrix(channels, plans: Dict[int, SectorPlan], active_bs,
                             bs_power_w: float) -> np.ndarray:
    """Power each active BS delivers to each Wi-Fi device, shape ``(n_bs, n_wifi)``."""
    n_bs, n_wifi = channels.g.shape[:2]
    out = np.zeros((n_bs, n_wifi))
    for b in sorted(set(int(x) for x in active_bs) & set(plans)):
        out[b] = bs_power_w * _received(channels.g[b], plans[b].precoders.W).sum(axis=1)
    return out


def wifi_interference(channels, plans, active_bs, bs_power_w: float, device=None):
    """Cellular interference at Wi-Fi devices, averaged over unit-power symbols."""
    total = wifi_interference_matrix(channels, plans, active_bs, bs_power_w).sum(axis=0)
    return total if device is None else float(total[device])


def bs_sensed_power(snap, U_hat=None, D: int = 0, mode: str = CONVENTIONAL) -> float:
    if mode == CONVENTIONAL:
        return float(np.max(total_power(snap.z_samples)))
    if mode == ENHANCED:
        return float(np.max(filtered_power(snap.z_samples, U_hat, D)))
    raise ValueError(f"unknown sensing mode {mode!r}")


def cell_rate(sinr, bandwidth_hz: float, rx_power_w, sensitivity_w: float):
    """Shannon rate, zero when the useful received power is below sensitivity."""
    sinr = np.asarray(sinr, dtype=float)
    rate = bandwidth_hz * np.log2(1.0 + sinr)
    out = np.where(np.asarray(rx_power_w) < sensitivity_w, 0.0, rate)
    return float(out) if out.ndim == 0 else out


def wifi_rate(cluster_access, per_cluster_rate_bps: float = 65e6) -> float:
    """Sector Wi-Fi throughput from per-cluster medium access.

    ``cluster_access`` has clusters on its last axis; entries are access
    indicators or airtime fractions. Leading axes (e.g. drops) are averaged.
    """
    acc = np.asarray(cluster_access, dtype=float)
    if acc.ndim == 0:
        acc = acc[None]
    share = acc.reshape(-1, acc.shape[-1]).mean(axis=0)
    return float(per_cluster_rate_bps * share.sum())


def lbt_airtime_split(n_contenders: int) -> float:
    """Airtime share of a BS that contends equally with ``n_contenders`` Wi-Fi nodes."""
    if n_contenders < 0:
        raise ValueError("n_contenders must be >= 0")
    return 1.0 / (1.0 + n_contenders)


@dataclass(frozen=True)
class CdfSeries:
    values: np.ndarray
    probabilities: np.ndarray

    def fraction_below(self, x: float) -> float:
        return float(np.searchsorted(self.values, x, side="left") / self.values.size)

    def quantile(self, p) -> np.ndarray:
        """Smallest sample whose cumulative probability reaches ``p``."""
        idx = np.ceil(np.asarray(p) * self.values.size).astype(int) - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]

    @property
    def median(self) -> float:
        return float(np.median(self.values))


def build_cdf(samples) -> CdfSeries:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise DataError("cannot build a CDF from no samples")
    if not np.all(np.isfinite(x)):
        raise DataError("CDF samples must be finite")
    p = np.arange(1, x.size + 1) / x.size
    return CdfSeries(values=x, probabilities=p)


@dataclass
class DropMetrics:
    """Everything one drop contributes to the figures, for one antenna count."""

    n_antennas: int
    drop: int
    wifi_interference_dbm: Dict[str, np.ndarray] = field(default_factory=dict)
    wifi_defer: Dict[str, np.ndarray] = field(default_factory=dict)
    bs_sensed_dbm: Dict[str, np.ndarray] = field(default_factory=dict)
    bs_granted: Dict[str, np.ndarray] = field(default_factory=dict)
    ue_sinr_db: Dict[str, np.ndarray] = field(default_factory=dict)
    sector_cell_rate_bps: Dict[str, np.ndarray] = field(default_factory=dict)
    sector_wifi_rate_bps: Dict[str, np.ndarray] = field(default_factory=dict)
    regularized: int = 0
    resampled: int = 0
