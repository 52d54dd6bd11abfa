"""Large- and small-scale propagation for BS-to-device and device-to-device links.

Channel vectors follow the Ricean model over a uniform linear array::

    h = sqrt(beta) * ( sqrt(K/(K+1)) e^{j psi} a(phi, theta) + sqrt(1/(K+1)) R^{1/2} w )

where ``beta`` is the per-element mean power gain (antenna pattern, path loss,
shadowing), ``a`` the ULA steering vector, ``R`` the spatial correlation of the
scattered part (Jakes kernel ``J0(2 pi delta / lambda)``) and ``w`` i.i.d.
CN(0, 1).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from . import constants as C
from .errors import ConfigError
from .topology import NodeSet, SiteGrid, wrap_displacement
from .units import db2lin


def _clamp_distance(d):
    d = np.asarray(d, dtype=float)
    if np.any(d < C.MIN_DISTANCE_M):
        warnings.warn(f"distance below {C.MIN_DISTANCE_M} m clamped for path loss",
                      RuntimeWarning, stacklevel=3)
        d = np.maximum(d, C.MIN_DISTANCE_M)
    return d


def free_space_pathloss(d, f_ghz):
    return 20.0 * np.log10(d) + 20.0 * np.log10(f_ghz) + C.FSPL_INTERCEPT


def los_probability_uma(d):
    d = np.asarray(d, dtype=float)
    e = np.exp(-d / C.UMA_LOS_DECAY)
    return np.minimum(18.0 / d, 1.0) * (1.0 - e) + e


def los_probability_d2d(d):
    d = np.asarray(d, dtype=float)
    e = np.exp(-d / C.D2D_LOS_DECAY)
    return np.minimum(18.0 / d, 1.0) * (1.0 - e) + e


def pathloss_uma(d, f_ghz, los=False, h_bs=25.0, h_ut=1.5):
    """Urban-macro path loss in dB for a BS-to-ground link of 3-D length ``d`` (m)."""
    d = _clamp_distance(d)
    lf = math.log10(f_ghz)
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * f_ghz * 1e9 / C.SPEED_OF_LIGHT
    near = C.UMA_LOS_SLOPE * np.log10(d) + C.UMA_LOS_INTERCEPT + C.UMA_LOS_FREQ * lf
    far = (C.UMA_LOS_FAR_SLOPE * np.log10(d) + C.UMA_LOS_FAR_INTERCEPT
           - C.UMA_LOS_FAR_HEIGHT * math.log10(h_bs - 1.0)
           - C.UMA_LOS_FAR_HEIGHT * math.log10(h_ut - 1.0) + C.UMA_LOS_FAR_FREQ * lf)
    pl_los = np.where(d < d_bp, near, far)
    w, h = C.UMA_STREET_WIDTH, C.UMA_BUILDING_HEIGHT
    pl_nlos = (161.04 - 7.1 * math.log10(w) + 7.5 * math.log10(h)
               - (24.37 - 3.7 * (h / h_bs) ** 2) * math.log10(h_bs)
               + (43.42 - 3.1 * math.log10(h_bs)) * (np.log10(d) - 3.0)
               + 20.0 * lf - (3.2 * math.log10(11.75 * h_ut) ** 2 - 4.97))
    pl_los = np.maximum(pl_los, free_space_pathloss(d, f_ghz))
    out = np.where(los, pl_los, np.maximum(pl_nlos, pl_los))
    return float(out) if out.ndim == 0 else out


def pathloss_d2d(d, f_ghz, los=False, h_tx=1.5, h_rx=1.5):
    """Outdoor device-to-device path loss in dB."""
    d = _clamp_distance(d)
    lf = math.log10(f_ghz)
    d_bp = 4.0 * (h_tx - 1.0) * (h_rx - 1.0) * f_ghz * 1e9 / C.SPEED_OF_LIGHT
    near = C.D2D_LOS_SLOPE * np.log10(d) + C.D2D_LOS_INTERCEPT + C.D2D_LOS_FREQ * lf
    far = (C.D2D_LOS_FAR_SLOPE * np.log10(d) + C.D2D_LOS_FAR_INTERCEPT
           - C.D2D_LOS_FAR_HEIGHT * math.log10(h_tx - 1.0)
           - C.D2D_LOS_FAR_HEIGHT * math.log10(h_rx - 1.0) + C.D2D_LOS_FAR_FREQ * lf)
    pl_los = np.maximum(np.where(d < d_bp, near, far), free_space_pathloss(d, f_ghz))
    pl_nlos = C.D2D_NLOS_SLOPE * np.log10(d) + C.D2D_NLOS_INTERCEPT + C.D2D_NLOS_FREQ * lf
    out = np.where(los, pl_los, np.maximum(pl_nlos, pl_los))
    return float(out) if out.ndim == 0 else out


def expected_path_gain_uma(d, f_ghz, h_bs=25.0, h_ut=1.5):
    """LOS-probability-weighted linear path gain (no shadowing)."""
    p = los_probability_uma(d)
    g_los = db2lin(-pathloss_uma(d, f_ghz, True, h_bs, h_ut))
    g_nlos = db2lin(-pathloss_uma(d, f_ghz, False, h_bs, h_ut))
    return p * g_los + (1.0 - p) * g_nlos


def element_pattern(azimuth, elevation, params=None):
    """BS element gain in dBi.

    ``azimuth`` is measured from the sector boresight and ``elevation`` is the
    depression angle below the horizon, both in radians. Horizontal and
    vertical cuts are parabolic in dB and combined with a front-to-back floor.
    """
    if params is None:
        from .config import ChannelParams
        params = ChannelParams()
    az = np.degrees(np.asarray(azimuth, dtype=float))
    el = np.degrees(np.asarray(elevation, dtype=float))
    az = (az + 180.0) % 360.0 - 180.0
    a_h = -np.minimum(12.0 * (az / params.azimuth_beamwidth_deg) ** 2, params.front_to_back_db)
    a_v = -np.minimum(12.0 * ((el - params.downtilt_deg) / params.elevation_beamwidth_deg) ** 2,
                      params.vertical_sidelobe_db)
    out = params.element_gain_dbi - np.minimum(-(a_h + a_v), params.front_to_back_db)
    return float(out) if out.ndim == 0 else out


def ricean_k_factor(d, intercept_db=13.0, slope_db_per_m=0.03):
    """Linear Ricean K factor, ``K_dB = intercept - slope * d``."""
    return db2lin(intercept_db - slope_db_per_m * np.asarray(d, dtype=float))


def steering_vector(azimuth, n_antennas, elevation=0.0, spacing=0.5):
    """Unit-modulus ULA response; element ``n`` has phase ``2 pi s n sin(az) cos(el)``.

    Broadcasts over the angle arrays, adding a trailing antenna axis.
    """
    u = np.sin(np.asarray(azimuth, dtype=float)) * np.cos(np.asarray(elevation, dtype=float))
    # successive powers of the per-element phasor; cheaper than one exp per entry
    step = np.exp(2j * np.pi * spacing * u)
    a = np.empty(u.shape + (n_antennas,), dtype=complex)
    a[..., :1] = 1.0
    a[..., 1:] = step[..., None]
    return np.cumprod(a, axis=-1)


def jakes_correlation(n_antennas, spacing=0.5):
    idx = np.arange(n_antennas)
    return j0(2.0 * np.pi * spacing * np.abs(idx[:, None] - idx[None, :]))


def correlation_sqrt(R):
    """Hermitian square root of a PSD matrix (small negative eigenvalues clipped)."""
    w, V = np.linalg.eigh(R)
    out = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T
    return out.real if np.isrealobj(R) else out


@dataclass(frozen=True)
class LinkBudget:
    path_loss_db: float
    shadowing_db: float
    antenna_gain_db: float
    distance_m: float

    @property
    def gain_db(self) -> float:
        return self.antenna_gain_db - self.path_loss_db + self.shadowing_db

    @property
    def mean_power(self) -> float:
        """Per-element mean power gain, linear."""
        return float(db2lin(self.gain_db))


def draw_channel_vectors(mean_power, azimuth, elevation, k_factor, n_antennas, rng,
                         corr_sqrt=None, spacing=0.5):
    """Vectorised Ricean draws; every input broadcasts to the link shape ``L``.

    Returns an array of shape ``L + (n_antennas,)``.
    """
    mean_power, azimuth, elevation, k_factor = np.broadcast_arrays(
        np.asarray(mean_power, float), np.asarray(azimuth, float),
        np.asarray(elevation, float), np.asarray(k_factor, float))
    shape = mean_power.shape
    psi = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    x = rng.standard_normal((2,) + shape + (n_antennas,))
    with np.errstate(invalid="ignore"):
        los_w = np.where(np.isinf(k_factor), 1.0, np.sqrt(k_factor / (k_factor + 1.0)))
    amp = np.sqrt(mean_power)
    x *= (amp * np.sqrt(0.5 / (k_factor + 1.0)))[..., None]
    if corr_sqrt is not None and not np.iscomplexobj(corr_sqrt):
        # real kernel: one real matmul over the stacked real and imaginary parts
        x = x @ np.asarray(corr_sqrt).T
    h = x[0] + 1j * x[1]
    if corr_sqrt is not None and np.iscomplexobj(corr_sqrt):
        h = h @ corr_sqrt.T
    a = steering_vector(azimuth, n_antennas, elevation, spacing)
    a *= (amp * los_w * np.exp(1j * psi))[..., None]
    h += a
    return h


def draw_channel_vector(link: LinkBudget, azimuth, elevation, k_factor, n_antennas, rng,
                        corr_sqrt=None, spacing=0.5):
    return draw_channel_vectors(link.mean_power, azimuth, elevation, k_factor, n_antennas,
                                rng, corr_sqrt, spacing)


def corrupt_csi(h, tau2, rng, entry_power=1.0):
    """Imperfect CSI ``sqrt(1 - tau2) h + tau e``.

    ``e`` has i.i.d. entries of variance ``entry_power``; pass the link's
    per-element mean power so the error is relative to the normalised channel.
    ``entry_power`` broadcasts against ``h`` without its antenna axis.
    """
    if not 0.0 <= tau2 <= 1.0:
        raise ConfigError(f"tau2 must be in [0, 1], got {tau2}")
    h = np.asarray(h)
    e = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) / np.sqrt(2.0)
    if tau2 == 0.0:
        return h.copy()
    scale = np.sqrt(np.asarray(entry_power, dtype=float))
    if scale.ndim:
        scale = scale[..., None]
    return np.sqrt(1.0 - tau2) * h + np.sqrt(tau2) * scale * e


@dataclass
class LinkGeometry:
    distance_2d: np.ndarray
    distance_3d: np.ndarray
    azimuth: np.ndarray  # relative to boresight
    elevation: np.ndarray  # depression angle


def bs_link_geometry(bs_positions, bs_azimuths, points, grid: SiteGrid,
                     bs_height: float, device_height: float) -> LinkGeometry:
    """Geometry of every (BS, point) pair, shape ``(n_bs, n_points)``."""
    disp = wrap_displacement(np.asarray(bs_positions)[:, None, :],
                             np.asarray(points)[None, :, :], grid)
    d2 = np.hypot(disp[..., 0], disp[..., 1])
    dh = bs_height - device_height
    d3 = np.hypot(d2, dh)
    az = np.arctan2(disp[..., 1], disp[..., 0]) - np.asarray(bs_azimuths)[:, None]
    az = (az + np.pi) % (2 * np.pi) - np.pi
    el = np.arctan2(dh, d2)
    return LinkGeometry(d2, d3, az, el)


def make_mean_gain_model(cfg):
    """Average received power (dBm) per sector: pattern + LOS-weighted path loss."""
    s, ch, f = cfg.scenario, cfg.channel, cfg.radio.carrier_ghz

    def model(points, grid):
        geo = bs_link_geometry(grid.sector_positions, grid.sector_azimuths, points, grid,
                               s.bs_height, s.device_height)
        gain = expected_path_gain_uma(geo.distance_3d, f, s.bs_height, s.device_height)
        out = (cfg.radio.bs_power_dbm + element_pattern(geo.azimuth, geo.elevation, ch)
               + 10.0 * np.log10(gain))
        return out.T

    return model


def _uma_gain_db(geo, los, shadow_db, cfg):
    s, ch = cfg.scenario, cfg.channel
    pl = pathloss_uma(geo.distance_3d, cfg.radio.carrier_ghz, los, s.bs_height, s.device_height)
    return element_pattern(geo.azimuth, geo.elevation, ch) - pl + shadow_db


def _draw_uma(geo, cfg, rng):
    """Per-link LOS state and log-normal shadowing; returns ``(gain_db, los)``."""
    ch = cfg.channel
    los = rng.random(geo.distance_3d.shape) < los_probability_uma(geo.distance_2d)
    sigma = np.where(los, ch.shadowing_uma_los_db, ch.shadowing_uma_nlos_db)
    shadow = sigma * rng.standard_normal(geo.distance_3d.shape)
    return _uma_gain_db(geo, los, shadow, cfg), los


def make_link_gain_sampler(cfg, rng):
    """Large-scale gain (dB) from every sector to candidate points, drawn once per call.

    Includes the element pattern, path loss under a random LOS state and
    shadowing, i.e. everything but fast fading. Used to associate UEs and then
    kept as the large-scale state of their links.
    """
    s = cfg.scenario

    def model(points, grid):
        geo = bs_link_geometry(grid.sector_positions, grid.sector_azimuths, points, grid,
                               s.bs_height, s.device_height)
        gain, los = _draw_uma(geo, cfg, rng)
        return gain.T, los.T

    return model


@dataclass
class ChannelSet:
    """All propagation coefficients of one drop.

    Shapes: ``h`` (n_bs, n_ue, N), ``g`` (n_bs, n_wifi, N), ``q`` (n_wifi, n_ue),
    ``h_hat`` (n_ue, N) holding each UE's estimate at its serving BS. ``beta_*``
    are the per-element mean power gains of the same links.
    """

    h: np.ndarray
    g: np.ndarray
    q: np.ndarray
    h_hat: np.ndarray
    beta_h: np.ndarray
    beta_g: np.ndarray
    beta_q: np.ndarray

    @property
    def n_antennas(self) -> int:
        return self.h.shape[-1]


def draw_large_scale(nodes: NodeSet, grid: SiteGrid, cfg, rng):
    """LOS states, shadowing and geometry for every link; independent of N."""
    s, ch, f = cfg.scenario, cfg.channel, cfg.radio.carrier_ghz
    out = {}
    for name, pts in (("h", nodes.ue_positions), ("g", nodes.wifi_positions)):
        geo = bs_link_geometry(nodes.bs_positions, nodes.bs_azimuths, pts, grid,
                               s.bs_height, s.device_height)
        if name == "h" and nodes.ue_los is not None:
            gain_db, los = np.asarray(nodes.ue_gain_db).T, np.asarray(nodes.ue_los).T
        else:
            gain_db, los = _draw_uma(geo, cfg, rng)
        out[name] = (geo, gain_db, los)
    disp = wrap_displacement(nodes.wifi_positions[:, None, :],
                             nodes.ue_positions[None, :, :], grid)
    d = np.hypot(disp[..., 0], disp[..., 1])
    los = rng.random(d.shape) < los_probability_d2d(d)
    shadow = ch.shadowing_d2d_db * rng.standard_normal(d.shape)
    out["q"] = (d, -pathloss_d2d(d, f, los, s.device_height, s.device_height) + shadow, los)
    return out


def build_channels(nodes: NodeSet, grid: SiteGrid, cfg, n_antennas: int,
                   large_scale, rng) -> ChannelSet:
    """Small-scale fading and CSI errors on top of precomputed large-scale state."""
    ch = cfg.channel
    corr = correlation_sqrt(jakes_correlation(n_antennas, ch.element_spacing))
    kf = dict(intercept_db=ch.k_factor_intercept_db, slope_db_per_m=ch.k_factor_slope_db_per_m)

    def k_factor(d, los):
        k = ricean_k_factor(d, **kf)
        return np.where(los, k, 0.0) if ch.ricean_los_only else k

    geo_h, gain_h, los_h = large_scale["h"]
    beta_h = db2lin(gain_h)
    h = draw_channel_vectors(beta_h, geo_h.azimuth, geo_h.elevation,
                             k_factor(geo_h.distance_3d, los_h), n_antennas, rng,
                             corr, ch.element_spacing)
    geo_g, gain_g, los_g = large_scale["g"]
    beta_g = db2lin(gain_g)
    g = draw_channel_vectors(beta_g, geo_g.azimuth, geo_g.elevation,
                             k_factor(geo_g.distance_3d, los_g), n_antennas, rng,
                             corr, ch.element_spacing)
    d_q, gain_q, los_q = large_scale["q"]
    beta_q = db2lin(gain_q)
    q = draw_channel_vectors(beta_q, 0.0, 0.0, k_factor(d_q, los_q), 1, rng)[..., 0]

    ue = np.arange(nodes.n_ues)
    # the BS estimates the small-scale channel; path loss is not part of the estimate
    own = h[nodes.ue_sector, ue] / np.sqrt(beta_h[nodes.ue_sector, ue])[:, None]
    h_hat = corrupt_csi(own, ch.csi_error_tau2, rng)
    return ChannelSet(h=h, g=g, q=q, h_hat=h_hat, beta_h=beta_h, beta_g=beta_g, beta_q=beta_q)
