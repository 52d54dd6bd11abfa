"""Hexagonal multi-site layout with wrap-around and per-drop node placement.

Sites sit on a hexagonal lattice with inter-site distance ``isd``; every site
carries three sectors with boresights at 30, 150 and 270 degrees. A cluster of
``rings`` rings is tiled periodically over the plane, so distances are taken to
the nearest periodic image of the target ("wrap-around").
"""

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, PlacementError

SECTOR_AZIMUTHS_DEG = (30.0, 150.0, 270.0)
AP, STA = 0, 1


@dataclass(frozen=True)
class SiteGrid:
    site_positions: np.ndarray  # (n_sites, 2)
    inter_site_distance: float
    wrap_vectors: np.ndarray  # (7, 2), first row is the identity shift
    sectors_per_site: int = 3

    @property
    def n_sites(self) -> int:
        return len(self.site_positions)

    @property
    def n_sectors(self) -> int:
        return self.n_sites * self.sectors_per_site

    @property
    def sector_site(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_sites), self.sectors_per_site)

    @property
    def sector_positions(self) -> np.ndarray:
        return self.site_positions[self.sector_site]

    @property
    def sector_azimuths(self) -> np.ndarray:
        """Boresight azimuth of every sector, radians."""
        az = np.deg2rad(np.asarray(SECTOR_AZIMUTHS_DEG))
        return np.tile(az, self.n_sites)

    @property
    def cell_radius(self) -> float:
        return self.inter_site_distance / math.sqrt(3.0)


def _lattice(a, b, isd):
    """Cartesian position of hex-lattice coordinates ``a * e1 + b * e2``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.stack([isd * (a + 0.5 * b), isd * (math.sqrt(3.0) / 2.0) * b], axis=-1)


def build_grid(inter_site_distance: float = 500.0, rings: int = 2) -> SiteGrid:
    """Hexagonal cluster of ``3 r^2 + 3 r + 1`` sites centred on the origin.

    The periodic images of a cluster with ``r`` rings are displaced by the
    lattice vector ``(r + 1) e1 + r e2`` and its five 60-degree rotations.
    """
    if not isinstance(rings, (int, np.integer)) or rings < 0:
        raise ConfigError(f"rings must be a nonnegative integer, got {rings!r}")
    if not inter_site_distance > 0:
        raise ConfigError(f"inter_site_distance must be > 0, got {inter_site_distance!r}")
    coords = [(0, 0)]
    for ring in range(1, rings + 1):
        # walk the ring starting at ring * e1, six sides of length `ring`
        a, b = ring, 0
        for da, db in ((-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0), (0, 1)):
            for _ in range(ring):
                coords.append((a, b))
                a, b = a + da, b + db
    coords = np.array(coords)
    sites = _lattice(coords[:, 0], coords[:, 1], inter_site_distance)

    shifts = [(0, 0)]
    a, b = rings + 1, rings
    for _ in range(6):
        shifts.append((a, b))
        a, b = -b, a + b  # 60-degree rotation in lattice coordinates
    shifts = np.array(shifts)
    wrap = _lattice(shifts[:, 0], shifts[:, 1], inter_site_distance)
    return SiteGrid(site_positions=sites, inter_site_distance=float(inter_site_distance),
                    wrap_vectors=wrap)


def wrap_displacement(src, dst, grid: SiteGrid) -> np.ndarray:
    """Shortest displacement ``dst - src`` over all periodic images.

    ``src`` and ``dst`` broadcast against each other; the result has the
    broadcast shape with a trailing axis of length 2.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    delta = dst - src
    cand = delta[..., None, :] + grid.wrap_vectors
    d2 = cand[..., 0] ** 2 + cand[..., 1] ** 2
    best = np.argmin(d2, axis=-1)
    return delta + grid.wrap_vectors[best]


def wrap_distance(a, b, grid: SiteGrid):
    """Wrap-around distance between positions ``a`` and ``b`` (broadcasting)."""
    disp = wrap_displacement(a, b, grid)
    out = np.hypot(disp[..., 0], disp[..., 1])
    return float(out) if out.ndim == 0 else out


def associate(node, grid: SiteGrid, mean_gain_model: Callable) -> int:
    """Index of the sector with the largest average received power at ``node``.

    ``mean_gain_model(points, grid)`` must return an array of shape
    ``(n_points, n_sectors)``, or a ``(gains, extra)`` pair whose second item
    has the same shape. Ties resolve to the lowest sector id.
    """
    gains, _ = _split(mean_gain_model(np.atleast_2d(node), grid))
    return int(np.argmax(gains[0]))


def _split(model_output):
    if isinstance(model_output, tuple):
        gains, extra = model_output
        return np.asarray(gains), np.asarray(extra)
    return np.asarray(model_output), None


@dataclass
class NodeSet:
    n_antennas: int
    bs_positions: np.ndarray
    bs_azimuths: np.ndarray
    ue_positions: np.ndarray
    ue_sector: np.ndarray
    hotspot_centers: np.ndarray
    hotspot_sector: np.ndarray
    hotspot_radius: float
    wifi_positions: np.ndarray
    wifi_role: np.ndarray  # AP or STA
    wifi_hotspot: np.ndarray
    wifi_ap: np.ndarray  # index of the AP each device associates with
    ue_gain_db: np.ndarray = None  # (n_ue, n_bs) gains used for association, if recorded
    ue_los: np.ndarray = None  # (n_ue, n_bs) LOS states behind ue_gain_db, if recorded

    @property
    def n_ues(self) -> int:
        return len(self.ue_positions)

    @property
    def n_wifi(self) -> int:
        return len(self.wifi_positions)

    @property
    def wifi_sector(self) -> np.ndarray:
        return self.hotspot_sector[self.wifi_hotspot]

    def ues_in_sector(self, sector: int) -> np.ndarray:
        return np.flatnonzero(self.ue_sector == sector)

    def to_json(self) -> str:
        def rows(arr):
            return np.round(arr, 6).tolist()
        return json.dumps({
            "n_antennas": self.n_antennas,
            "base_stations": [
                {"id": i, "position": p, "azimuth_deg": round(math.degrees(a), 6)}
                for i, (p, a) in enumerate(zip(rows(self.bs_positions), self.bs_azimuths))],
            "ues": [{"id": i, "position": p, "sector": int(s)}
                    for i, (p, s) in enumerate(zip(rows(self.ue_positions), self.ue_sector))],
            "hotspots": [{"id": i, "center": p, "sector": int(s), "radius": self.hotspot_radius}
                         for i, (p, s) in enumerate(zip(rows(self.hotspot_centers),
                                                        self.hotspot_sector))],
            "wifi": [{"id": i, "position": p, "role": "AP" if r == AP else "STA",
                      "hotspot": int(h), "ap": int(a)}
                     for i, (p, r, h, a) in enumerate(zip(rows(self.wifi_positions), self.wifi_role,
                                                          self.wifi_hotspot, self.wifi_ap))],
        }, indent=1)


def _sample_sector(rng, site, azimuth, radius, n):
    """Uniform points inside the rhombus-shaped sector of a hexagonal site."""
    uv = rng.random((n, 2))
    a = radius * np.array([math.cos(azimuth - math.pi / 3), math.sin(azimuth - math.pi / 3)])
    b = radius * np.array([math.cos(azimuth + math.pi / 3), math.sin(azimuth + math.pi / 3)])
    return site + uv[:, :1] * a + uv[:, 1:] * b


def _sample_wedge(rng, site, azimuth, r_min, r_max, n):
    """Uniform points in the annular wedge ``r_min <= r <= r_max``, +-60 degrees."""
    u = rng.random(n)
    r = np.sqrt(r_min**2 + u * (r_max**2 - r_min**2))
    phi = azimuth + (rng.random(n) - 0.5) * (2 * math.pi / 3)
    return site + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def drop_nodes(grid: SiteGrid, rng: np.random.Generator, params, mean_gain_model: Callable,
               n_antennas: int = 1) -> NodeSet:
    """Place hotspots, Wi-Fi devices and UEs for one Monte-Carlo drop.

    ``params`` is a :class:`~mmimo_u.config.ScenarioParams`. Raises
    :class:`PlacementError` when any node exhausts ``params.max_attempts``
    rejection-sampling attempts; callers redraw the whole drop.
    """
    n_sec = grid.n_sectors
    sec_pos = grid.sector_positions
    sec_az = grid.sector_azimuths
    batch = 32

    centers = np.empty((0, 2))
    hotspot_sector = []
    for s in range(n_sec):
        for _ in range(params.hotspots_per_sector):
            tries = 0
            while True:
                cand = _sample_sector(rng, sec_pos[s], sec_az[s], grid.cell_radius, batch)
                if len(centers):
                    sep = wrap_distance(cand[:, None, :], centers[None, :, :], grid).min(axis=1)
                    ok = sep >= params.hotspot_separation
                else:
                    ok = np.ones(batch, bool)
                hit = np.flatnonzero(ok)
                if hit.size and hit[0] + tries < params.max_attempts:
                    centers = np.vstack([centers, cand[hit[0]]])
                    hotspot_sector.append(s)
                    break
                tries += batch
                if tries >= params.max_attempts:
                    raise PlacementError(f"hotspot placement failed in sector {s}")
    hotspot_sector = np.asarray(hotspot_sector, dtype=int)

    n_hot = len(centers)
    per = params.devices_per_hotspot
    r = params.hotspot_radius * np.sqrt(rng.random((n_hot, per)))
    phi = 2 * math.pi * rng.random((n_hot, per))
    wifi = centers[:, None, :] + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    wifi = wifi.reshape(-1, 2)
    wifi_hotspot = np.repeat(np.arange(n_hot), per)
    wifi_role = np.tile(np.r_[AP, np.full(per - 1, STA)], n_hot)
    wifi_ap = wifi_hotspot * per

    counts = rng.poisson(params.ue_density, size=n_sec)
    ue_pos, ue_sector, ue_gain, ue_extra = [], [], [], []
    for s in range(n_sec):
        need = int(counts[s])
        tries = 0
        while need:
            n_cand = max(batch, 4 * need)
            cand = _sample_wedge(rng, sec_pos[s], sec_az[s], params.ue_min_distance,
                                 params.ue_max_distance, n_cand)
            ok = np.ones(n_cand, bool)
            if n_hot:
                clear = wrap_distance(cand[:, None, :], centers[None, :, :], grid).min(axis=1)
                ok &= clear >= params.ue_hotspot_clearance
            idx = np.flatnonzero(ok)
            if idx.size:
                gains, extra = _split(mean_gain_model(cand[idx], grid))
                keep = np.flatnonzero(np.argmax(gains, axis=1) == s)[:need]
                idx = idx[keep]
                ue_pos.extend(cand[idx])
                ue_gain.extend(gains[keep])
                if extra is not None:
                    ue_extra.extend(extra[keep])
                ue_sector.extend([s] * idx.size)
                need -= idx.size
            tries += n_cand
            if need and tries >= params.max_attempts * need:
                raise PlacementError(f"UE placement failed in sector {s}")

    return NodeSet(
        n_antennas=n_antennas,
        bs_positions=sec_pos,
        bs_azimuths=sec_az,
        ue_positions=np.asarray(ue_pos, dtype=float).reshape(-1, 2),
        ue_sector=np.asarray(ue_sector, dtype=int),
        hotspot_centers=centers,
        hotspot_sector=hotspot_sector,
        hotspot_radius=params.hotspot_radius,
        wifi_positions=wifi,
        wifi_role=wifi_role,
        wifi_hotspot=wifi_hotspot,
        wifi_ap=wifi_ap,
        ue_gain_db=np.asarray(ue_gain, dtype=float).reshape(-1, n_sec) if ue_extra else None,
        ue_los=np.asarray(ue_extra, dtype=bool).reshape(-1, n_sec) if ue_extra else None,
    )
