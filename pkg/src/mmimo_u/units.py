"""dB / linear conversions."""

import numpy as np


def db2lin(x_db):
    return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


def dbm2w(p_dbm):
    return np.power(10.0, (np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def w2dbm(p_w):
    return 10.0 * np.log10(p_w) + 30.0


def thermal_noise_w(bandwidth_hz, noise_figure_db, density_dbm_hz=-174.0):
    """Thermal noise power over ``bandwidth_hz`` including the receiver noise figure."""
    return float(dbm2w(density_dbm_hz + 10.0 * np.log10(bandwidth_hz) + noise_figure_db))
