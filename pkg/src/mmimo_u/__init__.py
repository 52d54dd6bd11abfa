"""System-level simulator for massive MIMO base stations sharing the 5 GHz
unlicensed band with Wi-Fi.

Two channel-access schemes are simulated on identical drops:

* ``mmimo-u``: covariance estimation during silence, spatial nulls toward the
  dominant Wi-Fi subspace, subspace-filtered LBT, multi-user precoding.
* ``lbt``: plain zero-forcing with energy-detection LBT.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, AllocationError, PlacementError, OutputError

__all__ = [
    "__version__",
    "ConfigError",
    "DataError",
    "AllocationError",
    "PlacementError",
    "OutputError",
]
