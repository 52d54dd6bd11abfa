"""Propagation-model coefficients, kept in one place so alternates can be swapped.

Urban macro (BS to ground device), 3GPP TR 36.814 Table B.1.2.1-1::

    LOS,  10 m < d < d_bp:   22.0 log10(d) + 28.0 + 20 log10(fc)
    LOS,  d_bp < d < 5 km:   40 log10(d) + 7.8 - 18 log10(h_bs') - 18 log10(h_ut') + 2 log10(fc)
    NLOS:  161.04 - 7.1 log10(W) + 7.5 log10(h) - (24.37 - 3.7 (h / h_bs)^2) log10(h_bs)
           + (43.42 - 3.1 log10(h_bs)) (log10(d) - 3) + 20 log10(fc)
           - (3.2 (log10(11.75 h_ut))^2 - 4.97)
    P_LOS = min(18 / d, 1) (1 - exp(-d / 63)) + exp(-d / 63)

with ``d_bp = 4 h_bs' h_ut' fc / c`` and effective heights ``h' = h - 1 m``.

Device to device, 3GPP TR 36.843 (outdoor, Winner+ B1 on 1.5 m terminals)::

    LOS,  d < d_bp:  22.7 log10(d) + 27.0 + 20 log10(fc)
    LOS,  d > d_bp:  40 log10(d) + 7.56 - 17.3 log10(h1') - 17.3 log10(h2') + 2.7 log10(fc)
    NLOS:            36.7 log10(d) + 22.7 + 26 log10(fc)
    P_LOS = min(18 / d, 1) (1 - exp(-d / 36)) + exp(-d / 36)

Both models are floored at free-space loss and NLOS is floored at LOS.
"""

SPEED_OF_LIGHT = 299_792_458.0

MIN_DISTANCE_M = 10.0

# UMa
UMA_LOS_SLOPE = 22.0
UMA_LOS_INTERCEPT = 28.0
UMA_LOS_FREQ = 20.0
UMA_LOS_FAR_SLOPE = 40.0
UMA_LOS_FAR_INTERCEPT = 7.8
UMA_LOS_FAR_HEIGHT = 18.0
UMA_LOS_FAR_FREQ = 2.0
UMA_STREET_WIDTH = 20.0
UMA_BUILDING_HEIGHT = 20.0
UMA_LOS_DECAY = 63.0

# D2D (Winner+ B1)
D2D_LOS_SLOPE = 22.7
D2D_LOS_INTERCEPT = 27.0
D2D_LOS_FREQ = 20.0
D2D_LOS_FAR_SLOPE = 40.0
D2D_LOS_FAR_INTERCEPT = 7.56
D2D_LOS_FAR_HEIGHT = 17.3
D2D_LOS_FAR_FREQ = 2.7
D2D_NLOS_SLOPE = 36.7
D2D_NLOS_INTERCEPT = 22.7
D2D_NLOS_FREQ = 26.0
D2D_LOS_DECAY = 36.0

# free space, d in metres and f in GHz
FSPL_INTERCEPT = 32.45
