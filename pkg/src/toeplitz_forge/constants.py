"""Frozen calibration constants.

Regenerate with ``python3 scripts/calibrate.py`` (takes ~15 minutes, exact
arithmetic) and paste the printed block here. Calibration domains:

* EASY_SUM_C[d]:      j <= 200, legal m <= 24
* HARD_SUM_C[n, d]:   ell <= 200, legal m <= 24

Each constant is the sharp max of (value - const_term) * (4/3)^m over its
domain, nudged up a few ulps so the frozen bound can never round below a
calibrated value.
"""

EASY_SUM_C = {
    0: 2.6970787314388778,
    1: 2.8322170287952955,
    2: 4.165940493469877,
}

# Cauchy-estimate import lands in H(-d, d/T) with this constant; for one
# complex dimension the estimate |f^(j)| <= M j!/T^j makes C = 1 sharp.
CAUCHY_IMPORT_C = {1: 1.0}

# Algebra bound ||a*b|| <= C0 ||a|| ||b|| for symbol norms at m >= 4.
# Frozen as 2x the worst ratio over the calibration batch in calibrate.py.
PRODUCT_C0 = 1.0211564002288194

HARD_SUM_C = {
    (2, 0): 1.3891748392034302,
    (2, 1): 2.000000000000001,
    (2, 2): 4.0,
    (3, 0): 1.0000000000000004,
    (3, 1): 2.0,
    (3, 2): 4.0,
    (4, 0): 1.0,
    (4, 1): 2.0,
    (4, 2): 4.0,
}

# Two-class sharp-product bound ||f#g||_{2r,2R,m} <= C ||f||_{r,R,m}
# ||g||_{2r,2R,m}.  Frozen as 1.05x the worst ratio over the sphere batch
# in calibrate.py (random polynomial pairs, several (r, R, m) regimes).
SHARP_CLASS_C = 0.31601890368317836
