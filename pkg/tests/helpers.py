"""Shared oracles and instance generators for the test suite.

Everything here deliberately avoids the library's own q_func/q_inv and search
code: grids are evaluated with scipy's erfc/ndtri so a bug in the package
numerics cannot hide inside its own oracle.
"""

import math

import numpy as np
from scipy.special import erfc, ndtri

from fdjs.detector import DetectorParams, roc_constants
from fdjs.fusion import JointDetector


def scipy_q(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def scipy_roc(c, k, m):
    m = np.clip(np.asarray(m, dtype=float), 1e-15, 1.0 - 1e-15)
    return scipy_q(c * (-ndtri(m)) + k)


def pfa_curve(joint: JointDetector, etas):
    b = joint.bound
    etas = np.asarray(etas, dtype=float)
    ft = scipy_roc(joint.tx.c, joint.tx.k, b ** etas)
    fr = scipy_roc(joint.rx.c, joint.rx.k, b ** (1.0 - etas))
    return ft + fr - ft * fr


def grid_search_eta(joint: JointDetector, npts: int = 100001, floor: float = 1e-6):
    """Two-stage grid argmin: the uniform grid plus a local refinement so the
    oracle's discretization error is far below the comparison tolerance."""
    etas = np.linspace(floor, 1.0 - floor, npts)
    pfa = pfa_curve(joint, etas)
    i = int(np.argmin(pfa))
    fine = np.linspace(etas[max(0, i - 2)], etas[min(npts - 1, i + 2)], 4001)
    pf = pfa_curve(joint, fine)
    k = int(np.argmin(pf))
    return float(fine[k]), float(pf[k])


def draw_detector_pair(rng, n_range=(200, 3000), bound=0.1):
    """Random heterogeneous instance with both detectors in the resolvable
    band: offset constants k in [0.5, 25] keep the objective away from the
    chance-line flat and from double-precision underflow."""
    while True:
        n = int(rng.integers(*n_range))
        ai = float(10 ** rng.uniform(-1.0, 1.3))
        scale = math.sqrt(n / (2.0 * ai + 1.0))
        a_t = float(10 ** rng.uniform(-1.3, 0.7))
        a_r = float(10 ** rng.uniform(-1.3, 0.7))
        k_t, k_r = a_t * scale, a_r * scale
        if 0.5 <= min(k_t, k_r) and max(k_t, k_r) <= 25.0 and \
                abs(a_t - a_r) > 1e-3 * max(a_t, a_r):
            pt = DetectorParams(n, ai, a_t)
            pr = DetectorParams(n, ai, a_r)
            return pt, pr, JointDetector(roc_constants(pt), roc_constants(pr), bound)
