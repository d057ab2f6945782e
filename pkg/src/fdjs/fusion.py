"""AND-rule fusion of two heterogeneous detectors and the optimal weight search.

The transmitter and receiver each run an energy detector with its own ROC
constants.  Link-level availability is the AND of their decisions, so the
joint miss rate is the product m_t * m_r and the joint false-alarm rate is
1 - (1 - f_t)(1 - f_r).  Holding the joint miss rate at a bound b, the miss
budget is split as m_t = b**eta, m_r = b**(1-eta); the weight eta trades
false alarms between the two radios and is chosen to minimize the joint
false-alarm rate.  The objective is unimodal on the half-interval away from
the stronger detector, so the optimizer bisects on the sign of the analytic
derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from fdjs.detector import RocConstants, p_fa_of_p_md, roc_derivative

__all__ = [
    "JointDetector",
    "JointOperatingPoint",
    "OptimizerConfig",
    "OptimizeResult",
    "fuse_availability",
    "joint_p_md",
    "joint_p_fa",
    "objective",
    "gradient",
    "optimize_eta",
    "single_detector_point",
]


@dataclass(frozen=True)
class JointDetector:
    """ROC constants of both radios plus the joint missed-detection bound."""

    tx: RocConstants
    rx: RocConstants
    bound: float

    def __post_init__(self) -> None:
        if not (0.0 < self.bound < 1.0):
            raise ValueError(f"bound must lie in (0, 1), got {self.bound!r}")


@dataclass(frozen=True)
class JointOperatingPoint:
    """A weight eta with the per-radio and joint rates it induces.

    p_md equals the detector bound exactly by construction: the budget split
    composes back to b for every eta.  eta values 0 and 1 denote the
    single-detector limit points (the other radio is ignored).
    """

    eta: float
    m_t: float
    m_r: float
    f_t: float
    f_r: float
    p_md: float
    p_fa: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")
        for name in ("m_t", "m_r", "f_t", "f_r", "p_md", "p_fa"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a probability, got {v!r}")


@dataclass(frozen=True)
class OptimizerConfig:
    """Stopping controls for the weight search.

    epsilon is the relative convergence threshold on the bracket's
    false-alarm spread, |p_fa(lo) - p_fa(hi)| <= epsilon * max(...); the
    search also stops once the bracket is narrower than eta_tol.  eta_floor
    keeps evaluations away from {0, 1} where the per-radio miss targets reach
    1 and the normal quantile diverges.
    """

    epsilon: float = 1e-9
    eta_floor: float = 1e-6
    max_iter: int = 200
    eta_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if not (0.0 < self.eta_floor < 0.5):
            raise ValueError("eta_floor must lie in (0, 0.5)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.eta_tol <= 0.0:
            raise ValueError("eta_tol must be positive")


@dataclass(frozen=True)
class OptimizeResult:
    """Outcome of the weight search.

    status is "converged" for an interior optimum, "boundary" when the
    gradient never changes sign so a single-detector limit point wins, and
    "max_iter" when the iteration budget ran out (best bracket returned).
    """

    point: JointOperatingPoint
    status: str
    iterations: int
    bracket: tuple[float, float]


def fuse_availability(l_t: int, l_r: int) -> int:
    """Hard AND of the two availability decisions (1 = spectrum seen free)."""
    if l_t not in (0, 1) or l_r not in (0, 1):
        raise ValueError("availability decisions must be 0 or 1")
    return l_t * l_r


def joint_p_md(m_t: float, m_r: float) -> float:
    """Joint miss rate: both radios must miss."""
    if not (0.0 <= m_t <= 1.0 and 0.0 <= m_r <= 1.0):
        raise ValueError("miss rates must be probabilities")
    return m_t * m_r


def joint_p_fa(f_t: float, f_r: float) -> float:
    """Joint false-alarm rate: either radio alarming blocks the link."""
    if not (0.0 <= f_t <= 1.0 and 0.0 <= f_r <= 1.0):
        raise ValueError("false-alarm rates must be probabilities")
    # Factored form of f_t + f_r - f_t*f_r; keeps the {0, 1} identities exact.
    return f_t + f_r * (1.0 - f_t)


def objective(joint: JointDetector, eta: float, eta_floor: float = 1e-6) -> JointOperatingPoint:
    """Operating point induced by weight eta under the miss-budget split."""
    if not (eta_floor <= eta <= 1.0 - eta_floor):
        raise ValueError(f"eta must lie in [{eta_floor}, {1 - eta_floor}], got {eta!r}")
    b = joint.bound
    m_t = b ** eta
    m_r = b ** (1.0 - eta)
    f_t = p_fa_of_p_md(joint.tx, m_t)
    f_r = p_fa_of_p_md(joint.rx, m_r)
    return JointOperatingPoint(eta=eta, m_t=m_t, m_r=m_r, f_t=f_t, f_r=f_r,
                               p_md=b, p_fa=joint_p_fa(f_t, f_r))


def single_detector_point(joint: JointDetector, use_tx: bool = True) -> JointOperatingPoint:
    """Single-detector limit: one radio carries the whole miss budget.

    At eta = 1 the receiver's miss target reaches 1, its false-alarm rate
    vanishes, and the link operates on the transmitter alone (eta = 0 is the
    mirror).  These closure points are valid operating choices a deployment
    can always fall back to when the other radio contributes nothing.
    """
    b = joint.bound
    if use_tx:
        f_t = p_fa_of_p_md(joint.tx, b)
        return JointOperatingPoint(1.0, b, 1.0, f_t, 0.0, b, f_t)
    f_r = p_fa_of_p_md(joint.rx, b)
    return JointOperatingPoint(0.0, 1.0, b, 0.0, f_r, b, f_r)


def gradient(joint: JointDetector, eta: float) -> float:
    """Analytic derivative of the joint false-alarm rate with respect to eta.

    d/d eta [P(b^eta) + R(b^(1-eta)) - P*R]
      = ln b * [b^eta P'(b^eta)(1 - R) - b^(1-eta) R'(b^(1-eta))(1 - P)]
    with P, R the per-radio ROC maps and P', R' their slopes.  Boundary
    evaluations inherit the ROC probability clamp.
    """
    b = joint.bound
    m_t = b ** eta
    m_r = b ** (1.0 - eta)
    p = p_fa_of_p_md(joint.tx, m_t)
    r = p_fa_of_p_md(joint.rx, m_r)
    dp = roc_derivative(joint.tx, m_t)
    dr = roc_derivative(joint.rx, m_r)
    return math.log(b) * (m_t * dp * (1.0 - r) - m_r * dr * (1.0 - p))


def _constants_match(a: RocConstants, b: RocConstants) -> bool:
    rel = 1e-12
    return (abs(a.c - b.c) <= rel * max(abs(a.c), abs(b.c)) and
            abs(a.k - b.k) <= rel * max(abs(a.k), abs(b.k), 1e-300))


def optimize_eta(joint: JointDetector, config: OptimizerConfig | None = None) -> OptimizeResult:
    """Find the weight minimizing the joint false-alarm rate.

    Identical detectors short-circuit to eta = 0.5.  Otherwise the sign of
    the derivative at 0.5 picks the half-interval containing the minimum
    (negative: the transmitter is the stronger detector and the optimum lies
    in (0.5, 1); positive: mirrored), and bisection on the derivative sign
    shrinks the bracket.  The returned point is the best of everything
    evaluated, so its false-alarm rate never exceeds the unweighted eta = 0.5
    point or either bracket endpoint.
    """
    cfg = config or OptimizerConfig()
    floor = cfg.eta_floor
    center = objective(joint, 0.5, floor)

    if _constants_match(joint.tx, joint.rx):
        return OptimizeResult(center, "converged", 0, (0.5, 0.5))

    candidates = [center]
    g_half = gradient(joint, 0.5)
    if g_half == 0.0:
        return OptimizeResult(center, "converged", 0, (0.5, 0.5))

    if g_half < 0.0:
        lo, hi = 0.5, 1.0 - floor
    else:
        lo, hi = floor, 0.5

    g_lo = g_half if g_half < 0.0 else gradient(joint, lo)
    g_hi = gradient(joint, hi) if g_half < 0.0 else g_half
    edge_lo = objective(joint, lo, floor)
    edge_hi = objective(joint, hi, floor)
    candidates += [edge_lo, edge_hi]

    if not (g_lo < 0.0 < g_hi):
        # Gradient never changes sign on the half-interval: the objective is
        # monotone there and the better bracket endpoint is the answer (the
        # far endpoint wins ties; it is where the monotone run was heading).
        far_first = [edge_hi, edge_lo] if g_half < 0.0 else [edge_lo, edge_hi]
        best = min(far_first + [center], key=lambda pt: pt.p_fa)
        return OptimizeResult(best, "boundary", 0, (lo, hi))

    status = "max_iter"
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        if hi - lo <= cfg.eta_tol:
            status = "converged"
            break
        p_lo = objective(joint, lo, floor)
        p_hi = objective(joint, hi, floor)
        if abs(p_lo.p_fa - p_hi.p_fa) <= cfg.epsilon * max(p_lo.p_fa, p_hi.p_fa):
            candidates += [p_lo, p_hi]
            status = "converged"
            break
        mid = 0.5 * (lo + hi)
        g_mid = gradient(joint, mid)
        if g_mid == 0.0:
            candidates.append(objective(joint, mid, floor))
            status = "converged"
            break
        if g_mid < 0.0:
            lo = mid
        else:
            hi = mid

    # Interior points lead so that exact-tie degeneracies still return a
    # weight inside the chosen half-interval.
    final = [objective(joint, 0.5 * (lo + hi), floor),
             objective(joint, lo, floor),
             objective(joint, hi, floor)] + candidates
    best = min(final, key=lambda pt: pt.p_fa)
    return OptimizeResult(best, status, iterations, (lo, hi))
