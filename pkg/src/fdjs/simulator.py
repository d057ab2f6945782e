"""Frame-level Monte Carlo simulation of one secondary link.

The link runs a two-stage access mechanism over a sampled ON/OFF path of the
licensed user.  Stage 1: the transmitter senses in back-to-back windows; on a
"free" verdict the joint strategies spend a query exchange to get the
receiver's decision (the inference strategy consults a predictor instead, the
single-detector strategy proceeds directly).  Stage 2: frames are sent while
sensing continues; each frame is gated by the strategy's operating point, and
any "busy" verdict aborts back to stage 1.  A frame overlapping licensed ON
time counts as a collision (disrupted and lost) no matter where the radios
sit.

Detection outcomes are Bernoulli draws at the analytic per-window rates of
the strategy's operating point; a config switch replays decisions at the
sample level (drawing actual window energies against thresholds) for spot
checks.  Runs of identical decisions are advanced with geometric/negative-
binomial jumps, which is exact for independent per-window draws under a
constant hypothesis, so a 200-second link simulates in milliseconds.

Each trial owns substreams derived from (master seed, trial index): the
licensed-user trajectory stream is strategy-independent, so strategies are
compared on identical trajectories (paired comparisons), while decision
draws stay independent across strategies.  Aggregation is an ordered
reduction over trial indices: results are bit-identical for a fixed seed
regardless of worker count.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from fdjs.detector import DetectorParams, Hypothesis, _draw_energy_block, \
    roc_constants, threshold_for_p_md
from fdjs.fusion import JointDetector, JointOperatingPoint, OptimizerConfig, \
    objective, optimize_eta, single_detector_point
from fdjs.numerics import RngStream
from fdjs.scenario import Geometry, Propagation, PuActivity, PuTrajectory, \
    RadioConfig, alpha_i_of, alpha_s_at, sample_trajectory

__all__ = [
    "Strategy",
    "IjsConfig",
    "SimConfig",
    "SimResult",
    "LinkScenario",
    "StrategyPoints",
    "HeatmapCell",
    "derive_operating_points",
    "ijs_off_probability",
    "ijs_predict",
    "run_link",
    "heatmap_pfa",
]


class Strategy(Enum):
    """Sensing strategy of the link.

    FDJS: optimally weighted joint detection with instantaneous receiver
    feedback.  CSS: unweighted joint detection (eta = 0.5).  IJS: transmitter
    sensing plus a stale-information predictor for the receiver side.
    SINGLE_TX: transmitter sensing alone carrying the whole miss budget.
    """

    FDJS = "fdjs"
    CSS = "css"
    IJS = "ijs"
    SINGLE_TX = "single_tx"


_STRATEGY_INDEX = {s: i for i, s in enumerate(Strategy)}


@dataclass(frozen=True)
class IjsConfig:
    """Knobs of the inference proxy.

    The receiver's sensed state reaches the transmitter only as periodic
    out-of-band reports that are wrong with probability obs_error; between
    reports the transmitter extrapolates with the two-state chain posterior
    and grants access only while the off-probability stays above confidence.
    """

    report_interval_s: float = 1.0
    confidence: float = 0.9
    obs_error: float = 0.10

    def __post_init__(self) -> None:
        if self.report_interval_s <= 0.0:
            raise ValueError("report_interval_s must be positive")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie in (0, 1)")
        if not (0.0 <= self.obs_error < 0.5):
            raise ValueError("obs_error must lie in [0, 0.5)")


@dataclass(frozen=True)
class SimConfig:
    """Timing, budget and reproducibility parameters of one experiment."""

    frame_s: float = 0.01
    query_s: float = 0.002
    duration_s: float = 200.0
    trials: int = 30
    md_bound: float = 0.1
    master_seed: int = 0
    ijs: IjsConfig = field(default_factory=IjsConfig)
    sample_level: bool = False

    def __post_init__(self) -> None:
        for name in ("frame_s", "query_s", "duration_s"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if not (0.0 < self.md_bound < 1.0):
            raise ValueError("md_bound must lie in (0, 1)")


@dataclass(frozen=True)
class LinkScenario:
    """Everything physical: propagation, licensed activity, radios, geometry."""

    prop: Propagation
    activity: PuActivity
    radio: RadioConfig
    geometry: Geometry


@dataclass(frozen=True)
class SimResult:
    """Aggregated outcome of the trials of one (strategy, scenario) run."""

    throughput_bps: float
    disruption_rate: float
    false_alarm_loss: float
    frames_ok: int
    frames_collided: int
    queries_sent: int
    infeasible: bool
    trial_throughput_bps: tuple[float, ...]

    @property
    def throughput_stderr_bps(self) -> float:
        xs = self.trial_throughput_bps
        if len(xs) < 2:
            return 0.0
        return float(np.std(xs, ddof=1) / math.sqrt(len(xs)))


@dataclass(frozen=True)
class StrategyPoints:
    """Geometry-derived detector models and per-strategy operating points."""

    tx_params: DetectorParams
    rx_params: DetectorParams
    joint: JointDetector
    fdjs: JointOperatingPoint
    fdjs_status: str
    css: JointOperatingPoint
    single_tx: JointOperatingPoint
    single_rx: JointOperatingPoint


def derive_operating_points(prop: Propagation, radio: RadioConfig, geom: Geometry,
                            md_bound: float,
                            opt_config: OptimizerConfig | None = None) -> StrategyPoints:
    """Turn geometry into detector params, ROC constants and operating points.

    The weighted strategy additionally falls back to whichever single-detector
    limit point is better whenever the interior search cannot beat them (a
    deployment can always ignore one radio).
    """
    ai = alpha_i_of(radio, prop)
    a_t = max(alpha_s_at(prop, geom.d_tx_m), 1e-300)
    a_r = max(alpha_s_at(prop, geom.d_rx_m), 1e-300)
    tx = DetectorParams(radio.n_samples, ai, a_t)
    rx = DetectorParams(radio.n_samples, ai, a_r)
    joint = JointDetector(roc_constants(tx), roc_constants(rx), md_bound)
    res = optimize_eta(joint, opt_config)
    s_tx = single_detector_point(joint, use_tx=True)
    s_rx = single_detector_point(joint, use_tx=False)
    fdjs = min([res.point, s_tx, s_rx], key=lambda p: p.p_fa)
    status = res.status if fdjs is res.point else "boundary"
    return StrategyPoints(tx, rx, joint, fdjs, status, objective(joint, 0.5),
                          s_tx, s_rx)


# --- inference proxy ---------------------------------------------------------


def ijs_off_probability(activity: PuActivity, elapsed_s: float,
                        last_state_on: bool = False, obs_error: float = 0.0) -> float:
    """Probability the licensed user is OFF now, given the last report.

    Two-state chain transition from a possibly unreliable observation taken
    elapsed_s ago: P_off(dt) = pi_off + (q_off - pi_off) * exp(-r*dt), where
    q_off is the Bayes posterior of the reported state against the stationary
    prior and r the chain's relaxation rate.
    """
    if elapsed_s < 0.0:
        raise ValueError("elapsed time must be non-negative")
    pi_on = activity.payload
    pi_off = 1.0 - pi_on
    w = obs_error
    if last_state_on:
        q_off = w * pi_off / (w * pi_off + (1.0 - w) * pi_on)
    else:
        q_off = (1.0 - w) * pi_off / ((1.0 - w) * pi_off + w * pi_on)
    return pi_off + (q_off - pi_off) * math.exp(-activity.rate_sum * elapsed_s)


def ijs_predict(activity: PuActivity, time_since_last_rx_report_s: float,
                last_state_on: bool = False, confidence: float = 0.9,
                obs_error: float = 0.0) -> bool:
    """Spectrum declared free when the off-probability clears the confidence bar."""
    return ijs_off_probability(activity, time_since_last_rx_report_s,
                               last_state_on, obs_error) >= confidence


def _validity_window_s(activity: PuActivity, cfg: IjsConfig) -> float:
    """How long an OFF report keeps the predictor open."""
    pi_off = 1.0 - activity.payload
    w = cfg.obs_error
    q_off = (1.0 - w) * pi_off / ((1.0 - w) * pi_off + w * activity.payload)
    if q_off < cfg.confidence:
        return -1.0  # never opens, even a fresh OFF report is not convincing
    if pi_off >= cfg.confidence:
        return math.inf
    return math.log((q_off - pi_off) / (cfg.confidence - pi_off)) / activity.rate_sum


class _Predictor:
    """Per-trial realization of the report sequence and its open intervals."""

    def __init__(self, traj: PuTrajectory, activity: PuActivity, cfg: IjsConfig,
                 gen: np.random.Generator):
        times = np.arange(0.0, traj.duration, cfg.report_interval_s)
        idx = np.minimum(np.searchsorted(traj.ends, times, side="right"),
                         len(traj.ends) - 1)
        true_on = traj.on[idx]
        flips = gen.random(len(times)) < cfg.obs_error
        self.times = times.tolist()
        self.obs_on = (true_on ^ flips).tolist()
        self.tau = _validity_window_s(activity, cfg)
        self.interval = cfg.report_interval_s
        self.duration = traj.duration

    def _report_index(self, t: float) -> int:
        return min(int(t / self.interval), len(self.times) - 1)

    def open_at(self, t: float) -> bool:
        i = self._report_index(t)
        return (not self.obs_on[i]) and (t - self.times[i]) <= self.tau

    def next_change_after(self, t: float) -> float:
        """First time > t at which open_at may flip (report or expiry)."""
        i = self._report_index(t)
        expiry = self.times[i] + self.tau
        nxt = self.times[i + 1] if i + 1 < len(self.times) else self.duration
        if self.open_at(t) and t < expiry < nxt:
            return expiry
        return nxt

    def next_open_after(self, t: float) -> float:
        """Earliest time >= t with the predictor open (duration if none)."""
        if self.open_at(t):
            return t
        i = self._report_index(t)
        j = i + 1
        while j < len(self.times):
            if not self.obs_on[j]:
                return self.times[j]
            j += 1
        return self.duration


# --- trial simulation --------------------------------------------------------


@dataclass(frozen=True)
class _Gates:
    """Per-window free probabilities of one strategy, by hypothesis."""

    tx_free_on: float
    tx_free_off: float
    rx_free_on: float
    rx_free_off: float
    frame_free_on: float
    frame_free_off: float
    uses_query: bool
    uses_predictor: bool
    # sample-level thresholds (inf disables a radio's veto)
    gamma_tx: float = math.inf
    gamma_rx: float = math.inf


def _strategy_gates(strategy: Strategy, pts: StrategyPoints) -> _Gates:
    if strategy in (Strategy.FDJS, Strategy.CSS):
        pt = pts.fdjs if strategy is Strategy.FDJS else pts.css
        return _Gates(
            tx_free_on=pt.m_t, tx_free_off=1.0 - pt.f_t,
            rx_free_on=pt.m_r, rx_free_off=1.0 - pt.f_r,
            frame_free_on=pt.m_t * pt.m_r,
            frame_free_off=(1.0 - pt.f_t) * (1.0 - pt.f_r),
            uses_query=True, uses_predictor=False,
            gamma_tx=_threshold_or_inf(pts.tx_params, pt.m_t),
            gamma_rx=_threshold_or_inf(pts.rx_params, pt.m_r),
        )
    pt = pts.single_tx
    return _Gates(
        tx_free_on=pt.m_t, tx_free_off=1.0 - pt.f_t,
        rx_free_on=1.0, rx_free_off=1.0,
        frame_free_on=pt.m_t, frame_free_off=1.0 - pt.f_t,
        uses_query=False, uses_predictor=strategy is Strategy.IJS,
        gamma_tx=_threshold_or_inf(pts.tx_params, pt.m_t),
    )


def _threshold_or_inf(params: DetectorParams, miss_target: float) -> float:
    if miss_target >= 1.0 - 1e-12:
        return math.inf
    return threshold_for_p_md(params, miss_target)


_NEVER = 1 << 62


def _geometric(ev: random.Random, p: float, log_q: float) -> int:
    """Index (1-based) of the first success among independent trials.

    log_q caches log1p(-p); non-finite values encode the degenerate cases
    (p <= 0 never succeeds, p >= 1 succeeds immediately).
    """
    if log_q == 0.0:
        return _NEVER  # p <= 0
    if log_q == -math.inf:
        return 1  # p >= 1
    u = 1.0 - ev.random()  # (0, 1]
    return 1 + int(math.log(u) / log_q)


def _log_q(p: float) -> float:
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return -math.inf
    return math.log1p(-p)


@dataclass
class _TrialTally:
    frames_ok: int = 0
    frames_collided: int = 0
    queries: int = 0
    tx_time: float = 0.0
    overlap_on: float = 0.0


def _window_free(ev: random.Random, aux: np.random.Generator | None,
                 params: DetectorParams, gamma: float, on: bool, p_free: float,
                 sample_level: bool) -> bool:
    if not sample_level:
        return ev.random() < p_free
    if gamma == math.inf:
        return True
    hyp = Hypothesis.H1 if on else Hypothesis.H0
    stat = float(_draw_energy_block(aux, params, hyp, 1)[0])
    return stat <= gamma


def _simulate_trial(strategy: Strategy, gates: _Gates, pts: StrategyPoints,
                    traj: PuTrajectory, sim: SimConfig, window_s: float,
                    ev: random.Random, aux: np.random.Generator,
                    pred: _Predictor | None) -> _TrialTally:
    tw, tf, tq, dur = window_s, sim.frame_s, sim.query_s, sim.duration_s
    tally = _TrialTally()
    sample = sim.sample_level
    ev_random = ev.random

    # Time only moves forward, so trajectory lookups ride a cursor over plain
    # Python lists instead of bisecting numpy arrays on every event.
    ends = traj.ends.tolist()
    iv_on = traj.on.tolist()
    last_iv = len(ends) - 1
    idx = 0

    lg_tx_on = _log_q(gates.tx_free_on)
    lg_tx_off = _log_q(gates.tx_free_off)
    lg_abort_on = _log_q(1.0 - gates.frame_free_on)
    lg_abort_off = _log_q(1.0 - gates.frame_free_off)

    def on_overlap(a: float, b: float) -> float:
        j = idx
        while j < last_iv and ends[j] <= a:
            j += 1
        total = 0.0
        pos = a
        while pos < b:
            seg = min(ends[j], b)
            if iv_on[j]:
                total += seg - pos
            pos = seg
            if j == last_iv:
                break
            j += 1
        return total

    t = 0.0
    while t + tw <= dur:
        while idx < last_iv and ends[idx] <= t:
            idx += 1

        # ---- stage 1: transmitter sensing until a free verdict
        run_end = ends[idx]
        if t + tw <= run_end and not sample:
            on = iv_on[idx]
            fit = int((run_end - t) / tw)
            k = _geometric(ev, gates.tx_free_on if on else gates.tx_free_off,
                           lg_tx_on if on else lg_tx_off)
            if k > fit:
                t += fit * tw
                continue  # busy through this run; re-enter near the boundary
            t += k * tw
        else:
            on = on_overlap(t, t + tw) >= 0.5 * tw
            free = _window_free(ev, aux, pts.tx_params, gates.gamma_tx, on,
                                gates.tx_free_on if on else gates.tx_free_off,
                                sample)
            t += tw
            if not free:
                continue

        # ---- transmitter saw free: receiver-side step
        if gates.uses_predictor:
            if not pred.open_at(t):
                t = max(t + tw, pred.next_open_after(t))
                continue
        if gates.uses_query:
            if t + tq > dur:
                break
            rx_on = on_overlap(t, t + tw) >= 0.5 * tw
            rx_free = _window_free(ev, aux, pts.rx_params, gates.gamma_rx, rx_on,
                                   gates.rx_free_on if rx_on else gates.rx_free_off,
                                   sample)
            tally.queries += 1
            t += tq
            if not rx_free:
                continue

        # ---- stage 2: transmit until a busy verdict
        while t + tf <= dur:
            while idx < last_iv and ends[idx] <= t:
                idx += 1
            boundary = ends[idx] if ends[idx] < dur else dur
            if gates.uses_predictor:
                if not pred.open_at(t):
                    break  # receiver side predicts busy: abort to stage 1
                nxt = pred.next_change_after(t)
                if nxt < boundary:
                    boundary = nxt
            if t + tf <= boundary and not sample:
                on = iv_on[idx]
                fit = int((boundary - t) / tf)
                g = _geometric(ev, 1.0 - (gates.frame_free_on if on else gates.frame_free_off),
                               lg_abort_on if on else lg_abort_off)
                n_send = g - 1 if g - 1 < fit else fit
                if n_send:
                    if on:
                        tally.frames_collided += n_send
                        tally.overlap_on += n_send * tf
                    else:
                        tally.frames_ok += n_send
                    tally.tx_time += n_send * tf
                    t += n_send * tf
                if n_send < fit:
                    t += tw  # the in-frame sensing that fired
                    break
                continue  # reached a boundary: re-evaluate hypothesis
            # boundary-straddling frame slot: decide and send one frame
            on_dec = on_overlap(t, t + tw) >= 0.5 * tw
            tx_ok = _window_free(ev, aux, pts.tx_params, gates.gamma_tx, on_dec,
                                 gates.tx_free_on if on_dec else gates.tx_free_off,
                                 sample)
            if tx_ok and gates.uses_query:
                rx_ok = _window_free(ev, aux, pts.rx_params, gates.gamma_rx, on_dec,
                                     gates.rx_free_on if on_dec else gates.rx_free_off,
                                     sample)
            else:
                rx_ok = True
            if tx_ok and rx_ok:
                overlap = on_overlap(t, t + tf)
                if overlap > 0.0:
                    tally.frames_collided += 1
                    tally.overlap_on += overlap
                else:
                    tally.frames_ok += 1
                tally.tx_time += tf
                t += tf
            else:
                t += tw
                break
    return tally


def _feasible(gates: _Gates) -> bool:
    return gates.frame_free_off > 1e-9


def _run_one_trial(strategy: Strategy, pts: StrategyPoints, scenario: LinkScenario,
                   sim: SimConfig, rng: RngStream, trial: int
                   ) -> tuple[_TrialTally, PuTrajectory]:
    s = rng.substream(trial)
    traj = sample_trajectory(scenario.activity, sim.duration_s, s.substream(0))
    idx = _STRATEGY_INDEX[strategy]
    ev = random.Random(s.substream(1 + idx).seed64())
    aux = s.substream(11 + idx).generator()
    pred = None
    if strategy is Strategy.IJS:
        pred = _Predictor(traj, scenario.activity, sim.ijs, aux)
    gates = _strategy_gates(strategy, pts)
    tally = _simulate_trial(strategy, gates, pts, traj, sim,
                            scenario.radio.window_s, ev, aux, pred)
    return tally, traj


def _trial_stats(args) -> tuple:
    strategy, pts, scenario, sim, rng, trial = args
    tally, traj = _run_one_trial(strategy, pts, scenario, sim, rng, trial)
    on_total = traj.total_on_seconds
    return (tally.frames_ok, tally.frames_collided, tally.queries,
            tally.tx_time, tally.overlap_on, on_total)


def run_link(strategy: Strategy, scenario: LinkScenario, sim: SimConfig,
             rng: RngStream | None = None, n_workers: int = 1) -> SimResult:
    """Simulate the link under one strategy; aggregate over sim.trials trials.

    Trials are independent work units on private substreams, reduced in trial
    order: the result is bit-identical for a fixed seed at any n_workers.
    """
    if rng is None:
        rng = RngStream(sim.master_seed)
    window = scenario.radio.window_s
    if window > sim.frame_s or window > sim.query_s:
        raise ValueError("sensing window must fit inside both frame_s and query_s")

    pts = derive_operating_points(scenario.prop, scenario.radio, scenario.geometry,
                                  sim.md_bound)
    gates = _strategy_gates(strategy, pts)
    rate_bps = scenario.radio.bandwidth_hz * math.log2(1.0 + scenario.radio.link_snr_linear)

    if not _feasible(gates):
        return SimResult(0.0, 0.0, 1.0, 0, 0, 0, True,
                         tuple(0.0 for _ in range(sim.trials)))

    jobs = [(strategy, pts, scenario, sim, rng, i) for i in range(sim.trials)]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_trial_stats, jobs, chunksize=max(1, sim.trials // (4 * n_workers))))
    else:
        rows = [_trial_stats(j) for j in jobs]

    frames_ok = sum(r[0] for r in rows)
    frames_collided = sum(r[1] for r in rows)
    queries = sum(r[2] for r in rows)
    tx_time = math.fsum(r[3] for r in rows)
    overlap = math.fsum(r[4] for r in rows)
    on_total = math.fsum(r[5] for r in rows)
    total_time = sim.duration_s * sim.trials
    off_total = total_time - on_total

    ok_time = frames_ok * sim.frame_s
    throughput = rate_bps * ok_time / total_time
    disruption = overlap / on_total if on_total > 0.0 else 0.0
    fa_loss = 1.0 - (tx_time - overlap) / off_total if off_total > 0.0 else 0.0
    per_trial = tuple(rate_bps * r[0] * sim.frame_s / sim.duration_s for r in rows)
    return SimResult(throughput, disruption, fa_loss, frames_ok, frames_collided,
                     queries, False, per_trial)


# --- false-alarm heatmap ------------------------------------------------------


@dataclass(frozen=True)
class HeatmapCell:
    """Single geometry cell: absolute rates plus improvement ratios."""

    d_tx_m: float
    d_rx_m: float
    pfa_single: float
    pfa_css: float
    pfa_fdjs: float
    ratio_css: float
    ratio_fdjs: float
    flagged: bool


def _ratio(single: float, other: float) -> float:
    if single == other:
        return 1.0
    if other == 0.0:
        return math.inf
    return single / other


def heatmap_pfa(geometries: list[Geometry], prop: Propagation, radio: RadioConfig,
                md_bound: float = 0.1,
                opt_config: OptimizerConfig | None = None) -> list[HeatmapCell]:
    """False-alarm improvement of the fused strategies over the single detector.

    Cells where any probability hits the numeric floor (underflowed signal
    ratios or fully clamped rates) are flagged; their ratios are still emitted
    (identical underflowed rates give ratio 1).
    """
    cells = []
    for geom in geometries:
        pts = derive_operating_points(prop, radio, geom, md_bound, opt_config)
        single = pts.single_tx.p_fa
        css = pts.css.p_fa
        fdjs = pts.fdjs.p_fa
        flagged = min(single, css, fdjs) <= 1e-15 or max(single, css, fdjs) >= 1.0 - 1e-12
        cells.append(HeatmapCell(geom.d_tx_m, geom.d_rx_m, single, css, fdjs,
                                 _ratio(single, css), _ratio(single, fdjs), flagged))
    return cells
