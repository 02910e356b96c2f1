"""Deterministic synthetic-register generator calibrated to marginal tables.

Bracket memberships are sampled independently across variable blocks (a
documented simplification: the real joint distribution is unknowable), with
continuous values drawn from truncated normals/log-normals whose parameters
are solved so cohort means approach the targets. The casual-work blocks share
one zero state, so an individual without occasional work has zero months,
spells, hours and wages everywhere.

The monthly-hours block describes the latest spell; its zero share exceeds
the no-casual-work share, the surplus being individuals whose occasional work
all happened in earlier spells. Every individual is generated from its own
counter-based PCG64 stream (SeedSequence(seed, spawn_key=(1, i))), so output
is deterministic regardless of chunking.
"""

from __future__ import annotations

import functools
import importlib.resources
import math
from dataclasses import dataclass, replace
from datetime import date, timedelta

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import DataError, InfeasibleSpecError
from .register import (DAYS_PER_MONTH, MonthObservation, RegistrationRecord,
                       bracket_code, build_features, collate,
                       compute_class_means, impute_hours)

FREQ_BLOCKS = {
    "latest_duration": 3, "periods": 3, "age": 3, "skill_group": 3,
    "education": 6, "reason": 5, "exit": 6, "hours": 5,
    "spells_per_period": 3, "share": 4, "children": 2,
}
MEAN_KEYS = (
    "latest_duration_days", "cumulated_duration_days", "periods",
    "job_offers", "occasional_share", "occasional_spells_per_year",
    "offers_per_month", "max_wage", "max_hours", "age", "seniority_years",
)
#: emergent under independent blocks, reported but not a hard target
INFORMATIONAL_MEANS = ("occasional_spells_per_year",)

_EDUCATION_ORDER = ("s4", "s2", "sec_diploma", "secondary", "primary", "none")
_REASON_ORDER = ("lay_off", "end_of_contract", "first_job", "return", "na")
_EXIT_ORDER = ("job", "probable_job", "quit", "training", "cancellation",
               "full_time_job_seeker")
_SKILL_GROUPS = (("tecd", "mait", "cadr"), ("emmq", "empq"),
                 ("mano", "ousp", "op12", "o3hq"))

#: margin keeping day-rounded durations strictly inside their bracket
_EDGE = 0.02


@dataclass(frozen=True)
class MarginalSpec:
    """Calibration targets for one synthetic cohort."""

    region: str
    cohort_size: int
    seed: int
    window_start: date
    window_end: date
    means: tuple[tuple[str, float], ...]
    freqs: tuple[tuple[str, tuple[float, ...]], ...]
    missing_hours_rate: float = 0.0

    def mean(self, key: str) -> float:
        return dict(self.means)[key]

    def freq(self, key: str) -> np.ndarray:
        """Block frequencies normalized to proportions."""
        values = np.asarray(dict(self.freqs)[key], dtype=np.float64)
        total = values.sum()
        if abs(total / 100.0 - 1.0) > 0.005:
            raise DataError(f"frequency block {key!r} sums to {total}, "
                            f"expected 100")
        return values / total


def parse_spec(text: str, source: str = "<spec>") -> MarginalSpec:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"{source}:{lineno}: expected key = value")
        fields[key.strip()] = value.strip()

    def pop(key):
        try:
            return fields.pop(key)
        except KeyError:
            raise DataError(f"{source}: missing key {key!r}") from None

    region = pop("region")
    cohort_size = int(pop("cohort_size"))
    seed = int(pop("seed"))
    window_start = date.fromisoformat(pop("window_start"))
    window_end = date.fromisoformat(pop("window_end"))
    means = tuple((k, float(pop(f"mean_{k}"))) for k in MEAN_KEYS)
    freqs = []
    for block, size in FREQ_BLOCKS.items():
        values = tuple(float(v) for v in pop(f"freq_{block}").split())
        if len(values) != size:
            raise DataError(f"{source}: freq_{block} needs {size} values")
        freqs.append((block, values))
    missing = float(fields.pop("missing_hours_rate", "0"))
    if fields:
        raise DataError(f"{source}: unknown keys {sorted(fields)}")
    if cohort_size < 1:
        raise DataError(f"{source}: cohort_size must be >= 1")
    spec = MarginalSpec(region, cohort_size, seed, window_start, window_end,
                        means, tuple(freqs), missing)
    for block in FREQ_BLOCKS:
        spec.freq(block)
    return spec


def load_spec(path) -> MarginalSpec:
    with open(path) as fh:
        return parse_spec(fh.read(), str(path))


def bundled_spec(region: str) -> MarginalSpec:
    resource = importlib.resources.files("regsom").joinpath(
        "data", f"{region}.spec")
    try:
        text = resource.read_text()
    except FileNotFoundError:
        raise DataError(f"no bundled spec for region {region!r}") from None
    return parse_spec(text, f"bundled:{region}")


# --------------------------------------------------------------------------
# truncated distributions (closed-form means, inverse-cdf sampling)
# --------------------------------------------------------------------------

def _tnorm_mean(center, sigma, lo, hi):
    a, b = (lo - center) / sigma, (hi - center) / sigma
    den = ndtr(b) - ndtr(a)
    if den < 1e-300:  # all mass beyond one boundary
        return lo if center < lo else hi
    phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
    return center + sigma * (phi(a) - phi(b)) / den


def _tnorm_sample(rng, center, sigma, lo, hi, size=None):
    a, b = ndtr((lo - center) / sigma), ndtr((hi - center) / sigma)
    u = rng.random(size) if size is not None else rng.random()
    q = np.clip(a + u * (b - a), 1e-16, 1 - 1e-16)
    return np.clip(center + sigma * ndtri(q), lo + 1e-12 * (hi - lo), hi)


def _tlognorm_mean(mu, sigma, lo, hi):
    a, b = (math.log(lo) - mu) / sigma, (math.log(hi) - mu) / sigma
    num = ndtr(b - sigma) - ndtr(a - sigma)
    den = ndtr(b) - ndtr(a)
    if den < 1e-300 or num < 1e-300:  # all mass beyond one boundary
        return lo if mu < math.log(lo) else hi
    return math.exp(mu + sigma * sigma / 2) * num / den


def _tlognorm_sample(rng, mu, sigma, lo, hi, size=None):
    a, b = ndtr((math.log(lo) - mu) / sigma), ndtr((math.log(hi) - mu) / sigma)
    u = rng.random(size) if size is not None else rng.random()
    q = np.clip(a + u * (b - a), 1e-16, 1 - 1e-16)
    return np.clip(np.exp(mu + sigma * ndtri(q)), lo * (1 + 1e-12), hi)


def _solve_tnorm_center(target, sigma, lo, hi, name):
    if not lo < target < hi:
        raise InfeasibleSpecError(
            f"{name}: required bracket mean {target:.4g} outside ({lo}, {hi})")
    a, b = lo - 15 * sigma, hi + 8 * sigma
    target = min(max(target, _tnorm_mean(a, sigma, lo, hi) + 1e-9),
                 _tnorm_mean(b, sigma, lo, hi) - 1e-9)
    return brentq(lambda c: _tnorm_mean(c, sigma, lo, hi) - target,
                  a, b, xtol=1e-10)


def _solve_tlognorm_mu(target, sigma, lo, hi, name):
    if not lo < target < hi:
        raise InfeasibleSpecError(
            f"{name}: required bracket mean {target:.4g} outside ({lo}, {hi})")
    return brentq(lambda m: _tlognorm_mean(m, sigma, lo, hi) - target,
                  math.log(lo) - 8, math.log(hi) + 8, xtol=1e-10)


@dataclass
class _Bracket:
    lo: float
    hi: float
    kind: str      # "norm" | "lognorm"
    sigma: float
    param: float   # center (norm) or mu (lognorm)

    def mean(self):
        if self.kind == "norm":
            return _tnorm_mean(self.param, self.sigma, self.lo, self.hi)
        return _tlognorm_mean(self.param, self.sigma, self.lo, self.hi)

    def sample(self, rng, size=None):
        if self.kind == "norm":
            return _tnorm_sample(rng, self.param, self.sigma, self.lo, self.hi,
                                 size)
        return _tlognorm_sample(rng, self.param, self.sigma, self.lo, self.hi,
                                size)


# --------------------------------------------------------------------------
# generator plan
# --------------------------------------------------------------------------

@dataclass
class _Plan:
    spec: MarginalSpec
    periods_p: np.ndarray          # P(1), P(2), P(>2)
    p_four: float                  # P(n=4 | n>2)
    duration_br: list[_Bracket]    # latest-duration months, 3 brackets
    duration_p: np.ndarray
    extra_br: _Bracket             # earlier-period months
    age_br: list[_Bracket]
    age_p: np.ndarray
    seniority_br: _Bracket
    p_casual: float
    q_latest_zero: float
    share_br: list[_Bracket]       # positive share brackets
    share_p: np.ndarray            # conditional on casual, calibrated
    spells_p: np.ndarray           # P(v in (0,1]), P(v > 1) | casual
    hours_br: list[_Bracket]       # positive hour brackets
    hours_p: np.ndarray            # conditional on nonzero latest hours
    wage_mu: float
    wage_sigma: float
    offers_a: float
    offers_b: float


_SHARE_EDGES = (0.1, 0.3)


def _share_k_range(bracket: int, m_cum: float, capacity: int):
    """Integer casual-month counts whose share falls in the bracket."""
    lo = (0.0, 0.1, 0.3)[bracket]
    hi = (0.1, 0.3, None)[bracket]
    k_lo = max(1, math.floor(lo * m_cum) + 1)
    k_hi = capacity if hi is None else min(capacity, math.floor(hi * m_cum))
    return k_lo, k_hi


def _capacity(months: float) -> int:
    return max(1, math.floor(months))


@functools.lru_cache(maxsize=8)
def build_plan(spec: MarginalSpec) -> _Plan:
    f = spec.freq

    # recurrence: n in {1, 2} or {3, 4}, P(4|>2) solved from the mean
    periods_p = f("periods")
    p1, p2, p3 = periods_p
    x = (spec.mean("periods") - (p1 + 2 * p2 + 3 * p3)) / p3
    if not -1e-9 <= x <= 1:
        raise InfeasibleSpecError(
            f"number of periods: mean {spec.mean('periods')} unreachable "
            f"from the recurrence frequencies")
    mean_n = p1 + 2 * p2 + p3 * (3 + max(x, 0.0))

    # latest duration (months): fixed shapes below 12 months, the open
    # bracket's mean solved from the overall target
    dur_p = f("latest_duration")
    target_m = spec.mean("latest_duration_days") / DAYS_PER_MONTH
    b1 = _Bracket(0.5 + _EDGE, 6 - _EDGE, "lognorm", 0.55, math.log(3.2))
    b2 = _Bracket(6 + _EDGE, 12 - _EDGE, "lognorm", 0.35, math.log(8.5))
    m3 = (target_m - dur_p[0] * b1.mean() - dur_p[1] * b2.mean()) / dur_p[2]
    b3 = _Bracket(12 + _EDGE, 72.0, "lognorm", 0.55, 0.0)
    b3.param = _solve_tlognorm_mu(m3, b3.sigma, b3.lo, b3.hi, "latest duration")
    duration_br = [b1, b2, b3]

    # earlier-period durations
    extra_target = ((spec.mean("cumulated_duration_days")
                     - spec.mean("latest_duration_days")) / DAYS_PER_MONTH
                    / max(mean_n - 1.0, 1e-9))
    extra_br = _Bracket(0.5 + _EDGE, 48.0, "lognorm", 0.55, 0.0)
    extra_br.param = _solve_tlognorm_mu(extra_target, extra_br.sigma,
                                        extra_br.lo, extra_br.hi,
                                        "cumulated duration")

    # age: the two upper brackets are fixed, the young bracket's mean solved
    age_p = f("age")
    a2 = _Bracket(35.0, 55.0, "norm", 5.5, 43.5)
    a3 = _Bracket(55.0, 72.0, "norm", 3.0, 57.5)
    a1_mean = (spec.mean("age") - age_p[1] * a2.mean()
               - age_p[2] * a3.mean()) / age_p[0]
    a1 = _Bracket(16.0, 35.0, "norm", 5.5, 0.0)
    a1.param = _solve_tnorm_center(a1_mean, a1.sigma, a1.lo, a1.hi, "age")
    age_br = [a1, a2, a3]

    seniority_br = _Bracket(0.02, 40.0, "lognorm", 0.95, 0.0)
    seniority_br.param = _solve_tlognorm_mu(
        spec.mean("seniority_years"), seniority_br.sigma, seniority_br.lo,
        seniority_br.hi, "seniority")

    # casual-work zero structure
    share_p_full = f("share")
    spells_p_full = f("spells_per_period")
    hours_p_full = f("hours")
    if abs(share_p_full[0] - spells_p_full[0]) > 0.01:
        raise InfeasibleSpecError(
            "casual-work share and spells-per-period blocks disagree on the "
            "no-casual-work share")
    p_casual = 1.0 - share_p_full[0]
    gap = hours_p_full[0] - share_p_full[0]
    if gap < -0.005:
        raise InfeasibleSpecError(
            "monthly hours: zero share below the no-casual-work share")
    p_multi = p2 + p3
    q = max(gap, 0.0) / max(p_casual * p_multi, 1e-12)
    if q > 1 + 1e-9:
        raise InfeasibleSpecError(
            "monthly hours: zero share unreachable, too few multi-period "
            "individuals")
    q = min(q, 1.0)

    # positive share brackets; the open bracket's mean solved from the
    # overall occasional-share target
    s1 = _Bracket(0.004, 0.1, "norm", 0.03, 0.055)
    s2 = _Bracket(0.1, 0.3, "norm", 0.06, 0.19)
    e3 = (spec.mean("occasional_share") - share_p_full[1] * s1.mean()
          - share_p_full[2] * s2.mean()) / share_p_full[3]
    s3 = _Bracket(0.3, 1.0, "norm", 0.16, 0.0)
    s3.param = _solve_tnorm_center(e3, s3.sigma, s3.lo, s3.hi,
                                   "occasional share")
    share_br = [s1, s2, s3]
    share_p = share_p_full[1:] / p_casual
    spells_p = spells_p_full[1:] / p_casual

    # positive hour brackets conditional on a casual latest spell
    hz = hours_p_full[0]
    hours_p = hours_p_full[1:] / (1.0 - hz)
    h1 = _Bracket(1.0, 39.0, "norm", 11.0, 18.0)
    h2 = _Bracket(39.0, 78.0, "norm", 12.0, 58.5)
    h3 = _Bracket(78.0, 117.0, "norm", 12.0, 97.5)
    e4 = (spec.mean("max_hours") - hours_p_full[1] * h1.mean()
          - hours_p_full[2] * h2.mean()
          - hours_p_full[3] * h3.mean()) / hours_p_full[4]
    h4 = _Bracket(117.0, 210.0, "norm", 26.0, 0.0)
    h4.param = _solve_tnorm_center(e4, h4.sigma, h4.lo, h4.hi, "monthly hours")
    hours_br = [h1, h2, h3, h4]

    wage_sigma = 0.3
    rate = spec.mean("max_wage") / spec.mean("max_hours")
    wage_mu = math.log(rate) - wage_sigma ** 2 / 2

    plan = _Plan(spec, periods_p, max(x, 0.0), duration_br, dur_p, extra_br,
                 age_br, age_p, seniority_br, p_casual, q, share_br, share_p,
                 spells_p, hours_br, hours_p, wage_mu, wage_sigma, 0.0, 0.0)
    _calibrate(plan)
    return plan


def _sample_periods(rng, plan, size):
    u = rng.random(size)
    p1, p2, _ = plan.periods_p
    n = np.where(u < p1, 1, np.where(u < p1 + p2, 2, 3)).astype(np.int64)
    four = rng.random(size) < plan.p_four
    n[(n == 3) & four] = 4
    return n


def _sample_bracketed_days(rng, brackets, probs, size):
    u = rng.random(size)
    edges = np.cumsum(probs)
    which = np.searchsorted(edges, u, side="right").clip(0, len(brackets) - 1)
    months = np.empty(size)
    for b, br in enumerate(brackets):
        mask = which == b
        if mask.any():
            months[mask] = br.sample(rng, size=int(mask.sum()))
    return np.maximum(np.rint(months * DAYS_PER_MONTH), 16).astype(np.int64)


def _calibrate(plan: _Plan, K: int = 30000, iterations: int = 8) -> None:
    """Deterministically tune the casual-work block against feasibility
    coupling, and fit the job-offer intensity, on an internal sample."""
    spec = plan.spec
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(spec.seed, spawn_key=(0,))))
    n = _sample_periods(rng, plan, K)
    latest_days = _sample_bracketed_days(rng, plan.duration_br,
                                         plan.duration_p, K)
    total_extra = int((n - 1).sum())
    extras = np.maximum(np.rint(plan.extra_br.sample(rng, size=total_extra)
                                * DAYS_PER_MONTH), 16).astype(np.int64)
    splits = np.cumsum(n - 1)[:-1]
    extra_days = np.array([c.sum() for c in np.split(extras, splits)])
    extra_caps = np.array([int(sum(_capacity(d / DAYS_PER_MONTH) for d in c))
                           for c in np.split(extras, splits)])
    m_cum = (latest_days + extra_days) / DAYS_PER_MONTH
    cap_latest = np.array([_capacity(d / DAYS_PER_MONTH) for d in latest_days])

    casual = rng.random(K) < plan.p_casual
    latest_zero = casual & (n >= 2) & (rng.random(K) < plan.q_latest_zero)
    capacity = np.where(latest_zero, extra_caps, cap_latest + extra_caps)

    share_targets = spec.freq("share")[1:] / plan.p_casual
    spells_targets = spec.freq("spells_per_period")[1:] / plan.p_casual
    mean_share_target = spec.mean("occasional_share")

    idx = np.flatnonzero(casual)
    u_bracket = rng.random(len(idx))
    u_spells = rng.random(len(idx))
    for it in range(iterations):
        vrng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(spec.seed, spawn_key=(0, 100 + it))))
        chosen = np.zeros(len(idx), dtype=np.int64)
        M = np.zeros(len(idx), dtype=np.int64)
        for j, i in enumerate(idx):
            ranges = [_share_k_range(b, m_cum[i], capacity[i])
                      for b in range(3)]
            weights = np.array([plan.share_p[b] if lo <= hi else 0.0
                                for b, (lo, hi) in enumerate(ranges)])
            weights /= weights.sum()
            b = int(np.searchsorted(np.cumsum(weights), u_bracket[j],
                                    side="right").clip(0, 2))
            s = float(plan.share_br[b].sample(vrng))
            k_lo, k_hi = ranges[b]
            M[j] = min(max(int(round(s * m_cum[i])), k_lo), k_hi)
            chosen[j] = b
        # reweight bracket probabilities toward the conditional targets
        freq = np.bincount(chosen, minlength=3) / len(idx)
        plan.share_p = plan.share_p * (share_targets / np.maximum(freq, 1e-9))
        plan.share_p /= plan.share_p.sum()
        # retarget the open bracket so the cohort mean share lands; the
        # realized top-bracket mass is the local derivative
        realized_mean = (M / m_cum[idx]).sum() / K
        mass3 = max(freq[2] * plan.p_casual, 1e-6)
        e3 = plan.share_br[2].mean() + 0.8 * (mean_share_target
                                              - realized_mean) / mass3
        plan.share_br[2].param = _solve_tnorm_center(
            min(max(e3, 0.305), 0.99), plan.share_br[2].sigma,
            plan.share_br[2].lo, plan.share_br[2].hi, "occasional share")
        # spells bracket: v > 1 needs at least n+1 casual months
        feas2 = M >= n[idx] + 1
        w2 = plan.spells_p[1] * feas2
        pick2 = u_spells < w2 / (plan.spells_p[0] + w2)
        freq2 = np.array([1 - pick2.mean(), pick2.mean()])
        plan.spells_p = plan.spells_p * (spells_targets
                                         / np.maximum(freq2, 1e-9))
        plan.spells_p /= plan.spells_p.sum()

    # job offers: lambda = max(0, a + b * months), Newton on the sample
    t_count = spec.mean("job_offers")
    t_rate = spec.mean("offers_per_month")
    a, b = t_count, 0.0
    for _ in range(12):
        lam = np.maximum(a + b * m_cum, 0.0)
        active = lam > 0
        f = np.array([lam.mean() - t_count, (lam / m_cum).mean() - t_rate])
        J = np.array([[active.mean(), (m_cum * active).mean()],
                      [(active / m_cum).mean(), active.mean()]])
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            break
        a, b = a - 0.9 * step[0], b - 0.9 * step[1]
    lam = np.maximum(a + b * m_cum, 0.0)
    if (abs(lam.mean() - t_count) > 0.03 * max(t_count, 1e-9)
            or abs((lam / m_cum).mean() - t_rate) > 0.03 * max(t_rate, 1e-9)):
        raise InfeasibleSpecError(
            "job offers: count and per-month targets jointly unreachable")
    plan.offers_a, plan.offers_b = float(a), float(b)


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------

def generate(spec: MarginalSpec) -> list[RegistrationRecord]:
    """Generate the cohort's registration records, deterministically."""
    plan = build_plan(spec)
    records: list[RegistrationRecord] = []
    digits = max(6, len(str(spec.cohort_size)))
    for i in range(spec.cohort_size):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(spec.seed, spawn_key=(1, i))))
        pid = f"{spec.region}{i:0{digits}d}"
        records.extend(_generate_individual(plan, rng, pid))
    return records


def _pick(rng, probs) -> int:
    return int(np.searchsorted(np.cumsum(probs), rng.random(),
                               side="right").clip(0, len(probs) - 1))


def _generate_individual(plan: _Plan, rng, pid: str) -> list[RegistrationRecord]:
    spec = plan.spec

    # spell structure
    n = 1 if (u := rng.random()) < plan.periods_p[0] else \
        2 if u < plan.periods_p[0] + plan.periods_p[1] else \
        (4 if rng.random() < plan.p_four else 3)
    db = _pick(rng, plan.duration_p)
    latest_days = int(max(np.rint(plan.duration_br[db].sample(rng)
                                  * DAYS_PER_MONTH), 16))
    extra_days = [int(max(np.rint(plan.extra_br.sample(rng) * DAYS_PER_MONTH),
                          16)) for _ in range(n - 1)]
    all_days = extra_days + [latest_days]  # chronological
    months = [d / DAYS_PER_MONTH for d in all_days]
    m_cum = sum(months)

    # casual work
    casual = rng.random() < plan.p_casual
    alloc = [0] * n
    spell_counts = [0] * n
    levels = [0.0] * n
    wage_rate = 0.0
    if casual:
        latest_zero = n >= 2 and rng.random() < plan.q_latest_zero
        caps = [_capacity(m) for m in months]
        capacity = sum(caps) - (caps[-1] if latest_zero else 0)
        ranges = [_share_k_range(b, m_cum, capacity) for b in range(3)]
        weights = np.array([plan.share_p[b] if lo <= hi else 0.0
                            for b, (lo, hi) in enumerate(ranges)])
        weights /= weights.sum()
        b = _pick(rng, weights)
        s = float(plan.share_br[b].sample(rng))
        k_lo, k_hi = ranges[b]
        M = min(max(int(round(s * m_cum)), k_lo), k_hi)

        # allocate casual months: latest spell first unless it must stay
        # clean, then backwards through earlier spells
        order = ([n - 1] if not latest_zero else []) + list(range(n - 2, -1, -1))
        left = M
        for r in order:
            if left == 0:
                break
            take = min(left, caps[r])
            alloc[r] = take
            left -= take
        n_casual_periods = sum(1 for a in alloc if a > 0)

        feas_gt1 = M >= n + 1
        w2 = plan.spells_p[1] if feas_gt1 else 0.0
        if rng.random() < w2 / (plan.spells_p[0] + w2):
            spells = int(rng.integers(n + 1, M + 1))
        else:
            spells = int(rng.integers(n_casual_periods, min(n, M) + 1)) \
                if min(n, M) > n_casual_periods else n_casual_periods
        # distribute spells: one per casual spell-period, extras round-robin
        for r in range(n):
            spell_counts[r] = 1 if alloc[r] > 0 else 0
        left = spells - n_casual_periods
        while left > 0:
            progressed = False
            for r in sorted(range(n), key=lambda r: -alloc[r]):
                if left > 0 and 0 < spell_counts[r] < alloc[r]:
                    spell_counts[r] += 1
                    left -= 1
                    progressed = True
            if not progressed:
                break

        for r in range(n):
            if alloc[r] > 0:
                hb = _pick(rng, plan.hours_p)
                levels[r] = float(plan.hours_br[hb].sample(rng))
        wage_rate = math.exp(plan.wage_mu
                             + plan.wage_sigma * rng.standard_normal())

    # job offers, split over spells by duration
    lam = max(plan.offers_a + plan.offers_b * m_cum, 0.0)
    offers_total = int(rng.poisson(lam))
    shares = np.array(all_days) / sum(all_days)
    offer_split = rng.multinomial(offers_total, shares)

    # person-level attributes
    ab = _pick(rng, plan.age_p)
    age = float(plan.age_br[ab].sample(rng))
    seniority = float(plan.seniority_br.sample(rng))
    children = 0 if rng.random() < spec.freq("children")[0] else \
        1 + int(rng.integers(0, 3))
    education = _EDUCATION_ORDER[_pick(rng, spec.freq("education"))]
    group = _SKILL_GROUPS[_pick(rng, spec.freq("skill_group"))]
    skill = group[int(rng.integers(0, len(group)))]
    reason = _REASON_ORDER[_pick(rng, spec.freq("reason"))]
    exit_type = _EXIT_ORDER[_pick(rng, spec.freq("exit"))]

    # dates, built backwards from the latest exit
    window_days = (spec.window_end - spec.window_start).days
    exit_latest = spec.window_start + timedelta(
        days=30 + int(rng.integers(0, window_days - 29)))
    entries = [None] * n
    exits = [None] * n
    exits[n - 1] = exit_latest
    entries[n - 1] = exit_latest - timedelta(days=all_days[n - 1])
    for r in range(n - 2, -1, -1):
        gap = 15 + int(rng.integers(0, 90))
        exits[r] = entries[r + 1] - timedelta(days=gap)
        entries[r] = exits[r] - timedelta(days=all_days[r])

    records = []
    for r in range(n):
        observations = []
        if alloc[r] > 0:
            base, rem = divmod(alloc[r], spell_counts[r])
            for s_idx in range(1, spell_counts[r] + 1):
                length = base + (1 if s_idx <= rem else 0)
                for _ in range(length):
                    hours = levels[r]
                    if spec.missing_hours_rate > 0 and \
                            rng.random() < spec.missing_hours_rate:
                        hours = None
                    observations.append(MonthObservation(
                        hours=hours, wage=wage_rate * levels[r], spell=s_idx))
        if alloc[r] > 0:
            hour_range = "le78" if levels[r] <= 78 else "gt78"
        else:
            hour_range = "unknown"
        records.append(RegistrationRecord(
            person_id=pid,
            region=spec.region,
            entry_date=entries[r],
            exit_date=exits[r],
            reason=reason,
            exit_type=exit_type,
            seniority=round(seniority, 2),
            age=round(age, 2),
            education=education,
            skill=skill,
            children=children,
            offers=int(offer_split[r]),
            hour_range=hour_range,
            occasional=tuple(observations),
        ))
    return records


# --------------------------------------------------------------------------
# calibration report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    name: str
    target: float
    observed: float
    tolerance: float
    ok: bool
    informational: bool = False


@dataclass(frozen=True)
class CalibrationReport:
    rows: tuple[ReportRow, ...]
    n: int
    note: str = ""

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows if not r.informational)

    def format_text(self) -> str:
        lines = [f"calibration report over {self.n} individuals"]
        if self.note:
            lines.append(f"note: {self.note}")
        lines.append(f"{'marginal':<42} {'target':>9} {'observed':>9} "
                     f"{'tol':>7} status")
        for r in self.rows:
            status = "info" if r.informational else ("ok" if r.ok else "FLAG")
            lines.append(f"{r.name:<42} {r.target:>9.3f} {r.observed:>9.3f} "
                         f"{r.tolerance:>7.3f} {status}")
        return "\n".join(lines) + "\n"


_BLOCK_LABELS = {
    "latest_duration": ("lt6m", "6to12m", "gt12m"),
    "periods": ("p1", "p2", "pgt2"),
    "age": ("lt35", "35to55", "gt55"),
    "skill_group": ("sup", "clerks", "indus"),
    "education": _EDUCATION_ORDER,
    "reason": _REASON_ORDER,
    "exit": _EXIT_ORDER,
    "hours": ("h0", "h0to39", "h39to78", "h78to117", "hgt117"),
    "spells_per_period": ("v0", "v0to1", "vgt1"),
    "share": ("s0", "s0to01", "s01to03", "sgt03"),
    "children": ("none", "some"),
}


def validate(records: list[RegistrationRecord],
             spec: MarginalSpec) -> CalibrationReport:
    """Measure the cohort's marginals against the spec targets.

    Categorical marginals carry a +-1.5-point tolerance at N >= 10,000,
    widened as sqrt(10000/N) below that; means carry +-5% relative.
    """
    if any(m.hours is None for r in records for m in r.occasional):
        class_means = compute_class_means(records)
        records = [impute_hours(r, class_means)[0] for r in records]
    individuals = collate(records, spec.window_end)
    features = [build_features(ind) for ind in individuals]
    N = len(individuals)
    tol_pts = 1.5 * max(1.0, math.sqrt(10000.0 / max(N, 1)))
    note = ("degenerate cohort size, tolerances not meaningful"
            if N < 30 else "")

    def observed(block):
        if block == "latest_duration":
            return [bracket_code(ind.latest_duration_days / DAYS_PER_MONTH,
                                 ("a", "b", "c"), (6.0, 12.0))
                    for ind in individuals]
        if block == "periods":
            return [("a" if ind.n_periods == 1 else
                     "b" if ind.n_periods == 2 else "c")
                    for ind in individuals]
        if block == "age":
            return [bracket_code(ind.age, ("a", "b", "c"), (35.0, 55.0))
                    for ind in individuals]
        if block == "skill_group":
            group_of = {s: "abc"[g] for g, skills in enumerate(_SKILL_GROUPS)
                        for s in skills}
            return [group_of[ind.skill] for ind in individuals]
        if block == "education":
            order = {e: "abcdef"[i] for i, e in enumerate(_EDUCATION_ORDER)}
            return [order[ind.education] for ind in individuals]
        if block == "reason":
            order = {e: "abcde"[i] for i, e in enumerate(_REASON_ORDER)}
            return [order[ind.reason] for ind in individuals]
        if block == "exit":
            order = {e: "abcdef"[i] for i, e in enumerate(_EXIT_ORDER)}
            return [order[ind.exit_type] for ind in individuals]
        if block == "hours":
            return [bracket_code(ind.max_monthly_hours,
                                 ("b", "c", "d", "e"), (39.0, 78.0, 117.0),
                                 zero_code="a") for ind in individuals]
        if block == "spells_per_period":
            return [bracket_code(ft.occasional_spells_per_period,
                                 ("b", "c"), (1.0,), zero_code="a")
                    for ft in features]
        if block == "share":
            return [bracket_code(ft.occasional_months_per_unemp_month,
                                 ("b", "c", "d"), (0.1, 0.3), zero_code="a")
                    for ft in features]
        if block == "children":
            return [("a" if ind.children == 0 else "b") for ind in individuals]
        raise AssertionError(block)

    rows = []
    for block in FREQ_BLOCKS:
        targets = spec.freq(block) * 100.0
        codes = observed(block)
        letters = [chr(ord("a") + i) for i in range(len(targets))]
        for letter, label, target in zip(letters, _BLOCK_LABELS[block],
                                         targets):
            got = 100.0 * sum(1 for c in codes if c == letter) / N
            rows.append(ReportRow(f"freq {block}/{label}", target, got,
                                  tol_pts, abs(got - target) <= tol_pts))

    mean_sources = {
        "latest_duration_days": lambda: np.mean(
            [i.latest_duration_days for i in individuals]),
        "cumulated_duration_days": lambda: np.mean(
            [i.cumulated_duration_days for i in individuals]),
        "periods": lambda: np.mean([i.n_periods for i in individuals]),
        "job_offers": lambda: np.mean([i.total_job_offers
                                       for i in individuals]),
        "occasional_share": lambda: np.mean(
            [f.occasional_months_per_unemp_month for f in features]),
        "occasional_spells_per_year": lambda: np.mean(
            [f.occasional_spells_per_year for f in features]),
        "offers_per_month": lambda: np.mean([f.offers_per_month
                                             for f in features]),
        "max_wage": lambda: np.mean([i.max_monthly_wage for i in individuals]),
        "max_hours": lambda: np.mean([i.max_monthly_hours
                                      for i in individuals]),
        "age": lambda: np.mean([i.age for i in individuals]),
        "seniority_years": lambda: np.mean([i.seniority for i in individuals]),
    }
    rel_tol = 0.05 * max(1.0, math.sqrt(10000.0 / max(N, 1)))
    for key in MEAN_KEYS:
        target = spec.mean(key)
        got = float(mean_sources[key]())
        info = key in INFORMATIONAL_MEANS
        ok = abs(got - target) <= rel_tol * abs(target) if target else True
        rows.append(ReportRow(f"mean {key}", target, got,
                              rel_tol * abs(target), ok or info, info))
    return CalibrationReport(tuple(rows), N, note)
