"""Equilibrium structure of the unified seller game: threshold commissions,
the equilibrium-cycle box, Nash verification by exhaustive deviation scans,
and sampled probes of the cycle's stability, unrest and minimality.

Continuum claims are approximated on deviation grids augmented with the
structural candidate points the theory singles out (just above/below each
opponent's ranking statistic and the box boundaries); seller utilities are
piecewise smooth in the own commission with breakpoints exactly there.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import MarketInstance, as_profile, eta, gamma_tilde
from .sellers import candidate_commissions, unified_utility_candidates

# Improvements below this slack do not count as violations.  The slack also
# lets zero-utility ties pass the strict stability comparison: an off-menu
# seller pinned at its strength factor earns exactly zero, the theoretical
# maximum, and outside deviations that also earn zero are not an escape.
STRICT_SLACK = 1e-9

_BOUNDARY_EPS = 1e-12


def eta_hypothesis_warnings(instance: MarketInstance) -> list[str]:
    """Violations of the unequal-sellers hypothesis (strictly decreasing,
    positive strength factors).  Warnings only; callers keep computing."""
    et = eta(instance)
    warnings = []
    if not all(et[i] > et[i + 1] for i in range(len(et) - 1)):
        warnings.append("eta values are not strictly decreasing in seller order")
    if et[-1] <= 0:
        warnings.append(f"eta_N = {et[-1]:.6g} is not positive")
    return warnings


def thresholds_eta_tilde(instance: MarketInstance) -> np.ndarray:
    """Threshold commissions, entry k-1 holding the threshold of seller k
    (1-based), k = 1..M+1.

    Above its threshold a top-M seller is better off near the threat point
    eta_{M+1} even if the high commission wins it the first slot.  Dedicated
    expressions cover sellers M and M-1, a closed general line covers lower
    indices, and the first threshold is pinned to the second.
    """
    m, n = instance.menu_size, instance.n_sellers
    if m < 2:
        raise ValueError("thresholds require a menu of at least two positions")
    if m >= n:
        raise ValueError("thresholds require at least one excluded seller (M < N)")
    gt = gamma_tilde(instance)
    et = eta(instance)
    tl = np.empty(m + 1)
    tl[m] = et[m]
    tl[m - 1] = et[m - 1] - (et[m - 1] - et[m]) * gt ** (m - 1)
    if m >= 3:
        tl[m - 2] = max(
            et[m - 2] - (et[m - 2] - tl[m - 1]) * gt ** (m - 2),
            et[m - 2] - (et[m - 2] - tl[m]) * gt ** (m - 1),
        )
    for k in range(m - 2, 1, -1):
        idx = k - 1
        tl[idx] = max(et[idx] - (et[idx] - et[m]) * gt ** (mm - 1) for mm in range(k, m + 1))
    tl[0] = tl[1]
    return tl


def threshold_reading_divergence(instance: MarketInstance) -> list[int]:
    """1-based seller indices where the threshold recursion disagrees with a
    fully-recursive alternative reading.

    The general line anchors every term at eta_{M+1}, while the dedicated
    M-1 expression anchors at the later thresholds; an alternative that
    anchors every line recursively coincides for M <= 3 but can differ for
    M >= 4.  Divergent instances are flagged, not resolved.
    """
    m = instance.menu_size
    gt = gamma_tilde(instance)
    et = eta(instance)
    primary = thresholds_eta_tilde(instance)
    alt = np.empty(m + 1)
    alt[m] = et[m]
    for k in range(m, 1, -1):
        idx = k - 1
        alt[idx] = max(
            et[idx] - (et[idx] - alt[mm]) * gt ** (mm - 1) for mm in range(k, m + 1)
        )
    alt[0] = alt[1]
    return [
        k + 1
        for k in range(m + 1)
        if abs(primary[k] - alt[k]) > 1e-12 * max(1.0, abs(primary[k]))
    ]


@dataclass(frozen=True)
class ECBox:
    """Product set of per-seller strategy components: a closed interval for
    each menu seller, a singleton for each excluded seller."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have equal length")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("every component needs lo <= hi")

    @property
    def n_sellers(self) -> int:
        return len(self.lo)

    def is_interval(self, i: int) -> bool:
        return self.hi[i] - self.lo[i] > 0.0

    def interval_indices(self) -> list[int]:
        return [i for i in range(self.n_sellers) if self.is_interval(i)]

    def contains_value(self, i: int, value: float, slack: float = 0.0) -> bool:
        return self.lo[i] - slack <= value <= self.hi[i] + slack

    def contains(self, profile, slack: float = 0.0) -> bool:
        profile = np.asarray(profile, dtype=float)
        return all(self.contains_value(i, profile[i], slack) for i in range(self.n_sellers))

    def is_strict_subset_of(self, other: "ECBox") -> bool:
        inside = all(
            other.lo[i] <= self.lo[i] and self.hi[i] <= other.hi[i]
            for i in range(self.n_sellers)
        )
        strictly = any(
            self.lo[i] > other.lo[i] or self.hi[i] < other.hi[i]
            for i in range(self.n_sellers)
        )
        return inside and strictly


def ec_box(instance: MarketInstance) -> ECBox:
    """The candidate equilibrium-cycle box: [eta_{M+1}, threshold_i] for each
    menu seller (the first two sharing the second threshold), singletons at
    the strength factors for the excluded sellers."""
    m, n = instance.menu_size, instance.n_sellers
    tl = thresholds_eta_tilde(instance)
    et = eta(instance)
    threat = et[m]
    lo, hi = [], []
    for i in range(n):
        if i < m:
            if tl[i] < threat:
                raise ValueError(
                    f"empty interval for seller {i + 1}: threshold {tl[i]:.6g} "
                    f"below threat point {threat:.6g} (hypothesis failure)"
                )
            lo.append(threat)
            hi.append(float(tl[i]))
        else:
            lo.append(float(et[i]))
            hi.append(float(et[i]))
    return ECBox(tuple(lo), tuple(hi))


def box_shape_warnings(instance: MarketInstance, box: ECBox) -> list[str]:
    """Deviations of a user-supplied box from the theory-prescribed shape."""
    warnings = []
    try:
        reference = ec_box(instance)
    except ValueError as exc:
        return [str(exc)]
    for i in range(box.n_sellers):
        if abs(box.lo[i] - reference.lo[i]) > 1e-12 or abs(box.hi[i] - reference.hi[i]) > 1e-12:
            warnings.append(
                f"component {i + 1} is [{box.lo[i]:.6g}, {box.hi[i]:.6g}], "
                f"theory prescribes [{reference.lo[i]:.6g}, {reference.hi[i]:.6g}]"
            )
    if box.n_sellers >= 2 and abs(box.hi[0] - box.hi[1]) > 1e-12:
        warnings.append("the first two components must share their upper endpoint")
    return warnings


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one sampled or exhaustive property check."""

    property_name: str
    samples: int
    violations: tuple[dict, ...]
    warnings: tuple[str, ...] = ()
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if not self.violations else "fail"

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "property": self.property_name,
            "samples": self.samples,
            "violations": list(self.violations),
            "verdict": self.verdict,
            "warnings": list(self.warnings),
            "details": self.details,
        }


def _deviation_candidates(instance, profile, seller, grid: int, undercut: float) -> np.ndarray:
    base = np.linspace(0.0, 1.0, grid)
    alphas = np.asarray(instance.alpha)
    matches = np.array(
        [profile[j] * alphas[seller] / alphas[j] for j in range(instance.n_sellers) if j != seller]
    )
    extras = np.concatenate([matches + undercut, matches - undercut])
    return np.unique(np.clip(np.concatenate([base, extras]), 0.0, 1.0))


def verify_nash(
    instance: MarketInstance,
    profile,
    grid: int = 1001,
    undercut: float = 1e-3,
    tol: float = STRICT_SLACK,
) -> VerificationReport:
    """Exhaustive unilateral-deviation scan: the profile passes when no grid
    or structural deviation improves any seller by more than `tol`."""
    profile = as_profile(profile, instance.n_sellers)
    violations = []
    for i in range(instance.n_sellers):
        cand = _deviation_candidates(instance, profile, i, grid, undercut)
        utils = unified_utility_candidates(instance, profile, i, cand)
        current = unified_utility_candidates(instance, profile, i, [profile[i]])[0]
        k = int(np.argmax(utils))
        gain = float(utils[k] - current)
        if gain > tol:
            violations.append(
                {"seller": i + 1, "deviation": float(cand[k]), "gain": gain}
            )
    return VerificationReport(
        "nash", grid, tuple(violations), tuple(eta_hypothesis_warnings(instance))
    )


def verify_eps_nash(
    instance: MarketInstance,
    profile,
    epsilon: float,
    grid: int = 1001,
    undercut: float = 1e-3,
) -> VerificationReport:
    """As verify_nash but improvements up to `epsilon` are tolerated."""
    report = verify_nash(instance, profile, grid, undercut, tol=epsilon)
    return replace(report, property_name="eps-nash", details={"epsilon": epsilon})


def _inside_candidates(box: ECBox, i: int, profile, instance, grid_step, undercut) -> np.ndarray:
    lo, hi = box.lo[i], box.hi[i]
    if hi - lo <= 0:
        return np.array([lo])
    count = max(2, int(round((hi - lo) / grid_step)) + 1)
    base = np.linspace(lo, hi, count)
    alphas = np.asarray(instance.alpha)
    matches = np.array(
        [profile[j] * alphas[i] / alphas[j] for j in range(instance.n_sellers) if j != i]
    )
    extras = np.concatenate([matches + undercut, matches - undercut])
    extras = extras[(extras >= lo) & (extras <= hi)]
    return np.unique(np.concatenate([base, extras, [lo, hi]]))


def _outside_candidates(box: ECBox, i: int, profile, instance, grid_step, undercut) -> np.ndarray:
    lo, hi = box.lo[i], box.hi[i]
    base = np.linspace(0.0, 1.0, round(1.0 / grid_step) + 1)
    alphas = np.asarray(instance.alpha)
    matches = np.array(
        [profile[j] * alphas[i] / alphas[j] for j in range(instance.n_sellers) if j != i]
    )
    extras = np.concatenate([matches + undercut, matches - undercut, [lo - undercut, hi + undercut]])
    cand = np.clip(np.concatenate([base, extras]), 0.0, 1.0)
    outside = cand[(cand < lo - _BOUNDARY_EPS) | (cand > hi + _BOUNDARY_EPS)]
    return np.unique(outside)


def _opponent_rows(box: ECBox, samples: int, rng) -> np.ndarray:
    """Uniform draws from the box (the probed seller's column is overwritten)."""
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    return lo + rng.random((samples, box.n_sellers)) * (hi - lo)


def _boundary_probe_rows(box: ECBox, i: int, undercut: float) -> np.ndarray:
    """Adversarial opponent profiles: everyone clustered at a component
    endpoint.  Saturated clips step one undercut inside so that no opponent
    sits exactly on its own upper endpoint (the measure-zero exception set).
    """
    levels: list[float] = []
    for k in box.interval_indices():
        levels.extend([box.lo[k], box.hi[k], box.hi[k] + undercut])
    rows = []
    for level in sorted(set(levels)):
        row = []
        for j in range(box.n_sellers):
            lo, hi = box.lo[j], box.hi[j]
            val = min(max(level, lo), hi)
            if box.is_interval(j) and val >= hi:
                val = max(lo, hi - undercut)
            row.append(val)
        rows.append(row)
    return np.asarray(rows)


def check_stability(
    instance: MarketInstance,
    box: ECBox,
    samples: int,
    rng_seed: int,
    grid_step: float = 1e-3,
    undercut: float = 1e-3,
    boundary_probes: bool = True,
) -> VerificationReport:
    """Sampled stability probe: for every seller and every sampled in-box
    opponent profile, some in-component commission must beat every outside
    deviation (up to STRICT_SLACK).

    Opponent draws are uniform on the interval components and pinned on the
    singletons; draws never hit the measure-zero exception set.  Structured
    boundary profiles cluster all opponents at component endpoints and catch
    escapes that uniform sampling would need astronomically many samples to
    find.
    """
    rng = np.random.default_rng(rng_seed)
    violations = []
    for i in range(instance.n_sellers):
        rows = _opponent_rows(box, samples, rng)
        if boundary_probes:
            rows = np.vstack([rows, _boundary_probe_rows(box, i, undercut)])
        for r, row in enumerate(rows):
            profile = row.copy()
            profile[i] = box.lo[i]
            inside = _inside_candidates(box, i, profile, instance, grid_step, undercut)
            outside = _outside_candidates(box, i, profile, instance, grid_step, undercut)
            u_in = unified_utility_candidates(instance, profile, i, inside)
            u_out = unified_utility_candidates(instance, profile, i, outside)
            if u_out.max() > u_in.max() + STRICT_SLACK:
                k = int(np.argmax(u_out))
                violations.append(
                    {
                        "seller": i + 1,
                        "sample": int(r),
                        "opponents": [float(v) for j, v in enumerate(row) if j != i],
                        "best_inside": float(u_in.max()),
                        "best_outside": float(u_out.max()),
                        "witness": float(outside[k]),
                    }
                )
    return VerificationReport("stability", samples, tuple(violations))


def check_unrest(
    instance: MarketInstance,
    box: ECBox,
    samples: int,
    rng_seed: int,
    grid_step: float = 1e-3,
    undercut: float = 1e-3,
) -> VerificationReport:
    """Sampled unrest probe: every sampled in-box profile must admit a seller
    with a strictly improving in-component move that also beats all outside
    deviations."""
    rng = np.random.default_rng(rng_seed)
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    profiles = lo + rng.random((samples, box.n_sellers)) * (hi - lo)
    violations = []
    for r in range(samples):
        profile = profiles[r]
        if not _has_internal_move(instance, box, profile, grid_step, undercut):
            violations.append({"sample": int(r), "profile": [float(v) for v in profile]})
    return VerificationReport("unrest", samples, tuple(violations))


def _has_internal_move(instance, box, profile, grid_step, undercut) -> bool:
    for i in box.interval_indices():
        inside = _inside_candidates(box, i, profile, instance, grid_step, undercut)
        outside = _outside_candidates(box, i, profile, instance, grid_step, undercut)
        u_in = unified_utility_candidates(instance, profile, i, inside)
        u_out = unified_utility_candidates(instance, profile, i, outside)
        current = unified_utility_candidates(instance, profile, i, [profile[i]])[0]
        best = u_in.max()
        if best > current and best > u_out.max():
            return True
    return False


def search_external_tail(
    instance: MarketInstance,
    box: ECBox,
    start,
    epsilon: float,
    max_depth: int,
    grid_step: float = 1e-3,
    undercut: float = 1e-3,
    node_budget: int = 20000,
) -> list[dict] | None:
    """Bounded search for an external tail: a chain of epsilon-best strict
    improvements leaving the box with one additional coordinate outside per
    hop.  Returns the longest chain found (as move records) or None when the
    start admits no external hop at all.

    Each hop must (a) strictly improve the mover, (b) be within epsilon of
    the mover's best candidate, (c) land outside the mover's component while
    the mover was still inside.
    """
    profile = as_profile(start, instance.n_sellers)
    if not box.contains(profile, slack=1e-12):
        raise ValueError("start profile must lie inside the box")
    best_chain: list[dict] | None = None
    budget = [node_budget]

    def rec(cur: np.ndarray, outside: frozenset, chain: list[dict]):
        nonlocal best_chain
        if len(chain) >= max_depth:
            return
        for i in range(instance.n_sellers):
            if i in outside:
                continue
            budget[0] -= 1
            if budget[0] <= 0:
                raise RuntimeError("external-tail search exceeded its node budget")
            cand = candidate_commissions(instance, cur, i, grid_step, undercut)
            utils = unified_utility_candidates(instance, cur, i, cand)
            current = unified_utility_candidates(instance, cur, i, [cur[i]])[0]
            cmax = utils.max()
            external = np.array([not box.contains_value(i, c, _BOUNDARY_EPS) for c in cand])
            ok = external & (utils > current) & (utils > cmax - epsilon)
            for idx in np.nonzero(ok)[0]:
                nxt = cur.copy()
                nxt[i] = cand[idx]
                move = {
                    "mover": i + 1,
                    "commission": float(cand[idx]),
                    "utility": float(utils[idx]),
                    "profile": [float(v) for v in nxt],
                }
                extended = chain + [move]
                if best_chain is None or len(extended) > len(best_chain):
                    best_chain = list(extended)
                rec(nxt, outside | {i}, extended)

    rec(profile, frozenset(), [])
    return best_chain


def canonical_subset_candidates(
    instance: MarketInstance, shrink: float = 0.02
) -> list[tuple[str, ECBox]]:
    """The two canonical falsification candidates: all left endpoints
    lifted off the threat point, and the last interval's right endpoint
    pulled below its threshold."""
    box = ec_box(instance)
    intervals = box.interval_indices()
    lo = list(box.lo)
    hi = list(box.hi)
    for i in intervals:
        if hi[i] - lo[i] <= shrink:
            raise ValueError(f"shrink {shrink} exceeds the width of component {i + 1}")
    left_lo = list(lo)
    for i in intervals:
        left_lo[i] = lo[i] + shrink
    shrunk_left = ECBox(tuple(left_lo), tuple(hi))
    right_hi = list(hi)
    last = intervals[-1]
    right_hi[last] = hi[last] - shrink
    shrunk_right = ECBox(tuple(lo), tuple(right_hi))
    return [("shrunk-left", shrunk_left), ("shrunk-right", shrunk_right)]


def falsify_subset(
    instance: MarketInstance,
    candidate: ECBox,
    samples: int,
    rng_seed: int,
    grid_step: float = 1e-3,
    undercut: float = 1e-3,
) -> VerificationReport:
    """Minimality probe: run the stability and unrest checks on a strict
    sub-box and report the first violated property.

    A failing candidate is evidence for the full box's minimality; candidates
    that survive prove nothing (minimality is not sampling-decidable).
    """
    box = ec_box(instance)
    if not candidate.is_strict_subset_of(box):
        raise ValueError("candidate must be a strict subset of the instance's EC box")
    stability = check_stability(instance, candidate, samples, rng_seed, grid_step, undercut)
    if not stability.passed:
        return replace(
            stability,
            property_name="falsify-subset",
            details={"first_violated": "stability"},
        )
    unrest = check_unrest(instance, candidate, samples, rng_seed, grid_step, undercut)
    if not unrest.passed:
        return replace(
            unrest,
            property_name="falsify-subset",
            details={"first_violated": "unrest"},
        )
    return VerificationReport(
        "falsify-subset", samples, (), details={"first_violated": None}
    )
