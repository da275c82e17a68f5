"""Finite-shot simulation of the local verification scheme and the
statistically conservative key certification built on top of it.

The flow mirrors a desk experiment: pick a scheme of collective settings
(four local measurement directions at a time), sample outcome counts per
setting from the Born distribution, reconstruct the squeezed two-qubit
parameters from the counts, wrap every estimate in a Hoeffding
confidence radius, and certify a key bound that holds for *every*
parameter assignment inside the confidence rectangle.  The certified
number is therefore sound at level 1 - delta by construction; the price
is paid in shots, not in assumptions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .keyrate import CertificationInfeasibleError
from .linalg import DensityOperator
from .observables import CollectiveSetting, SettingsCover
from .states import PreparedComponent

#: outcome tuples (sign on A, B, A', B'), index order matching the state's
#: subsystem order: qubit A varies slowest
OUTCOMES: tuple[tuple[int, int, int, int], ...] = tuple(
    itertools.product((1, -1), repeat=4)
)
_OUTCOME_INDEX: Mapping[tuple[int, int, int, int], int] = {
    o: i for i, o in enumerate(OUTCOMES)
}

#: number of estimated expectations sharing the union bound: the four
#: key-basis bucket frequencies, their correlated-sector sum, and the
#: four coherence functionals
UNION_BOUND_TERMS = 9

#: grid resolution of the rectangle scan over the correlated weight
SCAN_GRID = 4097

#: rounding slack for the spectrum-validity guards of the rectangle scan;
#: points inside it are projected onto the validity boundary, which is
#: the limit of valid points, so the minimum stays sound
FEASIBILITY_SLACK = 1e-9


def _functional_values() -> np.ndarray:
    """values[mask, o]: the product of the outcome signs of the qubits in
    ``mask`` (bit q of the mask is qubit q, with A as bit 0)."""
    vals = np.ones((16, 16))
    for mask in range(16):
        for o, signs in enumerate(OUTCOMES):
            v = 1.0
            for q in range(4):
                if (mask >> q) & 1:
                    v *= signs[q]
            vals[mask, o] = v
    return vals


FUNCTIONAL_VALUES = _functional_values()


@dataclass(frozen=True)
class ShotRecord:
    """Measured counts for one collective setting.

    ``counts`` maps outcomes -- four +-1 signs in subsystem order A, B,
    A', B' -- to how often they occurred.  Sampled records hold
    nonnegative integers summing to ``shots``; records representing the
    infinite-shot limit hold outcome probabilities with ``shots`` = 1.
    """

    setting: CollectiveSetting
    counts: dict = field(repr=False)
    shots: float

    def __post_init__(self):
        if self.shots <= 0:
            raise ValueError("shots must be positive")
        total = 0.0
        for outcome, count in self.counts.items():
            if outcome not in _OUTCOME_INDEX:
                raise ValueError(f"unknown outcome {outcome}")
            if count < 0:
                raise ValueError(f"negative count for outcome {outcome}")
            total += count
        if abs(total - self.shots) > 1e-9 * max(1.0, abs(self.shots)):
            raise ValueError(f"counts sum to {total}, not {self.shots}")

    def frequencies(self) -> np.ndarray:
        """Relative outcome frequencies in canonical outcome order."""
        freq = np.zeros(16)
        for outcome, count in self.counts.items():
            freq[_OUTCOME_INDEX[outcome]] = count / self.shots
        return freq

    def functional_means(self) -> np.ndarray:
        """Empirical means of the 16 sign-product functionals."""
        return FUNCTIONAL_VALUES @ self.frequencies()


def _direction_basis(n: np.ndarray) -> np.ndarray:
    """Columns: the +1 and -1 eigenvectors of n . sigma, in that order."""
    nx, ny, nz = (float(x) for x in n)
    op = np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]])
    _, v = np.linalg.eigh(op)
    return v[:, ::-1]


def outcome_distribution(rho: DensityOperator, setting: CollectiveSetting) -> np.ndarray:
    """Born probabilities of the 16 sign outcomes, in canonical order."""
    if rho.dims != (2, 2, 2, 2):
        raise ValueError(f"collective settings act on four qubits, state has {rho.dims}")
    basis = reduce(np.kron, [_direction_basis(n) for n in setting.directions])
    probs = np.real(np.einsum("ji,jk,ki->i", basis.conj(), rho.mat, basis))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_setting(
    rho: DensityOperator,
    setting: CollectiveSetting,
    shots: int,
    seed: int,
    index: int = 0,
) -> ShotRecord:
    """Sample one setting's outcome counts from the Born distribution.

    Deterministic for fixed (seed, index) within one build; drivers pass
    the setting's position in the scheme as ``index`` so settings can be
    sampled independently (and in parallel) without stream collisions.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = outcome_distribution(rho, setting)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    counts = rng.multinomial(int(shots), probs)
    table = {o: int(c) for o, c in zip(OUTCOMES, counts) if c}
    return ShotRecord(setting, table, float(shots))


def sample_scheme(
    rho: DensityOperator,
    settings: Sequence[CollectiveSetting],
    shots: int,
    seed: int,
) -> list[ShotRecord]:
    """Sample every setting of a scheme with per-setting derived seeds."""
    return [
        sample_setting(rho, s, shots, seed, index=i) for i, s in enumerate(settings)
    ]


def exact_record(rho: DensityOperator, setting: CollectiveSetting) -> ShotRecord:
    """The infinite-shot limit: outcome probabilities as a unit record."""
    probs = outcome_distribution(rho, setting)
    table = {o: float(p) for o, p in zip(OUTCOMES, probs) if p > 0.0}
    return ShotRecord(setting, table, 1.0)


def _pair_distribution(mat: np.ndarray, directions: np.ndarray) -> np.ndarray:
    basis = np.kron(_direction_basis(directions[0]), _direction_basis(directions[1]))
    probs = np.real(np.einsum("ji,jk,ki->i", basis.conj(), mat, basis))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_prepared(
    components: Sequence[PreparedComponent],
    setting: CollectiveSetting,
    shots: int,
    seed: int,
    index: int = 0,
) -> ShotRecord:
    """Sample via the two-ensemble preparation instead of the assembled
    matrix: draw a component per shot, then measure its key pair and its
    shield pair separately.

    Statistically equivalent to ``sample_setting`` on the assembled
    state -- the ensemble is classically correlated across the key/shield
    cut, so the joint outcome distribution factorizes per component --
    and used to cross-validate the two preparation paths.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    weights = np.array([c.weight for c in components], dtype=float)
    if weights.min() < 0:
        raise ValueError("component weights must be nonnegative")
    weights = weights / weights.sum()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    per_component = rng.multinomial(int(shots), weights)
    counts = np.zeros(16, dtype=np.int64)
    for comp, n_comp in zip(components, per_component):
        if n_comp == 0:
            continue
        dist = np.kron(
            _pair_distribution(comp.key_part, setting.directions[:2]),
            _pair_distribution(comp.shield_part, setting.directions[2:]),
        )
        counts += rng.multinomial(int(n_comp), dist)
    table = {o: int(c) for o, c in zip(OUTCOMES, counts) if c}
    return ShotRecord(setting, table, float(shots))


@dataclass(frozen=True)
class EstimateReport:
    """Estimated squeezed-state parameters with confidence radii and the
    key bounds they support.

    ``diag`` is the key-basis diagonal (d00, d01, d10, d11) of the
    squeezed two-qubit state, ``re_a``/``im_a`` its (00,11) coherence and
    ``re_b``/``im_b`` its (01,10) coherence.  All radii hold jointly with
    probability at least 1 - ``delta``.  ``raw_bound`` evaluates the
    twirl-hashing bound at the point estimates; ``certified_bound`` is
    its minimum over the whole confidence rectangle (None when the
    rectangle contains no valid parameter assignment at all).
    """

    diag: np.ndarray
    diag_radii: np.ndarray
    re_a: float
    im_a: float
    re_b: float
    im_b: float
    coherence_radii: np.ndarray
    corr_weight: float
    corr_weight_radius: float
    delta: float
    raw_bound: float
    certified_bound: float | None

    def __post_init__(self):
        if np.min(self.diag_radii) < 0 or np.min(self.coherence_radii) < 0:
            raise ValueError("confidence radii must be nonnegative")
        if self.corr_weight_radius < 0:
            raise ValueError("confidence radii must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"confidence level parameter {self.delta} outside (0, 1)")
        if self.certified_bound is not None and (
            self.certified_bound > self.raw_bound + 1e-12
        ):
            raise ValueError("certified bound exceeds the raw bound")


def _entropy_pair(center: float, offset: float) -> float:
    """Entropy contribution (bits) of the weight pair center +- offset."""
    total = 0.0
    for w in (center + offset, center - offset):
        if w > 0.0:
            total -= w * math.log2(w)
    return total


def _hash_bound(corr: float, re_a: float, re_b: float) -> float:
    """Twirl-hashing bound of the spectrum determined by the correlated
    weight and the two real coherences."""
    return 1.0 - _entropy_pair(corr / 2.0, re_a) - _entropy_pair((1.0 - corr) / 2.0, re_b)


def _toward_zero(center: float, radius: float) -> float:
    """The point of [center - radius, center + radius] closest to zero."""
    if abs(center) <= radius:
        return 0.0
    return center - math.copysign(radius, center)


def _rectangle_minimum(
    corr: float,
    corr_radius: float,
    re_a: float,
    re_a_radius: float,
    re_b: float,
    re_b_radius: float,
) -> float | None:
    """Minimum of the twirl-hashing bound over the confidence rectangle.

    For a fixed correlated weight D the bound is monotone in the
    magnitude of each real coherence, so the inner minimizers are the
    in-interval points closest to zero; the remaining one-dimensional
    minimization over D runs on a dense grid with one local refinement
    (resolution ~ radius / SCAN_GRID**2, far below the radii themselves).
    Interval points that correspond to no valid spectrum (a coherence
    magnitude exceeding half its sector weight) are excluded; if the
    whole rectangle is invalid the result is None.
    """
    lo = max(corr - corr_radius, 0.0)
    hi = min(corr + corr_radius, 1.0)
    if lo > hi:
        return None
    ra = _toward_zero(re_a, re_a_radius)
    rb = _toward_zero(re_b, re_b_radius)

    def value(d: float) -> float | None:
        lim_a, lim_b = d / 2.0, (1.0 - d) / 2.0
        if abs(ra) > lim_a + FEASIBILITY_SLACK or abs(rb) > lim_b + FEASIBILITY_SLACK:
            return None
        va = math.copysign(min(abs(ra), lim_a), ra)
        vb = math.copysign(min(abs(rb), lim_b), rb)
        return _hash_bound(d, va, vb)

    def scan(points: np.ndarray):
        best_d, best_v = None, None
        for d in points:
            v = value(float(d))
            if v is not None and (best_v is None or v < best_v):
                best_d, best_v = float(d), v
        return best_d, best_v

    grid = np.linspace(lo, hi, SCAN_GRID) if hi > lo else np.array([lo])
    best_d, best_v = scan(grid)
    if best_v is None:
        return None
    if hi > lo:
        step = (hi - lo) / (SCAN_GRID - 1)
        fine = np.linspace(max(lo, best_d - step), min(hi, best_d + step), SCAN_GRID)
        _, fine_v = scan(fine)
        if fine_v is not None and fine_v < best_v:
            best_v = fine_v
    return best_v


def _raw_bound(corr: float, re_a: float, re_b: float) -> float:
    """Bound at the point estimates, coherences projected into the valid
    range (sampling noise can push an estimate past a vanishing sector)."""
    ra = math.copysign(min(abs(re_a), corr / 2.0), re_a)
    rb = math.copysign(min(abs(re_b), (1.0 - corr) / 2.0), re_b)
    return _hash_bound(corr, ra, rb)


def _diag_setting_index(settings: Sequence[CollectiveSetting]) -> int:
    z = np.array([0.0, 0.0, 1.0])
    for i, s in enumerate(settings):
        if np.allclose(s.directions[0], z, atol=1e-12) and np.allclose(
            s.directions[1], z, atol=1e-12
        ):
            return i
    raise ValueError(
        "scheme has no setting measuring both key qubits in the computational basis"
    )


def estimate_parameters(
    records: Sequence[ShotRecord], scheme: SettingsCover, delta: float = 0.05
) -> EstimateReport:
    """Reconstruct the squeezed-state parameters from measured counts.

    ``scheme`` must be a feasible cover of the five verification targets
    in canonical order (key correlation first, then the real/imaginary
    coherence pairs), and ``records`` must contain a record for every one
    of its settings.  Point estimates apply the scheme's reconstruction
    weights to the empirical functional means; the key-basis diagonal
    comes from the computational-basis setting's key-qubit marginals.

    Every confidence radius is a Hoeffding bound, union-bounded over the
    UNION_BOUND_TERMS estimated expectations so that all of them hold
    jointly with probability at least 1 - ``delta``: bucket frequencies
    are means of indicator variables (range one), while a reconstructed
    expectation sums per-setting means whose per-shot values are bounded
    by the reconstruction weights.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not scheme.feasible:
        raise ValueError("scheme is not a feasible cover of the targets")
    if len(scheme.coefficients) != 5:
        raise ValueError(
            f"scheme covers {len(scheme.coefficients)} targets, expected the five "
            "verification observables"
        )
    by_name = {rec.setting.name(): rec for rec in records}
    ordered = []
    for s in scheme.settings:
        rec = by_name.get(s.name())
        if rec is None:
            raise ValueError(f"records do not cover the scheme: missing {s.name()!r}")
        ordered.append(rec)

    log_term = math.log(2.0 * UNION_BOUND_TERMS / delta)
    means = [rec.functional_means() for rec in ordered]

    # Reconstructed expectations of the five targets and their radii.
    estimates = np.zeros(5)
    radii = np.zeros(5)
    for j, coeff in enumerate(scheme.coefficients):
        per_setting = coeff.reshape(len(ordered), 16)
        variance_term = 0.0
        for s, rec in enumerate(ordered):
            estimates[j] += float(per_setting[s] @ means[s])
            outcome_values = per_setting[s] @ FUNCTIONAL_VALUES
            bound = float(np.max(np.abs(outcome_values)))
            variance_term += bound * bound / rec.shots
        radii[j] = math.sqrt(2.0 * log_term * variance_term)

    # Key-basis diagonal from the computational setting's marginals.
    diag_idx = _diag_setting_index([r.setting for r in ordered])
    diag_rec = ordered[diag_idx]
    z_a, z_b, z_ab = means[diag_idx][1], means[diag_idx][2], means[diag_idx][3]
    diag = 0.25 * np.array(
        [
            1.0 + z_a + z_b + z_ab,
            1.0 + z_a - z_b - z_ab,
            1.0 - z_a + z_b - z_ab,
            1.0 - z_a - z_b + z_ab,
        ]
    )
    # Each diagonal entry, and the correlated-sector weight, is the mean
    # of an indicator over the same record's shots.
    bucket_radius = math.sqrt(log_term / (2.0 * diag_rec.shots))
    diag_radii = np.full(4, bucket_radius)
    corr_weight = float(diag[0] + diag[3])
    corr_radius = bucket_radius

    re_a, im_a = estimates[1] / 2.0, estimates[2] / 2.0
    re_b, im_b = estimates[3] / 2.0, estimates[4] / 2.0
    coh_radii = radii[1:5] / 2.0

    raw = _raw_bound(corr_weight, re_a, re_b)
    scanned = _rectangle_minimum(
        corr_weight, corr_radius, re_a, coh_radii[0], re_b, coh_radii[2]
    )
    certified = None if scanned is None else min(scanned, raw)
    return EstimateReport(
        diag=diag,
        diag_radii=diag_radii,
        re_a=re_a,
        im_a=im_a,
        re_b=re_b,
        im_b=im_b,
        coherence_radii=coh_radii,
        corr_weight=corr_weight,
        corr_weight_radius=corr_radius,
        delta=delta,
        raw_bound=raw,
        certified_bound=certified,
    )


def certify(report: EstimateReport) -> float:
    """The certified key bound of a report: the twirl-hashing bound
    minimized over the report's confidence rectangle (never above the
    point-estimate bound).

    Raises CertificationInfeasibleError when no parameter assignment in
    the rectangle corresponds to a quantum state, i.e. when the data are
    inconsistent beyond their own error bars.
    """
    scanned = _rectangle_minimum(
        report.corr_weight,
        report.corr_weight_radius,
        report.re_a,
        float(report.coherence_radii[0]),
        report.re_b,
        float(report.coherence_radii[2]),
    )
    if scanned is None:
        raise CertificationInfeasibleError(
            "no point of the confidence rectangle is a valid spectrum"
        )
    return min(scanned, report.raw_bound)
