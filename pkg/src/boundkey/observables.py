"""Verification observables and the local-measurement settings search.

The verification scheme measures a handful of expectation values on the
four-qubit state: a parity observable revealing the diagonal of the
privacy-squeezed two-qubit state, and two pairs of observables revealing
the real and imaginary parts of its off-diagonal coherences.  All of them
are conjugations of Bell-projector differences by the twisting unitary,

    O1     = Ut+ (Z x Z x I) Ut   (= Z x Z x I, twisting commutes with it)
    R{1,2} = Ut+ [P(psi_{0,2}) - P(psi_{1,3})] x I Ut
    I{1,2} = Ut+ [P(tpsi_{0,2}) - P(tpsi_{1,3})] x I Ut

where tpsi are the Bell vectors with relative phase -+i.  This module
builds them, decomposes operators over the 256 four-qubit Pauli strings,
models which linear functionals a single collective setting (one local
measurement direction per qubit) can estimate, and searches for a small
set of settings covering all target observables.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import DensityOperator, MultipartiteOperator
from .keyrate import TwistingUnitary

PAULI_LETTERS = "IXYZ"
PAULI = np.array(
    [
        [[1.0, 0.0], [0.0, 1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)

# Bloch directions available to the settings search, in canonical order.
DIRECTIONS = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
    "u": np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0),
    "v": np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0),
}

RECONSTRUCTION_TOL = 1e-12
COVER_RESIDUAL_TOL = 1e-9
EXHAUSTIVE_POOL_CAP = 40
EXHAUSTIVE_SUBSET_CAP = 120_000


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, (DensityOperator, MultipartiteOperator)):
        op = op.mat
    mat = np.asarray(op, dtype=complex)
    if mat.shape != (16, 16):
        raise ValueError(f"expected a 16 x 16 operator, got shape {mat.shape}")
    return mat


@dataclass(frozen=True)
class PauliDecomposition:
    """Coefficients of a four-qubit operator over the 256 Pauli strings.

    ``coeffs[a, b, c, d]`` multiplies the string with letter indices
    (a, b, c, d) into "IXYZ"; the strings are orthogonal with squared
    norm 16, so the expansion is unique and exactly invertible.
    """

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (4, 4, 4, 4):
            raise ValueError(f"coefficient tensor must be (4,4,4,4), got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def vector(self) -> np.ndarray:
        """The coefficients as a flat real 256-vector (Hermitian operators)."""
        return np.real(self.coeffs).reshape(-1)

    def strings(self, tol: float = 1e-12) -> list[tuple[str, complex]]:
        """The nonzero terms as (letters, coefficient), lexicographic order."""
        out = []
        for idx in itertools.product(range(4), repeat=4):
            c = self.coeffs[idx]
            if abs(c) > tol:
                out.append(("".join(PAULI_LETTERS[i] for i in idx), complex(c)))
        return out

    def reconstruct(self) -> np.ndarray:
        """Reassemble the 16 x 16 operator from the coefficients."""
        out = np.einsum(
            "abcd,aij,bkl,cmn,dpq->ikmpjlnq", self.coeffs, PAULI, PAULI, PAULI, PAULI
        )
        return np.ascontiguousarray(out.reshape(16, 16))


def pauli_decompose(op) -> PauliDecomposition:
    """Expand a four-qubit operator over the 256 Pauli strings.

    Coefficients are Tr(string . op) / 16; for a Hermitian operator they
    are real up to rounding.
    """
    mat = _as_matrix(op)
    m8 = mat.reshape(2, 2, 2, 2, 2, 2, 2, 2)
    coeffs = (
        np.einsum("aij,bkl,cmn,dpq,jlnqikmp->abcd", PAULI, PAULI, PAULI, PAULI, m8)
        / 16.0
    )
    return PauliDecomposition(coeffs=coeffs)


def expectation(op, rho: DensityOperator) -> float:
    """Tr(op rho) as a real number; trips if the value is not real."""
    if isinstance(op, (DensityOperator, MultipartiteOperator)):
        op = op.mat
    op = np.asarray(op, dtype=complex)
    val = complex(np.trace(op @ rho.mat))
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def tilde_bell_states() -> np.ndarray:
    """Bell vectors with relative phase -+i, as rows.

    Row 0: (|00> - i|11>)/sqrt2    row 1: (|00> + i|11>)/sqrt2
    Row 2: (|01> - i|10>)/sqrt2    row 3: (|01> + i|10>)/sqrt2

    The sign choice makes the coherence observables below satisfy
    Tr(I1 rho) = +2 Im <00|sigma|11> for the squeezed state sigma.
    """
    s = 1.0 / np.sqrt(2.0)
    return np.array(
        [
            [s, 0.0, 0.0, -1j * s],
            [s, 0.0, 0.0, 1j * s],
            [0.0, s, -1j * s, 0.0],
            [0.0, s, 1j * s, 0.0],
        ],
        dtype=complex,
    )


@dataclass(frozen=True)
class VerificationObservables:
    """The five observables of the verification scheme, as 16 x 16 arrays."""

    o1: np.ndarray = field(repr=False)
    r1: np.ndarray = field(repr=False)
    i1: np.ndarray = field(repr=False)
    r2: np.ndarray = field(repr=False)
    i2: np.ndarray = field(repr=False)

    def named(self) -> dict[str, np.ndarray]:
        return {"O1": self.o1, "R1": self.r1, "I1": self.i1, "R2": self.r2, "I2": self.i2}


def build_observables(tau: TwistingUnitary) -> VerificationObservables:
    """Conjugate the Bell-difference observables by a twisting unitary.

    The parity observable O1 must come out exactly equal to Z x Z x I:
    the twisting is controlled by the computational basis it is conjugated
    around, so any deviation flags a broken twisting block.
    """
    from .states import bell_states  # local import: states does not depend on us

    u = tau.full()
    zz = np.kron(np.kron(PAULI[3], PAULI[3]), np.eye(4, dtype=complex))

    def conj(op_ab: np.ndarray) -> np.ndarray:
        full = np.kron(op_ab, np.eye(tau.shield_dim, dtype=complex))
        return u.conj().T @ full @ u

    o1 = conj(np.kron(PAULI[3], PAULI[3]))
    dev = float(np.max(np.abs(o1 - zz)))
    if dev > 1e-10:
        raise ValueError(f"twisting fails to commute with the key parity ({dev:.3e})")

    bells = bell_states().astype(complex)
    tildes = tilde_bell_states()

    def proj_diff(va: np.ndarray, vb: np.ndarray) -> np.ndarray:
        return np.outer(va, va.conj()) - np.outer(vb, vb.conj())

    r1 = conj(proj_diff(bells[0], bells[1]))
    i1 = conj(proj_diff(tildes[0], tildes[1]))
    r2 = conj(proj_diff(bells[2], bells[3]))
    i2 = conj(proj_diff(tildes[2], tildes[3]))
    return VerificationObservables(o1=o1, r1=r1, i1=i1, r2=r2, i2=i2)


def reference_expansions() -> dict[str, PauliDecomposition]:
    """Independently tabulated closed-form Pauli expansions for the
    flagship instance's observables, used as a cross-check target.

    Tabulated terms (coefficient 1/4 on every string):

        R1:  [XX - YY] x [(IZ + ZI) + (XX + YY)]
        I1: -[XY + YX] x [(IZ + ZI) + (XX + YY)]
        R2:  [XX + YY] x [(II - ZZ) + ((IZ + ZI) + (XX + YY)) / sqrt2]
        I2: -[YX - XY] x [(II - ZZ) + ((IZ + ZI) + (XX + YY)) / sqrt2]

    The builder's own R2/I2 differ from this table in two coefficient
    signs each (the ...x YY tail strings); `expansion_differences` reports
    exactly that, itemized.
    """
    letters = {l: i for i, l in enumerate(PAULI_LETTERS)}

    def tensor_terms(heads, tails) -> PauliDecomposition:
        coeffs = np.zeros((4, 4, 4, 4), dtype=complex)
        for (ha, hb), hc in heads:
            for (ta, tb), tc in tails:
                coeffs[letters[ha], letters[hb], letters[ta], letters[tb]] = hc * tc
        return PauliDecomposition(coeffs=coeffs)

    s = 1.0 / np.sqrt(2.0)
    tail_1 = [(("I", "Z"), 1.0), (("Z", "I"), 1.0), (("X", "X"), 1.0), (("Y", "Y"), 1.0)]
    tail_2 = [(("I", "I"), 1.0), (("Z", "Z"), -1.0)] + [(p, c * s) for p, c in tail_1]
    return {
        "O1": tensor_terms([(("Z", "Z"), 1.0)], [(("I", "I"), 1.0)]),
        "R1": tensor_terms([(("X", "X"), 0.25), (("Y", "Y"), -0.25)], tail_1),
        "I1": tensor_terms([(("X", "Y"), -0.25), (("Y", "X"), -0.25)], tail_1),
        "R2": tensor_terms([(("X", "X"), 0.25), (("Y", "Y"), 0.25)], tail_2),
        "I2": tensor_terms([(("Y", "X"), -0.25), (("X", "Y"), 0.25)], tail_2),
    }


def expansion_differences(
    obs: VerificationObservables, refs: dict[str, PauliDecomposition] | None = None
) -> dict[str, list[tuple[str, float, float]]]:
    """Itemized coefficient differences between built observables and the
    reference table: name -> [(letters, built, reference), ...].

    Empty lists mean exact agreement (within 1e-10 per coefficient).
    """
    if refs is None:
        refs = reference_expansions()
    out: dict[str, list[tuple[str, float, float]]] = {}
    for name, op in obs.named().items():
        built = pauli_decompose(op).coeffs
        ref = refs[name].coeffs
        diffs = []
        for idx in itertools.product(range(4), repeat=4):
            b, r = built[idx], ref[idx]
            if abs(b - r) > 1e-10:
                letters = "".join(PAULI_LETTERS[i] for i in idx)
                diffs.append((letters, float(np.real(b)), float(np.real(r))))
        out[name] = diffs
    return out


@dataclass(frozen=True)
class CollectiveSetting:
    """One measurement direction per qubit: four unit Bloch vectors."""

    directions: np.ndarray = field(repr=False)
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.shape != (4, 3):
            raise ValueError(f"directions must be a (4, 3) array, got {d.shape}")
        norms = np.linalg.norm(d, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("directions must be unit vectors")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    def name(self) -> str:
        if self.labels is not None:
            return "".join(self.labels)
        return "(" + ", ".join(np.array2string(v, precision=3) for v in self.directions) + ")"


def setting_from_names(names: str) -> CollectiveSetting:
    """Setting from four direction letters, e.g. "zzxx" or "uuzz"."""
    if len(names) != 4 or any(n not in DIRECTIONS for n in names):
        raise ValueError(f"need four letters from {sorted(DIRECTIONS)}, got {names!r}")
    return CollectiveSetting(
        directions=np.array([DIRECTIONS[n] for n in names]), labels=tuple(names)
    )


def direction_operator(n) -> np.ndarray:
    """The single-qubit observable n . (X, Y, Z) for a unit Bloch vector."""
    n = np.asarray(n, dtype=float)
    return np.einsum("k,kij->ij", n, PAULI[1:])


def estimable_functionals(setting: CollectiveSetting) -> np.ndarray:
    """Pauli vectors of the 16 product functionals one setting estimates.

    Measuring each qubit along its direction yields four +-1 outcomes;
    averaging the product of any subset T of them estimates the operator
    that is (n . sigma) on the qubits in T and identity elsewhere.  Row
    ``mask`` of the result (bit q set <=> qubit q in T, qubit order
    A, B, A', B') is that operator's flat 256-coefficient vector.
    """
    per_qubit = []
    for q in range(4):
        v = np.zeros((2, 4))
        v[0, 0] = 1.0
        v[1, 1:] = setting.directions[q]
        per_qubit.append(v)
    out = np.zeros((16, 256))
    for mask in range(16):
        bits = [(mask >> q) & 1 for q in range(4)]
        vec = np.einsum(
            "a,b,c,d->abcd",
            per_qubit[0][bits[0]],
            per_qubit[1][bits[1]],
            per_qubit[2][bits[2]],
            per_qubit[3][bits[3]],
        )
        out[mask] = vec.reshape(-1)
    return out


def default_candidates() -> list[CollectiveSetting]:
    """All 625 settings with per-qubit directions from DIRECTIONS."""
    names = list(DIRECTIONS)
    return [setting_from_names("".join(c)) for c in itertools.product(names, repeat=4)]


@dataclass(frozen=True)
class SettingsCover:
    """Result of the settings search.

    ``coefficients[t]`` holds, for target t, the weights over the scheme's
    functionals (16 per setting, concatenated in scheme order) whose
    combination reconstructs the target; ``max_residual`` is the worst
    reconstruction error over targets.  ``exhausted_up_to`` is the largest
    scheme size for which a capped pool of the strongest candidates (see
    ``min_settings_cover``) was searched exhaustively: a returned scheme of
    that size or smaller is minimal relative to that pool, a larger one is
    the best the greedy fallback produced.
    """

    feasible: bool
    settings: tuple[CollectiveSetting, ...]
    coefficients: tuple[np.ndarray, ...]
    max_residual: float
    exhausted_up_to: int

    @property
    def size(self) -> int:
        return len(self.settings)


def _target_vectors(targets) -> np.ndarray:
    vecs = []
    for t in targets:
        if not isinstance(t, PauliDecomposition):
            t = pauli_decompose(t)
        vecs.append(t.vector)
    return np.array(vecs)


GRAM_RANK_CUT = 1e-14
GRAM_NOISE_FLOOR = 1e-18
SOLVE_RIDGE = 1e-12


def _robust_eigh(g: np.ndarray):
    """eigh with a jitter-and-retry fallback.

    The threaded LAPACK backing this interpreter sporadically reports
    nonconvergence on well-formed symmetric matrices; a tiny diagonal
    shift reliably unsticks it, and the shift is subtracted back out of
    the eigenvalues so rank cuts are unaffected.
    """
    g = (g + g.T) / 2.0
    try:
        return np.linalg.eigh(g)
    except np.linalg.LinAlgError:
        scale = float(np.max(np.abs(g))) or 1.0
        jitter = scale * 1e-13
        w, v = np.linalg.eigh(g + jitter * np.eye(g.shape[0]))
        return np.maximum(w - jitter, 0.0), v


def _orth_columns(mat: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Rank-revealing orthonormal basis for the column space of ``mat``.

    Built from the symmetric eigendecomposition of the smaller Gram
    matrix: plain QR without pivoting does not reveal rank, and LAPACK's
    SVD here occasionally refuses to converge on the degenerate stacks
    this search produces.  Squaring costs precision, so ranks are trusted
    only down to singular values around 1e-7 of the largest; the vectors
    here are exact products with values of order one, far from that edge.
    The absolute floor matters when the largest eigenvalue is itself
    rounding noise — a relative cut alone would promote it to rank one.
    """
    m, n = mat.shape if mat.size else (mat.shape[0], 0)
    if n == 0:
        return np.zeros((m, 0))
    cut = max(tol * tol, GRAM_RANK_CUT)
    if n <= m:
        w, v = _robust_eigh(mat.T @ mat)
        keep = w > max(cut * float(w[-1]), GRAM_NOISE_FLOOR)
        basis = mat @ (v[:, keep] / np.sqrt(w[keep]))
    else:
        w, v = _robust_eigh(mat @ mat.T)
        keep = w > max(cut * float(w[-1]), GRAM_NOISE_FLOOR)
        basis = v[:, keep]
    return np.ascontiguousarray(basis)


def _gram_rank(mat: np.ndarray) -> int:
    """Rank of a stack of unit-scale row vectors, via the smaller Gram matrix."""
    if mat.size == 0:
        return 0
    g = mat @ mat.T if mat.shape[0] <= mat.shape[1] else mat.T @ mat
    w, _ = _robust_eigh(g)
    return int(np.sum(w > max(GRAM_RANK_CUT * float(w[-1]), GRAM_NOISE_FLOOR)))


def _ridge_solve_residual(funcs: np.ndarray, tvecs: np.ndarray):
    """Weights c with funcs.T @ c ~ tvecs.T and the exact worst residual.

    A ridge-regularized normal-equation solve: it avoids eigense/SVD in
    the search's hot path, and since the residual is recomputed exactly
    afterwards, the regularization can only make the check conservative.
    """
    g = funcs @ funcs.T
    n = g.shape[0]
    ridge = SOLVE_RIDGE * max(float(np.trace(g)) / max(n, 1), 1e-300)
    sol = np.linalg.solve(g + ridge * np.eye(n), funcs @ tvecs.T)
    residual = float(np.max(np.abs(funcs.T @ sol - tvecs.T)))
    return sol, residual


def _gram_lstsq(funcs: np.ndarray, tvecs: np.ndarray):
    """Minimum-norm least-squares weights via the functional Gram matrix."""
    g = funcs @ funcs.T
    w, v = _robust_eigh(g)
    keep = w > max(GRAM_RANK_CUT * float(w[-1]), GRAM_NOISE_FLOOR)
    rhs = funcs @ tvecs.T
    sol = (v[:, keep] / w[keep]) @ (v[:, keep].T @ rhs)
    residual = float(np.max(np.abs(funcs.T @ sol - tvecs.T)))
    return sol, residual


def min_settings_cover(
    targets, candidates: list[CollectiveSetting] | None = None, max_size: int = 13
) -> SettingsCover:
    """Search for a smallest set of collective settings whose estimable
    functionals span every target observable.

    Strategy: prune candidates to those whose functionals project onto the
    span of the targets and rank them by how many independent target
    directions they reach; search subsets of the strongest candidates
    exhaustively, smallest size first, while the subset count stays within
    budget (a cheap necessary test on target-space projections gates the
    full span check); past the exhaustive budget, fall back to a greedy
    cover over the whole pruned pool followed by a drop-redundant pass.
    Returned schemes always pass the full reconstruction check; when
    nothing within ``max_size`` covers, the result has ``feasible=False``
    (no exception).
    """
    tvecs = _target_vectors(targets)
    if candidates is None:
        candidates = default_candidates()
    n_targets = tvecs.shape[0]
    target_basis = _orth_columns(tvecs.T, tol=1e-12)
    target_rank = target_basis.shape[1]

    pool = []
    for idx, cand in enumerate(candidates):
        funcs = estimable_functionals(cand)
        proj = funcs @ target_basis
        score = _gram_rank(proj)
        if score > 0:
            pool.append({"idx": idx, "setting": cand, "funcs": funcs, "proj": proj,
                         "score": score})
    pool.sort(key=lambda item: (-item["score"], item["idx"]))

    if not pool:
        return SettingsCover(
            feasible=False, settings=(), coefficients=(), max_residual=float("inf"),
            exhausted_up_to=0,
        )

    # Cap the pool for the exhaustive phase, diversified by reachability
    # signature (which targets a setting's functionals touch): capping by
    # score alone stacks the cap with near-duplicates of one signature and
    # can exclude every setting that reaches some target.
    norms = np.maximum(np.linalg.norm(tvecs, axis=1, keepdims=True), 1e-300)
    unit_targets = tvecs / norms
    buckets: dict[tuple[bool, ...], list[dict]] = {}
    for item in pool:
        touch = item["funcs"] @ unit_targets.T
        sig = tuple(bool(np.max(np.abs(touch[:, t])) > 1e-9) for t in range(n_targets))
        buckets.setdefault(sig, []).append(item)
    order = sorted(buckets, key=lambda s: (-buckets[s][0]["score"], s))
    capped: list[dict] = []
    rounds = 0
    while len(capped) < min(EXHAUSTIVE_POOL_CAP, len(pool)):
        added = False
        for sig in order:
            if rounds < len(buckets[sig]):
                capped.append(buckets[sig][rounds])
                added = True
                if len(capped) == EXHAUSTIVE_POOL_CAP:
                    break
        if not added:
            break
        rounds += 1

    # Compact coordinates: everything relevant lives in the joint span of
    # the pruned functionals and the targets.
    joint = np.hstack([np.vstack([i["funcs"] for i in pool]).T, tvecs.T])
    joint_basis = _orth_columns(joint)
    tvecs_c = tvecs @ joint_basis           # (n_targets, m)
    for item in pool:
        item["funcs_c"] = item["funcs"] @ joint_basis

    def spans_targets(items) -> bool:
        funcs_c = np.vstack([i["funcs_c"] for i in items])
        _, residual = _ridge_solve_residual(funcs_c, tvecs_c)
        return residual <= COVER_RESIDUAL_TOL

    def verified(items) -> SettingsCover | None:
        funcs = np.vstack([i["funcs"] for i in items])
        sol, residual = _gram_lstsq(funcs, tvecs)
        if residual > COVER_RESIDUAL_TOL:
            return None
        return SettingsCover(
            feasible=True,
            settings=tuple(i["setting"] for i in items),
            coefficients=tuple(np.ascontiguousarray(c) for c in sol.T),
            max_residual=residual,
            exhausted_up_to=0,
        )

    exhausted = 0
    best: SettingsCover | None = None
    for k in range(1, min(max_size, len(capped)) + 1):
        if math.comb(len(capped), k) > EXHAUSTIVE_SUBSET_CAP:
            break
        found = None
        for combo in itertools.combinations(capped, k):
            # Necessary first: the target-space projections must span.
            proj = np.vstack([i["proj"] for i in combo])
            if _gram_rank(proj) < target_rank:
                continue
            if spans_targets(combo):
                found = verified(combo)
                if found is not None:
                    break
        exhausted = k
        if found is not None:
            best = found
            break

    if best is None:
        chosen = []
        basis = np.zeros((tvecs_c.shape[1], 0))

        def uncovered(b) -> float:
            resid = tvecs_c.T - b @ (b.T @ tvecs_c.T)
            return float(np.linalg.norm(resid))

        current = uncovered(basis)
        while len(chosen) < max_size and current > 1e-12:
            pick, pick_resid, pick_basis = None, current, None
            for item in pool:
                if any(item["idx"] == c["idx"] for c in chosen):
                    continue
                trial = _orth_columns(np.hstack([basis, item["funcs_c"].T]))
                resid = uncovered(trial)
                if resid < pick_resid - 1e-12:
                    pick, pick_resid, pick_basis = item, resid, trial
            if pick is None:
                break
            chosen.append(pick)
            basis, current = pick_basis, pick_resid
        if chosen and current <= 1e-12:
            best = verified(chosen)
            if best is not None and best.size > 1:
                best = _drop_redundant(chosen, verified)

    if best is None:
        return SettingsCover(
            feasible=False, settings=(), coefficients=(), max_residual=float("inf"),
            exhausted_up_to=exhausted,
        )
    return SettingsCover(
        feasible=True,
        settings=best.settings,
        coefficients=best.coefficients,
        max_residual=best.max_residual,
        exhausted_up_to=exhausted,
    )


def _drop_redundant(chosen, verified):
    """Remove settings one at a time while the cover still verifies."""
    current = list(chosen)
    improved = True
    result = verified(current)
    while improved:
        improved = False
        for i in range(len(current)):
            trial = current[:i] + current[i + 1 :]
            if not trial:
                continue
            maybe = verified(trial)
            if maybe is not None:
                current, result, improved = trial, maybe, True
                break
    return result
