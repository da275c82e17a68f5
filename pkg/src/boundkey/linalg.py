"""Dense operator algebra for small multipartite quantum systems.

Everything in this package works on explicit complex matrices over a
tensor product of small Hilbert spaces.  Subsystems are ordered, and all
partial operations (trace, transpose) address subsystems by index into
that order.  The package-wide convention for the four-party states built
in :mod:`boundkey.states` is the order (A, B, A', B'): two key qubits
followed by the two shield systems.

Conventions
-----------
* logarithms are base 2 throughout (entropies in bits),
* eigenvalues from :func:`eig_hermitian` are ascending,
* tolerance constants below are shared by every validation in the
  package.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

# Validation tolerances (shared package-wide).
HERMITICITY_ATOL = 1e-12     # max |M - M^dag| for density operators
TRACE_ATOL = 1e-12           # |Tr(rho) - 1|
PSD_SLACK = 1e-10            # eigenvalues of a state may dip this far below 0
EIG_HERMITICITY_ATOL = 1e-10  # Hermiticity required by eig_hermitian
RECONSTRUCTION_ATOL = 1e-9   # matrix-function reconstruction error
ENTROPY_CLAMP = 1e-10        # eigenvalues in [-ENTROPY_CLAMP, 0) are clamped to 0

DEFAULT_LABELS = ("A", "B", "A'", "B'")

_LN2 = float(np.log(2.0))


def _as_matrix(op) -> np.ndarray:
    """Accept a MultipartiteOperator, DensityOperator, or bare ndarray."""
    if isinstance(op, DensityOperator):
        return op.op.mat
    if isinstance(op, MultipartiteOperator):
        return op.mat
    return np.asarray(op, dtype=complex)


def _default_labels(n: int) -> tuple[str, ...]:
    if n <= len(DEFAULT_LABELS):
        return DEFAULT_LABELS[:n]
    return tuple(f"s{i}" for i in range(n))


@dataclass(frozen=True, eq=False)
class MultipartiteOperator:
    """A square operator on an ordered tensor product of subsystems.

    Parameters
    ----------
    mat : ndarray
        Square complex matrix of dimension ``prod(dims)``.
    dims : tuple of int
        Local dimension of each subsystem, in order.
    labels : tuple of str, optional
        Cosmetic subsystem names (default A, B, A', B').  Labels are for
        reports only; every operation in this module addresses
        subsystems by integer index.
    """

    mat: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {mat.shape}")
        if any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be positive, got {dims}")
        if mat.shape[0] != int(np.prod(dims, dtype=np.int64)) if dims else mat.shape[0] != 1:
            raise ValueError(
                f"matrix dimension {mat.shape[0]} does not match prod{dims}"
            )
        labels = self.labels
        if labels is None:
            labels = _default_labels(len(dims))
        labels = tuple(labels)
        if len(labels) != len(dims):
            raise ValueError("one label per subsystem required")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def __repr__(self):  # pragma: no cover - cosmetic
        return f"MultipartiteOperator(dims={self.dims}, labels={self.labels})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A validated quantum state.

    Construction enforces Hermiticity within ``HERMITICITY_ATOL``, unit
    trace within ``TRACE_ATOL`` and positive semidefiniteness with slack
    ``PSD_SLACK`` on the minimum eigenvalue.
    """

    op: MultipartiteOperator

    def __post_init__(self):
        m = self.op.mat
        herm = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if herm > HERMITICITY_ATOL:
            raise ValueError(f"state is not Hermitian: max|M - M^dag| = {herm:.3e}")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"state trace deviates from 1 by {abs(tr - 1.0):.3e}")
        lam_min = float(np.linalg.eigvalsh((m + m.conj().T) / 2.0)[0])
        if lam_min < -PSD_SLACK:
            raise ValueError(f"state has negative eigenvalue {lam_min:.3e}")
        object.__setattr__(self, "lambda_min", lam_min)

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def dims(self) -> tuple[int, ...]:
        return self.op.dims

    @property
    def labels(self) -> tuple[str, ...]:
        return self.op.labels

    def __repr__(self):  # pragma: no cover - cosmetic
        return f"DensityOperator(dims={self.dims})"


def as_state(mat, dims, labels=None) -> DensityOperator:
    """Wrap a raw matrix as a validated DensityOperator."""
    return DensityOperator(MultipartiteOperator(mat, tuple(dims), labels))


def tensor(ops: Sequence[MultipartiteOperator]) -> MultipartiteOperator:
    """Kronecker product of a non-empty sequence of operators.

    Subsystem dimension lists concatenate in argument order.
    """
    ops = list(ops)
    if not ops:
        raise ValueError("tensor() requires at least one operand")
    mats = [_as_matrix(o) for o in ops]
    mat = reduce(np.kron, mats)
    dims: tuple[int, ...] = ()
    labels: tuple[str, ...] = ()
    for o in ops:
        if isinstance(o, (MultipartiteOperator, DensityOperator)):
            dims = dims + o.dims
            labels = labels + o.labels
        else:
            m = np.asarray(o)
            dims = dims + (m.shape[0],)
            labels = labels + (f"s{len(dims) - 1}",)
    return MultipartiteOperator(mat, dims, _default_labels(len(dims)))


def _check_indices(indices: Iterable[int], n: int, what: str) -> list[int]:
    idx = sorted(set(int(i) for i in indices))
    for i in idx:
        if i < 0 or i >= n:
            raise ValueError(f"{what} index {i} out of range for {n} subsystems")
    return idx


def partial_trace(op, discard: Iterable[int]) -> MultipartiteOperator:
    """Trace out the subsystems listed in `discard` (by index).

    Returns an operator on the remaining subsystems, in their original
    order.  Tracing out everything yields a 1x1 operator with no
    subsystems.
    """
    if isinstance(op, DensityOperator):
        op = op.op
    n = op.n_subsystems
    idx = _check_indices(discard, n, "partial_trace")
    if not idx:
        return MultipartiteOperator(op.mat, op.dims, op.labels)
    dims = list(op.dims)
    t = op.mat.reshape(dims + dims)
    remaining = n
    for i in reversed(idx):
        t = np.trace(t, axis1=i, axis2=i + remaining)
        remaining -= 1
    keep = [i for i in range(n) if i not in idx]
    new_dims = tuple(op.dims[i] for i in keep)
    new_labels = tuple(op.labels[i] for i in keep)
    d = int(np.prod(new_dims, dtype=np.int64)) if new_dims else 1
    return MultipartiteOperator(t.reshape(d, d), new_dims, new_labels)


def partial_transpose(op, subset: Iterable[int]) -> MultipartiteOperator:
    """Transpose the subsystems listed in `subset`, leaving the rest alone."""
    if isinstance(op, DensityOperator):
        op = op.op
    n = op.n_subsystems
    idx = _check_indices(subset, n, "partial_transpose")
    dims = list(op.dims)
    t = op.mat.reshape(dims + dims)
    axes = list(range(2 * n))
    for i in idx:
        axes[i], axes[i + n] = axes[i + n], axes[i]
    t = t.transpose(axes)
    return MultipartiteOperator(t.reshape(op.dim, op.dim), op.dims, op.labels)


def permute_subsystems(op, order: Sequence[int]) -> MultipartiteOperator:
    """Reorder subsystems so that new position k holds old subsystem order[k]."""
    if isinstance(op, DensityOperator):
        op = op.op
    n = op.n_subsystems
    order = list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of 0..{n - 1}, got {order}")
    dims = list(op.dims)
    t = op.mat.reshape(dims + dims)
    axes = order + [i + n for i in order]
    t = t.transpose(axes)
    new_dims = tuple(op.dims[i] for i in order)
    new_labels = tuple(op.labels[i] for i in order)
    return MultipartiteOperator(t.reshape(op.dim, op.dim), new_dims, new_labels)


def is_hermitian(op, atol: float = EIG_HERMITICITY_ATOL) -> bool:
    m = _as_matrix(op)
    return bool(np.max(np.abs(m - m.conj().T)) <= atol)


def eig_hermitian(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian operator.

    Returns ``(w, V)`` with ascending real eigenvalues ``w`` and
    eigenvectors in the columns of ``V``.  Raises ``ValueError`` when the
    input deviates from Hermiticity by more than ``EIG_HERMITICITY_ATOL``.
    """
    m = _as_matrix(op)
    dev = float(np.max(np.abs(m - m.conj().T)))
    if dev > EIG_HERMITICITY_ATOL:
        raise ValueError(f"eig_hermitian: operator is not Hermitian (deviation {dev:.3e})")
    w, v = np.linalg.eigh((m + m.conj().T) / 2.0)
    return w, v


def trace_norm(op) -> float:
    """Sum of singular values."""
    m = _as_matrix(op)
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def frobenius_distance(a, b) -> float:
    return float(np.linalg.norm(_as_matrix(a) - _as_matrix(b)))


def max_abs_distance(a, b) -> float:
    return float(np.max(np.abs(_as_matrix(a) - _as_matrix(b))))


def matrix_sqrt_psd(op) -> MultipartiteOperator:
    """Principal square root of a positive semidefinite operator.

    Eigenvalues in ``[-PSD_SLACK, 0)`` are clamped to zero; anything more
    negative raises ``ValueError``.
    """
    if isinstance(op, DensityOperator):
        op = op.op
    wrap = isinstance(op, MultipartiteOperator)
    m = _as_matrix(op)
    w, v = eig_hermitian(m)
    if w[0] < -PSD_SLACK:
        raise ValueError(f"matrix_sqrt_psd: operator has eigenvalue {w[0]:.3e} < -{PSD_SLACK}")
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.conj().T
    if wrap:
        return MultipartiteOperator(root, op.dims, op.labels)
    return MultipartiteOperator(root, (m.shape[0],))


def entropy_from_spectrum(eigs: np.ndarray) -> float:
    """Shannon entropy (bits) of a nonnegative spectrum summing to ~1.

    Values in ``[-ENTROPY_CLAMP, 0)`` are clamped to 0; anything more
    negative raises ``ValueError``.
    """
    w = np.asarray(eigs, dtype=float)
    if w.size and float(w.min()) < -ENTROPY_CLAMP:
        raise ValueError(f"entropy: spectrum has negative weight {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    nz = w[w > 0.0]
    if nz.size == 0:
        return 0.0
    return float(-np.sum(nz * np.log(nz)) / _LN2)


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy in bits of a density operator.

    Accepts a DensityOperator, a MultipartiteOperator, or a raw matrix;
    non-DensityOperator inputs are validated first.
    """
    if not isinstance(rho, DensityOperator):
        m = _as_matrix(rho)
        dims = rho.dims if isinstance(rho, MultipartiteOperator) else (m.shape[0],)
        rho = as_state(m, dims)
    w = np.linalg.eigvalsh(rho.mat)
    return entropy_from_spectrum(w)
