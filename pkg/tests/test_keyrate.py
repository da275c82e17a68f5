"""Twisting, privacy squeezing, key-rate bounds, recurrence, E_r search."""

import math

import numpy as np
import pytest

import boundkey as bk
from boundkey.linalg import max_abs_distance

P1 = 2.0 - math.sqrt(2.0)
P2 = math.sqrt(2.0) - 1.0

# frozen regression values for the flagship state
DW_SQUEEZED = 0.02133991564984052
DW_SHIELD_TO_EVE = -0.9786600843501547
DW_PURIFIER_ONLY = 0.02133991564984055
RECURRENCE_PER_COPY = 0.02102732800722851
ER_SINGLE_RESTART = 0.11599792738422599


def random_unitary(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def flagship_twisting():
    mix = bk.mixture_from_unitary(bk.hadamard())
    return bk.canonical_twisting(mix.x1, mix.x2)


def test_canonical_twisting_blocks_are_unitary_and_positivize():
    mix = bk.mixture_from_unitary(bk.hadamard())
    tau = bk.canonical_twisting(mix.x1, mix.x2)
    for u in (tau.u00, tau.u01, tau.u10, tau.u11):
        assert max_abs_distance(u @ u.conj().T, np.eye(4)) < 1e-12
    for u, x in ((tau.u00, mix.x1), (tau.u01, mix.x2)):
        prod = u @ x
        assert max_abs_distance(prod, prod.conj().T) < 1e-12
        assert np.linalg.eigvalsh(prod)[0] > -1e-12


def test_privacy_squeeze_concentrates_flagship():
    sq = bk.privacy_squeeze(bk.rho_h(), flagship_twisting())
    assert sq.dims == (2, 2)
    bells = bk.bell_states()
    expect = P1 * np.outer(bells[0], bells[0].conj()) + P2 * np.outer(
        bells[2], bells[2].conj()
    )
    assert max_abs_distance(sq.mat, expect) < 1e-12


def test_squeezing_never_changes_key_statistics():
    # twisting commutes with the key measurement: the AB diagonal blocks keep
    # their traces
    rho = bk.rho_h()
    sq = bk.privacy_squeeze(rho, flagship_twisting())
    direct = bk.partial_trace(rho, [2, 3])
    assert max_abs_distance(
        np.diag(sq.mat).real, np.diag(direct.mat).real
    ) < 1e-12


def test_ccq_structure():
    ccq = bk.ccq_from_state(bk.rho_h())
    assert abs(ccq.p.sum() - 1.0) < 1e-12
    assert np.all(ccq.p >= -1e-15)
    for dm in ccq.eve.values():
        assert abs(np.trace(dm).real - 1.0) < 1e-10
        assert np.linalg.eigvalsh(dm)[0] > -1e-10


def test_devetak_winter_flagship_values():
    rho = bk.rho_h()
    sq = bk.privacy_squeeze(rho, flagship_twisting())
    assert abs(bk.dw_rate(bk.ccq_from_state(sq)) - DW_SQUEEZED) < 1e-12
    # handing the shield to the eavesdropper destroys the rate ...
    assert abs(bk.dw_rate(bk.ccq_from_state(rho, conservative=True)) - DW_SHIELD_TO_EVE) < 1e-12
    # ... while against the purifying system alone the squeezed rate survives
    assert abs(bk.dw_rate(bk.ccq_from_state(rho, conservative=False)) - DW_PURIFIER_ONLY) < 1e-12


def test_perfect_key_bit_rates():
    w = bk.flip_operator(bk.hadamard())
    pb = bk.pbit_from_X(w / bk.trace_norm(w))
    x1 = pb.mat[0:4, 12:16]
    x2 = pb.mat[4:8, 8:12]
    tau = bk.canonical_twisting(x1, x2)  # x2 vanishes for a pure private bit
    sq = bk.privacy_squeeze(pb, tau)
    assert abs(bk.dw_rate(bk.ccq_from_state(sq)) - 1.0) < 1e-12


def test_squeezed_rate_formula_for_random_family_members():
    rng = np.random.default_rng(20)
    for d in (2, 3):
        for _ in range(5):
            mix = bk.mixture_from_unitary(random_unitary(d, rng))
            tau = bk.canonical_twisting(mix.x1, mix.x2)
            sq = bk.privacy_squeeze(bk.rho_from_mixture(mix), tau)
            rate = bk.dw_rate(bk.ccq_from_state(sq))
            assert abs(rate - (1.0 - bk.binary_entropy(mix.p1))) < 1e-6


def test_bell_twirl_weights():
    sq = bk.privacy_squeeze(bk.rho_h(), flagship_twisting())
    spectrum = bk.bell_twirl(sq)
    assert max_abs_distance(spectrum.weights, np.array([P1, 0.0, P2, 0.0])) < 1e-12
    assert abs(1.0 - spectrum.entropy() - (1.0 - bk.binary_entropy(P1))) < 1e-12
    # twirling is idempotent: a Bell-diagonal state keeps its weights
    bells = bk.bell_states()
    diag = sum(
        w * np.outer(v, v.conj()) for w, v in zip([0.4, 0.3, 0.2, 0.1], bells)
    )
    again = bk.bell_twirl(bk.as_state(diag, (2, 2)))
    assert max_abs_distance(again.weights, np.array([0.4, 0.3, 0.2, 0.1])) < 1e-12


def test_certified_bounds_on_exact_parameters():
    rep = bk.certified_bounds([P1 / 2, P2 / 2, P2 / 2, P1 / 2], P1 / 2, 0.0, P2 / 2, 0.0)
    assert abs(rep.twirl_hashing - DW_SQUEEZED) < 1e-10
    assert abs(rep.info_minus_twirl_entropy - (1.0 - 2.0 * bk.binary_entropy(P1))) < 1e-12
    assert rep.info_minus_twirl_entropy < 0.0
    assert abs(rep.recurrence_acceptance - (9.0 - 6.0 * math.sqrt(2.0))) < 1e-12
    assert abs(rep.recurrence_per_copy_rate - RECURRENCE_PER_COPY) < 1e-10
    assert rep.two_way_flag


def test_recurrence_step_closed_form():
    sq = bk.privacy_squeeze(bk.rho_h(), flagship_twisting())
    ccq = bk.ccq_from_state(sq)
    out, per_copy = bk.recurrence_step(ccq)
    parity = np.array([ccq.p[0, 0] + ccq.p[1, 1], ccq.p[0, 1] + ccq.p[1, 0]])
    acceptance = float(parity[0] ** 2 + parity[1] ** 2)
    assert abs(acceptance - (9.0 - 6.0 * math.sqrt(2.0))) < 1e-12
    # post-selected error weight is exactly 1/3 for the flagship parameters
    assert abs(out.p[0, 1] + out.p[1, 0] - 1.0 / 3.0) < 1e-12
    assert abs(per_copy - RECURRENCE_PER_COPY) < 1e-12
    # two-way post-processing does not beat the one-way squeezed rate here
    assert per_copy < DW_SQUEEZED


def test_relative_entropy_basics():
    bells = bk.bell_states()
    bell = bk.as_state(np.outer(bells[0], bells[0].conj()), (2, 2))
    flat = bk.as_state(np.eye(4) / 4.0, (2, 2))
    assert abs(bk.rel_entropy(bell, flat) - 2.0) < 1e-10
    assert abs(bk.rel_entropy(flat, flat)) < 1e-12
    rng = np.random.default_rng(21)
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    m = g @ g.conj().T
    rho = bk.as_state(m / np.trace(m).real, (2, 2))
    assert bk.rel_entropy(rho, flat) >= -1e-12


def test_er_search_is_deterministic_and_witnessed():
    rho = bk.rho_h()
    result = bk.er_upper_bound(rho, budget_seconds=None, restarts=1, seed=5)
    assert result.restarts_completed == 1
    assert abs(result.value - ER_SINGLE_RESTART) < 1e-12
    # the witness must certify the bound: an explicitly separable state whose
    # relative entropy to the flagship equals the reported value
    w = result.witness
    assert w.noise_weight >= 0.0
    assert np.all(w.weights >= 0.0)
    assert abs(w.noise_weight + w.weights.sum() - 1.0) < 1e-9
    assert np.max(np.abs(np.linalg.norm(w.vectors_a, axis=1) - 1.0)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(w.vectors_b, axis=1) - 1.0)) < 1e-12
    sigma = w.sigma()
    assert abs(bk.rel_entropy(rho, sigma) - result.value) < 1e-9
    # an upper bound on E_r can never undercut the certified key rate
    assert result.value > DW_SQUEEZED


def test_er_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bk.er_upper_bound(bk.rho_h(), budget_seconds=None, restarts=0, seed=1)
