"""Partial-transpose certification: membership, extremality, noise robustness."""

import math

import numpy as np
import pytest

import boundkey as bk
from boundkey.linalg import max_abs_distance

P1 = 2.0 - math.sqrt(2.0)

# frozen regression values
MIN_EIG_BELOW = -0.0030177669529663567  # mixing weight P1 - 0.01
MIN_EIG_ABOVE = -0.004267766952966375  # mixing weight P1 + 0.01
NOISE_THRESHOLD = 0.004088211059570312  # white-noise weight where the bound dies


def random_unitary(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def test_flagship_is_transpose_invariant():
    rho = bk.rho_h()
    is_ppt, min_eig = bk.ppt_check(rho)
    assert is_ppt
    assert min_eig > -1e-10
    assert bk.ppt_invariance(rho) < 1e-10


def test_family_members_are_transpose_invariant():
    rng = np.random.default_rng(30)
    for d in (2, 3):
        for _ in range(5):
            rho, _, _ = bk.rho_u(random_unitary(d, rng))
            assert bk.ppt_invariance(rho) < 1e-10


def test_bell_state_is_detected():
    bells = bk.bell_states()
    bell = bk.as_state(np.outer(bells[0], bells[0].conj()), (2, 2))
    is_ppt, min_eig = bk.ppt_check(bell)
    assert not is_ppt
    assert abs(min_eig + 0.5) < 1e-12


def test_transpose_cut_follows_labels():
    # on a two-party state the cut defaults to the second subsystem; passing
    # it explicitly must agree
    bells = bk.bell_states()
    bell = bk.as_state(np.outer(bells[0], bells[0].conj()), (2, 2))
    auto = bk.ppt_check(bell)
    manual = bk.ppt_check(bell, cut=(1,))
    assert auto == manual


def test_extremality_scan_brackets_the_flagship_weight():
    mix = bk.mixture_from_unitary(bk.hadamard())
    pts = bk.extremality_scan(mix.x1, mix.x2, [P1 - 0.01, P1, P1 + 0.01])
    below, middle, above = pts
    assert below.is_npt and abs(below.min_eig - MIN_EIG_BELOW) < 1e-12
    assert not middle.is_npt and abs(middle.min_eig) < 1e-10
    assert above.is_npt and abs(above.min_eig - MIN_EIG_ABOVE) < 1e-12


def test_flagship_weight_is_the_unique_transpose_positive_point():
    mix = bk.mixture_from_unitary(bk.hadamard())
    grid = np.linspace(0.01, 0.99, 201).tolist() + [P1]
    pts = bk.extremality_scan(mix.x1, mix.x2, grid)
    positive = [p.weight for p in pts if not p.is_npt]
    assert len(positive) == 1
    assert abs(positive[0] - P1) < 1e-12


def test_extremality_scan_rejects_degenerate_weights():
    mix = bk.mixture_from_unitary(bk.hadamard())
    with pytest.raises(ValueError):
        bk.extremality_scan(mix.x1, mix.x2, [0.0])
    with pytest.raises(ValueError):
        bk.extremality_scan(mix.x1, mix.x2, [1.0])


def test_depolarized_transpose_spectrum_shift():
    # the flagship equals its own partial transpose, so white noise moves the
    # smallest transpose eigenvalue to exactly noise/16
    rho = bk.rho_h()
    base = bk.ppt_check(rho)[1]
    for noise in (1e-4, 1e-3, 1e-2, 0.1):
        shifted = bk.ppt_check(bk.depolarize(rho, noise))[1]
        expect = noise / 16.0 + (1.0 - noise) * base
        assert abs(shifted - expect) < 1e-12
        assert abs(shifted - noise / 16.0) < 1e-10


def test_twirl_hashing_bound_closure():
    rho = bk.rho_h()
    bound = bk.twirl_hashing_bound(rho)
    assert abs(bound(rho) - (1.0 - bk.binary_entropy(P1))) < 1e-10
    # more white noise, less key
    values = [bound(bk.depolarize(rho, x)) for x in (0.0, 0.002, 0.004, 0.006)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_robustness_scan_report():
    rho = bk.rho_h()
    grid = np.linspace(0.0, 0.008, 9)
    report = bk.robustness_scan(rho, grid)
    assert len(report.points) == 9
    assert all(p.min_eig > -1e-10 for p in report.points)  # noise keeps PPT
    signs = [p.key_bound > 0.0 for p in report.points]
    assert signs[0] and not signs[-1]
    assert abs(report.largest_positive_noise - 0.004) < 1e-12


def test_robustness_threshold_regression():
    rho = bk.rho_h()
    threshold = bk.robustness_threshold(rho)
    assert abs(threshold - NOISE_THRESHOLD) < 1e-9
    bound = bk.twirl_hashing_bound(rho)
    assert bound(bk.depolarize(rho, threshold - 1e-5)) > 0.0
    assert bound(bk.depolarize(rho, threshold + 1e-5)) < 0.0
