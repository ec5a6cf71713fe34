import math

import numpy as np
import pytest

from photonloop.channels import (
    CavityModel,
    DetectorModel,
    SpdcCoupling,
    apply_loss,
    herald_distribution,
    pair_outcome_probabilities,
    rotate_cavity,
    spdc_outcome_operators,
    subtract_attempt,
)
from photonloop.states import (
    H_AXIS,
    V_AXIS,
    JonesUnitary,
    PolarizationCoefficients,
    PolarizedFockState,
    apply_creation,
    apply_rotation,
    lattice_index,
    lattice_tables,
    normalize,
    vacuum,
)


def random_state(cutoff, rng, definite_total=None):
    dim, nh, nv = lattice_tables(cutoff)
    amp = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    if definite_total is not None:
        amp[(nh + nv) != definite_total] = 0.0
    amp /= np.linalg.norm(amp)
    return PolarizedFockState(cutoff=cutoff, amp=amp, normalized=True)


def density(branches, cutoff):
    dim, _, _ = lattice_tables(cutoff)
    rho = np.zeros((dim, dim), dtype=np.complex128)
    for b in branches:
        rho += np.outer(b.state.amp, b.state.amp.conj())
    return rho


def two_photon_distorted_state(cutoff=4):
    # |1_H 1_V> + sqrt(2) |0_H 2_V>, the mid-build two-photon state
    dim, _, _ = lattice_tables(cutoff)
    amp = np.zeros(dim, dtype=np.complex128)
    amp[lattice_index(1, 1)] = 1.0
    amp[lattice_index(0, 2)] = math.sqrt(2.0)
    return PolarizedFockState(cutoff=cutoff, amp=amp)


def test_coupling_validation():
    SpdcCoupling(0.3)
    with pytest.raises(ValueError):
        SpdcCoupling(0.6)
    with pytest.raises(ValueError):
        SpdcCoupling(-0.1)


def test_k1_on_vacuum():
    ops = spdc_outcome_operators(SpdcCoupling(0.1))
    out = ops.k1(vacuum(3))
    assert abs(out.amplitude(1, 0) - (-0.1)) < 1e-15
    branches = ops.outcomes(vacuum(3))
    assert abs(branches[1].weight - 0.01 / (1 + 0.1 ** 4 / 2)) < 1e-6


def test_k2_on_vacuum():
    ops = spdc_outcome_operators(SpdcCoupling(0.2))
    out = ops.k2(vacuum(3))
    assert abs(out.amplitude(2, 0) - (0.2 ** 2 / 2) * math.sqrt(2)) < 1e-15


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, 0.3])
def test_no_pair_map_regression(eps):
    # K0 on |1_H 1_V> + sqrt2 |0_H 2_V>:
    # (1 - eps^2) on (1,1) and (1 - eps^2/2) sqrt2 on (0,2), exactly.
    s = two_photon_distorted_state()
    out = spdc_outcome_operators(SpdcCoupling(eps)).k0(s)
    assert out.amplitude(1, 1) == 1.0 - eps ** 2
    assert abs(out.amplitude(0, 2) - (1.0 - eps ** 2 / 2.0) * math.sqrt(2)) < 1e-15


def test_k0_general_axis_matches_rotated_frame():
    rng = np.random.default_rng(5)
    s = random_state(4, rng)
    ang = 0.7
    axis = PolarizationCoefficients.linear(ang)
    out = spdc_outcome_operators(SpdcCoupling(0.2, pump_axis=axis)).k0(s)
    # compare: rotate so the axis becomes H, damp, rotate back
    u = JonesUnitary.rotation(ang)
    s_al = apply_rotation(s, JonesUnitary(u.matrix.conj().T))
    ref = spdc_outcome_operators(SpdcCoupling(0.2)).k0(s_al)
    ref = apply_rotation(ref, u)
    np.testing.assert_allclose(out.amp, ref.amp, atol=1e-12)


def test_outcome_completeness_property():
    rng = np.random.default_rng(11)
    for _ in range(20):
        cut = int(rng.integers(2, 6))
        low = random_state(cut, rng)
        pad = (cut + 3) * (cut + 4) // 2 - len(low.amp)
        s = PolarizedFockState(cutoff=cut + 2, amp=np.pad(low.amp, (0, pad)), normalized=True)
        eps = rng.uniform(0.0, 0.3)
        for model in ("born", "pump-set"):
            branches = spdc_outcome_operators(SpdcCoupling(eps)).outcomes(s, model)
            assert abs(sum(b.weight for b in branches) - 1.0) < 1e-10
        T = rng.uniform(0.0, 1.0)
        lb = apply_loss(s, T)
        assert abs(sum(b.weight for b in lb) - 1.0) < 1e-10
        r = rng.uniform(0.0, 1.0)
        sb = subtract_attempt(s, r)
        assert abs(sum(b.weight for b in sb) - 1.0) < 1e-10


def test_loss_basics():
    one_h = normalize(apply_creation(vacuum(3), H_AXIS))
    b = apply_loss(one_h, 1.0)
    assert len(b) == 1 and b[0].weight == 1.0
    b = apply_loss(one_h, 0.9)
    w = {lab: br.weight for lab, br in ((br.label, br) for br in b)}
    assert abs(w[(0, 0)] - 0.9) < 1e-12
    assert abs(w[(1, 0)] - 0.1) < 1e-12
    two_h = normalize(apply_creation(apply_creation(vacuum(3), H_AXIS), H_AXIS))
    b = apply_loss(two_h, 0.9)
    by_total = {}
    for br in b:
        by_total[sum(br.label)] = by_total.get(sum(br.label), 0.0) + br.weight
    assert abs(by_total[0] - 0.81) < 1e-12
    assert abs(by_total[1] - 0.18) < 1e-12
    assert abs(by_total[2] - 0.01) < 1e-12


def test_loss_commutes_with_rotation():
    rng = np.random.default_rng(2)
    for _ in range(5):
        s = random_state(4, rng)
        ang = rng.uniform(0, math.pi)
        T = rng.uniform(0.3, 1.0)
        rho1 = density(apply_loss(rotate_cavity(s, ang), T), 4)
        pre = apply_loss(s, T)
        rho2 = density(
            [type(b)(b.label, b.weight, rotate_cavity(b.state, ang)) for b in pre], 4
        )
        np.testing.assert_allclose(rho1, rho2, atol=1e-10)


def test_herald_distribution():
    d = herald_distribution(2, DetectorModel(efficiency=0.95))
    assert abs(d[2] - 0.9025) < 1e-12
    assert abs(d[1] - 0.095) < 1e-12
    assert abs(d[0] - 0.0025) < 1e-12
    assert herald_distribution(0, DetectorModel(efficiency=0.3)) == {0: 1.0}
    t = herald_distribution(2, DetectorModel(efficiency=0.9, mode="threshold"))
    assert abs(t[1] - 0.99) < 1e-12
    assert abs(t[0] - 0.01) < 1e-12
    ident = herald_distribution(3, DetectorModel(efficiency=1.0))
    assert abs(ident[3] - 1.0) < 1e-12
    assert sum(abs(v) for k, v in ident.items() if k != 3) < 1e-15


def test_herald_with_dark_counts():
    d = herald_distribution(1, DetectorModel(efficiency=0.9, dark_rate=0.05))
    assert abs(sum(d.values()) - 1.0) < 1e-12
    assert d[2] > 0  # one detected + one dark


def test_rotate_cavity():
    one_h = normalize(apply_creation(vacuum(2), H_AXIS))
    same = rotate_cavity(one_h, 0.0)
    np.testing.assert_allclose(same.amp, one_h.amp, atol=1e-15)
    up = rotate_cavity(one_h, math.pi / 2)
    assert abs(abs(up.amplitude(0, 1)) - 1.0) < 1e-12
    two_steps = rotate_cavity(rotate_cavity(one_h, math.pi / 4), math.pi / 4)
    np.testing.assert_allclose(two_steps.amp, up.amp, atol=1e-12)


def test_rotate_poincare_variant():
    one_h = normalize(apply_creation(vacuum(2), H_AXIS))
    step = rotate_cavity(one_h, math.pi / 4, variant="poincare-45-axis")
    assert abs(step.amplitude(1, 0) - math.cos(math.pi / 4)) < 1e-12
    assert abs(step.amplitude(0, 1) - 1j * math.sin(math.pi / 4)) < 1e-12


def test_subtract_attempt():
    one_h = normalize(apply_creation(vacuum(3), H_AXIS))
    b = subtract_attempt(one_h, 0.0)
    assert len(b) == 1 and b[0].label == 0 and b[0].weight == 1.0
    b = subtract_attempt(one_h, 0.1)
    w = {br.label: br for br in b}
    assert abs(w[0].weight - 0.9) < 1e-12
    assert abs(w[1].weight - 0.1) < 1e-12
    assert abs(normalize(w[1].state).amplitude(0, 0) - 1.0) < 1e-12
    two_h = normalize(apply_creation(apply_creation(vacuum(3), H_AXIS), H_AXIS))
    b = subtract_attempt(two_h, 0.01)
    w = {br.label: br for br in b}
    one_left = normalize(w[1].state)
    assert abs(abs(one_left.amplitude(1, 0)) - 1.0) < 1e-12


def test_subtract_does_not_touch_other_mode():
    mixed = normalize(apply_creation(apply_creation(vacuum(3), V_AXIS), H_AXIS))
    b = subtract_attempt(mixed, 0.2)
    w = {br.label: br for br in b}
    assert abs(w[1].weight - 0.2) < 1e-12  # only the single H photon can reflect
    assert abs(abs(normalize(w[1].state).amplitude(0, 1)) - 1.0) < 1e-12


def test_cavity_detector_validation():
    with pytest.raises(ValueError):
        CavityModel(transmission=1.2)
    with pytest.raises(ValueError):
        DetectorModel(efficiency=-0.1)
    with pytest.raises(ValueError):
        DetectorModel(mode="clicky")


def test_pump_set_probabilities_sum():
    for eps in (0.0, 0.05, 0.3, 0.5):
        p0, p1, p2 = pair_outcome_probabilities(eps)
        assert abs(p0 + p1 + p2 - 1.0) < 1e-15
