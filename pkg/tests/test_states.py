import math

import numpy as np
import pytest

from photonloop.states import (
    CapacityError,
    CreationSpec,
    JonesUnitary,
    PolarizationCoefficients,
    UndefinedFidelityError,
    apply_annihilation,
    apply_creation,
    apply_rotation,
    build_product_state,
    circular_basis,
    fidelity,
    lattice_index,
    lattice_tables,
    mm_target,
    noon_spec,
    noon_state,
    normalize,
    number_distribution,
    overlap,
    vacuum,
)

H = PolarizationCoefficients(1.0, 0.0)
V = PolarizationCoefficients(0.0, 1.0)
DIAG = PolarizationCoefficients(1 / math.sqrt(2), 1 / math.sqrt(2))


def random_state(cutoff, rng, definite_total=None):
    dim, nh, nv = lattice_tables(cutoff)
    amp = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    if definite_total is not None:
        amp[(nh + nv) != definite_total] = 0.0
    amp /= np.linalg.norm(amp)
    st = vacuum(cutoff)
    return type(st)(cutoff=cutoff, amp=amp, normalized=True)


def test_vacuum_basics():
    v = vacuum(4)
    assert v.amplitude(0, 0) == 1.0
    assert v.squared_norm == 1.0
    assert abs(overlap(v, vacuum(4)) - 1.0) == 0.0
    v0 = vacuum(0)
    assert v0.amp.shape == (1,)
    assert v0.squared_norm == 1.0
    with pytest.raises(ValueError):
        vacuum(-1)


def test_creation_ladder():
    s = apply_creation(vacuum(4), H)
    assert s.amplitude(1, 0) == 1.0
    s2 = apply_creation(s, H)
    assert abs(s2.amplitude(2, 0) - math.sqrt(2)) < 1e-15
    # (a_H + a_V)/sqrt2 on |0,1>
    one_v = apply_creation(vacuum(4), V)
    mixed = apply_creation(one_v, DIAG)
    assert abs(mixed.amplitude(1, 1) - 1 / math.sqrt(2)) < 1e-15
    assert abs(mixed.amplitude(0, 2) - 1.0) < 1e-15


def test_creation_overflow_raises():
    s = vacuum(2)
    s = apply_creation(s, H)
    s = apply_creation(s, H)
    with pytest.raises(CapacityError):
        apply_creation(s, H)


def test_annihilation():
    one_h = apply_creation(vacuum(3), H)
    back = apply_annihilation(one_h, H)
    assert back.amplitude(0, 0) == 1.0
    dead = apply_annihilation(vacuum(3), V)
    assert dead.squared_norm == 0.0
    two_h = apply_creation(one_h, H)
    down = apply_annihilation(two_h, H)
    assert abs(down.amplitude(1, 0) - math.sqrt(2) * math.sqrt(2)) < 2e-15


def test_ladder_consistency_property():
    # a a+ along one axis acts as (n+1) on |n>
    for n in range(5):
        s = vacuum(6)
        for _ in range(n):
            s = apply_creation(s, H)
        up_down = apply_annihilation(apply_creation(s, H), H)
        np.testing.assert_allclose(up_down.amp, (n + 1) * s.amp, rtol=1e-14)


def test_rotation_basics():
    one_h = apply_creation(vacuum(3), H)
    ident = apply_rotation(one_h, JonesUnitary.identity())
    np.testing.assert_allclose(ident.amp, one_h.amp, atol=1e-15)
    quarter = apply_rotation(one_h, JonesUnitary.rotation(math.pi / 2))
    assert abs(abs(quarter.amplitude(0, 1)) - 1.0) < 1e-12
    # 45 degrees on |2,0>: amplitudes (1/2, 1/sqrt2, 1/2)
    two_h = apply_creation(one_h, H)
    rot = apply_rotation(normalize(two_h), JonesUnitary.rotation(math.pi / 4))
    assert abs(abs(rot.amplitude(2, 0)) - 0.5) < 1e-12
    assert abs(abs(rot.amplitude(1, 1)) ** 2 - 0.5) < 1e-12
    assert abs(abs(rot.amplitude(0, 2)) - 0.5) < 1e-12


def test_rotation_norm_and_composition():
    rng = np.random.default_rng(7)
    for _ in range(10):
        s = random_state(5, rng)
        a, b = rng.uniform(0, 2 * math.pi, size=2)
        ua, ub = JonesUnitary.rotation(a), JonesUnitary.rotation(b)
        r1 = apply_rotation(apply_rotation(s, ub), ua)
        r2 = apply_rotation(s, ua.compose(ub))
        assert abs(r1.squared_norm - 1.0) < 1e-12
        np.testing.assert_allclose(r1.amp, r2.amp, atol=1e-10)


def test_non_unitary_rejected():
    with pytest.raises(ValueError):
        JonesUnitary(np.array([[1.0, 0.0], [0.0, 2.0]]))


def test_overlap_and_fidelity():
    one_h = apply_creation(vacuum(3), H)
    one_v = apply_creation(vacuum(3), V)
    assert overlap(one_h, one_v) == 0.0
    s = apply_creation(vacuum(3), DIAG)
    assert abs(overlap(s, s) - s.squared_norm) < 1e-15
    with pytest.raises(UndefinedFidelityError):
        fidelity(one_h, vacuum(3) - 0 * vacuum(3) if False else _zero(3))


def _zero(cutoff):
    from photonloop.states import zero_state

    return zero_state(cutoff)


def test_product_state_and_permutation_invariance():
    spec = CreationSpec.of([(1, 0), (0, 1)])
    s = build_product_state(spec, 4)
    assert abs(abs(s.amplitude(1, 1)) - 1.0) < 1e-12
    two = build_product_state(CreationSpec.of([(1, 0), (1, 0)]), 4)
    assert abs(two.pre_norm - math.sqrt(2)) < 1e-12
    rng = np.random.default_rng(3)
    angles = rng.uniform(0, math.pi, size=4)
    fac = [PolarizationCoefficients.linear(a) for a in angles]
    ref = build_product_state(CreationSpec.of(fac), 6)
    for _ in range(4):
        perm = rng.permutation(4)
        other = build_product_state(CreationSpec.of([fac[i] for i in perm]), 6)
        assert fidelity(ref, other) > 1 - 1e-12
    with pytest.raises(CapacityError):
        build_product_state(spec, 1)


def test_noon_spec_values():
    s2 = noon_spec(2)
    assert abs(s2.factors[0].alpha - 1) < 1e-15 and abs(s2.factors[0].beta) < 1e-15
    assert abs(s2.factors[1].alpha) < 1e-15 and abs(s2.factors[1].beta - 1) < 1e-15
    s4 = noon_spec(4)
    got = [math.atan2(f.beta.real, f.alpha.real) for f in s4.factors]
    np.testing.assert_allclose(got, [0, math.pi / 4, math.pi / 2, 3 * math.pi / 4], atol=1e-12)
    s1 = noon_spec(1)
    assert len(s1) == 1 and abs(s1.factors[0].alpha - 1) < 1e-15
    with pytest.raises(ValueError):
        noon_spec(0)


@pytest.mark.parametrize("n", range(1, 11))
def test_noon_circular_structure(n):
    s = noon_state(n)
    dist = number_distribution(s, circular_basis())
    assert abs(dist[(n, 0)] - 0.5) < 1e-12
    assert abs(dist[(0, n)] - 0.5) < 1e-12
    cross = sum(p for k, p in dist.items() if k not in {(n, 0), (0, n)})
    assert cross < 1e-12


@pytest.mark.parametrize("n", range(1, 9))
def test_noon_diagonal_variant_structure(n):
    # same two-branch structure, poles at +-45 linear
    s = noon_state(n, variant="diagonal-45")
    u = JonesUnitary.rotation(-math.pi / 4)
    dist = number_distribution(s, u)
    assert abs(dist[(n, 0)] - 0.5) < 1e-12
    assert abs(dist[(0, n)] - 0.5) < 1e-12


def test_noon2_equivalent_constructions():
    built = noon_state(2, cutoff=4)
    direct = apply_creation(apply_creation(vacuum(4), H), V)
    assert fidelity(built, normalize(direct)) > 1 - 1e-12


def test_mm_target():
    t10 = mm_target(1, 0, 3)
    assert abs(abs(t10.amplitude(1, 0)) ** 2 - 0.5) < 1e-12
    assert abs(abs(t10.amplitude(0, 1)) ** 2 - 0.5) < 1e-12
    t21 = mm_target(2, 1, 4)
    assert abs(abs(t21.amplitude(2, 1)) ** 2 - 0.5) < 1e-12
    assert abs(abs(t21.amplitude(1, 2)) ** 2 - 0.5) < 1e-12
    t20 = mm_target(2, 0, 4)
    assert abs(abs(t20.amplitude(2, 0)) ** 2 - 0.5) < 1e-12
    assert abs(abs(t20.amplitude(0, 2)) ** 2 - 0.5) < 1e-12
    with pytest.raises(ValueError):
        mm_target(1, 1, 4)


def test_mm_target_mp0_is_hv_noon():
    t = mm_target(3, 0, 5)
    assert abs(abs(t.amplitude(3, 0)) ** 2 - 0.5) < 1e-12
    assert abs(abs(t.amplitude(0, 3)) ** 2 - 0.5) < 1e-12


def test_mm_factors_match_target():
    from photonloop.states import mm_factors

    for m, mp in [(1, 0), (2, 0), (2, 1), (3, 1), (4, 2)]:
        built = build_product_state(mm_factors(m, mp), m + mp + 1)
        assert fidelity(built, mm_target(m, mp, m + mp + 1)) > 1 - 1e-12


def test_number_distribution_basics():
    one_h = normalize(apply_creation(vacuum(3), H))
    d = number_distribution(one_h, JonesUnitary.identity())
    assert abs(d[(1, 0)] - 1.0) < 1e-15
    dv = number_distribution(vacuum(2), circular_basis())
    assert abs(dv[(0, 0)] - 1.0) < 1e-12
    assert abs(sum(number_distribution(one_h, circular_basis()).values()) - 1) < 1e-10
    with pytest.raises(ValueError):
        number_distribution(apply_creation(one_h, H), JonesUnitary.identity())


def test_unnormalized_axis_rejected():
    with pytest.raises(ValueError):
        PolarizationCoefficients(1.0, 1.0)


def test_lattice_index_roundtrip():
    dim, nh, nv = lattice_tables(6)
    for i in range(dim):
        assert lattice_index(int(nh[i]), int(nv[i])) == i
