"""LFT closure identities, block merging, wiring, and sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratopoint.lft import (
    Affine,
    DeltaBlock,
    DeltaStructure,
    UncertainParam,
    UncertainSystem,
    as_tuners,
    close_with_system,
    instantiate,
    interconnect,
    lower_lft,
    sample_delta,
    u_add,
    u_append,
    u_from_ss,
    u_hstack,
    u_inverse,
    u_mul,
    u_vstack,
    u_wire,
    umat_affine,
    umat_affine_diag,
    umat_const,
    upper_lft,
)
from stratopoint.lti import freq_response, gain_block, integrator, poles, ss

MASS = UncertainParam("mass", 10.0, 1.0)
LEN = UncertainParam("len", 2.0, 0.2)
STIFF = UncertainParam("stiff", 5.0, 0.5)


def rand_affine(rng, params):
    body = Affine.of(float(rng.uniform(0.5, 3.0)))
    for p in params:
        body = body + Affine.param(p).scale(float(rng.uniform(-0.4, 0.4)))
    return body


class TestAffine:
    def test_arithmetic(self):
        e = Affine.param(MASS) + Affine.param(LEN) - 3.0
        assert e.value({}) == pytest.approx(9.0)
        assert e.value({"mass": 1.0, "len": -1.0}) == pytest.approx(9.8)

    def test_terms_collapse(self):
        e = Affine.param(MASS) + Affine.param(MASS).scale(-1.0)
        assert e.is_const
        assert e.value({"mass": 0.7}) == pytest.approx(0.0)
        e2 = Affine.param(MASS) + Affine.param(MASS)
        assert e2.value({"mass": 0.5}) == pytest.approx(21.0)

    def test_bounds(self):
        lo, hi = Affine.param(MASS).bounds()
        assert lo == pytest.approx(9.0)
        assert hi == pytest.approx(11.0)


class TestStaticAlgebra:
    def test_affine_closure(self):
        u = umat_affine(Affine.param(MASS))
        for d in (-1.0, -0.25, 0.0, 0.6, 1.0):
            closed = upper_lft(u, {"mass": d})
            assert closed.d[0, 0] == pytest.approx(MASS.value(d))

    def test_mul_matches_products(self):
        rng = np.random.default_rng(1)
        a = umat_affine_diag(rand_affine(rng, [MASS, LEN]), 3)
        b = umat_affine_diag(rand_affine(rng, [LEN, STIFF]), 3)
        c = u_mul(a, b)
        for _ in range(5):
            dv = {n: float(rng.uniform(-1, 1)) for n in ("mass", "len", "stiff")}
            av = upper_lft(a, dv).d
            bv = upper_lft(b, dv).d
            cv = upper_lft(c, dv).d
            assert np.allclose(cv, av @ bv, atol=1e-12)

    def test_occurrences_add_on_product(self):
        a = umat_affine_diag(Affine.param(LEN), 2)
        b = umat_affine_diag(Affine.param(LEN) + 1.0, 2)
        c = u_mul(a, b)
        assert c.delta.occurrences("len") == 4

    def test_shared_block_merges_contiguously(self):
        a = umat_affine_diag(Affine.param(MASS), 1)
        b = umat_affine_diag(Affine.param(LEN), 1)
        c = umat_affine_diag(Affine.param(MASS) + 2.0, 1)
        out = u_mul(u_mul(a, b), c)
        assert out.delta.names == ("mass", "len")
        assert out.delta.occurrences("mass") == 2

    def test_add_vstack_hstack(self):
        rng = np.random.default_rng(2)
        a = umat_affine_diag(rand_affine(rng, [MASS]), 2)
        b = umat_affine_diag(rand_affine(rng, [LEN]), 2)
        dv = {"mass": 0.3, "len": -0.9}
        av = upper_lft(a, dv).d
        bv = upper_lft(b, dv).d
        assert np.allclose(upper_lft(u_add(a, b), dv).d, av + bv)
        assert np.allclose(upper_lft(u_vstack(a, b), dv).d, np.vstack([av, bv]))
        assert np.allclose(upper_lft(u_hstack(a, b), dv).d, np.hstack([av, bv]))

    def test_inverse(self):
        rng = np.random.default_rng(3)
        base = umat_affine_diag(rand_affine(rng, [MASS, STIFF]), 2)
        skew = umat_const(np.array([[0.0, 0.4], [-0.4, 0.0]]))
        a = u_add(base, skew)
        inv = u_inverse(a)
        for _ in range(4):
            dv = {"mass": float(rng.uniform(-1, 1)),
                  "stiff": float(rng.uniform(-1, 1))}
            av = upper_lft(a, dv).d
            iv = upper_lft(inv, dv).d
            assert np.allclose(iv, np.linalg.inv(av), atol=1e-10)

    def test_const_has_no_blocks(self):
        c = umat_const(np.eye(3))
        assert c.delta.total_dim == 0


class TestClosure:
    def test_delta_zero_recovers_nominal_block(self):
        rng = np.random.default_rng(4)
        d = rng.standard_normal((4, 4))
        m = ss(np.zeros((0, 0)), np.zeros((0, 4)), np.zeros((4, 0)), d)
        usys = UncertainSystem(m, DeltaStructure((DeltaBlock(MASS, 2),)))
        closed = upper_lft(usys, {"mass": 0.0})
        assert np.allclose(closed.d, d[2:, 2:])

    def test_closure_formula_against_direct_inverse(self):
        rng = np.random.default_rng(5)
        n, k, mu, py = 3, 2, 2, 2
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, k + mu))
        c = rng.standard_normal((k + py, n))
        d = 0.3 * rng.standard_normal((k + py, k + mu))
        m = ss(a, b, c, d)
        usys = UncertainSystem(m, DeltaStructure((DeltaBlock(LEN, k),)))
        delta = 0.77
        closed = upper_lft(usys, {"len": delta})
        dmat = delta * np.eye(k)
        x = np.linalg.inv(np.eye(k) - d[:k, :k] @ dmat)
        a_exp = a + b[:, :k] @ dmat @ x @ c[:k, :]
        assert np.allclose(closed.a, a_exp, atol=1e-12)

    def test_out_of_range_delta_rejected(self):
        u = umat_affine(Affine.param(MASS))
        with pytest.raises(ValueError):
            upper_lft(u, {"mass": 1.5})
        ok = upper_lft(u, {"mass": 1.5}, check_range=False)
        assert ok.d[0, 0] == pytest.approx(11.5)

    def test_singular_closure_rejected(self):
        d = np.array([[1.0, 1.0], [1.0, 0.0]])
        m = ss(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)), d)
        usys = UncertainSystem(m, DeltaStructure((DeltaBlock(MASS, 1),)))
        with pytest.raises(ValueError):
            upper_lft(usys, {"mass": 1.0})

    def test_tuner_closure_physical_values(self):
        tau = UncertainParam("tau", 0.1, 0.05)
        usys = as_tuners(umat_affine(Affine.param(tau)))
        assert lower_lft(usys, {"tau": 0.15}).d[0, 0] == pytest.approx(0.15)
        assert lower_lft(usys, {"tau": 0.08}).d[0, 0] == pytest.approx(0.08)

    def test_instantiate_both_groups(self):
        tau = UncertainParam("tau", 0.2, 0.1)
        plant = umat_affine(Affine.param(MASS))
        tun = as_tuners(umat_affine(Affine.param(tau)))
        both = u_append([plant, tun])
        closed = instantiate(both, {"mass": -1.0}, {"tau": 0.3})
        assert np.allclose(np.diag(closed.d), [9.0, 0.3])


class TestWiring:
    def test_series_by_name(self):
        i1 = u_from_ss(integrator().renamed(["u1"], ["y1"]))
        i2 = u_from_ss(integrator().renamed(["u2"], ["y2"]))
        ser = u_wire(u_append([i1, i2]), links=[("y1", "u2", 1.0)])
        v = freq_response(ser.m, np.array([0.5]))
        j = ser.m.output_names.index("y2")
        assert v.values[0, j, 0] == pytest.approx(-4.0)

    def test_link_gains_sum(self):
        g = u_from_ss(gain_block(np.eye(1)).renamed(["u"], ["y"]))
        src = u_from_ss(gain_block(np.eye(1)).renamed(["a"], ["b"]))
        combined = u_append([g, src])
        out = u_wire(combined, links=[("b", "u", 2.0), ("b", "u", 0.5)])
        assert out.m.d[out.m.output_names.index("y"), 0] == pytest.approx(2.5)

    def test_constraint_elimination(self):
        # force input solved so that acc output tracks 2*cmd: plant 1/s^2
        dbl = ss(np.array([[0.0, 1.0], [0.0, 0.0]]),
                 np.array([[0.0, 0.0], [1.0, 0.0]]),
                 np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
                 np.array([[0.0, 0.0], [1.0, 0.0], [1.0, -2.0]]),
                 ["f", "cmd"], ["pos", "acc", "res"])
        solved = u_wire(u_from_ss(dbl), links=[], solve=[("res", "f")])
        assert solved.m.input_names == ("cmd",)
        v = freq_response(solved.m, np.array([1.0]))
        assert v.values[0, 0, 0] == pytest.approx(-2.0)

    def test_singular_constraint_rejected(self):
        g = ss(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((2, 0)),
               np.array([[0.0], [1.0]]), ["f"], ["res", "y"])
        with pytest.raises(ValueError):
            u_wire(u_from_ss(g), links=[], solve=[("res", "f")])

    def test_wired_port_cannot_stay_external(self):
        i1 = u_from_ss(integrator().renamed(["u1"], ["y1"]))
        i2 = u_from_ss(integrator().renamed(["u2"], ["y2"]))
        both = u_append([i1, i2])
        with pytest.raises(ValueError):
            u_wire(both, links=[("y1", "u2", 1.0)], ext_in=["u1", "u2"])

    def test_delta_channels_survive_wiring(self):
        spring = umat_affine(Affine.param(STIFF))
        spring = spring.renamed(["x"], ["force"])
        plant = u_from_ss(ss(np.array([[0.0, 1.0], [0.0, 0.0]]),
                             np.array([[0.0], [1.0]]),
                             np.array([[1.0, 0.0]]), np.array([[0.0]]),
                             ["f_in"], ["x_out"]))
        both = u_append([plant, spring])
        cl = u_wire(both, links=[("x_out", "x", 1.0), ("force", "f_in", -1.0)])
        assert cl.delta.names == ("stiff",)
        for d in (-1.0, 0.0, 1.0):
            closed = upper_lft(cl, {"stiff": d})
            w2 = STIFF.value(d)
            assert np.allclose(sorted(np.imag(poles(closed))),
                               [-np.sqrt(w2), np.sqrt(w2)], atol=1e-9)

    def test_interconnect_labels(self):
        a = u_from_ss(integrator().renamed(["u"], ["y"]))
        b = u_from_ss(gain_block(np.array([[3.0]])).renamed(["u"], ["y"]))
        out = interconnect({"i": a, "g": b}, [("i/y", "g/u")])
        assert out.m.input_names == ("i/u",)
        assert out.m.output_names == ("g/y",)
        v = freq_response(out.m, np.array([1.0]))
        assert v.values[0, 0, 0] == pytest.approx(-3.0j)

    def test_close_with_system(self):
        plant = u_from_ss(integrator().renamed(["u"], ["y"]))
        ctrl = gain_block(np.array([[5.0]]))
        cl = close_with_system(plant, ctrl, ["y"], ["u"], sign=-1.0)
        assert np.allclose(poles(cl.m), [-5.0])


class TestAppendMerge:
    def test_blocks_merge_across_subsystems(self):
        a = umat_affine_diag(Affine.param(MASS), 2)
        b = umat_affine_diag(Affine.param(MASS) + 1.0, 3)
        out = u_append([a, b])
        assert out.delta.names == ("mass",)
        assert out.delta.occurrences("mass") == 5
        dv = {"mass": 0.4}
        closed = upper_lft(out, dv)
        want = np.diag([MASS.value(0.4)] * 2 + [MASS.value(0.4) + 1.0] * 3)
        assert np.allclose(closed.d, want)

    def test_conflicting_param_definitions_rejected(self):
        other = UncertainParam("mass", 10.0, 2.0)
        a = umat_affine(Affine.param(MASS))
        b = umat_affine(Affine.param(other))
        with pytest.raises(ValueError):
            u_append([a, b])

    def test_label_prefixes(self):
        a = u_from_ss(integrator().renamed(["u"], ["y"]))
        out = u_append([a, a], labels=["top", "bot"])
        assert out.m.input_names == ("top/u", "bot/u")


class TestSampling:
    def test_small_structure_vertices_first(self):
        st3 = DeltaStructure((DeltaBlock(MASS, 1), DeltaBlock(LEN, 2)))
        s = sample_delta(st3, 6, seed=0)
        verts = [tuple(sorted(d.items())) for d in s[:4]]
        assert len(set(verts)) == 4
        assert all(abs(v) == 1.0 for d in s[:4] for v in d.values())
        assert all(abs(v) < 1.0 for d in s[4:] for v in d.values())

    def test_large_structure_mixed(self):
        params = [UncertainParam(f"p{i}", 0.0, 1.0) for i in range(12)]
        big = DeltaStructure(tuple(DeltaBlock(p, 1) for p in params))
        s = sample_delta(big, 10, seed=1)
        assert all(abs(v) == 1.0 for d in s[:5] for v in d.values())
        assert all(abs(v) < 1.0 for d in s[5:] for v in d.values())

    def test_deterministic(self):
        st3 = DeltaStructure((DeltaBlock(MASS, 1), DeltaBlock(LEN, 1)))
        a = sample_delta(st3, 20, seed=42)
        b = sample_delta(st3, 20, seed=42)
        assert a == b
        c = sample_delta(st3, 20, seed=43)
        assert a != c


@settings(max_examples=30, deadline=None)
@given(d1=st.floats(min_value=-1.0, max_value=1.0),
       d2=st.floats(min_value=-1.0, max_value=1.0))
def test_product_closure_property(d1, d2):
    a = umat_affine(Affine.param(MASS))
    b = umat_affine(Affine.param(LEN) + 0.5)
    c = u_mul(a, b)
    dv = {"mass": d1, "len": d2}
    got = upper_lft(c, dv).d[0, 0]
    want = MASS.value(d1) * (LEN.value(d2) + 0.5)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
