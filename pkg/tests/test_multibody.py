"""Port-based multibody elements against closed forms and the energy oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratopoint.lft import Affine, UncertainParam, sample_delta, upper_lft
from stratopoint.multibody import (
    GRAV,
    JointAxis,
    LateralUnit,
    PortSpec,
    assemble,
    bifilar_suspension,
    fixed_base,
    forward_body,
    inverse_body,
    lateral_plane_modes,
    modal_frequencies,
    revolute_joint,
    terminator,
    torsion_modes,
)


def _pendulum(length, mass, actuated=True, flip=False):
    """Fixed pivot, massless rod, point bob at the given distance."""
    off = -length if flip else length
    trim = Affine.of(mass).scale(GRAV) if not isinstance(mass, Affine) \
        else mass.scale(GRAV)
    els = {
        "base": fixed_base(),
        "j": revolute_joint([JointAxis("y", (0, 1, 0), actuated=actuated)],
                            observe_states=True),
        "bob": inverse_body(mass, (0.0, 0.0, 0.0),
                            top=PortSpec("up", off, trim)),
    }
    conns = [("base", "down", "j"), ("j", "down", "bob")]
    usys, info = assemble(els, conns, ext_in=["j/act.y[0]"],
                          ext_out=["j/angle.y[0]"])
    return usys, info


class TestPendulum:
    def test_point_pendulum_frequency(self):
        usys, info = _pendulum(4.0, 3.0)
        assert info.state_names == ("j/joint.y.rate", "j/joint.y.angle")
        ev = np.linalg.eigvals(upper_lft(usys, {}).a)
        w = modal_frequencies(ev)
        assert w.shape == (1,)
        # sqrt(9.80665 / 4)
        assert w[0] == pytest.approx(1.5657785603334846, abs=1e-12)

    def test_mass_drops_out(self):
        # point pendulum frequency is mass independent; the LFT must agree
        # at every vertex even though mass channels are present
        m = UncertainParam("bob_mass", 3.0, 1.0)
        usys, _ = _pendulum(4.0, Affine.param(m))
        assert usys.delta.total_dim > 0
        for d in (-1.0, 0.0, 1.0):
            ev = np.linalg.eigvals(upper_lft(usys, {"bob_mass": d}).a)
            w = modal_frequencies(ev)
            assert w[0] == pytest.approx(np.sqrt(GRAV / 4.0), abs=1e-10)

    def test_top_heavy_diverges(self):
        # bob above the pivot: geometric stiffness flips sign
        usys, _ = _pendulum(2.0, 5.0, flip=True)
        ev = np.linalg.eigvals(upper_lft(usys, {}).a)
        ev = np.sort_complex(ev)
        lam = np.sqrt(GRAV / 2.0)
        assert np.max(np.abs(ev.imag)) < 1e-10
        assert ev[-1].real == pytest.approx(lam, rel=1e-10)
        assert ev[0].real == pytest.approx(-lam, rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.5, max_value=8.0),
           st.floats(min_value=0.2, max_value=40.0))
    def test_frequency_formula(self, length, mass):
        usys, _ = _pendulum(length, mass)
        w = modal_frequencies(np.linalg.eigvals(upper_lft(usys, {}).a))
        assert w[0] == pytest.approx(np.sqrt(GRAV / length), rel=1e-9)


class TestDoublePendulum:
    def test_frequency_ratio(self):
        # equal point masses on equal massless rods from a fixed pivot:
        # omega^2 = (g/L)(2 +- sqrt(2)), ratio exactly 1 + sqrt(2)
        m, L = 2.0, 1.5
        els = {
            "base": fixed_base(),
            "j1": revolute_joint([JointAxis("y", (0, 1, 0), actuated=True)],
                                 observe_states=True, label_states="j1"),
            "b1": inverse_body(m, (0.0, 0.0, 0.0),
                               top=PortSpec("up", L, 2 * m * GRAV),
                               bottom=[PortSpec("down", 0.0, -m * GRAV)]),
            "j2": revolute_joint([JointAxis("y", (0, 1, 0))],
                                 observe_states=True, label_states="j2"),
            "b2": inverse_body(m, (0.0, 0.0, 0.0),
                               top=PortSpec("up", L, m * GRAV)),
        }
        conns = [("base", "down", "j1"), ("j1", "down", "b1"),
                 ("b1", "down", "j2"), ("j2", "down", "b2")]
        usys, info = assemble(els, conns, ext_in=["j1/act.y[0]"],
                              ext_out=["j1/angle.y[0]", "j2/angle.y[0]"])
        assert len(info.state_names) == 4
        w = modal_frequencies(np.linalg.eigvals(upper_lft(usys, {}).a))
        assert w.shape == (2,)
        base = GRAV / L
        assert w[0] ** 2 == pytest.approx(base * (2.0 - np.sqrt(2.0)),
                                          rel=1e-10)
        assert w[1] ** 2 == pytest.approx(base * (2.0 + np.sqrt(2.0)),
                                          rel=1e-10)
        assert w[1] / w[0] == pytest.approx(1.0 + np.sqrt(2.0), abs=1e-6)


# three-unit hanging chain shared by the oracle comparison tests
_M_MID = 30.0
_I_BAL, _I_MID, _I_GND = 80.0, 12.0, 9.0
_Z_BUOY = 0.4


def _build_chain(mb, mg, cg, d_bal=8.0, d_ja=0.5, d_jb=0.3):
    w_g = mg.scale(GRAV)
    w_below = w_g + Affine.of(_M_MID * GRAV)
    w_tot = w_below + mb.scale(GRAV)
    els = {
        "bal": forward_body(mb, (_I_BAL, _I_BAL, 40.0),
                            ports=[PortSpec("down", -2.0, -w_below)],
                            trim_only=[(_Z_BUOY, w_tot)],
                            rot_damping=d_bal),
        "ja": revolute_joint([JointAxis("x", (1, 0, 0), damping=d_ja),
                              JointAxis("y", (0, 1, 0), damping=d_ja,
                                        actuated=True)],
                             observe_states=True),
        "mid": inverse_body(_M_MID, (_I_MID, _I_MID, 6.0),
                            top=PortSpec("up", 1.5, w_below),
                            bottom=[PortSpec("down", -1.0, -w_g)]),
        "jb": revolute_joint([JointAxis("x", (1, 0, 0), damping=d_jb),
                              JointAxis("y", (0, 1, 0), damping=d_jb)],
                             observe_states=True),
        "gnd": inverse_body(mg, (_I_GND, _I_GND, 5.0),
                            top=PortSpec("up", cg, w_g)),
    }
    conns = [("bal", "down", "ja"), ("ja", "down", "mid"),
             ("mid", "down", "jb"), ("jb", "down", "gnd")]
    return assemble(els, conns, ext_in=["ja/act.y[0]"],
                    ext_out=["ja/angle.y[0]", "jb/angle.y[0]"])


def _oracle_chain(mb, mg, cg, d_bal=8.0, d_ja=0.5, d_jb=0.3):
    w_tot = (mb + _M_MID + mg) * GRAV
    units = [LateralUnit(mb, _I_BAL, b=2.0,
                         extra_tilt_stiffness=_Z_BUOY * w_tot,
                         tilt_damping=d_bal),
             LateralUnit(_M_MID, _I_MID, a=1.5, b=1.0),
             LateralUnit(mg, _I_GND, a=cg)]
    return lateral_plane_modes(units, joint_damping=[d_ja, d_jb])


def _nonzero_sorted(ev, tol=1e-8):
    ev = ev[np.abs(ev) > tol]
    return ev[np.lexsort((ev.real, ev.imag))]


class TestChainAgainstOracle:
    def test_certain_chain(self):
        usys, info = _build_chain(Affine.of(50.0), Affine.of(22.0),
                                  Affine.of(1.2))
        # one lateral plane stays: balloon tilt plus two hinge angles
        assert info.state_names == (
            "bal/body.om.y", "bal/body.th.y",
            "ja/joint.y.rate", "ja/joint.y.angle",
            "jb/joint.y.rate", "jb/joint.y.angle")
        assert "bal/body.v.x" in info.removed_states
        assert "ja/joint.x.angle" in info.removed_states
        got = _nonzero_sorted(np.linalg.eigvals(upper_lft(usys, {}).a))
        want = _nonzero_sorted(_oracle_chain(50.0, 22.0, 1.2))
        assert got.shape == want.shape
        assert np.max(np.abs(got - want) / np.abs(want)) < 1e-12

    def test_uncertain_chain(self):
        mb = UncertainParam("m_bal", 50.0, 5.0)
        mg = UncertainParam("m_gnd", 22.0, 1.1)
        cg = UncertainParam("gnd_cg", 1.2, 0.3)
        usys, info = _build_chain(Affine.param(mb), Affine.param(mg),
                                  Affine.param(cg))
        assert len(info.state_names) == 6
        assert info.pruned_channels  # out-of-plane occurrences dropped
        samples = [{"m_bal": 0.0, "m_gnd": 0.0, "gnd_cg": 0.0}]
        samples += sample_delta(usys.delta, 4, seed=3)
        for dv in samples:
            got = _nonzero_sorted(np.linalg.eigvals(upper_lft(usys, dv).a))
            want = _nonzero_sorted(_oracle_chain(
                mb.value(dv["m_bal"]), mg.value(dv["m_gnd"]),
                cg.value(dv["gnd_cg"])))
            assert got.shape == want.shape
            rel = np.max(np.abs(got - want) / np.abs(want))
            assert rel < 1e-9, dv

    def test_undamped_chain_is_marginal(self):
        usys, _ = _build_chain(Affine.of(50.0), Affine.of(22.0),
                               Affine.of(1.2), d_bal=0.0, d_ja=0.0,
                               d_jb=0.0)
        ev = np.linalg.eigvals(upper_lft(usys, {}).a)
        assert np.max(np.abs(ev.real)) < 1e-10
        assert modal_frequencies(ev).shape == (3,)


class TestBifilarSuspension:
    def _hang(self, d_sep, disk_inertia=5.0):
        m_bif = 2.0
        m_disk = 100.0 / GRAV  # supported weight exactly 100 N
        w_disk = m_disk * GRAV
        els = {
            "base": fixed_base(),
            "bif": bifilar_suspension(m_bif, (1.0, 1.0, 0.5), 10.0, d_sep,
                                      trim_top=(m_bif + m_disk) * GRAV,
                                      trim_bot=-w_disk),
            "disk": inverse_body(m_disk, (1.0, 1.0, disk_inertia),
                                 top=PortSpec("up", 0.0, w_disk),
                                 wrench_in=[PortSpec("tq", 0.0, 0.0)],
                                 observe=[PortSpec("o", 0.0, 0.0)]),
        }
        conns = [("base", "down", "bif"), ("bif", "down", "disk")]
        return assemble(els, conns, ext_in=["disk/tq.w[5]"],
                        ext_out=["disk/o.m[17]"])

    def test_twist_stiffness_value(self):
        # k_t = W d^2 / (4 L) = 100 * 1 / 40 = 2.5 N m/rad on J_z = 5
        usys, info = self._hang(1.0)
        assert info.state_names == ("bif/tw.rate", "bif/tw.angle")
        w = modal_frequencies(np.linalg.eigvals(upper_lft(usys, {}).a))
        assert w[0] == pytest.approx(np.sqrt(2.5 / 5.0), rel=1e-12)

    def test_uncertain_separation_is_quadratic(self):
        d = UncertainParam("d_sep", 1.0, 0.2)
        usys, _ = self._hang(Affine.param(d))
        dims = {b.param.name: b.dim for b in usys.delta.blocks}
        assert dims["d_sep"] == 2
        w = modal_frequencies(
            np.linalg.eigvals(upper_lft(usys, {"d_sep": 0.5}).a))
        k_t = 100.0 * 1.1 ** 2 / 40.0
        assert w[0] == pytest.approx(np.sqrt(k_t / 5.0), rel=1e-10)

    def test_free_torsion_pair_matches_oracle(self):
        # two inertias about z coupled by a sprung damped joint, chain
        # floating free: rigid heading mode drops, elastic pair survives
        j1, j2, k, c = 6.0, 2.5, 4.0, 0.3
        m1, m2 = 40.0, 10.0
        w2 = m2 * GRAV
        els = {
            "top": forward_body(m1, (8.0, 8.0, j1),
                                ports=[PortSpec("down", -1.0, -w2)],
                                trim_only=[(0.2, (m1 + m2) * GRAV)]),
            "tw": revolute_joint([JointAxis("z", (0, 0, 1), stiffness=k,
                                            damping=c, actuated=True)],
                                 observe_states=True),
            "bot": inverse_body(m2, (3.0, 3.0, j2),
                                top=PortSpec("up", 0.8, w2)),
        }
        conns = [("top", "down", "tw"), ("tw", "down", "bot")]
        usys, _ = assemble(els, conns, ext_in=["tw/act.z[0]"],
                           ext_out=["tw/angle.z[0]", "tw/rate.z[0]"])
        got = _nonzero_sorted(np.linalg.eigvals(upper_lft(usys, {}).a))
        want = _nonzero_sorted(torsion_modes([j1, j2], [(k, c)]))
        assert got.shape == want.shape
        assert np.max(np.abs(got - want) / np.abs(want)) < 1e-12

    def test_compression_rejected(self):
        with pytest.raises(ValueError, match="tension"):
            bifilar_suspension(2.0, (1.0, 1.0, 0.5), 10.0, 1.0,
                               trim_top=2.0 * GRAV + 10.0, trim_bot=10.0,
                               check_trim=False)


class TestTrimChecks:
    def test_forward_body_imbalance_raises(self):
        with pytest.raises(ValueError, match="trim imbalance"):
            forward_body(10.0, (1.0, 1.0, 1.0),
                         ports=[PortSpec("down", -1.0, -5.0)],
                         trim_only=[(0.0, 10.0 * GRAV)])

    def test_inverse_body_imbalance_raises(self):
        # affine imbalance: coefficient on the mass parameter survives
        m = UncertainParam("m", 10.0, 1.0)
        with pytest.raises(ValueError, match="trim imbalance"):
            inverse_body(Affine.param(m), (1.0, 1.0, 1.0),
                         top=PortSpec("up", 1.0, 10.0 * GRAV))

    def test_balanced_affine_passes(self):
        m = UncertainParam("m", 10.0, 1.0)
        inverse_body(Affine.param(m), (1.0, 1.0, 1.0),
                     top=PortSpec("up", 1.0, Affine.param(m).scale(GRAV)))


class TestJointVariants:
    def test_prescribed_axis_with_terminator(self):
        # driven axis with nothing below: angle is the double integral of
        # the commanded acceleration and no wrench flows upward
        els = {
            "base": fixed_base(),
            "j": revolute_joint([JointAxis("el", (0, 1, 0),
                                           mode="prescribed")],
                                observe_states=True),
            "t": terminator(),
        }
        conns = [("base", "down", "j"), ("j", "down", "t")]
        usys, info = assemble(els, conns, ext_in=["j/acc.el[0]"],
                              ext_out=["j/angle.el[0]"])
        assert len(info.state_names) == 2
        g = upper_lft(usys, {})
        h = (g.c @ np.linalg.solve(2j * np.eye(2) - g.a, g.b))[0, 0]
        assert h == pytest.approx(1.0 / (2j) ** 2, abs=1e-12)

    def test_unknown_axis_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            revolute_joint([JointAxis("y", (0, 1, 0), mode="sliding")])

    def test_zero_axis_rejected(self):
        with pytest.raises(ValueError, match="zero joint axis"):
            revolute_joint([JointAxis("y", (0, 0, 0))])
