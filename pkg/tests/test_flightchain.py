"""Flight-chain scenario: calibration, oracle agreement, primary loops, PSD."""

import dataclasses

import numpy as np
import pytest

from stratopoint.flightchain import (
    CHAIN_INPUTS,
    REFERENCE_MODES,
    ChainConfig,
    DisturbanceModel,
    build_chain,
    calibrate_modes,
    close_primary_loops,
    default_config,
    lateral_oracle_units,
    mode_table,
    pendulum_frequencies,
    platform_psd_check,
    primary_control_set,
    psd_consistency_gap,
    torsion_oracle_ladder,
    wind_model,
    write_psd_csv,
    _wind_to_output,
)
from stratopoint.lft import instantiate, sample_delta
from stratopoint.lti import (
    TransferFunction,
    expected_welch_psd,
    freq_response,
    output_psd,
    realize,
    simulate,
    spectral_abscissa,
    stationary_state_sample,
    welch_psd,
)
from stratopoint.multibody import lateral_plane_modes, modal_frequencies, torsion_modes


@pytest.fixture(scope="module")
def cfg():
    return default_config()


@pytest.fixture(scope="module")
def chain(cfg):
    return build_chain(cfg)


@pytest.fixture(scope="module")
def closed(chain):
    return close_primary_loops(chain)


# ---------------------------------------------------------------------------
# configuration


def test_element_counts(cfg):
    assert cfg.element_counts() == {"bodies": 5, "suspensions": 6, "joints": 10}


def test_config_roundtrip(cfg):
    assert ChainConfig.from_dict(cfg.to_dict()) == cfg


def test_config_rejects_unknown_key(cfg):
    data = cfg.to_dict()
    data["balloon"]["lift_kg"] = 1.0
    with pytest.raises(ValueError, match="unknown"):
        ChainConfig.from_dict(data)


def test_config_rejects_missing_key(cfg):
    data = cfg.to_dict()
    del data["gondola"]["ballast_kg"]
    with pytest.raises(ValueError):
        ChainConfig.from_dict(data)


def test_default_config_ships_calibrated(cfg):
    assert cfg.calibrated


def test_uncertain_parameter_set(chain):
    names = set(chain.delta.names)
    assert {"bal_mass", "bal_inertia", "gnd_mass", "gnd_inertia",
            "ballast", "b2_mass", "chute_radius"} <= names
    # the parachute radius enters once per parachute suspension, squared
    assert chain.delta.occurrences("chute_radius") == 8


def test_chain_port_names(chain):
    assert chain.phys_input_names == CHAIN_INPUTS
    assert chain.m.output_names[-7:] == (
        "th_p_x", "th_p_y", "th_p_z", "om_p_x", "om_p_y", "om_p_z", "th_t_z")


# ---------------------------------------------------------------------------
# wind disturbance filter


def test_wind_filter_printed_values():
    dist = wind_model()
    num, den = dist.tf.num, dist.tf.den
    assert num[0] / den[0] == pytest.approx(4.62, abs=1e-12)
    assert abs(dist.tf(0j)) == pytest.approx(259.875, abs=1e-9)
    zeros = np.roots(num)
    assert np.allclose(np.abs(zeros), 0.15, rtol=1e-12)
    assert max(np.real(np.roots(den))) < 0.0


def test_wind_filter_high_frequency_limit():
    dist = wind_model()
    assert abs(dist.tf(1e9j)) == pytest.approx(4.62, rel=1e-6)


# ---------------------------------------------------------------------------
# assembled chain against the energy-method oracles


def _oracle_eigs(cfg, delta=None):
    units, damps = lateral_oracle_units(cfg, delta)
    return lateral_plane_modes(units, damps)


def _match_eigs(reference, candidates, rtol):
    """Every reference eigenvalue has a close counterpart."""
    for lam in reference:
        gap = np.min(np.abs(candidates - lam))
        assert gap <= rtol * abs(lam), (lam, gap)


def test_lateral_eigenvalues_match_oracle_nominal(cfg, chain):
    ref = _oracle_eigs(cfg)
    ref = ref[np.abs(ref.imag) > 1e-6]
    got = np.linalg.eigvals(instantiate(chain, {}).a)
    _match_eigs(ref, got, 1e-9)


def test_lateral_eigenvalues_match_oracle_at_vertices(cfg, chain):
    for dv in sample_delta(chain.delta, 4, seed=3):
        ref = _oracle_eigs(cfg, dv)
        ref = ref[np.abs(ref.imag) > 1e-6]
        got = np.linalg.eigvals(instantiate(chain, dv).a)
        _match_eigs(ref, got, 1e-6)


def test_torsion_frequencies_match_ladder_oracle(cfg, chain):
    inertias, springs = torsion_oracle_ladder(cfg)
    ref = modal_frequencies(torsion_modes(inertias, springs))
    ref = ref[ref > 1e-6]
    got = np.array([m.omega for m in mode_table(chain) if m.kind == "torsion"])
    assert got.size == ref.size
    for w in ref:
        assert np.min(np.abs(got - w)) <= 1e-6 * w


def test_calibrated_modes_hit_reference_frequencies(chain):
    modes = pendulum_frequencies(chain, n=4)
    rel = np.abs(modes / np.asarray(REFERENCE_MODES) - 1.0)
    assert np.max(rel) < 1e-3
    assert np.max(rel) < 0.02  # the contract bound


def test_ballast_shifts_modes_monotonically(cfg, chain):
    sweep = (-1.0, 0.0, 1.0)
    assembled = [pendulum_frequencies(chain, {"ballast": v}, n=4) for v in sweep]
    oracle = [modal_frequencies(_oracle_eigs(cfg, {"ballast": v}))[:4]
              for v in sweep]
    for k in range(4):
        diffs = np.diff([a[k] for a in assembled])
        sign = np.sign(oracle[-1][k] - oracle[0][k])
        assert sign != 0.0
        assert np.all(np.sign(diffs) == sign)


def test_xy_plane_symmetry(chain):
    g = instantiate(chain, {})
    om = np.logspace(-2, 1.3, 120)
    fr = freq_response(g, om).values
    ix, iy = g.input_names.index("dF_x"), g.input_names.index("dF_y")
    ox, oy = g.output_names.index("th_p_x"), g.output_names.index("th_p_y")
    fy_to_tx = fr[:, ox, iy]
    fx_to_ty = fr[:, oy, ix]
    scale = np.max(np.abs(fy_to_tx))
    # mirror image: same magnitude, opposite rotation sense
    assert np.max(np.abs(np.abs(fy_to_tx) - np.abs(fx_to_ty))) <= 1e-9 * scale
    assert np.max(np.abs(fy_to_tx + fx_to_ty)) <= 1e-9 * scale


# ---------------------------------------------------------------------------
# mode calibration


def test_calibrate_is_fixed_point_when_calibrated(cfg):
    assert calibrate_modes(cfg) == cfg


def test_calibrate_from_scratch_converges_and_is_deterministic(cfg):
    raw = dataclasses.replace(cfg, calibrated=False)
    first = calibrate_modes(raw)
    assert first.calibrated
    modes = pendulum_frequencies(build_chain(first), n=4)
    assert np.max(np.abs(modes / np.asarray(REFERENCE_MODES) - 1.0)) < 0.02
    assert calibrate_modes(raw) == first


def test_calibrate_rejects_unordered_targets(cfg):
    with pytest.raises(ValueError, match="increasing"):
        calibrate_modes(cfg, targets=(0.76, 0.27))


def test_calibrate_raises_on_unreachable_targets(cfg):
    raw = dataclasses.replace(cfg, calibrated=False)
    with pytest.raises(ValueError, match="did not converge"):
        calibrate_modes(raw, targets=(1000.0,))


def test_single_pendulum_subproblem():
    from stratopoint.flightchain import fit_mode_targets

    def freq(knobs):
        return np.sqrt(9.80665 / np.asarray(knobs))

    knobs, err = fit_mode_targets(freq, (5.0,), (0.99,),
                                  ((0.2, 5.0),), ((1.0,), (2.0,)))
    assert err < 1e-6
    assert knobs[0] == pytest.approx(9.80665 / 0.99 ** 2, rel=1e-6)


# ---------------------------------------------------------------------------
# primary azimuth and wheel loops


def test_azimuth_controller_printed_coefficients():
    cs = primary_control_set()
    s = 1j
    c1_hand = (3043.0 * s ** 2 + 958000.0 * s + 7360.0) / (s ** 2 + 357.0 * s + 900.0)
    c2_hand = (140.0 * s ** 2 + 3259.0 * s + 166.0) / (s ** 2 + 357.0 * s + 900.0)
    got1 = freq_response(realize(cs.c1), [1.0]).values[0, 0, 0]
    got2 = freq_response(realize(cs.c2), [1.0]).values[0, 0, 0]
    assert abs(got1 - c1_hand) <= 1e-12 * abs(c1_hand)
    assert abs(got2 - c2_hand) <= 1e-12 * abs(c2_hand)


def test_washout_blocks_dc():
    cs = primary_control_set()
    assert cs.washout(0j) == 0.0
    low = abs(cs.washout(1e-8j))
    assert low < 1e-12


def test_measurement_delay_is_allpass():
    cs = primary_control_set()
    om = np.logspace(-3, 3, 200)
    mag = np.abs([cs.delay(1j * w) for w in om])
    assert np.max(np.abs(mag - 1.0)) < 1e-8


def test_closed_loop_nominal_stable(closed):
    assert spectral_abscissa(instantiate(closed, {})) < -1e-6


def test_azimuth_bandwidth_near_one_rad_s(closed):
    g = instantiate(closed, {})
    om = np.logspace(-2, 1.3, 900)
    fr = freq_response(g, om).values
    tr = fr[:, g.output_names.index("th_p_z"), g.input_names.index("dr_az")]
    s_db = 20.0 * np.log10(np.abs(1.0 - tr))
    above = s_db > -3.0
    ups = [om[k] for k in range(1, om.size) if above[k] and not above[k - 1]]
    assert len(ups) == 1
    assert 0.7 <= ups[0] <= 1.3


def _least_damped(usys, center):
    lead = None
    for m in mode_table(usys):
        if m.kind != "pendulum":
            continue
        if not (0.8 * center <= m.omega <= 1.25 * center):
            continue
        if lead is None or m.zeta < lead:
            lead = m.zeta
    assert lead is not None
    return lead


def test_wheel_loop_strictly_damps_pendulum_modes(chain, closed):
    cs = primary_control_set()
    no_wheels = dataclasses.replace(cs, c3=TransferFunction((0.0,), (1.0,)))
    baseline = close_primary_loops(chain, no_wheels)
    for center in (2.5, 3.5):
        assert _least_damped(closed, center) > _least_damped(baseline, center)


def test_heading_reference_cannot_tilt_platform(chain, closed):
    # open chain: the reference port is defined as zero-coupled
    g0 = instantiate(chain, {})
    j = g0.input_names.index("dr_az")
    assert not g0.b[:, j].any() and not g0.d[:, j].any()
    # closed chain: the azimuth loop must keep the planes exactly apart
    g = instantiate(closed, {})
    om = np.logspace(-2, 1.3, 200)
    fr = freq_response(g, om).values
    jr = g.input_names.index("dr_az")
    for name in ("th_p_x", "th_p_y", "om_p_x", "om_p_y"):
        assert np.max(np.abs(fr[:, g.output_names.index(name), jr])) == 0.0


def test_zero_gain_control_reduces_to_open_chain(chain):
    zero = TransferFunction((0.0,), (1.0,))
    cs = dataclasses.replace(primary_control_set(), c1=zero, c2=zero, c3=zero)
    closed0 = close_primary_loops(chain, cs)
    g0 = instantiate(closed0, {})
    g = instantiate(chain, {})
    om = np.logspace(-2, 1.5, 150)
    fr0 = freq_response(g0, om).values
    fr = freq_response(g, om).values
    for inp in ("dF_x", "dF_y"):
        for out in ("th_p_x", "th_p_y", "th_p_z", "om_p_x", "om_p_y", "om_p_z"):
            a = fr0[:, g0.output_names.index(out), g0.input_names.index(inp)]
            b = fr[:, g.output_names.index(out), g.input_names.index(inp)]
            scale = max(np.max(np.abs(b)), 1e-30)
            assert np.max(np.abs(a - b)) <= 1e-9 * scale
    jr = g0.input_names.index("dr_az")
    assert np.max(np.abs(fr0[:, :, jr])) == 0.0


def test_flipped_azimuth_law_raises(chain):
    cs = primary_control_set()
    bad = dataclasses.replace(cs, c1=TransferFunction(
        (-3043.0, -958000.0, -7360.0), (1.0, 357.0, 900.0)))
    with pytest.raises(ValueError, match="unstable"):
        close_primary_loops(chain, bad)


def test_closed_loop_stable_at_sampled_vertices(closed):
    worst = -np.inf
    for dv in sample_delta(closed.delta, 10, seed=11):
        worst = max(worst, spectral_abscissa(instantiate(closed, dv)))
    assert worst < -1e-6


# ---------------------------------------------------------------------------
# platform spectrum validation


def test_psd_analytic_peaks_at_pendulum_modes(closed):
    h = _wind_to_output(closed, wind_model(), None, "th_p_x")
    sharp = [m.omega for m in mode_table(closed)
             if m.kind == "pendulum" and m.zeta < 0.05 and 0.05 < m.omega < 5.0]
    assert len(sharp) >= 4
    for w in sharp:
        local = np.linspace(0.96 * w, 1.04 * w, 81)
        dens = output_psd(h, 1.0, local).density
        k = int(np.argmax(dens))
        assert 0 < k < local.size - 1
        assert abs(local[k] / w - 1.0) < 0.02


def test_psd_welch_consistent_with_expectation(closed):
    gap = psd_consistency_gap(closed, wind_model(), seed=16, output="th_p_x")
    assert gap < 3.0


def test_welch_expectation_is_unbiased():
    # sharp resonance, many seeds: the ensemble mean must sit on the
    # window-blurred analytic curve, not on the raw one
    g = realize(TransferFunction((1.0, 0.2), (1.0, 2 * 5e-3 * 1.0, 1.0)))
    dt, n, nper = 0.02, 2 ** 15, 2 ** 10
    acc = None
    for s in range(8):
        rng = np.random.default_rng(100 + s)
        x0 = stationary_state_sample(g, dt, 1.0 / dt, rng)
        u = rng.standard_normal(n) * np.sqrt(1.0 / dt)
        w = welch_psd(simulate(g, u, dt, x0=x0)[:, 0], dt, nperseg=nper)
        acc = w.density if acc is None else acc + w.density
    mean = acc / 8.0
    sel = (w.omega >= 0.3) & (w.omega <= 3.0)
    expect = expected_welch_psd(g, w.omega[sel], dt, nper)
    gap = 10.0 * np.log10(mean[sel] / expect.density)
    assert np.max(np.abs(gap)) < 1.2
    # near the resonance the estimator's target is the blurred curve,
    # which soaks up the unresolved peak power the raw curve misses
    peak = int(np.argmin(np.abs(w.omega[sel] - 1.0)))
    raw = output_psd(g, 1.0, w.omega[sel]).density
    assert expect.density[peak] > 4.0 * raw[peak]


def test_psd_zero_disturbance_is_zero(closed):
    silent = DisturbanceModel(tf=TransferFunction((0.0,), (1.0,)))
    analytic, welch = platform_psd_check(closed, silent, seed=0,
                                         n_samples=2 ** 12, nperseg=2 ** 10)
    assert np.all(analytic.density == 0.0)
    assert np.all(welch.density == 0.0)


def test_psd_csv_layout(tmp_path, closed):
    analytic, welch = platform_psd_check(closed, wind_model(), seed=16,
                                         n_samples=2 ** 14, nperseg=2 ** 10)
    path = tmp_path / "psd.csv"
    write_psd_csv(path, analytic, welch)
    lines = path.read_text().splitlines()
    assert lines[0] == "omega_rad_s,analytic_psd,welch_psd"
    assert len(lines) == analytic.omega.size + 1
    back = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(back[:, 0], analytic.omega)
    assert np.array_equal(back[:, 1], analytic.density)
    assert np.array_equal(back[:, 2], welch.density)
