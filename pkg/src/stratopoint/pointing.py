"""Fine pointing stage: LOS kinematics, gimbal drives, sensor fusion.

The stage steers the optical line of sight from a swinging platform.  A
two-axis gimbal mirror plus a field-rotation stage impose angular
accelerations around the beam; platform motion leaks into the LOS
through a static rotation map whose equilibrium elevation is only known
within a range; an onboard estimator fuses a slow, delayed optical
measurement with integrated platform rates and the drive encoders.

Conventions
-----------
Rotations are right handed and elevation grows with a positive rotation
about the platform y axis.  The LOS elevation equals a fixed 10 degree
fold offset plus twice the gimbal elevation angle (reflection doubles
mirror angles).  Every static map carries the equilibrium dependence
through the half-angle tangent ``t_el``, which turns the trigonometry
into rational expressions and keeps the uncertainty a real repeated
scalar.  The calibrated platform inertia already contains the mirror as
rigidly attached mass, so the reaction of the gimbal on the platform is
the mirror inertia times the imposed relative acceleration, with the
opposite sign.

All angles are radians, times are seconds, noise drives are unit
intensity white (the printed shaping gains live inside the estimator).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._config import _num, _take, _uq
from .lft import (
    DeltaBlock,
    DeltaStructure,
    UncertainParam,
    UncertainSystem,
    instantiate,
    u_add,
    u_append,
    u_from_ss,
    u_hstack,
    u_mul,
    u_wire,
    umat_const,
)
from .lti import StateSpaceModel, TransferFunction, gain_block, pade_delay, ss

__all__ = [
    "FOLD_ELEVATION_OFFSET_RAD",
    "REFLECTION_GAINS",
    "LOS_INPUTS",
    "LOS_OUTPUTS",
    "PLANT_INPUTS",
    "PLANT_OUTPUTS",
    "LosKinematics",
    "SensorSuite",
    "FusionEstimator",
    "AxisActuator",
    "PointingAssembly",
    "PointingConfig",
    "default_pointing_config",
    "los_map",
    "platform_map_lft",
    "noise_crossover",
    "build_estimator",
    "build_pointing_plant",
]

# fixed fold-mirror contribution to the LOS elevation
FOLD_ELEVATION_OFFSET_RAD = math.radians(10.0)

# reflection doubles the two mirror angles; the rotation stage acts 1:1
REFLECTION_GAINS = (2.0, 2.0, 1.0)

LOS_INPUTS = ("th_p_x", "th_p_y", "th_p_z", "th_a_el", "th_a_ce", "th_a_fr")
LOS_OUTPUTS = ("los_el", "los_ce", "los_fr")

PLANT_INPUTS = ("V_el", "V_ce", "V_fr",
                "th_p_x", "th_p_y", "th_p_z",
                "om_p_x", "om_p_y", "om_p_z",
                "n_gyro_x", "n_gyro_y", "n_gyro_z",
                "n_optic_el", "n_optic_ce", "n_optic_fr")
PLANT_OUTPUTS = ("th_a_el", "th_a_ce", "th_a_fr",
                 "los_el", "los_ce", "los_fr",
                 "est_el", "est_ce", "est_fr",
                 "mr_tx", "mr_ty", "mr_tz")

# shared tuner scales for the two fusion sections; the loop closes on the
# reciprocal rates 1/tau because a proper coefficient system in tau itself
# does not exist, and half_range = nominal makes value = nominal*(1+delta)
_FUSION_RATE_1 = UncertainParam("fusion_rate_1", 10.0, 10.0)
_FUSION_RATE_2 = UncertainParam("fusion_rate_2", 2.0, 2.0)


# ---------------------------------------------------------------------------
# kinematics


@dataclass(frozen=True)
class LosKinematics:
    """Static geometry between platform angles, gimbal angles and the LOS.

    ``elevation_nominal_deg`` / ``elevation_half_range_deg`` bound the
    gimbal elevation at equilibrium.  The uncertain parameter is the
    half-angle tangent, centred so normalized deltas of -1/+1 hit the
    configured interval ends exactly; the realized nominal elevation is
    ``2*atan(t_el.nominal)``, slightly above the arithmetic midpoint.
    """

    elevation_nominal_deg: float = 12.5
    elevation_half_range_deg: float = 7.5

    def __post_init__(self):
        if self.elevation_half_range_deg < 0:
            raise ValueError("negative elevation half range")
        lo = self.elevation_nominal_deg - self.elevation_half_range_deg
        hi = self.elevation_nominal_deg + self.elevation_half_range_deg
        if lo <= -180.0 or hi >= 180.0:
            raise ValueError("gimbal elevation range must stay inside "
                             "(-180, 180) deg")

    @property
    def t_el(self) -> UncertainParam:
        lo = math.tan(math.radians(
            self.elevation_nominal_deg - self.elevation_half_range_deg) / 2)
        hi = math.tan(math.radians(
            self.elevation_nominal_deg + self.elevation_half_range_deg) / 2)
        return UncertainParam("t_el", (lo + hi) / 2, (hi - lo) / 2)

    @property
    def reflection(self) -> np.ndarray:
        return np.diag(REFLECTION_GAINS)

    def gimbal_elevation_rad(self, delta: float = 0.0) -> float:
        return 2.0 * math.atan(self.t_el.value(delta))

    def los_elevation_rad(self, delta: float = 0.0) -> float:
        return FOLD_ELEVATION_OFFSET_RAD + 2.0 * self.gimbal_elevation_rad(delta)

    def platform_map(self, delta: float = 0.0) -> np.ndarray:
        """Trigonometric evaluation of the platform-to-LOS matrix."""
        e = self.los_elevation_rad(delta)
        c, s = math.cos(e), math.sin(e)
        return np.array([[0.0, 1.0, 0.0],
                         [c, 0.0, -s],
                         [s, 0.0, c]])


def _half_angle_rotation(p: UncertainParam) -> UncertainSystem:
    """Planar rotation by ``2*atan(t)`` as a static LFT, two occurrences.

    Complex form: multiplication by (1+it)/(1-it), which is unimodular
    with argument 2*atan(t).  Realified and shifted to the normalized
    delta of ``p``, the Cayley factor needs the parameter exactly twice.
    """
    j2 = np.array([[0.0, -1.0], [1.0, 0.0]])
    eye = np.eye(2)
    t0, h = p.nominal, p.half_range
    x = np.linalg.inv(eye - t0 * j2)
    # unshifted coefficient relations: z = J w + J u, y = 2 w + u
    d = np.block([[h * x @ j2, h * x @ j2],
                  [2.0 * (eye + t0 * x @ j2), eye + 2.0 * t0 * x @ j2]])
    model = ss(np.zeros((0, 0)), np.zeros((0, 4)), np.zeros((4, 0)), d)
    return UncertainSystem(model, DeltaStructure((DeltaBlock(p, 2),)))


def platform_map_lft(kin: LosKinematics) -> UncertainSystem:
    """The 3x3 platform-to-LOS matrix as a static LFT in ``t_el``.

    Four occurrences: the in-plane rotation by twice the gimbal angle is
    the square of one Cayley factor.
    """
    half = _half_angle_rotation(kin.t_el)
    plane = u_mul(half, half)
    off = FOLD_ELEVATION_OFFSET_RAD
    fold = np.array([[math.cos(off), -math.sin(off)],
                     [math.sin(off), math.cos(off)]])
    plane = u_mul(umat_const(fold), plane)
    # embed the (x, z) plane rotation into rows ce/fr, keep the pitch row
    embed = umat_const(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    select = umat_const(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
    pitch_row = umat_const(np.array([[0.0, 1.0, 0.0],
                                     [0.0, 0.0, 0.0],
                                     [0.0, 0.0, 0.0]]))
    return u_add(u_mul(embed, u_mul(plane, select)), pitch_row)


def los_map(kin: LosKinematics) -> UncertainSystem:
    """First-order map (platform angles, gimbal angles) -> LOS angles.

    The gimbal part is the constant reflection gain; the platform part
    carries the uncertain equilibrium elevation.  Raises when the
    admissible LOS elevation interval touches +-90 deg (mod 180), where
    the angle chart defining the LOS coordinates loses rank and the
    linearization has no meaning.
    """
    lo = kin.los_elevation_rad(-1.0)
    hi = kin.los_elevation_rad(1.0)
    n0 = math.floor((lo - math.pi / 2) / math.pi)
    n1 = math.ceil((hi - math.pi / 2) / math.pi)
    for n in range(n0, n1 + 1):
        sing = math.pi / 2 + n * math.pi
        if lo - 1e-9 <= sing <= hi + 1e-9:
            raise ValueError(
                "singular LOS chart at the requested equilibrium: elevation "
                f"{math.degrees(sing):.1f} deg is reachable")
    mapped = u_hstack(platform_map_lft(kin), umat_const(kin.reflection))
    return mapped.renamed(LOS_INPUTS, LOS_OUTPUTS)


# ---------------------------------------------------------------------------
# sensors


@dataclass(frozen=True)
class SensorSuite:
    """Noise gains and delays of the three measurement paths.

    Gyros deliver platform rates with white noise of intensity
    ``gyro_noise``; integration to angles makes the angle-level density
    fall as 1/omega.  The optical sensor measures the LOS directly with
    flat noise ``optic_noise`` (a factor ``optic_fr_factor`` worse on
    the rotation axis) after a processing delay.  The drive encoders are
    taken noise free up to a short readout delay.  Delays enter as Pade
    approximations of a common order.
    """

    gyro_noise: float = 5e-6
    optic_noise: float = 4.5e-8
    optic_fr_factor: float = 100.0
    optic_delay: float = 0.04
    encoder_delay: float = 0.001
    pade_order: int = 3

    def __post_init__(self):
        if self.optic_delay < 0 or self.encoder_delay < 0:
            raise ValueError("negative sensor delay")
        if self.gyro_noise < 0 or self.optic_noise < 0 or self.optic_fr_factor < 0:
            raise ValueError("negative noise gain")
        if not isinstance(self.pade_order, int) or self.pade_order < 1:
            raise ValueError("delay approximation order must be a positive "
                             "integer")

    def optic_noise_gains(self) -> np.ndarray:
        return self.optic_noise * np.diag([1.0, 1.0, self.optic_fr_factor])


def noise_crossover(sensors: SensorSuite) -> dict:
    """Frequencies where integrated gyro noise falls below optical noise.

    Per axis the angle-level gyro density ``gyro_noise/omega`` meets the
    flat optical density at ``omega = gyro_noise/optic``; ``total``
    compares the densities summed over the three axes.  Below the
    crossover the fused estimate must lean on the optical path, above it
    the gyro path is the better one.
    """
    g = sensors.gyro_noise
    o = sensors.optic_noise
    f = sensors.optic_fr_factor
    if o == 0.0 or g == 0.0:
        raise ValueError("crossover undefined for a noise-free path")
    per = (g / o, g / o, g / (o * f))
    total = (g / o) * math.sqrt(3.0 / (2.0 + f * f))
    return {"el": per[0], "ce": per[1], "fr": per[2], "total": total}


# ---------------------------------------------------------------------------
# fusion estimator


@dataclass(frozen=True)
class FusionEstimator:
    """Complementary blend of the optical and gyro-based LOS estimates.

    The fused output is optic + F*(gyro - optic) with F a cascade of two
    first-order high-pass sections per axis, so the complementary split
    (I - F) + F = I holds structurally for any section time constants.
    ``tau1``/``tau2`` are those time constants in seconds.  In the LFT
    they stay open as tuner channels on the reciprocal rates.
    """

    tau1: float = 0.1
    tau2: float = 0.5

    def __post_init__(self):
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise ValueError("fusion time constants must be positive")

    def tuner_values(self) -> dict:
        return {"fusion_rate_1": 1.0 / self.tau1,
                "fusion_rate_2": 1.0 / self.tau2}

    def filter_lft(self) -> UncertainSystem:
        return _fusion_filter_lft()

    def filter_model(self) -> StateSpaceModel:
        """Realized F at this instance's time constants (3x3, one state
        per section and axis)."""
        from .lft import lower_lft

        return lower_lft(_fusion_filter_lft(), self.tuner_values())


def _fusion_section(rate: UncertainParam, axis: str, idx: int) -> UncertainSystem:
    """One first-order high-pass tau*s/(tau*s + 1) with 1/tau tunable.

    With rho = rho0*(1 + delta): xdot = -rho x + rho u, y = u - x.  One
    tuner occurrence.
    """
    r0 = rate.nominal
    a = np.array([[-r0]])
    b = np.array([[r0, r0]])            # inputs [u, w_tuner]
    c = np.array([[-1.0], [-1.0]])      # outputs [y, z_tuner]
    d = np.array([[1.0, 0.0], [1.0, 0.0]])
    model = ss(a, b, c, d,
               (f"f{idx}_in_{axis}", f"f{idx}_tw_{axis}"),
               (f"f{idx}_out_{axis}", f"f{idx}_tz_{axis}"))
    return UncertainSystem(model, DeltaStructure(),
                           DeltaStructure((DeltaBlock(rate, 1),)))


def _fusion_filter_lft() -> UncertainSystem:
    """Diagonal 3x3 gyro-weight filter F with open rate tuners.

    Tuner blocks: fusion_rate_1 and fusion_rate_2, three occurrences
    each (one per axis).  F(inf) = I exactly and F(0) = 0.
    """
    parts = []
    links = []
    for axis in ("el", "ce", "fr"):
        parts.append(_fusion_section(_FUSION_RATE_1, axis, 1))
        parts.append(_fusion_section(_FUSION_RATE_2, axis, 2))
        links.append((f"f1_out_{axis}", f"f2_in_{axis}", 1.0))
    combined = u_append(parts)
    ext_in = [f"f1_in_{axis}" for axis in ("el", "ce", "fr")]
    ext_out = [f"f2_out_{axis}" for axis in ("el", "ce", "fr")]
    wired = u_wire(combined, links, ext_in=ext_in, ext_out=ext_out)
    return wired.renamed(("f_in_el", "f_in_ce", "f_in_fr"),
                         ("f_out_el", "f_out_ce", "f_out_fr"))


# ---------------------------------------------------------------------------
# actuators and assembly


@dataclass(frozen=True)
class AxisActuator:
    """Voltage-to-angular-acceleration drive of one gimbal axis.

    Transfer gain*(s + zero)/(tau*s + 1) with the time constant
    uncertain.  The LFT closes on the reciprocal of tau, so a single
    occurrence covers the whole dependence; the admissible range must
    keep tau positive, which also keeps the pole in the left half plane
    at every vertex.  The DC gain ``gain*zero`` does not depend on tau.
    """

    gain: float
    zero: float
    tau: UncertainParam

    def __post_init__(self):
        if self.tau.nominal <= 0 or self.tau.half_range >= self.tau.nominal:
            raise ValueError("actuator time constant must stay positive over "
                             "its uncertainty range")

    def tf(self, delta: float = 0.0) -> TransferFunction:
        t = self.tau.value(delta)
        return TransferFunction((self.gain, self.gain * self.zero), (t, 1.0))

    def lft(self, input_name: str, output_name: str) -> UncertainSystem:
        t0 = self.tau.nominal
        r = self.tau.half_range / t0
        rho = 1.0 / t0
        g = self.gain
        a = np.array([[-rho]])
        b = np.array([[-rho * r, rho]])   # inputs [w, u]
        c = np.array([[-1.0], [g * (self.zero - rho)]])
        d = np.array([[-r, 1.0],          # z = u - x - r w
                      [-g * rho * r, g * rho]])
        model = ss(a, b, c, d,
                   (f"w_{self.tau.name}", input_name),
                   (f"z_{self.tau.name}", output_name))
        return UncertainSystem(model, DeltaStructure((DeltaBlock(self.tau, 1),)))


def _default_actuators() -> tuple:
    return (AxisActuator(18800.0, 1e-3, UncertainParam("tau_el", 0.032, 0.0032)),
            AxisActuator(4200.0, 1e-3, UncertainParam("tau_ce", 0.016, 0.0016)),
            AxisActuator(1000.0, 1e-3, UncertainParam("tau_fr", 0.05, 0.005)))


@dataclass(frozen=True)
class PointingAssembly:
    """Mirror inertia and the three axis drives.

    ``mirror_inertia`` is the diagonal of the mirror inertia tensor in
    the platform axes.  Only the gimbal accelerations react on the
    platform; the field-rotation stage spins optics of negligible
    inertia.
    """

    mirror_inertia: tuple = (30.0, 30.0, 50.0)
    elevation: AxisActuator = _default_actuators()[0]
    cross_elevation: AxisActuator = _default_actuators()[1]
    field_rotation: AxisActuator = _default_actuators()[2]

    def __post_init__(self):
        if len(self.mirror_inertia) != 3 or min(self.mirror_inertia) < 0:
            raise ValueError("mirror inertia must be three nonnegative "
                             "diagonal entries")

    def reaction_gain(self) -> np.ndarray:
        """Torque on the platform per unit gimbal acceleration.

        Columns (el, ce) accelerations, rows (x, y, z) platform torque.
        Elevation swings the mirror about y, cross elevation about x.
        """
        jx, jy, _ = self.mirror_inertia
        return np.array([[0.0, -jx],
                         [-jy, 0.0],
                         [0.0, 0.0]])


# ---------------------------------------------------------------------------
# estimator assembly


def _estimator_lft(est: FusionEstimator, sensors: SensorSuite,
                   kin: LosKinematics) -> UncertainSystem:
    """Onboard LOS estimator as an uncertain coefficient system.

    Inputs: platform rates, true gimbal angles, true LOS angles, then
    six unit noise drives.  Output: the fused LOS estimate.  The gyro
    path integrates rates plus shaped noise, maps them through the same
    uncertain platform matrix (the equilibrium tangent merges with the
    plant's) and adds the delayed encoder angles; the optical path is
    the delayed LOS plus flat noise.
    """
    eye3 = np.eye(3)
    zero3 = np.zeros((3, 3))
    gyro = ss(zero3, np.hstack([eye3, sensors.gyro_noise * eye3]),
              eye3, np.zeros((3, 6)),
              ("om_p_x", "om_p_y", "om_p_z",
               "n_gyro_x", "n_gyro_y", "n_gyro_z"),
              ("gyro_th_x", "gyro_th_y", "gyro_th_z"))
    enc = pade_delay(sensors.encoder_delay, sensors.pade_order, 3).renamed(
        ("est_th_a_el", "est_th_a_ce", "est_th_a_fr"),
        ("enc_el", "enc_ce", "enc_fr"))
    opt = pade_delay(sensors.optic_delay, sensors.pade_order, 3).renamed(
        ("est_los_el", "est_los_ce", "est_los_fr"),
        ("opt_del_el", "opt_del_ce", "opt_del_fr"))
    # measurement noise enters at the sensor output, after the delay
    optic_sum = gain_block(
        np.hstack([eye3, sensors.optic_noise_gains()]),
        ("os_del_el", "os_del_ce", "os_del_fr",
         "n_optic_el", "n_optic_ce", "n_optic_fr"),
        ("optic_el", "optic_ce", "optic_fr"))
    recon = los_map(kin).renamed(
        ("rc_th_x", "rc_th_y", "rc_th_z", "rc_a_el", "rc_a_ce", "rc_a_fr"),
        ("gyro_los_el", "gyro_los_ce", "gyro_los_fr"))
    filt = _fusion_filter_lft()
    # fused = optic + F (gyro - optic); one copy of F keeps the
    # complementary identity exact whatever the rates
    out = gain_block(np.hstack([eye3, eye3]),
                     ("sum_opt_el", "sum_opt_ce", "sum_opt_fr",
                      "sum_f_el", "sum_f_ce", "sum_f_fr"),
                     ("est_el", "est_ce", "est_fr"))
    combined = u_append([recon, filt, u_from_ss(gyro), u_from_ss(enc),
                         u_from_ss(opt), u_from_ss(optic_sum), u_from_ss(out)])
    links = []
    for i, axis in enumerate(("el", "ce", "fr")):
        xyz = ("x", "y", "z")[i]
        links += [(f"gyro_th_{xyz}", f"rc_th_{xyz}", 1.0),
                  (f"enc_{axis}", f"rc_a_{axis}", 1.0),
                  (f"opt_del_{axis}", f"os_del_{axis}", 1.0),
                  (f"optic_{axis}", f"sum_opt_{axis}", 1.0),
                  (f"optic_{axis}", f"f_in_{axis}", -1.0),
                  (f"gyro_los_{axis}", f"f_in_{axis}", 1.0),
                  (f"f_out_{axis}", f"sum_f_{axis}", 1.0)]
    ext_in = ["om_p_x", "om_p_y", "om_p_z",
              "est_th_a_el", "est_th_a_ce", "est_th_a_fr",
              "est_los_el", "est_los_ce", "est_los_fr",
              "n_gyro_x", "n_gyro_y", "n_gyro_z",
              "n_optic_el", "n_optic_ce", "n_optic_fr"]
    ext_out = ["est_el", "est_ce", "est_fr"]
    return u_wire(combined, links, ext_in=ext_in, ext_out=ext_out)


def build_estimator(est: FusionEstimator, sensors: SensorSuite,
                    kin: LosKinematics) -> StateSpaceModel:
    """Certain estimator at the nominal elevation and the instance's
    fusion time constants.

    Inputs: platform rates, gimbal angles, LOS angles, six unit noise
    drives.  Outputs: the fused LOS estimate.
    """
    return instantiate(_estimator_lft(est, sensors, kin), {},
                       est.tuner_values())


# ---------------------------------------------------------------------------
# plant assembly


def build_pointing_plant(assembly: PointingAssembly, kin: LosKinematics,
                         sensors: SensorSuite,
                         est: FusionEstimator) -> UncertainSystem:
    """Assemble the fine stage around its platform interface.

    Physical inputs follow ``PLANT_INPUTS``: drive voltages, platform
    angles and rates, unit noise drives.  Outputs follow
    ``PLANT_OUTPUTS``: gimbal angles, true LOS, fused estimate and the
    reaction torque on the platform.  Delta blocks: the elevation
    tangent (8 occurrences: LOS map plus estimator copy) and the three
    drive time constants; the fusion rates stay open as tuner channels.
    """
    los = los_map(kin).renamed(
        ("th_p_x", "th_p_y", "th_p_z",
         "los_th_a_el", "los_th_a_ce", "los_th_a_fr"), LOS_OUTPUTS)
    est_sys = _estimator_lft(est, sensors, kin)
    act_el = assembly.elevation.lft("V_el", "acc_el")
    act_ce = assembly.cross_elevation.lft("V_ce", "acc_ce")
    act_fr = assembly.field_rotation.lft("V_fr", "acc_fr")
    # drives impose accelerations; angles are their double integrals
    eye3 = np.eye(3)
    zero3 = np.zeros((3, 3))
    integ = ss(np.block([[zero3, zero3], [eye3, zero3]]),
               np.vstack([eye3, zero3]), np.hstack([zero3, eye3]),
               zero3,
               ("int_acc_el", "int_acc_ce", "int_acc_fr"),
               ("th_a_el", "th_a_ce", "th_a_fr"))
    react = gain_block(assembly.reaction_gain(),
                       ("rx_acc_el", "rx_acc_ce"),
                       ("mr_tx", "mr_ty", "mr_tz"))
    combined = u_append([los, est_sys, act_el, act_ce, act_fr,
                         u_from_ss(integ), u_from_ss(react)])
    links = []
    for axis in ("el", "ce", "fr"):
        links.append((f"acc_{axis}", f"int_acc_{axis}", 1.0))
        links.append((f"th_a_{axis}", f"los_th_a_{axis}", 1.0))
        links.append((f"th_a_{axis}", f"est_th_a_{axis}", 1.0))
        links.append((f"los_{axis}", f"est_los_{axis}", 1.0))
    links.append(("acc_el", "rx_acc_el", 1.0))
    links.append(("acc_ce", "rx_acc_ce", 1.0))
    return u_wire(combined, links, ext_in=list(PLANT_INPUTS),
                  ext_out=list(PLANT_OUTPUTS))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class PointingConfig:
    kinematics: LosKinematics
    sensors: SensorSuite
    estimator: FusionEstimator
    assembly: PointingAssembly

    @staticmethod
    def from_dict(data) -> "PointingConfig":
        return _pointing_from_dict(data)

    def to_dict(self) -> dict:
        return _pointing_to_dict(self)


_POINTING_KEYS = ("elevation_deg", "fusion_tau1_s", "fusion_tau2_s",
                  "gyro_noise_rad_s", "optic_noise_rad",
                  "optic_fr_noise_factor", "optic_delay_s",
                  "encoder_delay_s", "delay_pade_order",
                  "mirror_inertia_kg_m2",
                  "actuator_el", "actuator_ce", "actuator_fr")


def _actuator_from_dict(sec, tau_name: str, where: str) -> AxisActuator:
    if not isinstance(sec, dict):
        raise ValueError(f"{where} must be a table")
    _take(sec, ("gain_rad_s2_per_v", "zero_rad_s", "tau_s"), where)
    return AxisActuator(
        gain=_num(sec["gain_rad_s2_per_v"], f"{where}.gain_rad_s2_per_v"),
        zero=_num(sec["zero_rad_s"], f"{where}.zero_rad_s"),
        tau=_uq(sec["tau_s"], tau_name, f"{where}.tau_s"))


def _pointing_from_dict(data) -> PointingConfig:
    _take(data, _POINTING_KEYS, "pointing")
    elev = _uq(data["elevation_deg"], "elevation_deg", "pointing.elevation_deg")
    kin = LosKinematics(elev.nominal, elev.half_range)
    order = data["delay_pade_order"]
    if isinstance(order, bool) or not isinstance(order, int):
        raise ValueError("pointing.delay_pade_order must be an integer")
    sensors = SensorSuite(
        gyro_noise=_num(data["gyro_noise_rad_s"], "pointing.gyro_noise_rad_s"),
        optic_noise=_num(data["optic_noise_rad"], "pointing.optic_noise_rad"),
        optic_fr_factor=_num(data["optic_fr_noise_factor"],
                             "pointing.optic_fr_noise_factor"),
        optic_delay=_num(data["optic_delay_s"], "pointing.optic_delay_s"),
        encoder_delay=_num(data["encoder_delay_s"], "pointing.encoder_delay_s"),
        pade_order=order)
    estimator = FusionEstimator(
        tau1=_num(data["fusion_tau1_s"], "pointing.fusion_tau1_s"),
        tau2=_num(data["fusion_tau2_s"], "pointing.fusion_tau2_s"))
    inertia = data["mirror_inertia_kg_m2"]
    if not isinstance(inertia, (list, tuple)) or len(inertia) != 3:
        raise ValueError("pointing.mirror_inertia_kg_m2 must be a list of "
                         "three numbers")
    inertia = tuple(_num(v, "pointing.mirror_inertia_kg_m2") for v in inertia)
    assembly = PointingAssembly(
        mirror_inertia=inertia,
        elevation=_actuator_from_dict(data["actuator_el"], "tau_el",
                                      "pointing.actuator_el"),
        cross_elevation=_actuator_from_dict(data["actuator_ce"], "tau_ce",
                                            "pointing.actuator_ce"),
        field_rotation=_actuator_from_dict(data["actuator_fr"], "tau_fr",
                                           "pointing.actuator_fr"))
    return PointingConfig(kin, sensors, estimator, assembly)


def _uq_out(p: UncertainParam):
    if p.half_range == 0.0:
        return p.nominal
    return {"nominal": p.nominal, "half_range": p.half_range}


def _actuator_to_dict(a: AxisActuator) -> dict:
    return {"gain_rad_s2_per_v": a.gain, "zero_rad_s": a.zero,
            "tau_s": _uq_out(a.tau)}


def _pointing_to_dict(cfg: PointingConfig) -> dict:
    kin, sn = cfg.kinematics, cfg.sensors
    return {
        "elevation_deg": {"nominal": kin.elevation_nominal_deg,
                          "half_range": kin.elevation_half_range_deg},
        "fusion_tau1_s": cfg.estimator.tau1,
        "fusion_tau2_s": cfg.estimator.tau2,
        "gyro_noise_rad_s": sn.gyro_noise,
        "optic_noise_rad": sn.optic_noise,
        "optic_fr_noise_factor": sn.optic_fr_factor,
        "optic_delay_s": sn.optic_delay,
        "encoder_delay_s": sn.encoder_delay,
        "delay_pade_order": sn.pade_order,
        "mirror_inertia_kg_m2": list(cfg.assembly.mirror_inertia),
        "actuator_el": _actuator_to_dict(cfg.assembly.elevation),
        "actuator_ce": _actuator_to_dict(cfg.assembly.cross_elevation),
        "actuator_fr": _actuator_to_dict(cfg.assembly.field_rotation),
    }


def default_pointing_config() -> PointingConfig:
    """The shipped default fine-stage scenario."""
    from importlib import resources

    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    raw = resources.files("stratopoint").joinpath("data/default.toml")
    data = tomllib.loads(raw.read_text(encoding="utf-8"))
    return PointingConfig.from_dict(data["pointing"])
