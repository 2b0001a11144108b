"""Port-based linearized multibody chain elements.

Every element exchanges two kinds of signals at its attachment points:

* motion, an 18-vector ``[lin acc, ang acc, lin vel, ang vel, lin pos,
  ang pos]`` of the attachment frame, flowing down the chain;
* wrench, a 6-vector ``[force, torque]`` flowing up.  The wrench at a
  connection is the force-and-couple the lower side applies on the upper
  side, torque taken about the connection point.

All coordinates are inertial and trim-aligned; the models are exact first
order perturbations about a hanging trim.  Gravity and trim tensions cancel
in the force balance, but the trim loads reappear as geometric stiffness:
a body tilted by theta feels the torque ``-(sum_k c_k f_k) E_xy theta``
from the vertical trim forces f_k acting at its rotated ports (offsets
c_k above the cg), with ``E_xy = diag(1,1,0)``.

Masses, inertias, offsets and trim loads are :class:`~stratopoint.lft.Affine`
expressions of named parameters, so assembled chains come out as LFTs with
exact repeated-scalar uncertainty structure.

Joints are massless and of zero extent.  A free joint axis cannot transmit
torque beyond its spring/damper/actuation law, which the assembler enforces
by exact constraint elimination: the relative angular acceleration is the
free input, the axis torque balance the residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lft import (
    Affine,
    DeltaStructure,
    UncertainSystem,
    u_add,
    u_append,
    u_from_ss,
    u_mul,
    u_vstack,
    u_wire,
    u_inverse,
    umat_affine_diag,
    umat_const,
)
from .lti import StateSpaceModel, append, integrator, ss

__all__ = [
    "GRAV",
    "PortSpec",
    "JointAxis",
    "Element",
    "inverse_body",
    "forward_body",
    "revolute_joint",
    "bifilar_suspension",
    "terminator",
    "fixed_base",
    "assemble",
    "AssemblyInfo",
    "require_tension",
    "LateralUnit",
    "lateral_plane_modes",
    "torsion_modes",
    "modal_frequencies",
]

GRAV = 9.80665

# motion vector slots
ACC = slice(0, 3)
ANG_ACC = slice(3, 6)
VEL = slice(6, 9)
ANG_VEL = slice(9, 12)
POS = slice(12, 15)
ANG_POS = slice(15, 18)
MOTION_W = 18
WRENCH_W = 6

_R2SKEW = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])  # rows of S(z) that act
_E32 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
_P2 = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _aff(x) -> Affine:
    return x if isinstance(x, Affine) else Affine.of(float(x))


def _sel(rows, total) -> UncertainSystem:
    m = np.zeros((len(rows), total))
    for i, r in enumerate(rows):
        m[i, r] = 1.0
    return umat_const(m)


def _scaled_skew(c: Affine, vec: UncertainSystem) -> UncertainSystem:
    """c * S(z) * vec with two uncertainty channels when c is uncertain."""
    red = u_mul(umat_const(_R2SKEW), vec)
    return u_mul(umat_const(_E32), u_mul(umat_affine_diag(c, 2), red))


def _scale3(a: Affine, vec: UncertainSystem) -> UncertainSystem:
    return u_mul(umat_affine_diag(a, 3), vec)


def _diag3(a1: Affine, a2: Affine, a3: Affine) -> UncertainSystem:
    total = None
    out = None
    for i, a in enumerate((a1, a2, a3)):
        col = np.zeros((3, 1))
        col[i, 0] = 1.0
        row = np.zeros((1, 3))
        row[0, i] = 1.0
        term = u_mul(umat_const(col), u_mul(umat_affine_diag(a, 1),
                                            umat_const(row)))
        out = term if out is None else u_add(out, term)
    return out


def _stack(parts: list[UncertainSystem]) -> UncertainSystem:
    out = parts[0]
    for p in parts[1:]:
        out = u_vstack(out, p)
    return out


def _neg(u: UncertainSystem) -> UncertainSystem:
    eye = -np.eye(u.n_phys_outputs)
    return u_mul(umat_const(eye), u)


def _zero_affine_check(a: Affine, what: str, tol: float = 1e-9):
    scale = max(1.0, abs(a.const), *(abs(c) for _, c in a.terms)) \
        if a.terms else max(1.0, abs(a.const))
    if abs(a.const) > tol * scale:
        raise ValueError(f"trim imbalance in {what}: residual {a.const:g}")
    for p, c in a.terms:
        if abs(c) > tol * scale:
            raise ValueError(f"trim imbalance in {what}: coefficient on "
                             f"{p.name} is {c:g}")


def require_tension(t: Affine, what: str = "connection"):
    """Reject trims where a cable could go slack over the parameter box."""
    lo, _ = t.bounds()
    if lo <= 0.0:
        raise ValueError(f"{what} loses tension over the uncertainty range "
                         f"(worst case {lo:g} N)")


@dataclass(frozen=True)
class PortSpec:
    """Attachment point on a body.

    offset: vertical position of the port above the body cg (signed, m).
    trim: vertical trim force the neighbor applies on the body here (+up, N).
    """

    name: str
    offset: Affine | float = 0.0
    trim: Affine | float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "offset", _aff(self.offset))
        object.__setattr__(self, "trim", _aff(self.trim))


@dataclass(frozen=True)
class JointAxis:
    """One rotational degree of freedom of a joint.

    mode "free": relative acceleration is solved from the axis torque
    balance (spring k, damper c, optional actuation input).
    mode "prescribed": relative acceleration is an external input; the
    transmitted torque is whatever the downstream inertia demands.
    """

    name: str
    direction: tuple[float, float, float]
    mode: str = "free"
    stiffness: object = 0.0  # float | Affine | 1x1 static UncertainSystem
    damping: float = 0.0
    actuated: bool = False

    def unit(self) -> np.ndarray:
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("zero joint axis")
        return d / n


@dataclass(frozen=True)
class Element:
    """A chain element: its LFT model plus assembly metadata."""

    usys: UncertainSystem
    residuals: tuple[tuple[str, str], ...] = ()
    state_names: tuple[str, ...] = ()
    kind: str = "element"


class _Layout:
    """Running channel layout for static element construction."""

    def __init__(self):
        self.names: list[str] = []

    def add(self, base: str, n: int) -> list[int]:
        start = len(self.names)
        self.names.extend(f"{base}[{i}]" for i in range(n))
        return list(range(start, start + n))

    @property
    def total(self) -> int:
        return len(self.names)


def _finalize_static(outputs: list[tuple[str, UncertainSystem]],
                     layout: _Layout) -> UncertainSystem:
    parts = []
    out_names = []
    for base, u in outputs:
        parts.append(u)
        out_names.extend(f"{base}[{i}]" for i in range(u.n_phys_outputs))
    stacked = _stack(parts)
    return stacked.renamed(layout.names, out_names)


def inverse_body(mass, inertia, top: PortSpec,
                 bottom: list[PortSpec] = (),
                 wrench_in: list[PortSpec] = (),
                 observe: list[PortSpec] = (),
                 trim_only: list[tuple[object, object]] = (),
                 check_trim: bool = True) -> Element:
    """Rigid body that receives its top-port motion and returns the wrench
    it applies upward.  Stateless: accelerations pass through algebraically.

    inertia is the (Ixx, Iyy, Izz) diagonal about the cg.
    trim_only lists (offset, vertical trim force) pairs that add geometric
    stiffness without wrench channels (e.g. buoyancy on a forward body).
    """
    mass = _aff(mass)
    ia = tuple(_aff(i) for i in inertia)
    lay = _Layout()
    i_top = lay.add("up.m", MOTION_W)
    loaded = list(bottom) + list(wrench_in)
    i_w = {p.name: lay.add(f"{p.name}.w", WRENCH_W) for p in loaded}
    total_hint = lay.total

    def S(rows):
        return _sel(rows, total_hint)

    a1 = S(i_top[ACC])
    e = S(i_top[ANG_ACC])
    v1 = S(i_top[VEL])
    w1 = S(i_top[ANG_VEL])
    p1 = S(i_top[POS])
    th = S(i_top[ANG_POS])

    c1 = top.offset
    a_g = u_add(a1, _scaled_skew(c1, e))

    f_sum = None
    for p in loaded:
        fj = S(i_w[p.name][:3])
        f_sum = fj if f_sum is None else u_add(f_sum, fj)
    if f_sum is None:
        f_sum = u_mul(umat_const(np.zeros((3, total_hint))),
                      _sel(list(range(total_hint)), total_hint))
    f1 = u_add(f_sum, _neg(_scale3(mass, a_g)))

    # torque balance about the cg; see module docstring for the trim term
    tau1 = _neg(u_mul(_diag3(*ia), e))
    tau1 = u_add(tau1, _neg(_scaled_skew(c1, f1)))
    for p in loaded:
        fj = S(i_w[p.name][:3])
        tj = S(i_w[p.name][3:])
        tau1 = u_add(tau1, u_add(_scaled_skew(p.offset, fj), tj))
    p2th = u_mul(umat_const(_P2), th)
    geo = None
    geo_ports = [(top.offset, top.trim)] + [(p.offset, p.trim) for p in loaded]
    geo_ports += [(_aff(c), _aff(f)) for c, f in trim_only]
    for c, f in geo_ports:
        term = u_mul(umat_affine_diag(c, 2),
                     u_mul(umat_affine_diag(f, 2), p2th))
        geo = term if geo is None else u_add(geo, term)
    tau1 = u_add(tau1, _neg(u_mul(umat_const(_E32), geo)))

    outputs = [("up.w", _stack([f1, tau1]))]
    for p in list(bottom) + list(observe):
        dc = Affine.__sub__(c1, p.offset)
        mj = _stack([
            u_add(a1, _scaled_skew(dc, e)), e,
            u_add(v1, _scaled_skew(dc, w1)), w1,
            u_add(p1, _scaled_skew(dc, th)), th,
        ])
        outputs.append((f"{p.name}.m", mj))

    if check_trim:
        balance = top.trim
        for p in loaded:
            balance = balance + p.trim
        for c, f in trim_only:
            balance = balance + _aff(f)
        balance = balance - mass.scale(GRAV)
        _zero_affine_check(balance, "inverse body")

    return Element(_finalize_static(outputs, lay), kind="body")


def forward_body(mass, inertia, ports: list[PortSpec] = (),
                 observe: list[PortSpec] = (),
                 trim_only: list[tuple[object, object]] = (),
                 rot_damping=0.0, lin_damping=0.0,
                 check_trim: bool = True,
                 label_states: str = "body") -> Element:
    """Free rigid body integrating its own motion (chain head).

    Twelve states: cg velocity, angular rate, cg position, attitude.  Every
    entry of ``ports`` carries a wrench input and a motion output; buoyancy
    goes in ``trim_only`` as an (offset, force) pair.
    """
    mass = _aff(mass)
    ia = tuple(_aff(i) for i in inertia)
    rot_damping = _aff(rot_damping)
    lin_damping = _aff(lin_damping)
    lay = _Layout()
    i_w = {p.name: lay.add(f"{p.name}.w", WRENCH_W) for p in ports}
    i_v = lay.add("state.v", 3)
    i_om = lay.add("state.om", 3)
    i_p = lay.add("state.p", 3)
    i_th = lay.add("state.th", 3)
    i_fa = lay.add("fb.a", 3)       # wired copy of the cg acceleration
    i_fe = lay.add("fb.e", 3)       # wired copy of the angular acceleration
    total = lay.total

    def S(rows):
        return _sel(rows, total)

    v = S(i_v)
    om = S(i_om)
    pos = S(i_p)
    th = S(i_th)
    fa = S(i_fa)
    fe = S(i_fe)

    f_net = None
    for p in ports:
        fj = S(i_w[p.name][:3])
        f_net = fj if f_net is None else u_add(f_net, fj)
    if f_net is None:
        f_net = u_mul(umat_const(np.zeros((3, total))), S(list(range(total))))
    if lin_damping.const or lin_damping.terms:
        f_net = u_add(f_net, _neg(_scale3(lin_damping, v)))
    vdot = u_mul(u_inverse(umat_affine_diag(mass, 3)), f_net)

    tq = None
    for p in ports:
        fj = S(i_w[p.name][:3])
        tj = S(i_w[p.name][3:])
        term = u_add(_scaled_skew(p.offset, fj), tj)
        tq = term if tq is None else u_add(tq, term)
    if tq is None:
        tq = u_mul(umat_const(np.zeros((3, total))), S(list(range(total))))
    p2th = u_mul(umat_const(_P2), th)
    geo = None
    geo_ports = [(p.offset, p.trim) for p in ports]
    geo_ports += [(_aff(c), _aff(f)) for c, f in trim_only]
    for c, f in geo_ports:
        term = u_mul(umat_affine_diag(c, 2),
                     u_mul(umat_affine_diag(f, 2), p2th))
        geo = term if geo is None else u_add(geo, term)
    if geo is not None:
        tq = u_add(tq, _neg(u_mul(umat_const(_E32), geo)))
    if rot_damping.const or rot_damping.terms:
        tq = u_add(tq, _neg(_scale3(rot_damping, om)))
    omdot = u_mul(u_inverse(_diag3(*ia)), tq)

    outputs = [("deriv.v", vdot), ("deriv.om", omdot)]
    for p in list(ports) + list(observe):
        negc = Affine.of(0.0) - p.offset
        mj = _stack([
            u_add(fa, _scaled_skew(negc, fe)), fe,
            u_add(v, _scaled_skew(negc, om)), om,
            u_add(pos, _scaled_skew(negc, th)), th,
        ])
        outputs.append((f"{p.name}.m", mj))

    core = _finalize_static(outputs, lay)

    ints = append(*(integrator() for _ in range(12)))
    bases = ["int.v", "int.om", "int.p", "int.th"]
    in_names = [f"{b}[{i}]" for b in bases for i in range(3)]
    out_names = [f"{b}.out[{i}]" for b in bases for i in range(3)]
    bank = u_from_ss(ints.renamed(in_names, out_names))

    combined = u_append([core, bank])
    links = []
    for i in range(3):
        links += [
            (f"deriv.v[{i}]", f"int.v[{i}]", 1.0),
            (f"deriv.om[{i}]", f"int.om[{i}]", 1.0),
            (f"int.v.out[{i}]", f"state.v[{i}]", 1.0),
            (f"int.v.out[{i}]", f"int.p[{i}]", 1.0),
            (f"int.om.out[{i}]", f"state.om[{i}]", 1.0),
            (f"int.om.out[{i}]", f"int.th[{i}]", 1.0),
            (f"int.p.out[{i}]", f"state.p[{i}]", 1.0),
            (f"int.th.out[{i}]", f"state.th[{i}]", 1.0),
            (f"deriv.v[{i}]", f"fb.a[{i}]", 1.0),
            (f"deriv.om[{i}]", f"fb.e[{i}]", 1.0),
        ]
    ext_in = [f"{p.name}.w[{i}]" for p in ports for i in range(WRENCH_W)]
    ext_out = [f"{p.name}.m[{i}]" for p in list(ports) + list(observe)
               for i in range(MOTION_W)]
    wired = u_wire(combined, links, ext_in=ext_in, ext_out=ext_out)

    if check_trim:
        balance = Affine.of(0.0)
        for p in ports:
            balance = balance + p.trim
        for c, f in trim_only:
            balance = balance + _aff(f)
        balance = balance - mass.scale(GRAV)
        _zero_affine_check(balance, "forward body")

    axes = "xyz"
    names = tuple(f"{label_states}.{b}.{axes[i]}"
                  for b in ("v", "om", "p", "th") for i in range(3))
    return Element(wired, state_names=names, kind="body")


def _stiff_umat(k, total_probe: int = 1) -> UncertainSystem:
    if isinstance(k, UncertainSystem):
        if k.n_phys_inputs != 1 or k.n_phys_outputs != 1:
            raise ValueError("stiffness LFT must be 1x1")
        return k
    return umat_affine_diag(_aff(k), 1)


def revolute_joint(axes: list[JointAxis], observe_states: bool = False,
                   label_states: str = "joint") -> Element:
    """Massless zero-extent joint with one rotational DOF per axis.

    The wrench passes straight through.  Each axis contributes two states
    (rate, angle).  Free axes emit a torque-balance residual paired with the
    relative-acceleration input for the assembler's constraint elimination;
    prescribed axes take the relative acceleration as an external input.
    """
    lay = _Layout()
    i_top = lay.add("up.m", MOTION_W)
    i_w = lay.add("down.w", WRENCH_W)
    i_nu = {}
    i_act = {}
    for ax in axes:
        if ax.mode == "free":
            i_nu[ax.name] = lay.add(f"nu.{ax.name}", 1)
        elif ax.mode == "prescribed":
            i_nu[ax.name] = lay.add(f"acc.{ax.name}", 1)
        else:
            raise ValueError(f"unknown joint axis mode {ax.mode}")
        if ax.actuated:
            i_act[ax.name] = lay.add(f"act.{ax.name}", 1)
    i_st = {ax.name: (lay.add(f"state.{ax.name}.rate", 1),
                      lay.add(f"state.{ax.name}.angle", 1)) for ax in axes}
    total = lay.total

    def S(rows):
        return _sel(rows, total)

    up = S(i_top)
    down_m = up
    for ax in axes:
        d = ax.unit()
        add = np.zeros((MOTION_W, 3))
        add[ANG_ACC, 0] = d
        add[ANG_VEL, 1] = d
        add[ANG_POS, 2] = d
        rel = _stack([S(i_nu[ax.name]), S(i_st[ax.name][0]),
                      S(i_st[ax.name][1])])
        down_m = u_add(down_m, u_mul(umat_const(add), rel))

    outputs = [("up.w", S(i_w)), ("down.m", down_m)]
    for ax in axes:
        if ax.mode != "free":
            continue
        d = ax.unit()
        tau_ax = u_mul(umat_const(d.reshape(1, 3)), S(i_w[3:]))
        r = u_add(tau_ax, _neg(u_mul(_stiff_umat(ax.stiffness),
                                     S(i_st[ax.name][1]))))
        if ax.damping:
            r = u_add(r, _neg(u_mul(umat_const([[ax.damping]]),
                                    S(i_st[ax.name][0]))))
        if ax.actuated:
            r = u_add(r, S(i_act[ax.name]))
        outputs.append((f"res.{ax.name}", r))
    # the relative acceleration must feed its own integrator while staying an
    # external input (solve target or actuator drive), so it gets a
    # passthrough output to link from
    for ax in axes:
        outputs.append((f"nupass.{ax.name}", S(i_nu[ax.name])))
    if observe_states:
        for ax in axes:
            outputs.append((f"angle.{ax.name}", S(i_st[ax.name][1])))
            outputs.append((f"rate.{ax.name}", S(i_st[ax.name][0])))

    core = _finalize_static(outputs, lay)

    ints = append(*(integrator() for _ in range(2 * len(axes))))
    in_names = []
    out_names = []
    for ax in axes:
        in_names += [f"int.{ax.name}.rate", f"int.{ax.name}.angle"]
        out_names += [f"int.{ax.name}.rate.out", f"int.{ax.name}.angle.out"]
    bank = u_from_ss(ints.renamed(in_names, out_names))
    combined = u_append([core, bank])
    links = []
    for ax in axes:
        links += [
            (f"nupass.{ax.name}[0]", f"int.{ax.name}.rate", 1.0),
            (f"int.{ax.name}.rate.out", f"state.{ax.name}.rate[0]", 1.0),
            (f"int.{ax.name}.rate.out", f"int.{ax.name}.angle", 1.0),
            (f"int.{ax.name}.angle.out", f"state.{ax.name}.angle[0]", 1.0),
        ]
    ext_in = [f"up.m[{i}]" for i in range(MOTION_W)]
    ext_in += [f"down.w[{i}]" for i in range(WRENCH_W)]
    for ax in axes:
        base = "nu" if ax.mode == "free" else "acc"
        ext_in.append(f"{base}.{ax.name}[0]")
        if ax.actuated:
            ext_in.append(f"act.{ax.name}[0]")
    ext_out = [f"up.w[{i}]" for i in range(WRENCH_W)]
    ext_out += [f"down.m[{i}]" for i in range(MOTION_W)]
    for ax in axes:
        if ax.mode == "free":
            ext_out.append(f"res.{ax.name}[0]")
    if observe_states:
        for ax in axes:
            ext_out += [f"angle.{ax.name}[0]", f"rate.{ax.name}[0]"]
    wired = u_wire(combined, links, ext_in=ext_in, ext_out=ext_out)

    residuals = tuple((f"res.{ax.name}[0]", f"nu.{ax.name}[0]")
                      for ax in axes if ax.mode == "free")
    names = tuple(f"{label_states}.{ax.name}.{w}"
                  for ax in axes for w in ("rate", "angle"))
    return Element(wired, residuals=residuals, state_names=names, kind="joint")


def bifilar_suspension(mass, inertia, length: float, d_sep,
                       trim_top, trim_bot,
                       torsion_damping: float = 0.0,
                       check_trim: bool = True) -> Element:
    """Cable ladder segment: laterally a rigid body, torsionally compliant.

    The restoring stiffness about the vertical axis is W d^2 / (4 L) with W
    the supported weight below the segment and d the attachment separation;
    with an uncertain d the stiffness is quadratic in the radius parameter
    (two occurrences).  Two states: twist angle and rate.
    """
    mass = _aff(mass)
    trim_top = _aff(trim_top)
    trim_bot = _aff(trim_bot)
    d_sep = _aff(d_sep)
    supported = trim_bot.scale(-1.0)
    require_tension(supported, "bifilar lower attachment")
    d1 = umat_affine_diag(d_sep, 1)
    w1 = umat_affine_diag(supported.scale(1.0 / (4.0 * length)), 1)
    k_t = u_mul(u_mul(d1, d1), w1)

    body = inverse_body(mass, inertia,
                        top=PortSpec("up", length / 2.0, trim_top),
                        bottom=[PortSpec("mid", -length / 2.0, trim_bot)],
                        check_trim=check_trim)
    joint = revolute_joint([JointAxis("tw", (0.0, 0.0, 1.0), "free",
                                      stiffness=k_t,
                                      damping=torsion_damping)])
    combined = u_append([body.usys, joint.usys], labels=["b", "j"])
    links = [(f"b/mid.m[{i}]", f"j/up.m[{i}]", 1.0) for i in range(MOTION_W)]
    links += [(f"j/up.w[{i}]", f"b/mid.w[{i}]", 1.0) for i in range(WRENCH_W)]
    ext_in = ([f"b/up.m[{i}]" for i in range(MOTION_W)]
              + [f"j/down.w[{i}]" for i in range(WRENCH_W)]
              + ["j/nu.tw[0]"])
    ext_out = ([f"b/up.w[{i}]" for i in range(WRENCH_W)]
               + [f"j/down.m[{i}]" for i in range(MOTION_W)]
               + ["j/res.tw[0]"])
    wired = u_wire(combined, links, ext_in=ext_in, ext_out=ext_out)
    new_in = ([f"up.m[{i}]" for i in range(MOTION_W)]
              + [f"down.w[{i}]" for i in range(WRENCH_W)]
              + ["nu.tw[0]"])
    new_out = ([f"up.w[{i}]" for i in range(WRENCH_W)]
               + [f"down.m[{i}]" for i in range(MOTION_W)]
               + ["res.tw[0]"])
    wired = wired.renamed(new_in, new_out)
    return Element(wired, residuals=(("res.tw[0]", "nu.tw[0]"),),
                   state_names=("tw.rate", "tw.angle"), kind="suspension")


def terminator() -> Element:
    """Absorbs a motion port and returns a zero wrench (massless tail)."""
    d = np.zeros((WRENCH_W, MOTION_W))
    names_in = [f"up.m[{i}]" for i in range(MOTION_W)]
    names_out = [f"up.w[{i}]" for i in range(WRENCH_W)]
    g = ss(np.zeros((0, 0)), np.zeros((0, MOTION_W)),
           np.zeros((WRENCH_W, 0)), d, names_in, names_out)
    return Element(u_from_ss(g), kind="terminator")


def fixed_base() -> Element:
    """Motionless mounting point (for bench tests): emits zero motion."""
    d = np.zeros((MOTION_W, WRENCH_W))
    names_in = [f"down.w[{i}]" for i in range(WRENCH_W)]
    names_out = [f"down.m[{i}]" for i in range(MOTION_W)]
    g = ss(np.zeros((0, 0)), np.zeros((0, WRENCH_W)),
           np.zeros((MOTION_W, 0)), d, names_in, names_out)
    return Element(u_from_ss(g), kind="base")


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class AssemblyInfo:
    state_names: tuple[str, ...]
    removed_states: tuple[str, ...]
    pruned_channels: dict


def _pattern_keep(combined: UncertainSystem,
                  links: list[tuple[str, str, float]],
                  solve: list[tuple[str, str]],
                  ext_in: list[str], ext_out: list[str]):
    """Reachability/observability masks computed on the pre-wiring pattern.

    Wiring solves linear systems whose results carry float dust in entries
    that are structurally zero, so the analysis runs on the unwired block
    model (construction-exact zeros) with link, loop-closure, and
    constraint-solve edges added to the graph.  A state or channel survives
    only if an external input reaches it and an external output sees it,
    with paths allowed through the diagonal delta/tuner closures (each w
    driven solely by its paired z) and through the exact eliminations
    (every free input depends on every residual).
    """
    m = combined.m
    kd, kt = combined.delta.total_dim, combined.tuners.total_dim
    n = m.n_states
    n_in, n_out = m.n_inputs, m.n_outputs
    nch = kd + kt
    chan_in = list(range(kd)) + list(range(n_in - kt, n_in))
    chan_out = list(range(kd)) + list(range(n_out - kt, n_out))

    # nodes: states | inputs | outputs
    def in_node(i):
        return n + i

    def out_node(i):
        return n + n_in + i

    nodes = n + n_in + n_out
    adj = [[] for _ in range(nodes)]

    rows, cols = np.nonzero(m.a)
    for r, c in zip(rows, cols):
        adj[c].append(r)
    rows, cols = np.nonzero(m.b)
    for r, c in zip(rows, cols):
        adj[in_node(c)].append(r)
    rows, cols = np.nonzero(m.c)
    for r, c in zip(rows, cols):
        adj[c].append(out_node(r))
    rows, cols = np.nonzero(m.d)
    for r, c in zip(rows, cols):
        adj[in_node(c)].append(out_node(r))
    for c in range(nch):
        adj[out_node(chan_out[c])].append(in_node(chan_in[c]))

    pin = {name: i for i, name in enumerate(m.input_names)}
    pout = {name: i for i, name in enumerate(m.output_names)}
    for o, i, _ in links:
        adj[out_node(pout[o])].append(in_node(pin[i]))
    res_nodes = [out_node(pout[r]) for r, _ in solve]
    free_nodes = [in_node(pin[f]) for _, f in solve]

    def bfs(starts, graph):
        seen = np.zeros(nodes, dtype=bool)
        stack = list(starts)
        for s in stack:
            seen[s] = True
        while stack:
            i = stack.pop()
            for j in graph[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return seen

    # The elimination couples a residual only to frees in its connectivity
    # component of the apparent-inertia pattern (the inverse fills a
    # component at most), so probe which residuals each free can touch and
    # union the pairs before adding residual -> free edges.
    parent = list(range(len(solve)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for j, fn in enumerate(free_nodes):
        hit = bfs([fn], adj)
        for i, rn in enumerate(res_nodes):
            if hit[rn]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    for i, rn in enumerate(res_nodes):
        for j, fn in enumerate(free_nodes):
            if find(i) == find(j):
                adj[rn].append(fn)

    radj = [[] for _ in range(nodes)]
    for src, dsts in enumerate(adj):
        for d in dsts:
            radj[d].append(src)

    reach = bfs([in_node(pin[name]) for name in ext_in], adj)
    obs = bfs([out_node(pout[name]) for name in ext_out], radj)

    state_keep = [bool(reach[i] and obs[i]) for i in range(n)]
    chan_keep = [bool(reach[out_node(chan_out[c])]
                      and obs[in_node(chan_in[c])]) for c in range(nch)]
    return state_keep, chan_keep


def _slice_reduced(usys: UncertainSystem, state_keep, chan_keep,
                   state_names):
    m = usys.m
    kd, kt = usys.delta.total_dim, usys.tuners.total_dim
    n = m.n_states
    n_in, n_out = m.n_inputs, m.n_outputs
    mu = n_in - kd - kt
    py = n_out - kd - kt
    keep_states = [i for i in range(n) if state_keep[i]]
    removed = tuple(state_names[i] for i in range(n) if not state_keep[i])

    def rebuild(structure, base):
        blocks = []
        kept_local = []
        pruned = {}
        off = 0
        for b in structure.blocks:
            flags = [chan_keep[base + off + i] for i in range(b.dim)]
            kept = sum(flags)
            if kept < b.dim:
                pruned[b.param.name] = b.dim - kept
            if kept:
                blocks.append(type(b)(b.param, kept))
            kept_local.extend(off + i for i in range(b.dim) if flags[i])
            off += b.dim
        return DeltaStructure(tuple(blocks)), kept_local, pruned

    dstruct, d_keep, pruned_d = rebuild(usys.delta, 0)
    tstruct, t_keep, pruned_t = rebuild(usys.tuners, kd)
    in_idx = (d_keep + list(range(kd, kd + mu))
              + [n_in - kt + i for i in t_keep])
    out_idx = (d_keep + list(range(kd, kd + py))
               + [n_out - kt + i for i in t_keep])
    sub = ss(m.a[np.ix_(keep_states, keep_states)],
             m.b[np.ix_(keep_states, in_idx)],
             m.c[np.ix_(out_idx, keep_states)],
             m.d[np.ix_(out_idx, in_idx)],
             tuple(m.input_names[i] for i in in_idx),
             tuple(m.output_names[i] for i in out_idx))
    kept_names = tuple(state_names[i] for i in keep_states)
    return (UncertainSystem(sub, dstruct, tstruct), kept_names, removed,
            {**pruned_d, **pruned_t})


def assemble(elements: dict[str, Element],
             connections: list[tuple[str, str, str]],
             ext_in: list[str], ext_out: list[str],
             reduce_states: bool = True):
    """Wire a chain of elements into one UncertainSystem.

    connections: (parent label, parent port, child label); the child's "up"
    port always mates.  Free-axis residual pairs from every joint are solved
    exactly.  External port names carry the element label prefix, e.g.
    "pivot/act.z[0]".
    """
    labels = list(elements)
    combined = u_append([elements[k].usys for k in labels], labels)
    links = []
    for pl, pp, cl in connections:
        links += [(f"{pl}/{pp}.m[{i}]", f"{cl}/up.m[{i}]", 1.0)
                  for i in range(MOTION_W)]
        links += [(f"{cl}/up.w[{i}]", f"{pl}/{pp}.w[{i}]", 1.0)
                  for i in range(WRENCH_W)]
    solve = [(f"{k}/{r}", f"{k}/{s}")
             for k in labels for r, s in elements[k].residuals]
    wired = u_wire(combined, links, solve=solve,
                   ext_in=ext_in, ext_out=ext_out)
    state_names = [f"{k}/{sn}" for k in labels
                   for sn in elements[k].state_names]
    if not reduce_states:
        return wired, AssemblyInfo(tuple(state_names), (), {})
    state_keep, chan_keep = _pattern_keep(combined, links, solve,
                                          ext_in, ext_out)
    if all(state_keep) and all(chan_keep):
        return wired, AssemblyInfo(tuple(state_names), (), {})
    reduced, kept, removed, pruned = _slice_reduced(wired, state_keep,
                                                    chan_keep, state_names)
    return reduced, AssemblyInfo(kept, removed, pruned)


# ---------------------------------------------------------------------------
# independent energy-method oracle
#
# The chain restricted to one lateral plane is a classic compound-pendulum
# train: generalized coordinates are the horizontal cg position of the free
# top body and the absolute tilt of every unit.  Kinetic and potential
# energies are assembled directly (T from cg velocities and own-axis
# inertias, V from the quadratic cg rises and any extra tilt springs), which
# shares no code path with the port-based LFT construction above.


@dataclass(frozen=True)
class LateralUnit:
    """One laterally rigid unit of the hanging chain.

    a: distance from the unit's top hinge down to its cg (unused for the
    free top unit).  b: distance from the cg down to the bottom hinge.
    extra_tilt_stiffness: absolute tilt spring (buoyancy righting for the
    top unit).  tilt_damping: absolute tilt-rate damper.
    """

    mass: float
    inertia: float
    a: float = 0.0
    b: float = 0.0
    extra_tilt_stiffness: float = 0.0
    tilt_damping: float = 0.0


def lateral_plane_modes(units: list[LateralUnit],
                        joint_damping: list[float] | None = None,
                        joint_stiffness: list[float] | None = None,
                        gravity: float = GRAV) -> np.ndarray:
    """Eigenvalues of one lateral plane (2N+2 values, rigid modes included)."""
    nu = len(units)
    nq = nu + 1  # u, beta_0..beta_{nu-1}
    if joint_damping is None:
        joint_damping = [0.0] * (nu - 1)
    if joint_stiffness is None:
        joint_stiffness = [0.0] * (nu - 1)
    if len(joint_damping) != nu - 1 or len(joint_stiffness) != nu - 1:
        raise ValueError("need one hinge entry per adjacent pair")

    # horizontal cg jacobian rows: x_k = u + sum coeffs * beta
    jac = np.zeros((nu, nq))
    jac[:, 0] = 1.0
    for k in range(nu):
        for j in range(k):
            jac[k, 1 + j] += units[j].b if j == 0 else units[j].a + units[j].b
        if k > 0:
            jac[k, 1 + k] += units[k].a
    # path below the top unit starts at its bottom offset, so the j == 0
    # term uses b only; later units contribute their full hinge spans

    mu = jac.T @ np.diag([u.mass for u in units]) @ jac
    for k in range(nu):
        mu[1 + k, 1 + k] += units[k].inertia

    kappa = np.zeros((nq, nq))
    for k in range(nu):
        # weight of unit k rides on every segment along its support path
        w = units[k].mass * gravity
        if k > 0:
            kappa[1, 1] += w * units[0].b
            for j in range(1, k):
                kappa[1 + j, 1 + j] += w * (units[j].a + units[j].b)
            kappa[1 + k, 1 + k] += w * units[k].a
        kappa[1 + k, 1 + k] += units[k].extra_tilt_stiffness
    for j, ks in enumerate(joint_stiffness):
        if ks:
            i1, i2 = 1 + j, 2 + j
            kappa[i1, i1] += ks
            kappa[i2, i2] += ks
            kappa[i1, i2] -= ks
            kappa[i2, i1] -= ks

    gam = np.zeros((nq, nq))
    for j, cd in enumerate(joint_damping):
        if cd:
            i1, i2 = 1 + j, 2 + j
            gam[i1, i1] += cd
            gam[i2, i2] += cd
            gam[i1, i2] -= cd
            gam[i2, i1] -= cd
    for k in range(nu):
        gam[1 + k, 1 + k] += units[k].tilt_damping

    mi = np.linalg.inv(mu)
    a = np.block([[np.zeros((nq, nq)), np.eye(nq)],
                  [-mi @ kappa, -mi @ gam]])
    return np.linalg.eigvals(a)


def torsion_modes(inertias: list[float],
                  springs: list[tuple[float, float]],
                  unit_damping: list[float] | None = None) -> np.ndarray:
    """Eigenvalues of the torsion chain: units coupled by (k, c) springs."""
    nu = len(inertias)
    if len(springs) != nu - 1:
        raise ValueError("need one spring per adjacent pair")
    if unit_damping is None:
        unit_damping = [0.0] * nu
    kappa = np.zeros((nu, nu))
    gam = np.zeros((nu, nu))
    for j, (k, c) in enumerate(springs):
        i1, i2 = j, j + 1
        kappa[i1, i1] += k
        kappa[i2, i2] += k
        kappa[i1, i2] -= k
        kappa[i2, i1] -= k
        gam[i1, i1] += c
        gam[i2, i2] += c
        gam[i1, i2] -= c
        gam[i2, i1] -= c
    for i, d in enumerate(unit_damping):
        gam[i, i] += d
    mi = np.diag(1.0 / np.asarray(inertias, dtype=float))
    a = np.block([[np.zeros((nu, nu)), np.eye(nu)],
                  [-mi @ kappa, -mi @ gam]])
    return np.linalg.eigvals(a)


def modal_frequencies(eigs: np.ndarray, drop_below: float = 1e-8) -> np.ndarray:
    """Sorted oscillatory frequencies |Im| (one per conjugate pair)."""
    im = np.imag(eigs)
    return np.sort(im[im > drop_below])
