"""Linear fractional transformations with structured real uncertainty.

An :class:`UncertainSystem` is a state-space coefficient model M with three
input/output channel groups::

    inputs  = [ w_delta | u | w_tuner ]      outputs = [ z_delta | y | z_tuner ]

The delta channels (front) close against a block-diagonal, real,
repeated-scalar uncertainty Delta = blkdiag(delta_i * I_{k_i}) with each
normalized delta_i in [-1, 1]; the tuner channels (back) close against
design parameters (fusion time constants, controllers).  Physical parameter
values map to normalized deltas through ``value = nominal + half_range *
delta``.

Composition rules keep the structure explicit: interconnection concatenates
delta structures, and blocks referring to the same named parameter are
merged (their occurrence counts add - never multiply) so one physical scalar
always closes every channel it touches.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lti import StateSpaceModel, ss

__all__ = [
    "UncertainParam",
    "DeltaBlock",
    "DeltaStructure",
    "UncertainSystem",
    "Affine",
    "upper_lft",
    "lower_lft",
    "instantiate",
    "interconnect",
    "sample_delta",
    "u_append",
    "u_wire",
    "u_from_ss",
    "as_tuners",
    "umat_const",
    "umat_affine",
    "umat_affine_diag",
    "u_mul",
    "u_add",
    "u_vstack",
    "u_hstack",
    "u_inverse",
    "close_with_system",
]


@dataclass(frozen=True)
class UncertainParam:
    """A named real uncertain (or tunable) scalar.

    value = nominal + half_range * delta with normalized delta in [-1, 1].
    """

    name: str
    nominal: float
    half_range: float = 0.0

    def value(self, delta: float) -> float:
        return self.nominal + self.half_range * delta

    def delta_of(self, value: float) -> float:
        if self.half_range == 0.0:
            if value != self.nominal:
                raise ValueError(f"parameter {self.name} is not uncertain")
            return 0.0
        return (value - self.nominal) / self.half_range


@dataclass(frozen=True)
class DeltaBlock:
    """One repeated-scalar block: delta_param * I_dim."""

    param: UncertainParam
    dim: int


@dataclass(frozen=True)
class DeltaStructure:
    """Ordered collection of repeated-scalar blocks; names are unique."""

    blocks: tuple[DeltaBlock, ...] = ()

    def __post_init__(self):
        names = [b.param.name for b in self.blocks]
        if len(names) != len(set(names)):
            raise ValueError("duplicate parameter names in delta structure")

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b.param.name for b in self.blocks)

    def occurrences(self, name: str) -> int:
        for b in self.blocks:
            if b.param.name == name:
                return b.dim
        raise KeyError(name)

    def param(self, name: str) -> UncertainParam:
        for b in self.blocks:
            if b.param.name == name:
                return b.param
        raise KeyError(name)

    def diag_vector(self, delta_values: dict[str, float]) -> np.ndarray:
        """Expand per-parameter deltas to the per-channel diagonal."""
        out = np.empty(self.total_dim)
        k = 0
        for b in self.blocks:
            if b.param.name not in delta_values:
                raise KeyError(f"missing delta for parameter {b.param.name}")
            d = float(delta_values[b.param.name])
            out[k:k + b.dim] = d
            k += b.dim
        return out

    def clip_check(self, delta_values: dict[str, float], tol: float = 1e-9):
        for name, d in delta_values.items():
            if abs(d) > 1.0 + tol:
                raise ValueError(f"normalized delta for {name} outside [-1, 1]")


EMPTY_DELTA = DeltaStructure()


@dataclass(frozen=True)
class UncertainSystem:
    """State-space coefficient matrix with delta and tuner channel groups."""

    m: StateSpaceModel
    delta: DeltaStructure = EMPTY_DELTA
    tuners: DeltaStructure = EMPTY_DELTA

    def __post_init__(self):
        kd, kt = self.delta.total_dim, self.tuners.total_dim
        if self.m.n_inputs < kd + kt or self.m.n_outputs < kd + kt:
            raise ValueError("model too small for declared channel structure")

    @property
    def n_phys_inputs(self) -> int:
        return self.m.n_inputs - self.delta.total_dim - self.tuners.total_dim

    @property
    def n_phys_outputs(self) -> int:
        return self.m.n_outputs - self.delta.total_dim - self.tuners.total_dim

    @property
    def phys_input_names(self) -> tuple[str, ...]:
        kd = self.delta.total_dim
        return self.m.input_names[kd:kd + self.n_phys_inputs]

    @property
    def phys_output_names(self) -> tuple[str, ...]:
        kd = self.delta.total_dim
        return self.m.output_names[kd:kd + self.n_phys_outputs]

    def renamed(self, inputs=None, outputs=None) -> "UncertainSystem":
        kd, kt = self.delta.total_dim, self.tuners.total_dim
        innames = list(self.m.input_names)
        outnames = list(self.m.output_names)
        if inputs is not None:
            if len(inputs) != self.n_phys_inputs:
                raise ValueError("wrong number of input names")
            innames[kd:kd + self.n_phys_inputs] = list(inputs)
        if outputs is not None:
            if len(outputs) != self.n_phys_outputs:
                raise ValueError("wrong number of output names")
            outnames[kd:kd + self.n_phys_outputs] = list(outputs)
        return dataclasses.replace(self, m=self.m.renamed(innames, outnames))


def u_from_ss(g: StateSpaceModel) -> UncertainSystem:
    """Wrap a certain model as an UncertainSystem with no delta channels."""
    return UncertainSystem(g)


def as_tuners(usys: UncertainSystem) -> UncertainSystem:
    """Reinterpret all delta blocks as tuner blocks (channels move to the
    back).  The system must not already carry tuners."""
    if usys.tuners.total_dim:
        raise ValueError("system already has tuner channels")
    kd = usys.delta.total_dim
    m = usys.m
    in_perm = list(range(kd, m.n_inputs)) + list(range(kd))
    out_perm = list(range(kd, m.n_outputs)) + list(range(kd))
    model = ss(m.a, m.b[:, in_perm], m.c[out_perm, :],
               m.d[np.ix_(out_perm, in_perm)],
               tuple(m.input_names[i] for i in in_perm),
               tuple(m.output_names[i] for i in out_perm))
    return UncertainSystem(model, EMPTY_DELTA, usys.delta)


# ---------------------------------------------------------------------------
# closure


def _close_front(g: StateSpaceModel, k: int, diag: np.ndarray) -> StateSpaceModel:
    """Close the first k inputs/outputs with the static diagonal gain
    w = diag * z (upper LFT closure)."""
    a, b, c, d = g.a, g.b, g.c, g.d
    bw, bu = b[:, :k], b[:, k:]
    cz, cy = c[:k, :], c[k:, :]
    dzw, dzu = d[:k, :k], d[:k, k:]
    dyw, dyu = d[k:, :k], d[k:, k:]
    x = np.eye(k) - dzw * diag[np.newaxis, :]  # Dzw @ Delta, Delta diagonal
    if k and np.linalg.cond(x) > 1e12:
        raise ValueError("ill-posed uncertainty closure (I - Dzw*Delta singular)")
    if k:
        sol = np.linalg.solve(x, np.hstack([cz, dzu]))
    else:
        sol = np.hstack([cz, dzu])
    zsol_c, zsol_d = sol[:, :a.shape[0]], sol[:, a.shape[0]:]
    bwd = bw * diag[np.newaxis, :]
    dywd = dyw * diag[np.newaxis, :]
    return ss(a + bwd @ zsol_c, bu + bwd @ zsol_d,
              cy + dywd @ zsol_c, dyu + dywd @ zsol_d,
              g.input_names[k:], g.output_names[k:])


def _perm_tuners_front(usys: UncertainSystem) -> StateSpaceModel:
    """Reorder channels so the tuner group comes first."""
    kd = usys.delta.total_dim
    kt = usys.tuners.total_dim
    m = usys.m
    nin, nout = m.n_inputs, m.n_outputs
    in_perm = list(range(nin - kt, nin)) + list(range(nin - kt))
    out_perm = list(range(nout - kt, nout)) + list(range(nout - kt))
    return ss(m.a, m.b[:, in_perm], m.c[out_perm, :], m.d[np.ix_(out_perm, in_perm)],
              tuple(m.input_names[i] for i in in_perm),
              tuple(m.output_names[i] for i in out_perm))


def upper_lft(usys: UncertainSystem, delta_values: dict[str, float],
              check_range: bool = True):
    """Close the delta channels at the given normalized values.

    Returns a StateSpaceModel when no tuner channels remain, otherwise an
    UncertainSystem retaining them.
    """
    if check_range:
        usys.delta.clip_check({n: delta_values.get(n, 0.0) for n in usys.delta.names})
    vals = {n: float(delta_values.get(n, 0.0)) for n in usys.delta.names}
    diag = usys.delta.diag_vector(vals)
    closed = _close_front(usys.m, usys.delta.total_dim, diag)
    if usys.tuners.total_dim == 0:
        return closed
    return UncertainSystem(closed, EMPTY_DELTA, usys.tuners)


def lower_lft(usys: UncertainSystem, tuner_values: dict[str, float],
              physical: bool = True):
    """Close the tuner channels.

    ``tuner_values`` are physical values when ``physical`` is True (mapped to
    normalized deltas through each parameter's nominal/half_range), otherwise
    normalized deltas.  Returns a StateSpaceModel when no delta channels
    remain, otherwise an UncertainSystem retaining them.
    """
    vals = {}
    for name in usys.tuners.names:
        p = usys.tuners.param(name)
        if name not in tuner_values:
            raise KeyError(f"missing tuner value for {name}")
        vals[name] = p.delta_of(float(tuner_values[name])) if physical \
            else float(tuner_values[name])
    flipped = UncertainSystem(_perm_tuners_front(usys), usys.tuners, EMPTY_DELTA)
    closed = _close_front(flipped.m, usys.tuners.total_dim,
                          usys.tuners.diag_vector(vals))
    if usys.delta.total_dim == 0:
        return closed
    return UncertainSystem(closed, usys.delta, EMPTY_DELTA)


def instantiate(usys: UncertainSystem, delta_values: dict[str, float] | None = None,
                tuner_values: dict[str, float] | None = None,
                physical_tuners: bool = True) -> StateSpaceModel:
    """Close all channels: deltas at normalized values (default 0), tuners at
    physical values (required when tuner channels exist)."""
    out = usys
    if usys.tuners.total_dim:
        if tuner_values is None:
            raise ValueError("model has tuner channels; tuner_values required")
        out = lower_lft(out, tuner_values, physical=physical_tuners)
        if isinstance(out, StateSpaceModel):
            out = u_from_ss(out)
    closed = upper_lft(out, delta_values or {})
    if isinstance(closed, UncertainSystem):
        closed = closed.m
    return closed


# ---------------------------------------------------------------------------
# structure composition


def _merge_structure(blocks: list[DeltaBlock]) -> tuple[DeltaStructure, list[int]]:
    """Group channels of same-named blocks together (first-appearance order).

    Returns the merged structure and the channel permutation ``perm`` such
    that new_channel[j] = old_channel[perm[j]].
    """
    offsets = []
    k = 0
    for b in blocks:
        offsets.append(k)
        k += b.dim
    order: dict[str, list[int]] = {}
    params: dict[str, UncertainParam] = {}
    for b, off in zip(blocks, offsets):
        if b.param.name in params:
            if (params[b.param.name].nominal != b.param.nominal
                    or params[b.param.name].half_range != b.param.half_range):
                raise ValueError(
                    f"conflicting definitions of parameter {b.param.name}")
        else:
            params[b.param.name] = b.param
            order[b.param.name] = []
        order[b.param.name].extend(range(off, off + b.dim))
    perm: list[int] = []
    merged = []
    for name, chans in order.items():
        merged.append(DeltaBlock(params[name], len(chans)))
        perm.extend(chans)
    return DeltaStructure(tuple(merged)), perm


def u_append(systems: list[UncertainSystem],
             labels: list[str] | None = None) -> UncertainSystem:
    """Uncoupled combination preserving channel groups.

    Physical port names get an optional ``label/`` prefix so wiring by name
    stays unambiguous.  Delta blocks referring to the same parameter merge.
    """
    if labels is not None and len(labels) != len(systems):
        raise ValueError("labels length mismatch")
    n_tot = sum(s.m.n_states for s in systems)
    kd = sum(s.delta.total_dim for s in systems)
    kt = sum(s.tuners.total_dim for s in systems)
    mu = sum(s.n_phys_inputs for s in systems)
    py = sum(s.n_phys_outputs for s in systems)
    a = np.zeros((n_tot, n_tot))
    b = np.zeros((n_tot, kd + mu + kt))
    c = np.zeros((kd + py + kt, n_tot))
    d = np.zeros((kd + py + kt, kd + mu + kt))
    in_names = [""] * (kd + mu + kt)
    out_names = [""] * (kd + py + kt)
    xs = wd = uo = wt = zd = yo = zt = 0
    blocks_d: list[DeltaBlock] = []
    blocks_t: list[DeltaBlock] = []
    for idx, s in enumerate(systems):
        lbl = labels[idx] if labels else None
        m = s.m
        n = m.n_states
        skd, skt = s.delta.total_dim, s.tuners.total_dim
        smu, spy = s.n_phys_inputs, s.n_phys_outputs
        in_map = (list(range(wd, wd + skd))
                  + list(range(kd + uo, kd + uo + smu))
                  + list(range(kd + mu + wt, kd + mu + wt + skt)))
        out_map = (list(range(zd, zd + skd))
                   + list(range(kd + yo, kd + yo + spy))
                   + list(range(kd + py + zt, kd + py + zt + skt)))
        a[xs:xs + n, xs:xs + n] = m.a
        b[xs:xs + n, in_map] = m.b
        c[out_map, xs:xs + n] = m.c
        d[np.ix_(out_map, in_map)] = m.d
        for j, gi in enumerate(in_map):
            nm = m.input_names[j]
            if lbl is not None and skd <= j < skd + smu:
                nm = f"{lbl}/{nm}"
            in_names[gi] = nm
        for j, go in enumerate(out_map):
            nm = m.output_names[j]
            if lbl is not None and skd <= j < skd + spy:
                nm = f"{lbl}/{nm}"
            out_names[go] = nm
        blocks_d.extend(s.delta.blocks)
        blocks_t.extend(s.tuners.blocks)
        xs += n
        wd += skd
        zd += skd
        uo += smu
        yo += spy
        wt += skt
        zt += skt
    merged_d, perm_d = _merge_structure(blocks_d)
    merged_t, perm_t = _merge_structure(blocks_t)
    in_perm = perm_d + list(range(kd, kd + mu)) + [kd + mu + j for j in perm_t]
    out_perm = perm_d + list(range(kd, kd + py)) + [kd + py + j for j in perm_t]
    model = ss(a, b[:, in_perm], c[out_perm, :], d[np.ix_(out_perm, in_perm)],
               tuple(in_names[i] for i in in_perm),
               tuple(out_names[i] for i in out_perm))
    return UncertainSystem(model, merged_d, merged_t)


def _scaled_lu(mat: np.ndarray, cond_limit: float):
    """Factor one irreducible block in max-norm balanced coordinates."""
    n = mat.shape[0]
    work = np.abs(mat).astype(float)
    row = np.ones(n)
    col = np.ones(n)
    for _ in range(12):
        rm = work.max(axis=1)
        rm[rm == 0.0] = 1.0
        work /= rm[:, None]
        row *= rm
        cm = work.max(axis=0)
        cm[cm == 0.0] = 1.0
        work /= cm[None, :]
        col *= cm
    scaled = mat / row[:, None] / col[None, :]
    if not np.all(np.isfinite(scaled)) or np.linalg.cond(scaled) > cond_limit:
        return None
    lu, piv = scipy.linalg.lu_factor(scaled)

    def solver(rhs: np.ndarray) -> np.ndarray:
        y = scipy.linalg.lu_solve((lu, piv), rhs / row[:, None])
        return y / col[:, None]

    return solver


def _equilibrated_solver(mat: np.ndarray, cond_limit: float = 1e12):
    """LU solver for a square matrix, or None when structurally singular.

    Two numerical hazards are handled.  Feedthrough loops mix port
    scales badly (large inertias against long moment arms), so the raw
    condition number of a perfectly well-posed loop matrix can blow past
    any fixed limit; posedness is judged and the solve carried out in
    max-norm balanced coordinates.  And a dense LU smears rounding dust
    into structurally zero couplings (e.g. between the two lateral
    planes of an axisymmetric chain), which downstream feedback can
    amplify; solving each connected component of the sparsity pattern
    separately keeps exact zeros exact.
    """
    n = mat.shape[0]
    if n == 0:
        return lambda rhs: rhs.copy()
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components
    pattern = csr_matrix(mat != 0.0)
    n_comp, labels = connected_components(pattern, directed=False)
    if n_comp == 1:
        return _scaled_lu(mat, cond_limit)
    blocks = []
    for comp in range(n_comp):
        idx = np.flatnonzero(labels == comp)
        sub = _scaled_lu(mat[np.ix_(idx, idx)], cond_limit)
        if sub is None:
            return None
        blocks.append((idx, sub))

    def solver(rhs: np.ndarray) -> np.ndarray:
        out = np.zeros((n, rhs.shape[1]), dtype=rhs.dtype)
        for idx, sub in blocks:
            out[idx, :] = sub(rhs[idx, :])
        return out

    return solver


def u_wire(usys: UncertainSystem,
           links: list[tuple[str, str, float]],
           solve: list[tuple[str, str]] = (),
           ext_in: list[str] | None = None,
           ext_out: list[str] | None = None) -> UncertainSystem:
    """Wire physical ports of an UncertainSystem by name.

    Parameters
    ----------
    links : list of (output_port, input_port, gain)
        Adds ``gain * y[output_port]`` into ``u[input_port]``.  Several links
        may target the same input (they sum).
    solve : list of (residual_output, free_input)
        Exact algebraic constraint elimination: the free inputs are solved so
        the residual outputs are identically zero.  The square feedthrough
        from free inputs to residuals must be invertible (ill-posed
        interconnections raise).
    ext_in, ext_out : list of str, optional
        Names and order of retained physical ports.  Default: all unwired
        inputs / all non-residual outputs in model order.

    Delta and tuner channels pass through untouched.
    """
    m = usys.m
    kd, kt = usys.delta.total_dim, usys.tuners.total_dim
    pin = {name: kd + i for i, name in enumerate(usys.phys_input_names)}
    pout = {name: kd + i for i, name in enumerate(usys.phys_output_names)}
    if len(pin) != usys.n_phys_inputs or len(pout) != usys.n_phys_outputs:
        raise ValueError("physical port names must be unique for wiring")
    n_in, n_out = m.n_inputs, m.n_outputs

    link_mat = np.zeros((n_in, n_out))
    wired_inputs: set[int] = set()
    for out_name, in_name, gain in links:
        if out_name not in pout:
            raise KeyError(f"unknown output port {out_name}")
        if in_name not in pin:
            raise KeyError(f"unknown input port {in_name}")
        link_mat[pin[in_name], pout[out_name]] += gain
        wired_inputs.add(pin[in_name])

    free_idx = []
    res_idx = []
    for res_name, free_name in solve:
        if res_name not in pout:
            raise KeyError(f"unknown residual output {res_name}")
        if free_name not in pin:
            raise KeyError(f"unknown free input {free_name}")
        res_idx.append(pout[res_name])
        free_idx.append(pin[free_name])
        wired_inputs.add(pin[free_name])

    if ext_in is None:
        ext_in_idx = [i for name, i in
                      zip(usys.phys_input_names, range(kd, kd + usys.n_phys_inputs))
                      if i not in wired_inputs]
    else:
        ext_in_idx = [pin[name] for name in ext_in]
    for i in ext_in_idx:
        if i in wired_inputs:
            raise ValueError("port both wired and external: "
                             f"{m.input_names[i]}")
    if ext_out is None:
        resset = set(res_idx)
        ext_out_idx = [i for i in range(kd, kd + usys.n_phys_outputs)
                       if i not in resset]
    else:
        ext_out_idx = [pout[name] for name in ext_out]

    # full input map: u = S_e u_ext + S_f u_free + L y  (delta/tuner channels
    # are external by construction, prepended/appended below)
    delta_in = list(range(kd)) + list(range(n_in - kt, n_in))
    all_ext_in = list(range(kd)) + ext_in_idx + list(range(n_in - kt, n_in))
    all_ext_out = list(range(kd)) + ext_out_idx + list(range(n_out - kt, n_out))

    a, b, c, d = m.a, m.b, m.c, m.d
    n = m.n_states
    me = len(all_ext_in)
    s_e = np.zeros((n_in, me))
    for j, i in enumerate(all_ext_in):
        s_e[i, j] = 1.0
    mf = len(free_idx)
    s_f = np.zeros((n_in, mf))
    for j, i in enumerate(free_idx):
        s_f[i, j] = 1.0

    loop = np.eye(n_out) - d @ link_mat
    loop_solve = _equilibrated_solver(loop)
    if loop_solve is None:
        raise ValueError("ill-posed interconnection (algebraic loop)")
    w_c = loop_solve(c if n else np.zeros((n_out, 0)))
    w_de = loop_solve(d @ s_e)
    w_df = loop_solve(d @ s_f)

    if mf:
        r_sel = np.zeros((mf, n_out))
        for j, i in enumerate(res_idx):
            r_sel[j, i] = 1.0
        n_mat = r_sel @ w_df
        n_solve = _equilibrated_solver(n_mat)
        if n_solve is None:
            raise ValueError("ill-posed constraint elimination "
                             "(singular apparent-inertia feedthrough)")
        gain_x = -n_solve(r_sel @ w_c)
        gain_u = -n_solve(r_sel @ w_de)
        y_c = w_c + w_df @ gain_x
        y_e = w_de + w_df @ gain_u
        uf_x, uf_u = gain_x, gain_u
    else:
        y_c, y_e = w_c, w_de
        uf_x = np.zeros((0, n))
        uf_u = np.zeros((0, me))

    u_full_x = link_mat @ y_c + s_f @ uf_x
    u_full_e = s_e + link_mat @ y_e + s_f @ uf_u
    new_a = a + b @ u_full_x if n else a
    new_b = b @ u_full_e
    new_c = y_c[all_ext_out, :]
    new_d = y_e[all_ext_out, :]
    model = ss(new_a, new_b, new_c, new_d,
               tuple(m.input_names[i] for i in all_ext_in),
               tuple(m.output_names[i] for i in all_ext_out))
    return UncertainSystem(model, usys.delta, usys.tuners)


def interconnect(systems: dict[str, UncertainSystem],
                 wiring: list[tuple[str, str]],
                 ext_in: list[str] | None = None,
                 ext_out: list[str] | None = None) -> UncertainSystem:
    """Star-product interconnection of labeled subsystems.

    ``wiring`` maps ``"label/output" -> "label/input"`` one-to-one; wired
    ports disappear, every other physical port stays external.  Delta
    structures concatenate and same-named blocks merge so occurrence counts
    add.
    """
    labels = list(systems)
    combined = u_append([systems[k] for k in labels], labels)
    seen_out, seen_in = set(), set()
    for o, i in wiring:
        if o in seen_out or i in seen_in:
            raise ValueError("wiring must be one-to-one over ports")
        seen_out.add(o)
        seen_in.add(i)
    links = [(o, i, 1.0) for o, i in wiring]
    if ext_out is None:
        ext_out = [n for n in combined.phys_output_names if n not in seen_out]
    return u_wire(combined, links, ext_in=ext_in, ext_out=ext_out)


def close_with_system(usys: UncertainSystem, closer: StateSpaceModel,
                      outputs: list[str], inputs: list[str],
                      sign: float = 1.0) -> UncertainSystem:
    """Close ``inputs <- sign * closer(outputs)`` around an UncertainSystem.

    The closer is a certain model (e.g. a controller); remaining ports stay
    external in model order.
    """
    if closer.n_inputs != len(outputs) or closer.n_outputs != len(inputs):
        raise ValueError("closer dimensions do not match port lists")
    k_in = [f"_closer/{n}" for n in closer.input_names]
    k_out = [f"_closer/{n}" for n in closer.output_names]
    wrapped = u_from_ss(closer.renamed(k_in, k_out))
    combined = u_append([usys, wrapped])
    links = [(o, i, 1.0) for o, i in zip(outputs, k_in)]
    links += [(o, i, sign) for o, i in zip(k_out, inputs)]
    return u_wire(combined, links)


# ---------------------------------------------------------------------------
# affine expressions and static uncertain matrices


@dataclass(frozen=True)
class Affine:
    """Affine expression c0 + sum_i coeff_i * delta_i over named parameters.

    The standard carrier for trim loads: tensions are affine in the mass
    deltas, so they close exactly into LFT channels.
    """

    const: float
    terms: tuple[tuple[UncertainParam, float], ...] = ()

    @staticmethod
    def of(value: float) -> "Affine":
        return Affine(float(value))

    @staticmethod
    def param(p: UncertainParam) -> "Affine":
        if p.half_range == 0.0:
            return Affine(p.nominal)
        return Affine(p.nominal, ((p, p.half_range),))

    def __add__(self, other):
        other = other if isinstance(other, Affine) else Affine.of(other)
        terms: dict[str, tuple[UncertainParam, float]] = {}
        for p, c in self.terms + other.terms:
            if p.name in terms:
                terms[p.name] = (p, terms[p.name][1] + c)
            else:
                terms[p.name] = (p, c)
        kept = tuple((p, c) for p, c in terms.values() if c != 0.0)
        return Affine(self.const + other.const, kept)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.const, tuple((p, -c) for p, c in self.terms))

    def __sub__(self, other):
        other = other if isinstance(other, Affine) else Affine.of(other)
        return self + (-other)

    def __rsub__(self, other):
        return Affine.of(other) + (-self)

    def scale(self, k: float) -> "Affine":
        return Affine(k * self.const, tuple((p, k * c) for p, c in self.terms))

    def value(self, delta_values: dict[str, float] | None = None) -> float:
        dv = delta_values or {}
        return self.const + sum(c * dv.get(p.name, 0.0) for p, c in self.terms)

    def bounds(self) -> tuple[float, float]:
        spread = sum(abs(c) for _, c in self.terms)
        return self.const - spread, self.const + spread

    @property
    def is_const(self) -> bool:
        return not self.terms


def umat_const(mat) -> UncertainSystem:
    """Constant matrix as a static UncertainSystem."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    return u_from_ss(ss(np.zeros((0, 0)), np.zeros((0, mat.shape[1])),
                        np.zeros((mat.shape[0], 0)), mat))


def umat_affine_diag(expr: Affine, size: int) -> UncertainSystem:
    """(c0 + sum coeff_i delta_i) * I_size as a static LFT.

    Each parameter contributes ``size`` occurrences.
    """
    k = len(expr.terms)
    kw = k * size
    d = np.zeros((kw + size, kw + size))
    # z blocks replicate the input
    for j in range(k):
        d[j * size:(j + 1) * size, kw:kw + size] = np.eye(size)
    # y = c0 u + sum coeff_j w_j
    for j, (p, cf) in enumerate(expr.terms):
        d[kw:, j * size:(j + 1) * size] = cf * np.eye(size)
    d[kw:, kw:] = expr.const * np.eye(size)
    blocks = tuple(DeltaBlock(p, size) for p, _ in expr.terms)
    model = ss(np.zeros((0, 0)), np.zeros((0, kw + size)),
               np.zeros((kw + size, 0)), d)
    return UncertainSystem(model, DeltaStructure(blocks))


def umat_affine(expr: Affine) -> UncertainSystem:
    """Scalar affine expression as a 1x1 static LFT."""
    return umat_affine_diag(expr, 1)


def _static_d(usys: UncertainSystem) -> np.ndarray:
    if usys.m.n_states != 0 or usys.tuners.total_dim != 0:
        raise ValueError("static delta-only system expected")
    return usys.m.d


def u_mul(a: UncertainSystem, b: UncertainSystem) -> UncertainSystem:
    """Static uncertain matrix product: y = A (B u)."""
    da, db = _static_d(a), _static_d(b)
    ka, kb = a.delta.total_dim, b.delta.total_dim
    ma = a.n_phys_inputs
    pb = b.n_phys_outputs
    if ma != pb:
        raise ValueError("dimension mismatch in uncertain product")
    mu = b.n_phys_inputs
    pa = a.n_phys_outputs
    a11, a12 = da[:ka, :ka], da[:ka, ka:]
    a21, a22 = da[ka:, :ka], da[ka:, ka:]
    b11, b12 = db[:kb, :kb], db[:kb, kb:]
    b21, b22 = db[kb:, :kb], db[kb:, kb:]
    # channels: [wa; wb], input u; za = A11 wa + A12 (B21 wb + B22 u), etc.
    top = np.block([[a11, a12 @ b21, a12 @ b22],
                    [np.zeros((kb, ka)), b11, b12],
                    [a21, a22 @ b21, a22 @ b22]])
    model = ss(np.zeros((0, 0)), np.zeros((0, ka + kb + mu)),
               np.zeros((ka + kb + pa, 0)), top)
    merged, perm = _merge_structure(list(a.delta.blocks) + list(b.delta.blocks))
    in_perm = perm + list(range(ka + kb, ka + kb + mu))
    out_perm = perm + list(range(ka + kb, ka + kb + pa))
    model = ss(model.a, model.b[:, in_perm], model.c[out_perm, :],
               model.d[np.ix_(out_perm, in_perm)])
    return UncertainSystem(model, merged)


def u_add(a: UncertainSystem, b: UncertainSystem) -> UncertainSystem:
    """Static uncertain matrix sum."""
    da, db = _static_d(a), _static_d(b)
    ka, kb = a.delta.total_dim, b.delta.total_dim
    if a.n_phys_inputs != b.n_phys_inputs or a.n_phys_outputs != b.n_phys_outputs:
        raise ValueError("dimension mismatch in uncertain sum")
    mu, pa = a.n_phys_inputs, a.n_phys_outputs
    a11, a12 = da[:ka, :ka], da[:ka, ka:]
    a21, a22 = da[ka:, :ka], da[ka:, ka:]
    b11, b12 = db[:kb, :kb], db[:kb, kb:]
    b21, b22 = db[kb:, :kb], db[kb:, kb:]
    top = np.block([[a11, np.zeros((ka, kb)), a12],
                    [np.zeros((kb, ka)), b11, b12],
                    [a21, b21, a22 + b22]])
    model = ss(np.zeros((0, 0)), np.zeros((0, ka + kb + mu)),
               np.zeros((ka + kb + pa, 0)), top)
    merged, perm = _merge_structure(list(a.delta.blocks) + list(b.delta.blocks))
    in_perm = perm + list(range(ka + kb, ka + kb + mu))
    out_perm = perm + list(range(ka + kb, ka + kb + pa))
    model = ss(model.a, model.b[:, in_perm], model.c[out_perm, :],
               model.d[np.ix_(out_perm, in_perm)])
    return UncertainSystem(model, merged)


def u_vstack(a: UncertainSystem, b: UncertainSystem) -> UncertainSystem:
    """Stack outputs: y = [A u; B u] sharing the input."""
    da, db = _static_d(a), _static_d(b)
    ka, kb = a.delta.total_dim, b.delta.total_dim
    if a.n_phys_inputs != b.n_phys_inputs:
        raise ValueError("dimension mismatch in vstack")
    mu = a.n_phys_inputs
    pa, pb = a.n_phys_outputs, b.n_phys_outputs
    a11, a12 = da[:ka, :ka], da[:ka, ka:]
    a21, a22 = da[ka:, :ka], da[ka:, ka:]
    b11, b12 = db[:kb, :kb], db[:kb, kb:]
    b21, b22 = db[kb:, :kb], db[kb:, kb:]
    top = np.block([[a11, np.zeros((ka, kb)), a12],
                    [np.zeros((kb, ka)), b11, b12],
                    [a21, np.zeros((pa, kb)), a22],
                    [np.zeros((pb, ka)), b21, b22]])
    model = ss(np.zeros((0, 0)), np.zeros((0, ka + kb + mu)),
               np.zeros((ka + kb + pa + pb, 0)), top)
    merged, perm = _merge_structure(list(a.delta.blocks) + list(b.delta.blocks))
    in_perm = perm + list(range(ka + kb, ka + kb + mu))
    out_perm = perm + list(range(ka + kb, ka + kb + pa + pb))
    model = ss(model.a, model.b[:, in_perm], model.c[out_perm, :],
               model.d[np.ix_(out_perm, in_perm)])
    return UncertainSystem(model, merged)


def u_hstack(a: UncertainSystem, b: UncertainSystem) -> UncertainSystem:
    """Concatenate inputs: y = A u1 + B u2."""
    da, db = _static_d(a), _static_d(b)
    ka, kb = a.delta.total_dim, b.delta.total_dim
    if a.n_phys_outputs != b.n_phys_outputs:
        raise ValueError("dimension mismatch in hstack")
    pa = a.n_phys_outputs
    ma, mb = a.n_phys_inputs, b.n_phys_inputs
    a11, a12 = da[:ka, :ka], da[:ka, ka:]
    a21, a22 = da[ka:, :ka], da[ka:, ka:]
    b11, b12 = db[:kb, :kb], db[:kb, kb:]
    b21, b22 = db[kb:, :kb], db[kb:, kb:]
    top = np.block([[a11, np.zeros((ka, kb)), a12, np.zeros((ka, mb))],
                    [np.zeros((kb, ka)), b11, np.zeros((kb, ma)), b12],
                    [a21, b21, a22, b22]])
    model = ss(np.zeros((0, 0)), np.zeros((0, ka + kb + ma + mb)),
               np.zeros((ka + kb + pa, 0)), top)
    merged, perm = _merge_structure(list(a.delta.blocks) + list(b.delta.blocks))
    in_perm = perm + list(range(ka + kb, ka + kb + ma + mb))
    out_perm = perm + list(range(ka + kb, ka + kb + pa))
    model = ss(model.a, model.b[:, in_perm], model.c[out_perm, :],
               model.d[np.ix_(out_perm, in_perm)])
    return UncertainSystem(model, merged)


def u_inverse(a: UncertainSystem) -> UncertainSystem:
    """Inverse of a square static uncertain matrix (nominal must be
    invertible): y solves A y = u."""
    da = _static_d(a)
    ka = a.delta.total_dim
    p = a.n_phys_outputs
    if p != a.n_phys_inputs:
        raise ValueError("inverse of a non-square uncertain matrix")
    a11, a12 = da[:ka, :ka], da[:ka, ka:]
    a21, a22 = da[ka:, :ka], da[ka:, ka:]
    a22i = np.linalg.inv(a22)
    # y = A22^{-1}(u - A21 w); z = A11 w + A12 y
    top = np.block([[a11 - a12 @ a22i @ a21, a12 @ a22i],
                    [-a22i @ a21, a22i]])
    model = ss(np.zeros((0, 0)), np.zeros((0, ka + p)),
               np.zeros((ka + p, 0)), top)
    return UncertainSystem(model, a.delta)


# ---------------------------------------------------------------------------
# sampling


def sample_delta(structure: DeltaStructure, n: int,
                 strategy: str = "vertices+random",
                 seed: int = 0) -> list[dict[str, float]]:
    """Deterministic normalized-delta samples for a structure.

    ``vertices+random``: with k <= 10 blocks, all 2^k sign vertices come
    first (truncated deterministically if n < 2^k), then uniform interior
    points up to n.  With k > 10 the vertex set is too large: the first half
    are random sign vertices, the rest uniform interior points.
    ``random``: n uniform interior points.

    All randomness flows from ``numpy.random.default_rng(seed)``.
    """
    names = structure.names
    k = len(names)
    rng = np.random.default_rng(seed)
    rows: list[np.ndarray] = []
    if k == 0:
        return [dict() for _ in range(n)]
    if strategy == "vertices+random":
        if k <= 10:
            verts = np.array(np.meshgrid(*[[-1.0, 1.0]] * k,
                                         indexing="ij")).reshape(k, -1).T
            rows.extend(verts[:n])
            extra = n - len(rows)
            if extra > 0:
                rows.extend(rng.uniform(-1.0, 1.0, size=(extra, k)))
        else:
            half = n // 2
            rows.extend(rng.choice([-1.0, 1.0], size=(half, k)))
            rows.extend(rng.uniform(-1.0, 1.0, size=(n - half, k)))
    elif strategy == "random":
        rows.extend(rng.uniform(-1.0, 1.0, size=(n, k)))
    else:
        raise ValueError(f"unknown sampling strategy: {strategy}")
    return [dict(zip(names, map(float, row))) for row in rows[:n]]
