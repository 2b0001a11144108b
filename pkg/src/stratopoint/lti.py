"""Continuous-time LTI state-space algebra.

The toolkit models everything (chains, sensors, weights, controllers) as
real-coefficient continuous-time state-space systems

    dx/dt = A x + B u,    y = C x + D u

and composes them by exact block algebra: series/parallel/append/feedback,
rational-delay approximation, frequency responses, H-infinity norms, output
power spectral densities and zero-order-hold simulation.  No automatic
minimal realization is ever performed: interconnections accumulate states,
and an optional balanced-truncation reducer is available behind an explicit
tolerance for callers that want one.

Stability convention: a model is stable iff every eigenvalue of A has real
part < -STABILITY_EPS; marginal modes count as unstable.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.signal

__all__ = [
    "STABILITY_EPS",
    "StateSpaceModel",
    "TransferFunction",
    "FrequencyResponse",
    "PsdCurve",
    "ss",
    "realize",
    "series",
    "parallel",
    "append",
    "feedback",
    "gain_block",
    "integrator",
    "pade_delay",
    "transport_delay_tf",
    "spectral_abscissa",
    "is_stable",
    "deflate_neutral",
    "poles",
    "hinf_norm",
    "freq_response",
    "sigma_max",
    "output_psd",
    "welch_psd",
    "expected_welch_psd",
    "stationary_state_sample",
    "default_grid",
    "simulate",
    "zoh_discretize",
    "balanced_truncation",
]

STABILITY_EPS = 1e-9
"""Margin used by :func:`is_stable`: Re(lambda) must be < -STABILITY_EPS."""


def _as_matrix(value, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if rows is not None and cols is not None and m.size == 0:
        m = m.reshape(rows, cols)
    return m


def _names(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}[{i}]" for i in range(n))


@dataclass(frozen=True)
class StateSpaceModel:
    """Immutable continuous-time state-space model (A, B, C, D).

    Parameters
    ----------
    a, b, c, d : array_like
        Real matrices with consistent dimensions.  Empty state dimension is
        allowed (static gain).
    input_names, output_names : tuple of str, optional
        Port labels used by named interconnection.  Auto-generated when
        omitted.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    input_names: tuple[str, ...] = field(default=())
    output_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        d = _as_matrix(self.d)
        p, m = d.shape
        a = np.asarray(self.a, dtype=float).reshape(-1)
        n = int(round(math.sqrt(a.size))) if a.size else 0
        a = np.asarray(self.a, dtype=float).reshape(n, n)
        b = np.asarray(self.b, dtype=float).reshape(n, m)
        c = np.asarray(self.c, dtype=float).reshape(p, n)
        for name, mat in (("a", a), ("b", b), ("c", c), ("d", d)):
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"non-finite entries in {name}")
            mat.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        innames = tuple(self.input_names) or _names("u", m)
        outnames = tuple(self.output_names) or _names("y", p)
        if len(innames) != m or len(outnames) != p:
            raise ValueError("port name counts do not match dimensions")
        object.__setattr__(self, "input_names", innames)
        object.__setattr__(self, "output_names", outnames)

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.d.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.d.shape[0]

    def renamed(self, inputs=None, outputs=None) -> "StateSpaceModel":
        """Return a copy with replaced port labels."""
        return dataclasses.replace(
            self,
            input_names=tuple(inputs) if inputs is not None else self.input_names,
            output_names=tuple(outputs) if outputs is not None else self.output_names,
        )

    def __repr__(self):  # compact: the matrices can be large
        return (f"StateSpaceModel(n={self.n_states}, inputs={self.n_inputs}, "
                f"outputs={self.n_outputs})")


def ss(a, b, c, d, input_names=None, output_names=None) -> StateSpaceModel:
    """Shorthand constructor for :class:`StateSpaceModel`."""
    return StateSpaceModel(a, b, c, d,
                           tuple(input_names) if input_names else (),
                           tuple(output_names) if output_names else ())


@dataclass(frozen=True)
class TransferFunction:
    """SISO rational transfer function num(s)/den(s), coefficients descending.

    Only proper functions (deg num <= deg den) can be realized.
    """

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num = np.trim_zeros(np.asarray(self.num, dtype=float).reshape(-1), "f")
        den = np.trim_zeros(np.asarray(self.den, dtype=float).reshape(-1), "f")
        if den.size == 0:
            raise ValueError("zero denominator")
        if num.size == 0:
            num = np.zeros(1)
        object.__setattr__(self, "num", tuple(num))
        object.__setattr__(self, "den", tuple(den))

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return TransferFunction(tuple(np.polymul(self.num, other.num)),
                                tuple(np.polymul(self.den, other.den)))

    def __add__(self, other: "TransferFunction") -> "TransferFunction":
        num = np.polyadd(np.polymul(self.num, other.den),
                         np.polymul(other.num, self.den))
        return TransferFunction(tuple(num), tuple(np.polymul(self.den, other.den)))

    def __call__(self, s: complex) -> complex:
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def scaled(self, k: float) -> "TransferFunction":
        return TransferFunction(tuple(k * np.asarray(self.num)), self.den)


@dataclass(frozen=True)
class FrequencyResponse:
    """Sampled frequency response: values[i] is the complex p x m response
    at omega[i] (rad/s)."""

    omega: np.ndarray
    values: np.ndarray
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=complex)
        if values.ndim == 1:
            values = values.reshape(-1, 1, 1)
        if values.shape[0] != omega.size:
            raise ValueError("omega / values length mismatch")
        if np.any(np.diff(omega) <= 0):
            raise ValueError("omega grid must be strictly increasing")
        omega.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class PsdCurve:
    """One-dimensional power spectral density sampled on an omega grid
    (rad/s, two-sided density convention)."""

    omega: np.ndarray
    density: np.ndarray
    label: str = "psd"

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        density = np.asarray(self.density, dtype=float).reshape(-1)
        if omega.size != density.size:
            raise ValueError("omega / density length mismatch")
        if np.any(density < 0):
            raise ValueError("negative spectral density")
        omega.setflags(write=False)
        density.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "density", density)


# ---------------------------------------------------------------------------
# construction


def realize(tf: TransferFunction) -> StateSpaceModel:
    """Controllable-canonical realization of a proper transfer function.

    Raises
    ------
    ValueError
        If the transfer function is improper (deg num > deg den).
    """
    num = np.asarray(tf.num, dtype=float)
    den = np.asarray(tf.den, dtype=float)
    if num.size > den.size:
        raise ValueError("improper transfer function cannot be realized")
    den0 = den[0]
    den = den / den0
    num = num / den0
    n = den.size - 1
    if n == 0:
        return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)),
                               np.zeros((1, 0)), [[num[0]]])
    num_full = np.concatenate([np.zeros(den.size - num.size), num])
    d = num_full[0]
    # remainder coefficients after removing the direct term
    rem = num_full[1:] - d * den[1:]
    a = np.zeros((n, n))
    a[0, :] = -den[1:]
    if n > 1:
        a[1:, :-1] = np.eye(n - 1)
    b = np.zeros((n, 1))
    b[0, 0] = 1.0
    c = rem.reshape(1, n)
    return StateSpaceModel(a, b, c, [[d]])


def gain_block(k, input_names=None, output_names=None) -> StateSpaceModel:
    """Static gain as a state-space model."""
    k = _as_matrix(k)
    return ss(np.zeros((0, 0)), np.zeros((0, k.shape[1])),
              np.zeros((k.shape[0], 0)), k, input_names, output_names)


def integrator(n: int = 1) -> StateSpaceModel:
    """n parallel integrators 1/s."""
    return ss(np.zeros((n, n)), np.eye(n), np.eye(n), np.zeros((n, n)))


def append(*systems: StateSpaceModel) -> StateSpaceModel:
    """Block-diagonal (uncoupled) combination of systems.

    Inputs and outputs concatenate in argument order; port names carry over.
    """
    a = scipy.linalg.block_diag(*[g.a for g in systems])
    b = scipy.linalg.block_diag(*[g.b for g in systems])
    c = scipy.linalg.block_diag(*[g.c for g in systems])
    d = scipy.linalg.block_diag(*[g.d for g in systems])
    innames = tuple(n for g in systems for n in g.input_names)
    outnames = tuple(n for g in systems for n in g.output_names)
    return ss(a, b, c, d, innames, outnames)


def series(g1: StateSpaceModel, g2: StateSpaceModel) -> StateSpaceModel:
    """Cascade: u -> g1 -> g2 -> y, i.e. the map g2(g1(u))."""
    if g1.n_outputs != g2.n_inputs:
        raise ValueError("dimension mismatch in series connection")
    n1, n2 = g1.n_states, g2.n_states
    a = np.block([[g1.a, np.zeros((n1, n2))],
                  [g2.b @ g1.c, g2.a]])
    b = np.vstack([g1.b, g2.b @ g1.d])
    c = np.hstack([g2.d @ g1.c, g2.c])
    d = g2.d @ g1.d
    return ss(a, b, c, d, g1.input_names, g2.output_names)


def parallel(g1: StateSpaceModel, g2: StateSpaceModel) -> StateSpaceModel:
    """Sum of two systems sharing input and output dimensions."""
    if g1.n_inputs != g2.n_inputs or g1.n_outputs != g2.n_outputs:
        raise ValueError("dimension mismatch in parallel connection")
    n1, n2 = g1.n_states, g2.n_states
    a = scipy.linalg.block_diag(g1.a, g2.a)
    b = np.vstack([g1.b, g2.b])
    c = np.hstack([g1.c, g2.c])
    d = g1.d + g2.d
    return ss(a, b, c, d, g1.input_names, g1.output_names)


def feedback(g: StateSpaceModel, h: StateSpaceModel | None = None,
             sign: int = -1) -> StateSpaceModel:
    """Close the loop ``y = g(u + sign * h(y))``.

    ``feedback(g, h, -1)`` is the conventional negative feedback
    ``g (I + h g)^{-1}`` seen from u to y.  Raises on an ill-posed algebraic
    loop (I - sign*Dg*Dh singular).
    """
    if h is None:
        h = gain_block(np.eye(g.n_outputs))
    if g.n_outputs != h.n_inputs or h.n_outputs != g.n_inputs:
        raise ValueError("dimension mismatch in feedback connection")
    dg, dh = g.d, h.d
    m = np.eye(g.n_outputs) - sign * (dg @ dh)
    if np.linalg.cond(m) > 1e12:
        raise ValueError("ill-posed feedback interconnection (algebraic loop)")
    minv = np.linalg.inv(m)
    n1, n2 = g.n_states, h.n_states
    t = sign * g.b @ dh
    a = np.block([
        [g.a + t @ minv @ g.c, sign * g.b @ h.c + t @ minv @ dg @ h.c],
        [h.b @ minv @ g.c, h.a + h.b @ minv @ dg @ h.c],
    ]) if n1 + n2 else np.zeros((0, 0))
    b = np.vstack([g.b + t @ minv @ dg, h.b @ minv @ dg]) if n1 + n2 else np.zeros((0, g.n_inputs))
    c = np.hstack([minv @ g.c, minv @ dg @ h.c])
    d = minv @ dg
    return ss(a, b, c, d, g.input_names, g.output_names)


def pade_delay(tau: float, order: int = 3, channels: int = 1) -> StateSpaceModel:
    """Diagonal Pade approximation of a transport delay exp(-tau*s).

    Equal numerator/denominator order (all-pass): |P(jw)| = 1 exactly.

    Parameters
    ----------
    tau : float
        Delay in seconds (tau >= 0; tau == 0 returns identity).
    order : int
        Approximation order (default 3).
    channels : int
        Number of identical diagonal channels.
    """
    if tau < 0:
        raise ValueError("delay must be nonnegative")
    tf = transport_delay_tf(tau, order)
    one = realize(tf)
    return append(*[one for _ in range(channels)]) if channels > 1 else one


def transport_delay_tf(tau: float, order: int = 3) -> TransferFunction:
    """Pade(order, order) rational approximation of exp(-tau*s)."""
    if tau == 0.0:
        return TransferFunction((1.0,), (1.0,))
    n = order
    # ascending coefficients c_k of the denominator polynomial sum c_k s^k
    c = np.empty(n + 1)
    c[0] = 1.0
    for k in range(1, n + 1):
        c[k] = c[k - 1] * tau * (n - k + 1) / ((2 * n - k + 1) * k)
    den = c[::-1]
    num = den * (-1.0) ** np.arange(n, -1, -1)
    return TransferFunction(tuple(num), tuple(den))


# ---------------------------------------------------------------------------
# analysis


def poles(g: StateSpaceModel) -> np.ndarray:
    """Eigenvalues of A."""
    if g.n_states == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(g.a)


def spectral_abscissa(g: StateSpaceModel) -> float:
    """max Re(lambda) over eigenvalues of A (-inf for static systems)."""
    p = poles(g)
    return float(np.max(p.real)) if p.size else -math.inf


def is_stable(g: StateSpaceModel, eps: float = STABILITY_EPS) -> bool:
    """True iff all eigenvalues of A have real part < -eps.

    Marginally stable modes (|Re| <= eps) count as unstable.
    """
    return spectral_abscissa(g) < -eps


def deflate_neutral(g: StateSpaceModel, tol_eig: float = 1e-7,
                    tol_obs: float = 1e-6) -> StateSpaceModel:
    """Drop neutral (zero-eigenvalue) states invisible from every output.

    Interconnections of kinematic chains and their observers keep exact
    rigid-mode directions: a common offset that no output can see.  A
    direction v with A v = 0 and C v = 0 can be rotated onto a single
    coordinate and removed without changing the input-output map.  The
    rotation is a Householder reflection supported only on the states v
    involves, so exactly decoupled planes stay exactly decoupled.
    Observable neutral directions are kept untouched, so stability
    verdicts on the result stay honest.
    """
    a, b, c = g.a, g.b, g.c
    while a.shape[0]:
        n = a.shape[0]
        ev, vec = np.linalg.eig(a)
        near_zero = np.abs(ev) <= tol_eig
        if not near_zero.any():
            break
        cols = []
        for i in np.flatnonzero(near_zero):
            cand = vec[:, i]
            cand = cand.real if (np.linalg.norm(cand.real)
                                 >= np.linalg.norm(cand.imag)) else cand.imag
            nrm = np.linalg.norm(cand)
            if nrm == 0.0:
                continue
            cand = cand / nrm
            # inverse iteration sharpens the subspace so the reflection
            # below cannot leak into decoupled states
            for _ in range(2):
                try:
                    nxt = np.linalg.solve(a - 1e-9 * np.eye(n), cand)
                except np.linalg.LinAlgError:
                    break
                cand = nxt / np.linalg.norm(nxt)
            cols.append(cand)
        if not cols:
            break
        basis, _ = np.linalg.qr(np.column_stack(cols))
        # least observable combination within the neutral subspace; a
        # degenerate pair may mix a visible and an invisible direction
        _, sv, vh = np.linalg.svd(c @ basis)
        sv = sv if sv.size else np.zeros(basis.shape[1])
        if sv[-1] > tol_obs:
            break
        v = basis @ vh[-1]
        # confine the reflection to the states the direction really uses
        v[np.abs(v) < 1e-12 * np.max(np.abs(v))] = 0.0
        v /= np.linalg.norm(v)
        j = int(np.argmax(np.abs(v)))
        u = v.copy()
        u[j] -= np.sign(v[j]) if v[j] else 1.0
        un = np.linalg.norm(u)
        keep = np.arange(a.shape[0]) != j
        if un > 1e-12:
            u /= un
            a = a - 2.0 * np.outer(u, u @ a)
            a = a - 2.0 * np.outer(a @ u, u)
            b = b - 2.0 * np.outer(u, u @ b)
            c = c - 2.0 * np.outer(c @ u, u)
        a = a[np.ix_(keep, keep)]
        b = b[keep, :]
        c = c[:, keep]
    return ss(a, b, c, g.d, g.input_names, g.output_names)


def default_grid(lo: float = 1e-3, hi: float = 1e3, n: int = 400) -> np.ndarray:
    """Default logarithmic frequency grid in rad/s."""
    return np.logspace(math.log10(lo), math.log10(hi), n)


def freq_response(g: StateSpaceModel, omega) -> FrequencyResponse:
    """Evaluate C (jwI - A)^{-1} B + D on a grid.

    A singular (jwI - A) at some grid point yields inf entries at that point
    rather than aborting the sweep.
    """
    omega = np.asarray(omega, dtype=float).reshape(-1)
    n = g.n_states
    vals = np.empty((omega.size, g.n_outputs, g.n_inputs), dtype=complex)
    if n == 0:
        vals[:] = g.d
        return FrequencyResponse(omega, vals, g.input_names, g.output_names)
    for i, w in enumerate(omega):
        m = 1j * w * np.eye(n) - g.a
        try:
            x = np.linalg.solve(m, g.b)
            vals[i] = g.c @ x + g.d
        except np.linalg.LinAlgError:
            vals[i] = np.inf
    return FrequencyResponse(omega, vals, g.input_names, g.output_names)


def sigma_max(fr: FrequencyResponse) -> np.ndarray:
    """Largest singular value of the response at each frequency."""
    out = np.empty(fr.omega.size)
    for i in range(fr.omega.size):
        v = fr.values[i]
        if not np.all(np.isfinite(v)):
            out[i] = np.inf
        else:
            out[i] = np.linalg.svd(v, compute_uv=False)[0]
    return out


def _hamiltonian_has_imag_eig(g: StateSpaceModel, gamma: float,
                              tol: float) -> tuple[bool, np.ndarray]:
    """Test gamma against the H-infinity norm via the Hamiltonian matrix.

    Returns (has_imaginary_eigenvalues, frequencies of those eigenvalues).
    """
    a, b, c, d = g.a, g.b, g.c, g.d
    n = a.shape[0]
    r = gamma * gamma * np.eye(g.n_inputs) - d.T @ d
    rinv = np.linalg.inv(r)
    brd = b @ rinv
    acl = a + brd @ d.T @ c
    h = np.block([
        [acl, brd @ b.T],
        [-c.T @ (np.eye(g.n_outputs) + d @ rinv @ d.T) @ c, -acl.T],
    ])
    ev = np.linalg.eigvals(h)
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    onaxis = np.abs(ev.real) <= tol * scale
    freqs = np.abs(ev[onaxis].imag)
    freqs = freqs[freqs > 0]
    return bool(np.any(onaxis)), np.unique(freqs)


def _grid_norm(g: StateSpaceModel, n_grid: int = 2000) -> tuple[float, float]:
    """Adaptive grid fallback: (norm estimate, peak frequency)."""
    pol = poles(g)
    wmax = 1e3
    wmin = 1e-3
    if pol.size:
        mags = np.abs(pol[np.abs(pol) > 1e-12])
        if mags.size:
            wmin = min(wmin, 0.1 * float(mags.min()))
            wmax = max(wmax, 10.0 * float(mags.max()))
    grid = np.logspace(math.log10(wmin), math.log10(wmax), n_grid)
    # seed grid with lightly damped pole frequencies
    res = pol[np.abs(pol.imag) > 0]
    grid = np.unique(np.concatenate([grid, np.abs(res.imag)]))
    sig = sigma_max(freq_response(g, grid))
    k = int(np.argmax(sig))
    best_w, best = grid[k], sig[k]
    lo = grid[max(0, k - 1)]
    hi = grid[min(grid.size - 1, k + 1)]
    for _ in range(40):
        local = np.linspace(lo, hi, 11)
        local = local[local > 0]
        s = sigma_max(freq_response(g, local))
        j = int(np.argmax(s))
        if s[j] > best:
            best, best_w = s[j], local[j]
        span = hi - lo
        lo = max(local[max(0, j - 1)], best_w - 0.25 * span)
        hi = min(local[min(10, j + 1)], best_w + 0.25 * span)
        if hi - lo <= 1e-12 * max(1.0, best_w):
            break
    dc = np.linalg.svd(freq_response(g, [1e-9]).values[0], compute_uv=False)[0] \
        if g.n_states else 0.0
    dinf = np.linalg.svd(g.d, compute_uv=False)[0] if g.d.size else 0.0
    if dc > best:
        best, best_w = dc, 0.0
    if dinf > best:
        best, best_w = dinf, math.inf
    return float(best), float(best_w)


def hinf_norm(g: StateSpaceModel, tol: float = 1e-8,
              return_info: bool = False):
    """H-infinity norm of a stable model.

    Primary algorithm: bisection on the Hamiltonian matrix imaginary-axis
    eigenvalue test, refined by evaluating sigma_max at the midpoints of the
    crossing frequencies.  If the eigen-test stalls numerically the function
    falls back to an adaptive frequency-grid search and flags it in the
    returned metadata.

    Parameters
    ----------
    g : StateSpaceModel
        Must be stable (see :func:`is_stable`); raises ValueError otherwise
        (the norm would be unbounded).
    tol : float
        Relative tolerance on the returned norm.
    return_info : bool
        If True, return (norm, info_dict) where info has keys ``method``
        ("hamiltonian" or "grid"), ``peak_omega`` and ``warning``.

    Returns
    -------
    float or (float, dict)
    """
    if g.n_states and not is_stable(g):
        raise ValueError("H-infinity norm is unbounded: model is not stable")
    info = {"method": "hamiltonian", "peak_omega": 0.0, "warning": None}
    dinf = np.linalg.svd(g.d, compute_uv=False)[0] if g.d.size else 0.0
    if g.n_states == 0:
        info["peak_omega"] = math.inf
        return (dinf, info) if return_info else dinf

    # lower bound from a few probe frequencies
    probe = [0.0]
    pol = poles(g)
    osc = pol[np.abs(pol.imag) > 1e-12]
    probe += list(np.abs(osc.imag))
    mags = np.abs(pol)
    probe += list(mags[mags > 1e-12])
    probe = sorted(set(probe))
    lb = dinf
    w_peak = math.inf if dinf > 0 else 0.0
    for w in probe:
        m = 1j * w * np.eye(g.n_states) - g.a
        try:
            v = g.c @ np.linalg.solve(m, g.b) + g.d
        except np.linalg.LinAlgError:
            continue
        s = np.linalg.svd(v, compute_uv=False)[0]
        if s > lb:
            lb, w_peak = s, w
    if lb == 0.0:
        return (0.0, info) if return_info else 0.0

    eig_tol = 1e-8
    ok = True
    for _ in range(60):
        gamma = lb * (1.0 + 2.0 * max(tol, 1e-12))
        if gamma <= dinf:
            break
        try:
            has, freqs = _hamiltonian_has_imag_eig(g, gamma, eig_tol)
        except np.linalg.LinAlgError:
            ok = False
            break
        if not has:
            break
        if freqs.size == 0:
            ok = False
            break
        mids = np.sqrt(freqs[:-1] * freqs[1:]) if freqs.size > 1 else freqs
        cand = np.unique(np.concatenate([freqs, mids]))
        improved = False
        for w in cand:
            m = 1j * w * np.eye(g.n_states) - g.a
            try:
                v = g.c @ np.linalg.solve(m, g.b) + g.d
            except np.linalg.LinAlgError:
                continue
            s = np.linalg.svd(v, compute_uv=False)[0]
            if s > lb:
                lb, w_peak, improved = s, w, True
        if not improved:
            break
    else:
        ok = False

    if not ok:
        val, w_peak = _grid_norm(g)
        info["method"] = "grid"
        info["warning"] = "hamiltonian bisection stalled; adaptive grid fallback"
        info["peak_omega"] = w_peak
        val = max(val, lb)
        return (val, info) if return_info else val

    info["peak_omega"] = w_peak
    val = lb * (1.0 + max(tol, 1e-12))
    return (val, info) if return_info else val


def output_psd(g: StateSpaceModel, input_psd: PsdCurve | float,
               omega=None, label: str = "psd") -> PsdCurve:
    """Propagate a scalar input PSD through a SISO model: |G(jw)|^2 * Phi_in.

    ``input_psd`` may be a constant density (white noise) or a curve sampled
    on the same grid.
    """
    if g.n_inputs != 1 or g.n_outputs != 1:
        raise ValueError("output_psd expects a SISO model")
    if isinstance(input_psd, PsdCurve):
        if omega is not None and not np.array_equal(np.asarray(omega), input_psd.omega):
            raise ValueError("omega grid conflicts with input PSD grid")
        omega = input_psd.omega
        phi_in = input_psd.density
    else:
        omega = default_grid() if omega is None else np.asarray(omega, dtype=float)
        phi_in = float(input_psd) * np.ones(omega.size)
    fr = freq_response(g, omega)
    mag2 = np.abs(fr.values[:, 0, 0]) ** 2
    return PsdCurve(omega, mag2 * phi_in, label)


def welch_psd(y: np.ndarray, dt: float, nperseg: int = 2 ** 12,
              label: str = "welch") -> PsdCurve:
    """Welch density estimate of a sampled signal, two-sided per (rad/s).

    Hann window, 50 percent overlap, no detrending.  The zero-frequency
    bin is dropped so the grid matches log-axis plotting and CSV use.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f, p = scipy.signal.welch(np.asarray(y, dtype=float), fs=1.0 / dt,
                              window="hann", nperseg=nperseg,
                              detrend=False)
    # scipy returns a one-sided per-Hz density; halving converts to the
    # two-sided per-(rad/s) convention used by PsdCurve throughout
    return PsdCurve(2.0 * math.pi * f[1:], p[1:] / 2.0, label)


def _hann_power_kernel(delta_omega: np.ndarray, dt: float,
                       nperseg: int) -> np.ndarray:
    """|W(theta)|^2 dt / (2 pi sum w^2) for the periodic Hann window.

    This is the spectral blur the Welch estimator applies: the expected
    estimate is the true density convolved with this kernel, which
    integrates to one over frequency shift.
    """
    theta = np.asarray(delta_omega, dtype=float) * dt
    n = nperseg

    def dirichlet(th):
        th = np.mod(th + math.pi, 2.0 * math.pi) - math.pi
        near = np.abs(th) < 1e-9
        safe = np.where(near, 1.0, th)
        mag = np.where(near, float(n), np.sin(0.5 * n * safe) / np.sin(0.5 * safe))
        return mag * np.exp(-0.5j * (n - 1) * th)

    # periodic hann w[k] = 0.5 - 0.25 e^{j 2 pi k / n} - 0.25 e^{-j 2 pi k / n}
    step = 2.0 * math.pi / n
    w = (0.5 * dirichlet(theta) - 0.25 * dirichlet(theta - step)
         - 0.25 * dirichlet(theta + step))
    sum_w2 = 0.375 * n  # sum of squared periodic hann samples
    return np.abs(w) ** 2 * dt / (2.0 * math.pi * sum_w2)


def _resonance_refined_grid(g: StateSpaceModel, upper: float,
                            base_step: float) -> np.ndarray:
    """Uniform grid on [0, upper] densified around lightly damped poles."""
    pts = [np.arange(0.0, upper, base_step)]
    for lam in np.linalg.eigvals(g.a):
        wd = abs(lam.imag)
        sigma = abs(lam.real)
        if wd == 0.0 or wd > upper or sigma > 0.2 * wd:
            continue
        offs = np.geomspace(max(sigma, 1e-12) * 0.25, 4.0 * base_step, 60)
        pts.append(np.clip(wd + offs, 0.0, upper))
        pts.append(np.clip(wd - offs, 0.0, upper))
        pts.append(np.array([wd]))
    grid = np.unique(np.concatenate(pts))
    return grid[grid >= 0.0]


def expected_welch_psd(g: StateSpaceModel, omega: np.ndarray, dt: float,
                       nperseg: int, drive_density: float = 1.0) -> PsdCurve:
    """Expectation of the Welch density estimate at the requested bins.

    A resonance much narrower than a Welch bin cannot be reproduced
    pointwise by the estimator no matter how long the record; the
    estimator's unbiased target is the analytic density blurred by the
    window kernel.  Computed by quadrature on a pole-refined grid,
    normalized so a flat density is reproduced exactly.
    """
    omega = np.asarray(omega, dtype=float)
    span = 64.0 * 2.0 * math.pi / (nperseg * dt)
    upper = float(omega.max()) + span
    fine = _resonance_refined_grid(g, upper, 2.0 * math.pi / (nperseg * dt) / 16.0)
    dens = output_psd(g, drive_density, fine).density
    expect = np.empty(omega.size)
    for i, wk in enumerate(omega):
        kern = (_hann_power_kernel(wk - fine, dt, nperseg)
                + _hann_power_kernel(wk + fine, dt, nperseg))
        norm = np.trapezoid(kern, fine)
        expect[i] = np.trapezoid(kern * dens, fine) / norm
    return PsdCurve(omega, expect, label="expected")


def stationary_state_sample(g: StateSpaceModel, dt: float, drive_var: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Draw an initial state from the stationary distribution of the
    zero-order-hold discretization under white drive of given variance.

    A mode whose settling time exceeds the affordable record length
    never reaches steady state from rest, biasing any spectral estimate
    at that resonance; sampling the stationary state removes the bias.
    """
    ad, bd = zoh_discretize(g, dt)
    cov = scipy.linalg.solve_discrete_lyapunov(ad, drive_var * (bd @ bd.T))
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.maximum(vals, 0.0))
    return root @ rng.standard_normal(g.n_states)


def zoh_discretize(g: StateSpaceModel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization: returns (a_d, b_d)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n, m = g.n_states, g.n_inputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = g.a
    aug[:n, n:] = g.b
    phi = scipy.linalg.expm(aug * dt)
    return phi[:n, :n], phi[:n, n:]


def simulate(g: StateSpaceModel, u: np.ndarray, dt: float,
             x0: np.ndarray | None = None) -> np.ndarray:
    """Zero-order-hold simulation.

    The continuous model is discretized exactly for piecewise-constant input
    via the matrix exponential of the augmented [[A, B], [0, 0]] block, then
    stepped.  Returns y with shape (len(u), n_outputs).

    Parameters
    ----------
    u : array_like
        Input samples, shape (N,) for single-input models or (N, m).
    dt : float
        Sample period in seconds (> 0).
    x0 : array_like, optional
        Initial state (defaults to zero).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.shape[1] != g.n_inputs:
        raise ValueError("input column count does not match model inputs")
    n = g.n_states
    nsamp = u.shape[0]
    y = np.empty((nsamp, g.n_outputs))
    if n == 0:
        return u @ g.d.T
    ad, bd = zoh_discretize(g, dt)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    ct, dt_mat = g.c, g.d
    for k in range(nsamp):
        y[k] = ct @ x + dt_mat @ u[k]
        x = ad @ x + bd @ u[k]
    return y


def balanced_truncation(g: StateSpaceModel, tol: float) -> StateSpaceModel:
    """Optional balanced-truncation reducer, gated behind an explicit
    tolerance on discarded Hankel singular values (sum bound).

    Requires a stable model; never applied implicitly anywhere in the
    toolkit.
    """
    if g.n_states == 0:
        return g
    if not is_stable(g):
        raise ValueError("balanced truncation requires a stable model")
    wc = scipy.linalg.solve_continuous_lyapunov(g.a, -g.b @ g.b.T)
    wo = scipy.linalg.solve_continuous_lyapunov(g.a.T, -g.c.T @ g.c)
    # square-root balancing; Gramians may be numerically semidefinite
    lc = _chol_psd(wc)
    lo = _chol_psd(wo)
    u, sv, vt = np.linalg.svd(lo.T @ lc)
    keep = g.n_states
    tail = 0.0
    for k in range(g.n_states, 0, -1):
        tail += 2.0 * sv[k - 1]
        if tail > tol:
            keep = k
            break
    else:
        keep = 0
    if keep >= g.n_states:
        return g
    sv_k = sv[:keep]
    t = lc @ vt[:keep].T @ np.diag(sv_k ** -0.5)
    tinv = np.diag(sv_k ** -0.5) @ u[:, :keep].T @ lo.T
    return ss(tinv @ g.a @ t, tinv @ g.b, g.c @ t, g.d,
              g.input_names, g.output_names)


def _chol_psd(m: np.ndarray) -> np.ndarray:
    """Cholesky-like factor of a PSD matrix via eigendecomposition."""
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    w = np.clip(w, 0.0, None)
    return v @ np.diag(np.sqrt(w))
