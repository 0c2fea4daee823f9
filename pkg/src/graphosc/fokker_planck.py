"""Pseudo-spectral solver for the labelled non-linear Fokker-Planck system.

The label interval is cut into ``M`` uniform cells and each cell carries
the trigonometric moments ``mu_hat^x_k``, ``|k| <= K``, of its angle law:

    d/dt mu_hat^x_k = -(k^2 / 2) mu_hat^x_k - i k sum_j v^x_j mu_hat^x_{k-j}

with the drift field ``V^x(theta) = sum_j v^x_j e^{i j theta}``,

    v^x_j = F_j + sum_l G_jl m^x_{-l},    m^x_l = (1/M) sum_b Wbar[x, b] mu_hat^b_l,

and ``Wbar`` the cell-averaged graphon (see :mod:`graphosc.model` for the
Fourier convention).  Moments with ``|k - j| > K`` are truncated to zero.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, ContractError, DomainError, FormatError, NumericalError
from .graphon import Graphon
from .model import CouplingSpec, InitialLaw
from .torus_metrics import TWO_PI, d_T_classes

__all__ = [
    "LabeledDensityField",
    "StationaryKuramoto",
    "bessel_i",
    "initial_moments",
    "solve_labeled_fp",
    "average_field",
    "solve_mckean_vlasov",
    "order_parameter",
    "kuramoto_self_consistent_r",
    "field_distance",
    "sample_from_moments",
    "write_field",
    "read_field",
    "write_order_parameter_csv",
]

DEFAULT_K = 32
DEFAULT_DT = 1e-3
INTEGRATORS = ("etd", "integrating_factor", "explicit")
_BLOWUP = 1e3
_BESSEL_MAX_ARG = 100.0


# ---------------------------------------------------------------------------
# Bessel functions
# ---------------------------------------------------------------------------


def bessel_i(order: int, x: float) -> float:
    """Modified Bessel function ``I_order(x)`` by its power series.

    Terms are summed until they drop below ``1e-15`` of the running sum.
    Accurate for ``|x| <= 100``.
    """
    order = abs(int(order))
    x = float(x)
    if abs(x) > _BESSEL_MAX_ARG:
        raise DomainError(f"Bessel series limited to |x| <= {_BESSEL_MAX_ARG}, got {x}")
    half = 0.5 * x
    term = half ** order / math.factorial(order)
    total = term
    q = half * half
    m = 0
    while True:
        m += 1
        term *= q / (m * (m + order))
        total += term
        if abs(term) <= 1e-15 * abs(total):
            return total


def _bessel_ratio(x: float) -> float:
    """``I_1(x) / I_0(x)``."""
    if x == 0.0:
        return 0.0
    return bessel_i(1, x) / bessel_i(0, x)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledDensityField:
    """Per-class trigonometric moments on a time grid.

    ``coeffs[t, x, K + k]`` is ``mu_hat^x_k`` at ``time_grid[t]``;
    ``cell_graphon[a, b]`` is the average of ``W`` over cell ``a`` x cell ``b``.
    """

    M: int
    K: int
    time_grid: np.ndarray
    coeffs: np.ndarray
    cell_graphon: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.array(self.time_grid, dtype=float)
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (t.size, self.M, 2 * self.K + 1):
            raise ContractError(f"coeffs shape {c.shape} does not match (times, M, 2K+1)")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ContractError("time grid must be strictly increasing")
        t.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "coeffs", c)
        if self.cell_graphon is not None:
            w = np.array(self.cell_graphon, dtype=float)
            w.setflags(write=False)
            object.__setattr__(self, "cell_graphon", w)

    def mode(self, k: int) -> np.ndarray:
        """All ``mu_hat_k`` as a ``(times, M)`` array."""
        if abs(k) > self.K:
            raise IndexError(f"mode {k} outside truncation {self.K}")
        return self.coeffs[:, :, self.K + k]

    def moments_at(self, t: float) -> np.ndarray:
        """``(M, 2K+1)`` moments at time ``t``, linear between grid nodes."""
        grid = self.time_grid
        if grid.size == 1:
            if abs(t - grid[0]) > 1e-12:
                raise ContractError("single-time field queried away from its time")
            return self.coeffs[0]
        step = grid[1] - grid[0]
        pos = (t - grid[0]) / step
        if pos < -1e-9 or pos > grid.size - 1 + 1e-9:
            raise ContractError(f"time {t} outside the field's grid")
        j = int(round(pos))
        if abs(pos - j) <= 1e-9:
            return self.coeffs[min(max(j, 0), grid.size - 1)]
        j = int(math.floor(pos))
        frac = pos - j
        return (1.0 - frac) * self.coeffs[j] + frac * self.coeffs[j + 1]


def initial_moments(init, K: int, M: int = 1) -> np.ndarray:
    """Initial ``(M, 2K+1)`` moment array.

    ``init`` is an :class:`InitialLaw`, a single ``(2K+1,)`` moment array
    used for every class, or a full ``(M, 2K+1)`` array.
    """
    if isinstance(init, InitialLaw):
        ks = np.arange(-K, K + 1)
        if init.kind == "uniform":
            row = (ks == 0).astype(complex)
        elif init.kind == "point_mass":
            row = np.exp(-1j * ks * init.loc)
        else:
            kappa = init.concentration
            i0 = bessel_i(0, kappa)
            ratios = np.array([bessel_i(k, kappa) / i0 for k in ks])
            row = ratios * np.exp(-1j * ks * init.loc)
        row[K] = 1.0
        return np.tile(row, (M, 1))
    arr = np.asarray(init, dtype=complex)
    if arr.shape == (2 * K + 1,):
        arr = np.tile(arr, (M, 1))
    if arr.shape != (M, 2 * K + 1):
        raise ContractError(f"initial moments must have shape (2K+1,) or (M, 2K+1), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("initial moments must be finite")
    if np.any(np.abs(arr[:, K] - 1.0) > 1e-12):
        raise ContractError("initial moments must have unit mass (mode 0 equal to 1)")
    if np.any(np.abs(arr[:, ::-1] - np.conj(arr)) > 1e-12):
        raise ContractError("initial moments must be conjugate symmetric")
    return arr.copy()


def _sorted_sum(x: np.ndarray, axis: int) -> np.ndarray:
    """Sum in sorted order so the result ignores the order of its inputs."""
    return np.sort(x.real, axis=axis).sum(axis=axis) + 1j * np.sort(x.imag, axis=axis).sum(axis=axis)


def solve_labeled_fp(w: Graphon, coupling: CouplingSpec, init, M: int, K: int = DEFAULT_K,
                     T: float = 1.0, dt: float = DEFAULT_DT, integrator: str = "etd",
                     save_every: int = 1) -> LabeledDensityField:
    """Advance the labelled moment system from ``0`` to ``T``.

    Integrators (diffusion ``L_k = -k^2/2`` treated exactly in the first two):

    ``etd``
        ``mu <- e^{L dt} mu + (e^{L dt} - 1)/L * N(mu)``.  Stationary states
        of the continuous system are exact fixed points.
    ``integrating_factor``
        ``mu <- e^{L dt} (mu + dt N(mu))``.
    ``explicit``
        Forward Euler on the whole right-hand side; needs ``dt <= 2/K^2``.

    Only modes ``k >= 0`` are advanced; negative modes are set to the
    conjugates, so conjugate symmetry and ``mu_hat_0 = 1`` hold exactly.
    Every ``save_every``-th step is stored (plus the initial state).
    """
    if integrator not in INTEGRATORS:
        raise ConfigError(f"integrator must be one of {INTEGRATORS}")
    if M < 1:
        raise ConfigError("need at least one label cell")
    if K < max(1, coupling.max_frequency + 1):
        raise ConfigError(f"K={K} too small for coupling of frequency {coupling.max_frequency}")
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}")
    ratio = T / dt
    steps = int(round(ratio))
    if T < 0 or abs(ratio - steps) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"T/dt must be a nonnegative integer (T={T}, dt={dt})")
    if save_every < 1 or steps % save_every:
        raise ConfigError("save_every must divide the number of steps")
    if integrator == "explicit" and dt > 2.0 / K ** 2:
        raise ConfigError(f"explicit integrator unstable: dt={dt} > 2/K^2={2.0 / K ** 2}")

    mu = initial_moments(init, K, M)
    wbar = np.asarray(w.cell_average(M), dtype=float)
    kpos = np.arange(0, K + 1)
    lin = -0.5 * kpos.astype(float) ** 2
    decay = np.exp(lin * dt)
    phi = np.empty(K + 1)
    phi[0] = dt
    phi[1:] = np.expm1(lin[1:] * dt) / lin[1:]

    drift_tab = coupling.drift_coeffs
    inter_tab = coupling.interaction_coeffs
    modes = coupling.interaction_modes
    freqs = sorted({j for j in drift_tab} | {j for j, _ in inter_tab})

    def rhs_nonlinear(mu):
        # m^x_l for the needed l: sorted sum over b of Wbar[x, b] mu^b_l / M
        mix = {}
        for l in modes:
            prod = wbar * mu[None, :, K + l]
            mix[l] = _sorted_sum(prod, axis=1) / M
        v = {}
        for j in freqs:
            acc = np.full(M, drift_tab.get(j, 0j), dtype=complex)
            for (jj, l), g in inter_tab.items():
                if jj == j:
                    acc = acc + g * mix[-l]
            v[j] = acc
        # conv[x, k] = sum_j v_j mu_{k-j} for k = 0..K
        conv = np.zeros((M, K + 1), dtype=complex)
        for j in freqs:
            lo, hi = max(0, j - K), min(K, j + K)
            if lo > hi:
                continue
            # k in [lo, hi] uses mu index (k - j) + K
            conv[:, lo:hi + 1] += v[j][:, None] * mu[:, lo - j + K:hi - j + K + 1]
        return -1j * kpos[None, :] * conv

    saved = [mu.copy()]
    times = [0.0]
    for s in range(steps):
        nonlin = rhs_nonlinear(mu)
        cur = mu[:, K:]
        if integrator == "etd":
            new = decay * cur + phi * nonlin
        elif integrator == "integrating_factor":
            new = decay * (cur + dt * nonlin)
        else:
            new = cur + dt * (lin * cur + nonlin)
        new[:, 0] = 1.0
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > _BLOWUP:
            raise NumericalError("moment blow-up in Fokker-Planck solve", step=s + 1)
        mu = np.empty_like(mu)
        mu[:, K:] = new
        mu[:, :K] = np.conj(new[:, :0:-1])
        if (s + 1) % save_every == 0:
            saved.append(mu.copy())
            times.append((s + 1) * dt)
    return LabeledDensityField(M, K, np.array(times), np.stack(saved), cell_graphon=wbar)


def average_field(field: LabeledDensityField) -> np.ndarray:
    """Label-averaged moments, shape ``(times, 2K+1)``."""
    return field.coeffs.mean(axis=1)


def solve_mckean_vlasov(p: float, coupling: CouplingSpec, init, K: int = DEFAULT_K,
                        T: float = 1.0, dt: float = DEFAULT_DT, **kwargs) -> LabeledDensityField:
    """McKean-Vlasov equation with interaction scaled by ``p`` (one label cell)."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    return solve_labeled_fp(Graphon.constant(p), coupling, init, 1, K, T, dt, **kwargs)


# ---------------------------------------------------------------------------
# Kuramoto diagnostics
# ---------------------------------------------------------------------------


def order_parameter(moments) -> float:
    """``|mu_hat_1|`` of a ``(..., 2K+1)`` moment array."""
    arr = np.asarray(moments)
    if arr.shape[-1] < 3 or arr.shape[-1] % 2 == 0:
        raise ContractError("moment array needs odd length 2K+1 with K >= 1")
    K = arr.shape[-1] // 2
    out = np.abs(arr[..., K + 1])
    if out.ndim == 0:
        return float(out)
    return out


def kuramoto_self_consistent_r(pK: float, tol: float = 1e-12) -> float:
    """Largest root of ``r = I_1(2 pK r) / I_0(2 pK r)`` in ``[0, 1]``.

    Bisection of ``g(r) = I_1(2 pK r)/I_0(2 pK r) - r`` on ``[tol, 1]``;
    returns 0 when ``g(tol) <= 0`` (no synchronised branch).
    """
    if pK < 0 or not tol > 0:
        raise DomainError("need pK >= 0 and tol > 0")
    if 2.0 * pK > _BESSEL_MAX_ARG:
        raise DomainError(f"pK={pK} beyond Bessel series range")

    def g(r):
        return _bessel_ratio(2.0 * pK * r) - r

    lo, hi = tol, 1.0
    if g(lo) <= 0.0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class StationaryKuramoto:
    """Stationary law ``e^{2 pK r cos(theta)} / Z`` of the Kuramoto equation."""

    pK: float
    r: float

    @classmethod
    def solve(cls, pK: float, tol: float = 1e-12) -> "StationaryKuramoto":
        return cls(pK, kuramoto_self_consistent_r(pK, tol))

    @property
    def concentration(self) -> float:
        return 2.0 * self.pK * self.r

    def density(self, theta):
        a = self.concentration
        return np.exp(a * np.cos(np.asarray(theta, dtype=float))) / (TWO_PI * bessel_i(0, a))


# ---------------------------------------------------------------------------
# Distances and sampling
# ---------------------------------------------------------------------------


def _moment_metric(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    """``sum_{k=1..K} |a_k - b_k| / k^2`` along the last axis."""
    k = np.arange(1, K + 1)
    return np.sum(np.abs(a[..., K + 1:] - b[..., K + 1:]) / k ** 2, axis=-1)


def field_distance(field_a: LabeledDensityField, field_b: LabeledDensityField,
                   per_class: bool = True) -> float:
    """Sup-in-time weighted moment distance between two fields.

    For one class this is ``max_t sum_{k>=1} |a_k(t) - b_k(t)| / k^2``;
    negative modes are conjugates and add nothing new.  With ``per_class``
    the class values are combined by :func:`d_T_classes`, otherwise the
    label-averaged fields are compared.  The metric is dominated by a
    bounded-Lipschitz distance between the densities; it is not a
    Wasserstein distance.
    """
    if (field_a.M, field_a.K) != (field_b.M, field_b.K) or not np.array_equal(
            field_a.time_grid, field_b.time_grid):
        raise ContractError("fields must share M, K and time grid")
    K = field_a.K
    if per_class:
        per = _moment_metric(field_a.coeffs, field_b.coeffs, K).max(axis=0)
        return d_T_classes(per)
    return float(_moment_metric(average_field(field_a), average_field(field_b), K).max())


SAMPLING_GRID = 1024


def sample_from_moments(moments, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` angles from the density reconstructed from ``(2K+1,)`` moments.

    The density ``(1/2pi) sum_k mu_hat_k e^{ik theta}`` is evaluated at the
    midpoints of a 1024-cell grid, clamped at zero (truncation ripples can
    dip slightly negative) and sampled by inverting the piecewise-linear CDF.
    """
    mom = np.asarray(moments, dtype=complex)
    K = mom.size // 2
    edges = np.linspace(0.0, TWO_PI, SAMPLING_GRID + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    ks = np.arange(-K, K + 1)
    dens = (np.exp(1j * np.outer(mid, ks)) @ mom).real / TWO_PI
    dens = np.maximum(dens, 0.0)
    cdf = np.concatenate([[0.0], np.cumsum(dens)])
    if cdf[-1] <= 0:
        raise NumericalError("reconstructed density has no positive mass")
    cdf /= cdf[-1]
    u = rng.random(n)
    out = np.interp(u, cdf, edges)
    out[out >= TWO_PI] = 0.0
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_FIELD_HEADER = struct.Struct("<QQQd")


def write_field(field: LabeledDensityField, path) -> None:
    """Binary layout: little-endian ``u64 M, u64 K, u64 steps, f64 dt`` then
    ``(steps+1) x M x (2K+1)`` complex moments as interleaved f64 pairs."""
    grid = field.time_grid
    dt = float(grid[1] - grid[0]) if grid.size > 1 else 0.0
    with open(path, "wb") as fh:
        fh.write(_FIELD_HEADER.pack(field.M, field.K, grid.size - 1, dt))
        fh.write(np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes())


def read_field(path) -> LabeledDensityField:
    data = Path(path).read_bytes()
    if len(data) < _FIELD_HEADER.size:
        raise FormatError("truncated field header", path=path)
    M, K, steps, dt = _FIELD_HEADER.unpack_from(data)
    expected = (steps + 1) * M * (2 * K + 1)
    if len(data) - _FIELD_HEADER.size != 16 * expected:
        raise FormatError(f"expected {expected} coefficients ({16 * expected} bytes), found "
                          f"{len(data) - _FIELD_HEADER.size} bytes", path=path)
    body = np.frombuffer(data, dtype="<c16", offset=_FIELD_HEADER.size)
    grid = np.arange(steps + 1) * dt
    return LabeledDensityField(M, K, grid, body.reshape(steps + 1, M, 2 * K + 1))


def write_order_parameter_csv(field: LabeledDensityField, path) -> None:
    """Columns ``t, r`` (label-averaged) and ``r_0 .. r_{M-1}`` per class."""
    r_avg = order_parameter(average_field(field))
    r_cls = np.abs(field.mode(1))
    header = "t,r," + ",".join(f"r_{x}" for x in range(field.M))
    rows = np.column_stack([field.time_grid, r_avg, r_cls])
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
