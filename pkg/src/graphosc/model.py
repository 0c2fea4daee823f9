"""Drift/interaction coefficient tables and initial laws.

Fourier convention used everywhere in the package::

    F(theta)      = sum_k   F_k   e^{i k theta}
    Gamma(th, ps) = sum_k,l G_kl  e^{i k th} e^{i l ps}
    mu_hat_k      = int e^{-i k theta} mu(d theta)

so that ``int Gamma(th, ps) mu(d ps) = sum_kl G_kl e^{i k th} mu_hat_{-l}``
and a density is ``(1 / 2pi) sum_k mu_hat_k e^{i k theta}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, DomainError
from .torus_metrics import wrap_angle

__all__ = ["CouplingSpec", "InitialLaw"]

_REALNESS_TOL = 1e-12


def _expi(k: int, theta: np.ndarray) -> np.ndarray:
    """``e^{i k theta}``; negative frequencies are exact conjugates."""
    out = np.exp(1j * abs(k) * theta)
    return np.conj(out) if k < 0 else out


def re_triple(c: complex, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``Re(c p q)`` in explicit real arithmetic.

    numpy's complex multiply may fuse ``a*y + b*x`` into one rounding, which
    breaks exact cancellations such as ``Im(z conj(z)) = 0``; here every
    cross product is rounded on its own.
    """
    pr, pi, qr, qi = p.real, p.imag, q.real, q.imag
    zr = pr * qr - pi * qi
    zi = pr * qi + pi * qr
    return c.real * zr - c.imag * zi


def _clean(table: dict) -> dict:
    return {key: complex(v) for key, v in sorted(table.items()) if complex(v) != 0}


@dataclass(frozen=True)
class CouplingSpec:
    """Common drift ``F`` and pair interaction ``Gamma`` as finite Fourier tables.

    Both functions must be real-valued, i.e. ``F_{-k} = conj(F_k)`` and
    ``G_{-k,-l} = conj(G_kl)``.  Zero coefficients are dropped.
    """

    drift_coeffs: Dict[int, complex] = field(default_factory=dict)
    interaction_coeffs: Dict[Tuple[int, int], complex] = field(default_factory=dict)
    preset: Optional[dict] = None

    def __post_init__(self):
        drift = _clean({int(k): v for k, v in self.drift_coeffs.items()})
        inter = _clean({(int(k), int(l)): v for (k, l), v in self.interaction_coeffs.items()})
        for k, v in drift.items():
            if abs(drift.get(-k, 0j) - v.conjugate()) > _REALNESS_TOL * max(1.0, abs(v)):
                raise DomainError(f"drift is not real: F_{-k} != conj(F_{k})")
        for (k, l), v in inter.items():
            if abs(inter.get((-k, -l), 0j) - v.conjugate()) > _REALNESS_TOL * max(1.0, abs(v)):
                raise DomainError(f"interaction is not real: G_{-k},{-l} != conj(G_{k},{l})")
        object.__setattr__(self, "drift_coeffs", drift)
        object.__setattr__(self, "interaction_coeffs", inter)

    @classmethod
    def kuramoto(cls, K: float) -> "CouplingSpec":
        """``F = 0`` and ``Gamma(th, ps) = -K sin(th - ps)``."""
        K = float(K)
        return cls({}, {(1, -1): 0.5j * K, (-1, 1): -0.5j * K},
                   preset={"preset": "kuramoto", "K": K})

    @classmethod
    def from_config(cls, spec: dict) -> "CouplingSpec":
        """Parse ``{preset: kuramoto, K: ...}`` or explicit tables.

        Explicit tables are lists of ``[k, re, im]`` (drift) and
        ``[k, l, re, im]`` (interaction).
        """
        if not isinstance(spec, dict):
            raise ConfigError(f"coupling spec must be a mapping, got {spec!r}")
        try:
            if spec.get("preset") == "kuramoto":
                return cls.kuramoto(spec["K"])
            if "preset" in spec:
                raise ConfigError(f"unknown coupling preset {spec['preset']!r}")
            drift = {int(k): complex(re, im) for k, re, im in spec.get("drift", [])}
            inter = {(int(k), int(l)): complex(re, im)
                     for k, l, re, im in spec.get("interaction", [])}
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed coupling spec: {exc}") from None
        try:
            return cls(drift, inter)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def to_config(self) -> dict:
        if self.preset is not None:
            return dict(self.preset)
        return {
            "drift": [[k, v.real, v.imag] for k, v in self.drift_coeffs.items()],
            "interaction": [[k, l, v.real, v.imag]
                            for (k, l), v in self.interaction_coeffs.items()],
        }

    # -- derived quantities -------------------------------------------------

    @property
    def max_frequency(self) -> int:
        freqs = [abs(k) for k in self.drift_coeffs]
        for k, l in self.interaction_coeffs:
            freqs += [abs(k), abs(l)]
        return max(freqs, default=0)

    @property
    def drift_sup_bound(self) -> float:
        return float(sum(abs(v) for v in self.drift_coeffs.values()))

    @property
    def interaction_sup_bound(self) -> float:
        return float(sum(abs(v) for v in self.interaction_coeffs.values()))

    @property
    def interaction_modes(self) -> Tuple[int, ...]:
        """Distinct second-argument frequencies ``l`` of the interaction."""
        return tuple(sorted({l for _, l in self.interaction_coeffs}))

    def smoothness_constant(self, eps: float) -> float:
        """``sum_kl |k l|^{1+eps} |G_kl|^2``; finite for every eps here."""
        return float(sum(abs(k * l) ** (1 + eps) * abs(v) ** 2
                         for (k, l), v in self.interaction_coeffs.items()))

    def drift(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for k, v in self.drift_coeffs.items():
            out = out + (v * _expi(k, theta)).real
        return out

    def interaction(self, theta, psi) -> np.ndarray:
        """``Gamma(theta, psi)`` with numpy broadcasting."""
        theta = np.asarray(theta, dtype=float)
        psi = np.asarray(psi, dtype=float)
        out = np.zeros(np.broadcast(theta, psi).shape)
        for (k, l), v in self.interaction_coeffs.items():
            # phases first: swapping theta and psi then gives exact conjugates
            out = out + re_triple(v, _expi(k, theta), _expi(l, psi))
        return out


@dataclass(frozen=True)
class InitialLaw:
    """Law of the IID initial angles: ``uniform``, ``point_mass`` or ``von_mises``."""

    kind: str = "uniform"
    loc: float = 0.0
    concentration: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "point_mass", "von_mises"):
            raise DomainError(f"unknown initial law {self.kind!r}")
        if self.concentration < 0:
            raise DomainError("von Mises concentration must be nonnegative")

    @classmethod
    def from_config(cls, spec) -> "InitialLaw":
        if spec is None:
            return cls()
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"initial law must be a mapping with 'kind', got {spec!r}")
        try:
            return cls(spec["kind"], float(spec.get("loc", 0.0)),
                       float(spec.get("concentration", 0.0)))
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def to_config(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        if self.kind == "point_mass":
            return {"kind": "point_mass", "loc": self.loc}
        return {"kind": "von_mises", "loc": self.loc, "concentration": self.concentration}

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return wrap_angle(rng.uniform(0.0, 2.0 * math.pi, size=n))
        if self.kind == "point_mass":
            return np.full(n, wrap_angle(self.loc))
        return wrap_angle(rng.vonmises(self.loc, self.concentration, size=n))
