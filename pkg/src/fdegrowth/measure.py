"""Finite positive Borel measures on ``[-tau, 0]``.

A measure is a finite list of atoms plus densities on subintervals.  Atoms are
summed exactly; densities go through adaptive Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import QuadratureError, ValidationError
from .quadrature import adaptive_gl, gauss_legendre

DEFAULT_RTOL = 1e-10


def _constant(s, value=1.0):
    return np.full_like(np.asarray(s, dtype=float), float(value))


def _linear(s, c0=0.0, c1=1.0):
    return c0 + c1 * np.asarray(s, dtype=float)


def _exponential(s, c=1.0, k=1.0):
    return c * np.exp(k * np.asarray(s, dtype=float))


def _abs_power(s, c=1.0, p=1.0):
    return c * np.abs(np.asarray(s, dtype=float)) ** p


DENSITY_KINDS = {
    "constant": _constant,
    "linear": _linear,
    "exponential": _exponential,
    "abs-power": _abs_power,
}


@dataclass(frozen=True)
class Atom:
    location: float
    weight: float


@dataclass(frozen=True)
class DensityPiece:
    """Density ``kind(s, **params)`` on ``[a, b]``."""

    a: float
    b: float
    kind: str = "constant"
    params: dict = field(default_factory=dict, hash=False, compare=False)

    def __call__(self, s):
        return DENSITY_KINDS[self.kind](s, **self.params)


@dataclass(frozen=True)
class DelayMeasure:
    """Positive finite measure on ``[-tau, 0]``: atoms plus density pieces.

    Construction validates everything and rejects bad input instead of
    repairing it.  Instances are immutable.
    """

    tau: float
    atoms: tuple = ()
    density_pieces: tuple = ()
    rtol: float = DEFAULT_RTOL

    def __post_init__(self):
        tau = float(self.tau)
        if not (math.isfinite(tau) and tau > 0):
            raise ValidationError(f"tau must be positive and finite, got {self.tau!r}")
        object.__setattr__(self, "tau", tau)
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        pieces = tuple(p if isinstance(p, DensityPiece) else DensityPiece(*p)
                       for p in self.density_pieces)
        for i, atom in enumerate(atoms):
            loc, w = float(atom.location), float(atom.weight)
            if not (-tau <= loc <= 0.0):
                raise ValidationError(
                    f"atom {i} at location {loc!r} lies outside [-{tau}, 0]")
            if not (math.isfinite(w) and w > 0):
                raise ValidationError(f"atom {i} has non-positive weight {w!r}")
        for i, piece in enumerate(pieces):
            if piece.kind not in DENSITY_KINDS:
                raise ValidationError(
                    f"density piece {i}: unknown kind {piece.kind!r}; "
                    f"expected one of {sorted(DENSITY_KINDS)}")
            if not (-tau <= piece.a < piece.b <= 0.0):
                raise ValidationError(
                    f"density piece {i} on [{piece.a!r}, {piece.b!r}] is not a "
                    f"nonempty subinterval of [-{tau}, 0]")
            probe = np.linspace(piece.a, piece.b, 65)
            try:
                vals = piece(probe)
            except TypeError as exc:
                raise ValidationError(f"density piece {i}: bad parameters ({exc})") from exc
            if not np.all(np.isfinite(vals)) or np.any(vals < 0):
                raise ValidationError(f"density piece {i} is negative or non-finite on its interval")
        order = sorted(pieces, key=lambda p: p.a)
        for left, right in zip(order, order[1:]):
            if right.a < left.b:
                raise ValidationError(
                    f"density pieces [{left.a}, {left.b}] and [{right.a}, {right.b}] overlap")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "density_pieces", pieces)
        mass = self.integrate_against(np.ones_like)
        if not (math.isfinite(mass) and mass > 0):
            raise ValidationError("measure has zero (or non-finite) total mass")

    @classmethod
    def dirac(cls, location=0.0, weight=1.0, tau=None):
        if tau is None:
            tau = abs(location) if location != 0 else 1.0
        return cls(tau=tau, atoms=((location, weight),))

    @property
    def is_atomic(self):
        return not self.density_pieces

    @property
    def atom_locations(self):
        return np.array([a.location for a in self.atoms], dtype=float)

    @property
    def atom_weights(self):
        return np.array([a.weight for a in self.atoms], dtype=float)

    def integrate_against(self, g, rtol=None):
        """Return ``sum_i w_i g(s_i) + sum_pieces int g(s) rho(s) ds``.

        ``g`` must be vectorised over a numpy array of locations.
        """
        rtol = self.rtol if rtol is None else rtol
        total = 0.0
        if self.atoms:
            total += float(np.dot(self.atom_weights, g(self.atom_locations)))
        for i, piece in enumerate(self.density_pieces):
            try:
                total += adaptive_gl(lambda s, p=piece: g(s) * p(s), piece.a, piece.b,
                                     rtol=rtol, atol=1e-300,
                                     label=f"density piece {i} on [{piece.a}, {piece.b}]")
            except QuadratureError as exc:
                raise QuadratureError(
                    f"density piece {i} on [{piece.a}, {piece.b}]: {exc}",
                    interval=exc.interval) from exc
        return total

    def log_integrate(self, logg, rtol=None, atoms=True):
        """Return ``log int exp(logg(s)) mu(ds)`` without forming ``exp(logg)``.

        Each contribution is shifted by its own maximum before exponentiation.
        ``atoms=False`` integrates the density part only.
        """
        rtol = self.rtol if rtol is None else rtol
        terms = []
        if self.atoms and atoms:
            terms.extend(np.log(self.atom_weights) + logg(self.atom_locations))
        nodes, _ = gauss_legendre(10)
        for i, piece in enumerate(self.density_pieces):
            probe = 0.5 * (piece.a + piece.b) + 0.5 * (piece.b - piece.a) * nodes
            shift = float(np.max(logg(probe)))
            try:
                val = adaptive_gl(lambda s, p=piece: p(s) * np.exp(logg(s) - shift),
                                  piece.a, piece.b, rtol=rtol, atol=1e-300)
            except QuadratureError as exc:
                raise QuadratureError(
                    f"density piece {i} on [{piece.a}, {piece.b}]: {exc}",
                    interval=exc.interval) from exc
            if val > 0:
                terms.append(math.log(val) + shift)
        return float(logsumexp(terms)) if terms else -math.inf

    def has_mass_in(self, lo, hi):
        """True when the open interval ``(lo, hi)`` carries positive mass."""
        for atom in self.atoms:
            if lo < atom.location < hi:
                return True
        for piece in self.density_pieces:
            a, b = max(lo, piece.a), min(hi, piece.b)
            if b > a:
                sub = adaptive_gl(piece, a, b, rtol=1e-6, atol=1e-300)
                if sub > 0:
                    return True
        return False

    def to_dict(self):
        return {
            "tau": self.tau,
            "atoms": [{"location": a.location, "weight": a.weight} for a in self.atoms],
            "density_pieces": [
                {"a": p.a, "b": p.b, "kind": p.kind, "params": dict(p.params)}
                for p in self.density_pieces
            ],
        }


def total_mass(m: DelayMeasure) -> float:
    """Total mass ``M``."""
    return m.integrate_against(np.ones_like)


def delay_moment(m: DelayMeasure) -> float:
    """First absolute moment ``C = int |s| mu(ds)``."""
    return m.integrate_against(np.abs)


def second_moment(m: DelayMeasure) -> float:
    return m.integrate_against(np.square)


def integrate_against(m: DelayMeasure, g) -> float:
    return m.integrate_against(g)
