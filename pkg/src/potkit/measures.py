"""Finite signed measures: atoms plus a density, and the diffuse/concentrated
split.

An atom is concentrated exactly when its singleton is polar for the operator,
detected by diagonal blow-up of the Green function: laplacian atoms are polar
for d >= 2, fractional atoms for alpha <= d.  Densities are always diffuse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import SupportError
from .geometry import Domain, Grid
from .kernels import OperatorSpec, points_polar


@dataclass(frozen=True)
class Density:
    """Scalar density on the domain: a named preset or node values on a grid.

    Presets: ``constant`` (level ``value``) and ``gaussian``
    (value * exp(-|x - center|^2 / (2 sigma^2))).
    """

    kind: str
    value: float = 0.0
    sigma: float = 0.25
    center: tuple = ()
    grid_values: Optional[np.ndarray] = None
    grid: Optional[Grid] = None

    @staticmethod
    def constant(value: float) -> "Density":
        return Density(kind="constant", value=float(value))

    @staticmethod
    def gaussian(value: float, sigma: float, center) -> "Density":
        return Density(kind="gaussian", value=float(value), sigma=float(sigma),
                       center=tuple(float(c) for c in np.atleast_1d(center)))

    @staticmethod
    def on_grid(grid: Grid, values: np.ndarray) -> "Density":
        return Density(kind="grid", grid=grid, grid_values=np.asarray(values, float))

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            return np.full(pts.shape[0], self.value)
        if self.kind == "gaussian":
            c = np.asarray(self.center) if self.center else np.zeros(pts.shape[1])
            r2 = np.sum((pts - c) ** 2, axis=1)
            return self.value * np.exp(-r2 / (2.0 * self.sigma**2))
        # grid values: multilinear interpolation would be overkill here; the
        # discrete paths evaluate at the grid's own nodes
        g = self.grid
        idx = np.stack([np.clip(np.rint((pts[:, k] - g.domain.anchor[k]) / g.h
                                        - g.offset[k]).astype(int), 0, g.shape[k] - 1)
                        for k in range(g.dim)], axis=0)
        return self.grid_values[tuple(idx)]

    def is_radial_about(self, center) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "gaussian":
            return np.allclose(self.center, np.atleast_1d(center))
        return False

    def abs_integral(self, dom: Domain) -> float:
        """Integral of |density| over the domain (total-variation part)."""
        if self.kind == "constant":
            return abs(self.value) * dom.volume()
        if self.kind == "grid":
            return float(np.sum(np.abs(self.grid_values))) * self.grid.cell_volume()
        # gaussian: radial quadrature about its center when centered in a ball,
        # generic quadrature otherwise
        if dom.kind == "ball" and self.is_radial_about(dom.center):
            d, R = dom.dim, dom.radius
            area = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
            f = lambda r: abs(self.value) * math.exp(-r * r / (2 * self.sigma**2)) \
                * area * r ** (d - 1)
            return integrate.quad(f, 0.0, R)[0]
        if dom.kind == "interval" or dom.dim == 1:
            a, b = dom.bounding_box[0]
            return integrate.quad(lambda x: abs(float(self(np.array([[x]])))), a, b)[0]
        raise SupportError("gaussian TV needs a centered ball or 1d domain")


@dataclass(frozen=True)
class MeasureData:
    """mu = sum of weighted atoms + density; total variation must be finite."""

    atoms: tuple = ()                 # ((point tuple, weight), ...)
    density: Optional[Density] = None

    @staticmethod
    def make(atoms=(), density: Optional[Density] = None,
             dom: Optional[Domain] = None) -> "MeasureData":
        norm_atoms = []
        for p, w in atoms:
            pt = tuple(float(c) for c in np.atleast_1d(p))
            if dom is not None and not dom.contains(np.asarray(pt)):
                raise SupportError(f"atom at {pt} lies outside the open domain")
            norm_atoms.append((pt, float(w)))
        return MeasureData(atoms=tuple(norm_atoms), density=density)

    @property
    def is_zero(self) -> bool:
        return not self.atoms and (self.density is None
                                   or (self.density.kind != "grid"
                                       and self.density.value == 0.0))

    def atom_points(self) -> np.ndarray:
        return np.array([p for p, _ in self.atoms], dtype=float)

    def atom_weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)


@dataclass(frozen=True)
class Decomposition:
    """Unique split mu = diffuse + concentrated (atoms at polar points)."""

    diffuse: MeasureData
    concentrated: MeasureData

    def recombined(self) -> MeasureData:
        return MeasureData(atoms=self.concentrated.atoms + self.diffuse.atoms,
                           density=self.diffuse.density)


def decompose(mu: MeasureData, op: OperatorSpec, dom: Domain) -> Decomposition:
    """Split mu into diffuse and concentrated parts.

    Rule table (equivalent to the diagonal Green blow-up): laplacian d >= 2
    -> atoms concentrated; laplacian d = 1 -> atoms diffuse; fractional ->
    concentrated iff alpha <= d.  Densities are always diffuse, so the split
    reproduces the input exactly when recombined.
    """
    polar = points_polar(op, dom.dim)
    if polar:
        conc = MeasureData(atoms=mu.atoms, density=None)
        diff = MeasureData(atoms=(), density=mu.density)
    else:
        conc = MeasureData(atoms=(), density=None)
        diff = MeasureData(atoms=mu.atoms, density=mu.density)
    return Decomposition(diffuse=diff, concentrated=conc)


def total_variation(mu: MeasureData, dom: Domain) -> float:
    """||mu||_TV = sum |atom weights| + integral of |density|."""
    tv = float(np.sum(np.abs(mu.atom_weights()))) if mu.atoms else 0.0
    if mu.density is not None:
        tv += mu.density.abs_integral(dom)
    return tv


def deposit(mu: MeasureData, grid: Grid) -> np.ndarray:
    """Deposit mu on the grid as a density-units right-hand side (flat).

    Atoms on nodes become h^{-d}-scaled node masses; off-node atoms spread
    to the 2^d surrounding nodes by multilinear weights.  Mass falling on
    non-interior corners is redistributed among the interior ones so the
    total deposited mass matches the atom weight exactly.
    """
    rhs = np.zeros(grid.n_interior)
    h, dim = grid.h, grid.dim
    inv_vol = 1.0 / grid.cell_volume()
    anchor = grid.domain.anchor
    for point, weight in mu.atoms:
        rel = (np.asarray(point) - anchor) / h - np.asarray(grid.offset)
        base = np.floor(rel + 1e-12).astype(int)
        frac = rel - base
        corners, wts = [], []
        for mask in range(2**dim):
            idx = tuple(base[k] + ((mask >> k) & 1) for k in range(dim))
            w = 1.0
            for k in range(dim):
                w *= frac[k] if (mask >> k) & 1 else (1.0 - frac[k])
            if w <= 0.0:
                continue
            if all(0 <= idx[k] < grid.shape[k] for k in range(dim)):
                flat = grid.interior_index[idx]
            else:
                flat = -1
            corners.append(flat)
            wts.append(w)
        wts = np.asarray(wts)
        good = np.asarray([c >= 0 for c in corners])
        if not good.any():
            flat = grid.flat_of_lattice(grid.nearest_node(np.asarray(point)))
            if flat < 0:
                raise SupportError(f"atom at {point} has no interior node nearby")
            rhs[flat] += weight * inv_vol
            continue
        wts = wts * (1.0 / wts[good].sum())
        for flat, w in zip(corners, wts):
            if flat >= 0:
                rhs[flat] += weight * w * inv_vol
    if mu.density is not None:
        rhs += mu.density(grid.interior_points())
    return rhs


def jordan_parts(mu: MeasureData) -> tuple:
    """(mu_plus, mu_minus) with atoms keyed by point and densities by sign."""
    pos_atoms = tuple((p, w) for p, w in mu.atoms if w > 0)
    neg_atoms = tuple((p, -w) for p, w in mu.atoms if w < 0)
    pos_dens = neg_dens = None
    if mu.density is not None and mu.density.kind != "grid":
        if mu.density.value >= 0:
            pos_dens = mu.density
        else:
            neg_dens = replace(mu.density, value=-mu.density.value)
    elif mu.density is not None:
        vals = mu.density.grid_values
        pos_dens = replace(mu.density, grid_values=np.maximum(vals, 0.0))
        neg_dens = replace(mu.density, grid_values=np.maximum(-vals, 0.0))
    return (MeasureData(atoms=pos_atoms, density=pos_dens),
            MeasureData(atoms=neg_atoms, density=neg_dens))
