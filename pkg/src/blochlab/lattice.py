"""Direct and dual lattices, centered fundamental cells, point reduction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateLatticeError(ValueError):
    """Raised when the supplied direct basis is singular."""


def dual_basis(direct: np.ndarray) -> np.ndarray:
    """Dual basis vectors b_j with a_i . b_j = 2*pi*delta_ij.

    `direct` is a (d, d) array whose *rows* are the direct basis vectors.
    Returns a (d, d) array whose rows are the dual basis vectors.
    """
    direct = np.asarray(direct, dtype=float)
    if direct.ndim != 2 or direct.shape[0] != direct.shape[1]:
        raise ValueError("direct basis must be a square matrix of row vectors")
    det = np.linalg.det(direct)
    if abs(det) < 1e-14:
        raise DegenerateLatticeError("direct basis is singular")
    # rows of 2*pi*inv(direct).T pair biorthogonally with the rows of `direct`
    return 2.0 * np.pi * np.linalg.inv(direct).T


@dataclass(frozen=True)
class CellPoint:
    """Decomposition x = reduced + offset with reduced in the centered cell."""

    reduced: np.ndarray
    offset: np.ndarray  # actual lattice vector (cartesian), not integer coefficients
    coefficients: np.ndarray  # integer coefficients of the offset in the basis


@dataclass(frozen=True)
class Lattice:
    """A Bravais lattice in d <= 3 dimensions with its dual.

    Rows of `direct` are the direct basis vectors; rows of `dual` the dual
    basis, satisfying direct[i] . dual[j] = 2*pi*delta_ij.
    """

    direct: np.ndarray
    dual: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        direct = np.asarray(self.direct, dtype=float)
        if direct.ndim != 2 or direct.shape[0] != direct.shape[1]:
            raise ValueError("direct basis must be square (rows = basis vectors)")
        if direct.shape[0] > 3:
            raise ValueError("dimension capped at 3")
        object.__setattr__(self, "direct", direct)
        object.__setattr__(self, "dual", dual_basis(direct))

    @property
    def d(self) -> int:
        return self.direct.shape[0]

    @property
    def cell_volume(self) -> float:
        return float(abs(np.linalg.det(self.direct)))

    @property
    def dual_cell_volume(self) -> float:
        return float(abs(np.linalg.det(self.dual)))

    def _basis(self, which: str) -> np.ndarray:
        if which == "direct":
            return self.direct
        if which == "dual":
            return self.dual
        raise ValueError(f"unknown lattice kind {which!r}")

    def to_fractional(self, x, which: str = "direct") -> np.ndarray:
        """Coordinates of x in the chosen basis (x = frac @ basis_rows)."""
        basis = self._basis(which)
        return np.asarray(x, dtype=float) @ np.linalg.inv(basis)

    def from_fractional(self, t, which: str = "direct") -> np.ndarray:
        return np.asarray(t, dtype=float) @ self._basis(which)

    def reduce(self, x, which: str = "direct") -> CellPoint:
        """Split x into a centered-cell point plus a lattice vector.

        The fundamental cell is half-open, [-1/2, 1/2) in lattice coordinates,
        so the decomposition is unique including at cell boundaries.
        """
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("cannot reduce non-finite coordinates")
        t = self.to_fractional(x, which)
        n = np.floor(t + 0.5)
        basis = self._basis(which)
        offset = n @ basis
        return CellPoint(reduced=x - offset, offset=offset,
                         coefficients=n.astype(int))

    def reduce_array(self, x, which: str = "dual") -> np.ndarray:
        """Vectorized reduction of points with shape (..., d); returns reduced points."""
        x = np.asarray(x, dtype=float)
        t = x @ np.linalg.inv(self._basis(which))
        n = np.floor(t + 0.5)
        return x - n @ self._basis(which)


def square_lattice(a: float = 1.0, d: int = 1) -> Lattice:
    """Convenience constructor: hypercubic lattice with spacing a."""
    return Lattice(np.eye(d) * a)
