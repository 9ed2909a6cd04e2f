"""Phase-space lattices made of independent 2x2 blocks.

A point of a lattice with ``d`` blocks has ``2d`` coordinates ordered as
``(x1, w1, x2, w2, ...)``: a time/frequency pair per block.  Each block basis
holds its generators as columns, so ``coords = basis @ index``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RadiusTooLarge, SingularBasis

MAX_POINTS = 10**6


@dataclass(frozen=True)
class LatticePoint:
    coords: tuple
    index: tuple


def _as_block(block) -> np.ndarray:
    b = np.array(block, dtype=float)
    if b.size != 4:
        raise SingularBasis(f"lattice block must have 4 entries, got {b.size}")
    b = b.reshape(2, 2)
    if not np.all(np.isfinite(b)):
        raise SingularBasis("lattice block has non-finite entries")
    if abs(np.linalg.det(b)) < 1e-12:
        raise SingularBasis(f"degenerate lattice block {b.tolist()}")
    b.setflags(write=False)
    return b


class Lattice2D:
    """Full-rank lattice in R^2, or a separable product of such lattices."""

    __slots__ = ("_blocks", "_basis")

    def __init__(self, blocks):
        blocks = list(blocks)
        if not blocks:
            raise SingularBasis("a lattice needs at least one block")
        self._blocks = tuple(_as_block(b) for b in blocks)
        d = len(self._blocks)
        basis = np.zeros((2 * d, 2 * d))
        for i, b in enumerate(self._blocks):
            basis[2 * i:2 * i + 2, 2 * i:2 * i + 2] = b
        basis.setflags(write=False)
        self._basis = basis

    @property
    def blocks(self) -> tuple:
        return self._blocks

    @property
    def dim_pairs(self) -> int:
        return len(self._blocks)

    @property
    def dim(self) -> int:
        return 2 * len(self._blocks)

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def volume(self) -> float:
        return float(np.prod([abs(np.linalg.det(b)) for b in self._blocks]))

    @property
    def x_matrix(self) -> np.ndarray:
        """Rows mapping an index vector to the time coordinates."""
        return self._basis[0::2, :]

    @property
    def w_matrix(self) -> np.ndarray:
        """Rows mapping an index vector to the frequency coordinates."""
        return self._basis[1::2, :]

    def coords(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=float)
        return idx @ self._basis.T

    def adjoint(self) -> "Lattice2D":
        # B / |det B| spans the symplectic dual of a 2x2 block, because
        # B^T J B = det(B) J for the standard symplectic matrix J.
        return Lattice2D([b / abs(np.linalg.det(b)) for b in self._blocks])

    def index_bounds(self, radius: float) -> np.ndarray:
        inv = np.linalg.inv(self._basis)
        return np.floor(radius * np.linalg.norm(inv, axis=1) + 1e-9).astype(np.int64)

    def points(self, radius: float, max_points: int = MAX_POINTS):
        """Indices and coordinates of all points with norm <= radius.

        Rows come in lexicographic index order.
        """
        if radius < 0:
            raise ValueError("radius must be non-negative")
        d2 = self.dim
        ball = math.pi ** (d2 / 2) / math.gamma(d2 / 2 + 1) * radius**d2
        if ball / self.volume > max_points:
            raise RadiusTooLarge(
                f"about {ball / self.volume:.3g} points within radius {radius} "
                f"(cap {max_points})"
            )
        per_block = []
        for b in self._blocks:
            lat = Lattice2D([b])
            hi = lat.index_bounds(radius)
            grids = np.meshgrid(
                np.arange(-hi[0], hi[0] + 1), np.arange(-hi[1], hi[1] + 1), indexing="ij"
            )
            idx = np.stack([g.ravel() for g in grids], axis=1)
            c = idx @ b.T
            r2 = np.einsum("ij,ij->i", c, c)
            keep = r2 <= radius * radius * (1 + 1e-12)
            per_block.append((idx[keep], r2[keep]))
        idx, r2 = per_block[0]
        for nidx, nr2 in per_block[1:]:
            total = r2[:, None] + nr2[None, :]
            keep = total <= radius * radius * (1 + 1e-12)
            ia, ib = np.nonzero(keep)
            idx = np.concatenate([idx[ia], nidx[ib]], axis=1)
            r2 = total[ia, ib]
            if len(r2) > max_points:
                raise RadiusTooLarge(f"more than {max_points} points within radius {radius}")
        order = np.lexsort(idx.T[::-1])
        idx = idx[order]
        if len(idx) > max_points:
            raise RadiusTooLarge(f"{len(idx)} points within radius {radius} (cap {max_points})")
        return idx, self.coords(idx)

    def same_as(self, other: "Lattice2D", atol: float = 1e-12) -> bool:
        if not isinstance(other, Lattice2D) or other.dim_pairs != self.dim_pairs:
            return False
        return all(np.allclose(a, b, rtol=0, atol=atol) for a, b in zip(self._blocks, other._blocks))

    def literal(self) -> str:
        return ";".join(",".join(f"{v:.17g}" for v in b.ravel()) for b in self._blocks)

    def to_json(self) -> list:
        return [b.tolist() for b in self._blocks]

    def __repr__(self) -> str:
        return f"Lattice2D({self.literal()!r})"


def make_lattice(basis) -> Lattice2D:
    """Build a lattice from a 2x2 basis or a sequence of 2x2 blocks.

    Columns of each block are the generators.
    """
    arr = np.asarray(basis, dtype=float)
    if arr.ndim == 2:
        return Lattice2D([arr])
    if arr.ndim == 3:
        return Lattice2D(list(arr))
    raise SingularBasis(f"expected a 2x2 basis or a stack of them, got shape {arr.shape}")


def separable(alpha: float, beta: float) -> Lattice2D:
    """The lattice alpha*Z x beta*Z."""
    return Lattice2D([[[alpha, 0.0], [0.0, beta]]])


def adjoint_lattice(L: Lattice2D) -> Lattice2D:
    return L.adjoint()


def volume(L: Lattice2D) -> float:
    return L.volume


def enumerate_points(L: Lattice2D, radius: float, max_points: int = MAX_POINTS) -> list:
    idx, coords = L.points(radius, max_points)
    return [LatticePoint(tuple(c), tuple(int(i) for i in k)) for c, k in zip(coords, idx)]


def symplectic_phase(z, zp) -> np.ndarray:
    """exp(2 pi i (y.w - x.eta)) for z=(x,w), zp=(y,eta), pairs interleaved."""
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    x, w = z[..., 0::2], z[..., 1::2]
    y, eta = zp[..., 0::2], zp[..., 1::2]
    return np.exp(2j * np.pi * (np.sum(y * w, axis=-1) - np.sum(x * eta, axis=-1)))


def parse_lattice(text: str) -> Lattice2D:
    """Parse "a,b,c,d[;a,b,c,d...]" (row-major blocks)."""
    blocks = []
    for part in text.split(";"):
        tokens = [t.strip() for t in part.split(",")]
        vals = []
        for tok in tokens:
            try:
                vals.append(float(tok))
            except ValueError:
                raise ValueError(f"bad lattice token {tok!r}") from None
            if not math.isfinite(vals[-1]):
                raise ValueError(f"bad lattice token {tok!r}")
        if len(vals) != 4:
            raise ValueError(f"lattice block {part.strip()!r} needs 4 entries, got {len(vals)}")
        blocks.append(np.array(vals).reshape(2, 2))
    return Lattice2D(blocks)
