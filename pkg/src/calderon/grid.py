"""Uniform square grids on the complex plane and fields sampled on them."""
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

CGRID_MAGIC = b"CGRID1\0"
_HEADER = struct.Struct("<I3dB")


@dataclass(frozen=True)
class GridSpec:
    """Square grid of ``n_side``² nodes covering [-s, s]² around ``center``.

    Without offset the nodes are ``-s + j h``; with offset they are shifted
    by half a cell, ``-s + (j + 1/2) h``, so that the center is never a node.
    Row index runs over the imaginary coordinate, column index over the real.
    """

    center: complex
    half_width: float
    n_side: int
    offset: bool = True

    def __post_init__(self):
        n = self.n_side
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValidationError(f"n_side must be a power of two >= 8, got {n!r}")
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ValidationError(f"half_width must be positive, got {self.half_width!r}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "n_side", int(n))
        object.__setattr__(self, "offset", bool(self.offset))

    @property
    def cell(self):
        return 2.0 * self.half_width / self.n_side

    @property
    def axis(self):
        """Node offsets from the center along either axis."""
        j = np.arange(self.n_side) + (0.5 if self.offset else 0.0)
        return -self.half_width + j * self.cell

    def x1(self):
        return self.center.real + self.axis

    def x2(self):
        return self.center.imag + self.axis

    def nodes(self):
        """Complex node coordinates, shape (n_side, n_side)."""
        return self.x1()[None, :] + 1j * self.x2()[:, None]

    def to_dict(self):
        return {"s": self.half_width, "n": self.n_side, "offset": self.offset,
                "center": [self.center.real, self.center.imag]}

    @classmethod
    def from_dict(cls, d):
        c = d.get("center", [0.0, 0.0])
        return cls(complex(c[0], c[1]), d["s"], d["n"], d.get("offset", True))


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on a GridSpec, stored as an (n, n) read-only array."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.grid.n_side
        v = np.array(self.values, dtype=np.complex128)
        if v.size != n * n:
            raise ValidationError(f"expected {n * n} values, got {v.size}")
        v = v.reshape(n, n)
        if not np.all(np.isfinite(v)):
            raise ValidationError("field contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def flat(self):
        return self.values.ravel()

    def with_values(self, values):
        return ComplexField(self.grid, values)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, ComplexField):
            _check_same_grid(self, other)
            other = other.values
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def sup(self, mask=None):
        a = np.abs(self.values)
        return float(a[mask].max() if mask is not None else a.max())


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValidationError("fields live on different grids")


def constant(grid, c):
    return ComplexField(grid, np.full((grid.n_side, grid.n_side), c, dtype=np.complex128))


def sample(grid, func):
    """Field of ``func(z)`` evaluated at the grid nodes."""
    return ComplexField(grid, func(grid.nodes()))


def e_lambda(grid, lam):
    """e_λ(z) = exp(i(zλ + z̄λ̄)) = exp(2i Re(zλ)) on the grid."""
    z = grid.nodes()
    return ComplexField(grid, np.exp(2j * (z * complex(lam)).real))


def write_cgrid(path, fld):
    g = fld.grid
    head = CGRID_MAGIC + _HEADER.pack(g.n_side, g.center.real, g.center.imag,
                                      g.half_width, int(g.offset))
    body = np.ascontiguousarray(fld.values, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(head + body)


def read_cgrid(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(CGRID_MAGIC):
        raise ValidationError(f"{path}: not a CGRID1 file")
    off = len(CGRID_MAGIC)
    n, cre, cim, s, flag = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    if flag not in (0, 1):
        raise ValidationError(f"{path}: bad offset flag {flag}")
    grid = GridSpec(complex(cre, cim), s, n, bool(flag))
    expected = off + 16 * n * n
    if len(data) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes, found {len(data)}")
    vals = np.frombuffer(data, dtype="<c16", offset=off).reshape(n, n)
    return ComplexField(grid, vals)
