"""Doubly-periodic interface height functions with analytic derivatives.

An interface is the graph z = g(x, y) of a smooth function that is
d-periodic in both lateral directions.  Height functions are finite
trigonometric sums so that first and second derivatives are available in
closed form; that is what the corrected quadrature and the geometry
builders need.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# (trig in x, trig in y) selected by a 2-character-per-axis tag.
_FORMS = ("coscos", "cossin", "sincos", "sinsin")


@dataclass(frozen=True)
class HeightFunction:
    """Periodic height field ``z = g(x, y)``.

    Parameters
    ----------
    d : float
        Lateral period in both x and y.
    offset : float
        Constant vertical offset.
    terms : tuple
        Tuple of ``(amplitude, mx, my, form)`` entries.  Each term is
        ``amplitude * tx(2*pi*mx*x/d) * ty(2*pi*my*y/d)`` where ``form``
        chooses sin/cos per axis, e.g. ``"sincos"`` is sin in x, cos in y.
    """

    d: float
    offset: float = 0.0
    terms: tuple = ()

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("period d must be positive")
        for t in self.terms:
            if len(t) != 4 or t[3] not in _FORMS:
                raise ValueError(f"bad height-function term: {t!r}")

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------
    @classmethod
    def flat(cls, d: float, offset: float = 0.0) -> "HeightFunction":
        return cls(d=d, offset=offset)

    @classmethod
    def sinusoid(cls, d: float, amplitude: float,
                 offset: float = 0.0) -> "HeightFunction":
        """The reference corrugation ``A*sin(2*pi*x/d)*cos(2*pi*y/d) + offset``."""
        if amplitude == 0.0:
            return cls.flat(d, offset)
        return cls(d=d, offset=offset,
                   terms=((amplitude, 1, 1, "sincos"),))

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def _trigs(self, mx, my, x, y):
        ax = 2.0 * np.pi * mx / self.d * x
        ay = 2.0 * np.pi * my / self.d * y
        return ax, ay

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(np.broadcast(x, y).shape, self.offset, dtype=float)
        for amp, mx, my, form in self.terms:
            ax, ay = self._trigs(mx, my, x, y)
            tx = np.sin(ax) if form[0] == "s" else np.cos(ax)
            ty = np.sin(ay) if form[3] == "s" else np.cos(ay)
            out += amp * tx * ty
        return out

    def grad(self, x, y):
        """Return (g_x, g_y) evaluated at broadcastable arrays x, y."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        gx = np.zeros(shape)
        gy = np.zeros(shape)
        for amp, mx, my, form in self.terms:
            ax, ay = self._trigs(mx, my, x, y)
            wx = 2.0 * np.pi * mx / self.d
            wy = 2.0 * np.pi * my / self.d
            if form[0] == "s":
                tx, dtx = np.sin(ax), wx * np.cos(ax)
            else:
                tx, dtx = np.cos(ax), -wx * np.sin(ax)
            if form[3] == "s":
                ty, dty = np.sin(ay), wy * np.cos(ay)
            else:
                ty, dty = np.cos(ay), -wy * np.sin(ay)
            gx += amp * dtx * ty
            gy += amp * tx * dty
        return gx, gy

    # ------------------------------------------------------------------
    # bookkeeping
    # ------------------------------------------------------------------
    @property
    def is_flat(self) -> bool:
        return all(t[0] == 0.0 for t in self.terms)

    def min_max(self, samples: int = 256):
        """Tight numerical bounds of g over one period cell."""
        if self.is_flat:
            return self.offset, self.offset
        s = np.linspace(-0.5 * self.d, 0.5 * self.d, samples, endpoint=False)
        X, Y = np.meshgrid(s, s, indexing="ij")
        Z = self(X, Y)
        return float(Z.min()), float(Z.max())

    def shape_key(self) -> tuple:
        """Hashable key identifying the shape up to vertical offset.

        Used to share quadrature-correction data between interfaces that
        are vertical translates of one another.
        """
        return (round(self.d, 14),
                tuple((round(a, 14), mx, my, form)
                      for a, mx, my, form in self.terms if a != 0.0))

    def shifted(self, dz: float) -> "HeightFunction":
        return HeightFunction(d=self.d, offset=self.offset + dz,
                              terms=self.terms)
