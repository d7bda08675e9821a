"""Sampled functions on tensor grids, with CSV output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class GridFunction:
    """Complex samples on the tensor grid spanned by ``axes``.

    ``values.shape`` equals ``tuple(len(a) for a in axes)``; for boundary data
    of a one-dimensional problem ``axes`` is empty and ``values`` is 0-d.
    """

    axes: list
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        self.values = np.asarray(self.values, dtype=complex)
        shape = tuple(len(a) for a in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"values have shape {self.values.shape}, grid has {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function contains NaN or inf")

    @property
    def ndim(self):
        return len(self.axes)

    def spacing(self, axis=0):
        a = self.axes[axis]
        return float(a[1] - a[0]) if len(a) > 1 else 0.0

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def restrict(self, axis, lo, hi):
        """Sub-grid with ``lo <= axes[axis] <= hi``."""
        a = self.axes[axis]
        m = (a >= lo) & (a <= hi)
        axes = list(self.axes)
        axes[axis] = a[m]
        idx = [slice(None)] * self.ndim
        idx[axis] = m
        return GridFunction(axes, self.values[tuple(idx)], dict(self.meta))

    def spec(self):
        return {
            "axes": [
                {"min": float(a[0]), "max": float(a[-1]), "points": int(len(a))} if len(a) else {"points": 0}
                for a in self.axes
            ],
            "meta": self.meta,
        }

    def to_csv(self, path=None, precision=17):
        """Write rows ``coords..., real, imag``; returns the text when ``path`` is None."""
        names = [f"x{i + 1}" for i in range(self.ndim)] + ["real", "imag"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        fmt = f"{{:.{precision}g}}"
        if self.ndim == 0:
            v = complex(self.values)
            w.writerow([fmt.format(v.real), fmt.format(v.imag)])
        else:
            coords = [m.ravel() for m in self.mesh()]
            vals = self.values.ravel()
            for i in range(vals.size):
                w.writerow([fmt.format(c[i]) for c in coords] + [fmt.format(vals[i].real), fmt.format(vals[i].imag)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, ndim):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        coords = data[:, :ndim]
        vals = data[:, ndim] + 1j * data[:, ndim + 1]
        axes = [np.unique(coords[:, i]) for i in range(ndim)]
        shape = tuple(len(a) for a in axes)
        return cls(axes, vals.reshape(shape))
