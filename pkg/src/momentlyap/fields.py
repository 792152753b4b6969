"""Exact coefficient fields on the line and on the circle.

Two concrete kinds are supported: ordinary polynomials in ``x`` (line models)
and trigonometric polynomials in ``theta`` (circle models).  Both are closed
under addition, multiplication and differentiation, which is all the model
algebra ever needs.
"""

from __future__ import annotations

from typing import Union

import numpy as np
from numpy.polynomial import polynomial as P

Number = Union[int, float]

MAX_USER_DEGREE = 8


class ScalarField:
    """Base class; concrete fields are :class:`PolyField` and :class:`TrigField`."""

    kind: str = "abstract"

    def __call__(self, x):
        raise NotImplementedError

    def deriv(self, k: int = 1) -> "ScalarField":
        raise NotImplementedError

    def __radd__(self, other):
        return self.__add__(other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __neg__(self):
        return (-1.0) * self


class PolyField(ScalarField):
    """Polynomial with ascending coefficients ``c[0] + c[1] x + ...``."""

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.size == 0:
            c = np.zeros(1)
        c = P.polytrim(c, 0.0) if np.any(c != 0) else np.zeros(1)
        self.coeffs = c

    @property
    def kind(self) -> str:
        return "constant" if self.degree == 0 else "polynomial"

    @classmethod
    def constant(cls, value: Number) -> "PolyField":
        return cls([value])

    @classmethod
    def x(cls) -> "PolyField":
        return cls([0.0, 1.0])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return float(self.coeffs[-1])

    def is_zero(self) -> bool:
        return bool(np.all(self.coeffs == 0))

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def deriv(self, k: int = 1) -> "PolyField":
        if self.degree < k:
            return PolyField([0.0])
        return PolyField(P.polyder(self.coeffs, k))

    def integ(self) -> "PolyField":
        """Antiderivative vanishing at 0."""
        return PolyField(P.polyint(self.coeffs))

    def critical_points(self) -> np.ndarray:
        """Real roots of the derivative."""
        d = self.deriv()
        if d.degree == 0:
            return np.empty(0)
        r = P.polyroots(d.coeffs)
        return np.real(r[np.abs(np.imag(r)) <= 1e-9 * (1 + np.abs(r))])

    def __add__(self, other):
        if isinstance(other, TrigField):
            return other + self
        if isinstance(other, PolyField):
            return PolyField(P.polyadd(self.coeffs, other.coeffs))
        return PolyField(P.polyadd(self.coeffs, [float(other)]))

    def __mul__(self, other):
        if isinstance(other, TrigField):
            return other * self
        if isinstance(other, PolyField):
            return PolyField(P.polymul(self.coeffs, other.coeffs))
        return PolyField(self.coeffs * float(other))

    def __pow__(self, n: int):
        return PolyField(P.polypow(self.coeffs, n))

    def __repr__(self):
        return f"PolyField({self.coeffs.tolist()})"

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = PolyField([other])
        if not isinstance(other, PolyField):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    __hash__ = None


class TrigField(ScalarField):
    """Trigonometric polynomial ``sum_k cos_k cos(k t) + sin_k sin(k t)``.

    ``sin[0]`` is ignored and kept at zero.
    """

    kind = "trig_polynomial"

    def __init__(self, cos, sin=None):
        c = np.atleast_1d(np.asarray(cos, dtype=float))
        s = np.zeros_like(c) if sin is None else np.atleast_1d(np.asarray(sin, dtype=float))
        n = max(c.size, s.size)
        self.cos = np.pad(c, (0, n - c.size))
        self.sin = np.pad(s, (0, n - s.size))
        self.sin[0] = 0.0
        self._trim()

    def _trim(self):
        n = self.cos.size
        while n > 1 and self.cos[n - 1] == 0 and self.sin[n - 1] == 0:
            n -= 1
        self.cos = self.cos[:n].copy()
        self.sin = self.sin[:n].copy()

    @classmethod
    def constant(cls, value: Number) -> "TrigField":
        return cls([value])

    @property
    def degree(self) -> int:
        return self.cos.size - 1

    def is_zero(self) -> bool:
        return bool(np.all(self.cos == 0) and np.all(self.sin == 0))

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = np.arange(self.cos.size)
        kt = np.multiply.outer(theta, k)
        return np.cos(kt) @ self.cos + np.sin(kt) @ self.sin

    def deriv(self, k: int = 1) -> "TrigField":
        out = self
        for _ in range(k):
            n = np.arange(out.cos.size)
            out = TrigField(n * out.sin, -n * out.cos)
        return out

    def _complex(self) -> np.ndarray:
        # e^{ik t} coefficients for k = -K..K
        K = self.degree
        z = np.zeros(2 * K + 1, dtype=complex)
        z[K] = self.cos[0]
        for k in range(1, K + 1):
            z[K + k] = 0.5 * (self.cos[k] - 1j * self.sin[k])
            z[K - k] = 0.5 * (self.cos[k] + 1j * self.sin[k])
        return z

    @classmethod
    def _from_complex(cls, z: np.ndarray) -> "TrigField":
        K = (z.size - 1) // 2
        cos = np.zeros(K + 1)
        sin = np.zeros(K + 1)
        cos[0] = z[K].real
        for k in range(1, K + 1):
            cos[k] = (z[K + k] + z[K - k]).real
            sin[k] = (1j * (z[K + k] - z[K - k])).real
        return cls(cos, sin)

    @staticmethod
    def _coerce(other) -> "TrigField":
        if isinstance(other, TrigField):
            return other
        if isinstance(other, PolyField):
            if other.degree > 0:
                raise ValueError("non-periodic polynomial field cannot be combined with a circle field")
            return TrigField([other.coeffs[0]])
        return TrigField([float(other)])

    def __add__(self, other):
        o = self._coerce(other)
        n = max(self.cos.size, o.cos.size)
        return TrigField(
            np.pad(self.cos, (0, n - self.cos.size)) + np.pad(o.cos, (0, n - o.cos.size)),
            np.pad(self.sin, (0, n - self.sin.size)) + np.pad(o.sin, (0, n - o.sin.size)),
        )

    def __mul__(self, other):
        if not isinstance(other, (TrigField, PolyField)):
            return TrigField(self.cos * float(other), self.sin * float(other))
        o = self._coerce(other)
        return TrigField._from_complex(np.convolve(self._complex(), o._complex()))

    def __repr__(self):
        return f"TrigField(cos={self.cos.tolist()}, sin={self.sin.tolist()})"


def as_field(value, circle: bool = False) -> ScalarField:
    """Coerce a number, coefficient list or field into a :class:`ScalarField`."""
    if isinstance(value, ScalarField):
        if circle and isinstance(value, PolyField):
            return TrigField._coerce(value)
        return value
    if circle:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.size > 1 and np.any(arr[1:] != 0):
            raise ValueError("non-periodic polynomial field requested on circle")
        return TrigField([arr[0]])
    return PolyField(value)
