"""Second-order forward-mode jets.

A :class:`Jet2` carries ``(value, d1, d2)`` of a quantity with respect to a
single independent variable.  Components may be floats or numpy arrays, so a
whole sample grid can be pushed through an expression in one pass.
"""

from __future__ import annotations

import numpy as np


class DomainError(ValueError):
    """An elementary function was evaluated outside its domain."""


def _lift(x):
    if isinstance(x, Jet2):
        return x
    return Jet2(x, 0.0, 0.0)


class Jet2:
    __slots__ = ("value", "d1", "d2")

    def __init__(self, value, d1=0.0, d2=0.0):
        self.value = value
        self.d1 = d1
        self.d2 = d2

    @classmethod
    def variable(cls, t):
        """Seed jet for the independent variable itself."""
        t = np.asarray(t, dtype=float) if not np.isscalar(t) else float(t)
        return cls(t, np.ones_like(t) if not np.isscalar(t) else 1.0, 0.0 * t)

    def triple(self):
        return self.value, self.d1, self.d2

    def __repr__(self):
        return f"Jet2({self.value!r}, {self.d1!r}, {self.d2!r})"

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        o = _lift(other)
        return Jet2(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __sub__(self, other):
        o = _lift(other)
        return Jet2(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        return _lift(other) - self

    def __neg__(self):
        return Jet2(-self.value, -self.d1, -self.d2)

    def __mul__(self, other):
        o = _lift(other)
        return Jet2(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _lift(other)
        if np.any(np.asarray(o.value) == 0.0):
            raise DomainError("division by zero")
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return _lift(other) / self

    def reciprocal(self):
        v = self.value
        if np.any(np.asarray(v) == 0.0):
            raise DomainError("division by zero")
        inv = 1.0 / v
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __pow__(self, other):
        if isinstance(other, Jet2):
            return power(self, other)
        return self.powc(float(other))

    def __rpow__(self, other):
        return power(_lift(other), self)

    # elementary functions -------------------------------------------------

    def _chain(self, g0, g1, g2):
        # d/dt g(x(t)) and d2/dt2 g(x(t))
        return Jet2(g0, g1 * self.d1, g2 * self.d1 * self.d1 + g1 * self.d2)

    def exp(self):
        e = np.exp(self.value)
        return self._chain(e, e, e)

    def log(self):
        v = self.value
        if np.any(np.asarray(v) <= 0.0):
            raise DomainError("ln of a non-positive argument")
        inv = 1.0 / v
        return self._chain(np.log(v), inv, -inv * inv)

    def sqrt(self):
        v = self.value
        if np.any(np.asarray(v) < 0.0):
            raise DomainError("sqrt of a negative argument")
        if np.any(np.asarray(v) == 0.0):
            raise DomainError("sqrt is not differentiable at 0")
        s = np.sqrt(v)
        return self._chain(s, 0.5 / s, -0.25 / (s * v))

    def powc(self, c: float):
        """``self ** c`` for a constant exponent."""
        v = self.value
        if c == 0.0:
            one = np.ones_like(v) if not np.isscalar(v) else 1.0
            return Jet2(one, 0.0 * one, 0.0 * one)
        integral = float(c).is_integer()
        if not integral and np.any(np.asarray(v) < 0.0):
            raise DomainError("non-integer power of a negative base")
        if np.any(np.asarray(v) == 0.0) and (c < 0.0 or (not integral and c < 2.0)):
            raise DomainError(f"power {c:g} is singular at a zero base")
        g0 = v**c
        g1 = c * v ** (c - 1.0) if c != 1.0 else np.ones_like(v) * 1.0
        if c in (1.0,):
            g2 = 0.0 * v
        elif c == 2.0:
            g2 = 2.0 + 0.0 * v
        else:
            g2 = c * (c - 1.0) * v ** (c - 2.0)
        return self._chain(g0, g1, g2)


def power(base: Jet2, expo: Jet2) -> Jet2:
    """General ``base ** expo`` with a jet-valued exponent, via exp(expo ln base)."""
    if np.all(np.asarray(expo.d1) == 0.0) and np.all(np.asarray(expo.d2) == 0.0):
        c = np.asarray(expo.value)
        if c.ndim == 0:
            return base.powc(float(c))
    return (expo * base.log()).exp()
