"""Semialgebraic varieties as unions of patches."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .expr import Polynomial, evaluate, parse, translate

ON_VARIETY_TOL = 1e-9


@dataclass(frozen=True)
class Patch:
    """The set ``{equation = 0, every constraint >= 0}``."""

    equation: Polynomial
    constraints: tuple[Polynomial, ...] = ()

    def contains(self, p, tol: float = ON_VARIETY_TOL) -> bool:
        exact = all(isinstance(v, (int, Fraction)) for v in p)
        val = evaluate(self.equation, p)
        if (val != 0) if exact else abs(float(val)) > tol:
            return False
        return all(float(evaluate(c, p)) >= -tol for c in self.constraints)

    def translated(self, p) -> "Patch":
        return Patch(translate(self.equation, p), tuple(translate(c, p) for c in self.constraints))


@dataclass(frozen=True)
class Variety:
    """Union of patches sharing one variable tuple; ``ndim`` is the ambient dimension."""

    patches: tuple[Patch, ...]
    variables: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.patches:
            raise ValueError("a variety needs at least one patch")
        vars0 = self.patches[0].equation.variables
        for patch in self.patches:
            polys = (patch.equation,) + tuple(patch.constraints)
            if any(q.variables != vars0 for q in polys):
                raise ValueError("all patches must share the variable list")
            if patch.equation.is_zero():
                raise ValueError("degenerate patch: equation is identically zero")
        object.__setattr__(self, "variables", vars0)

    @property
    def ndim(self) -> int:
        return len(self.variables)

    @property
    def dim(self) -> int:
        """Dimension of the hypersurface pieces (curves in the plane, surfaces in space)."""
        return self.ndim - 1

    @classmethod
    def from_polynomial(cls, f: Polynomial, constraints: Sequence[Polynomial] = ()) -> "Variety":
        return cls((Patch(f, tuple(constraints)),))

    @classmethod
    def from_text(cls, *patches: str | tuple[str, Sequence[str]], variables=None) -> "Variety":
        """Build from patch texts; each patch is ``"eq"`` or ``("eq", ["c1", ...])``."""
        specs = [(p, ()) if isinstance(p, str) else (p[0], tuple(p[1])) for p in patches]
        if variables is None:
            from .expr import default_variables

            names = set()
            for eq, cons in specs:
                for text in (eq,) + cons:
                    names |= set(parse(text).used_variables())
            variables = default_variables(names)
        return cls(tuple(
            Patch(parse(eq, variables), tuple(parse(c, variables) for c in cons)) for eq, cons in specs
        ))

    @property
    def is_polynomial(self) -> bool:
        """True for a single unconstrained patch, i.e. a plain zero set ``Z(f)``."""
        return len(self.patches) == 1 and not self.patches[0].constraints

    @property
    def polynomial(self) -> Polynomial:
        if not self.is_polynomial:
            raise ValueError("variety is not a single polynomial zero set")
        return self.patches[0].equation

    def contains(self, p, tol: float = ON_VARIETY_TOL) -> bool:
        return any(patch.contains(p, tol) for patch in self.patches)

    def patches_through(self, p, tol: float = ON_VARIETY_TOL) -> list[Patch]:
        return [patch for patch in self.patches if patch.contains(p, tol)]

    def translated(self, p) -> "Variety":
        return Variety(tuple(patch.translated(p) for patch in self.patches))

    def scaled(self, lam) -> "Variety":
        """Homothetic image ``lam * X`` about the origin (exact)."""
        lam = Fraction(lam)
        out = []
        for patch in self.patches:
            polys = [patch.equation, *patch.constraints]
            scaled = [Polynomial(q.variables, {e: c / lam ** sum(e) for e, c in q.terms.items()}) for q in polys]
            out.append(Patch(scaled[0], tuple(scaled[1:])))
        return Variety(tuple(out))

    def __str__(self):
        parts = []
        for patch in self.patches:
            s = str(patch.equation) + " = 0"
            if patch.constraints:
                s += " where " + ", ".join(f"{c} >= 0" for c in patch.constraints)
            parts.append(s)
        return " | ".join(parts)


def as_point(p, n: int | None = None, exact: bool = True):
    """Coerce coordinates to Fractions (exact) or a float array."""
    if isinstance(p, str):
        p = [Fraction(v.strip()) for v in p.split(",")]
    pts = list(p)
    if n is not None and len(pts) != n:
        raise ValueError(f"point has dimension {len(pts)}, expected {n}")
    if exact:
        return [v if isinstance(v, Fraction) else Fraction(repr(v)) if isinstance(v, float) else Fraction(v) for v in pts]
    return np.array([float(v) for v in pts])
