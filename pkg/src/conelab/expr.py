"""Sparse exact-rational polynomials: parsing, arithmetic, translation,
leading homogeneous forms and factorization.

Coefficients are :class:`fractions.Fraction` throughout; floats only appear
in :meth:`Polynomial.lambdify`, which compiles a vectorized numpy evaluator
for the sampling modules.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_VARIABLES = 8
DEFAULT_DEGREE_CAP = 24

_BASE_NAMES = ("x", "y", "z")


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class FactorizationTimeout(RuntimeError):
    pass


def _variable_key(name: str):
    if name in _BASE_NAMES:
        return (0, _BASE_NAMES.index(name))
    return (1, int(name[1:]))


def default_variables(names: Iterable[str]) -> tuple[str, ...]:
    """Ambient variable tuple for a set of used names.

    Plain ``x, y, z`` names give the plane ``(x, y)`` unless ``z`` is used;
    indexed names ``x1 .. xk`` give ``(x1, ..., xk)``.
    """
    names = set(names)
    plain = {v for v in names if v in _BASE_NAMES}
    indexed = sorted((v for v in names if v not in _BASE_NAMES), key=_variable_key)
    out: list[str] = []
    if plain:
        out.extend(["x", "y"] if "z" not in plain else ["x", "y", "z"])
    if indexed:
        top = max(int(v[1:]) for v in indexed)
        out.extend(f"x{i}" for i in range(1, top + 1))
    if not out:
        out = ["x", "y"]
    return tuple(out)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


class Polynomial:
    """Immutable sparse multivariate polynomial with rational coefficients.

    Parameters
    ----------
    variables : sequence of str
        Ordered variable names.
    terms : mapping
        Exponent tuple -> coefficient. Zero coefficients are dropped.
    """

    __slots__ = ("variables", "_terms", "_hash", "__dict__")

    def __init__(self, variables: Sequence[str], terms: Mapping[tuple, object] | None = None):
        self.variables = tuple(variables)
        n = len(self.variables)
        clean: dict[tuple, Fraction] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise ValueError(f"exponent {exps} does not match {n} variables")
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent")
            c = _as_fraction(coeff)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self._terms = clean
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value, variables: Sequence[str]) -> "Polynomial":
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> "Polynomial":
        variables = tuple(variables)
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {exps: 1})

    @classmethod
    def linear(cls, coefficients: Sequence, variables: Sequence[str]) -> "Polynomial":
        n = len(variables)
        terms = {}
        for i, c in enumerate(coefficients):
            e = [0] * n
            e[i] = 1
            terms[tuple(e)] = c
        return cls(variables, terms)

    # -- basic properties -------------------------------------------------
    @property
    def terms(self) -> dict[tuple, Fraction]:
        return dict(self._terms)

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    @property
    def min_degree(self) -> int:
        if not self._terms:
            return -1
        return min(sum(e) for e in self._terms)

    def degree_in(self, var: int | str) -> int:
        i = self._index(var)
        return max((e[i] for e in self._terms), default=-1)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self._terms}) <= 1

    def sorted_terms(self) -> list[tuple[tuple, Fraction]]:
        """Terms in graded lexicographic order, highest first."""
        return sorted(self._terms.items(), key=lambda kv: (sum(kv[0]), kv[0]), reverse=True)

    def leading_coefficient(self) -> Fraction:
        return self.sorted_terms()[0][1] if self._terms else Fraction(0)

    def _index(self, var: int | str) -> int:
        return var if isinstance(var, int) else self.variables.index(var)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.variables != self.variables:
                raise ValueError(f"variable mismatch: {self.variables} vs {other.variables}")
            return other
        return Polynomial.constant(other, self.variables)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0) + c
        return Polynomial(self.variables, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.variables, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        terms: dict[tuple, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return Polynomial(self.variables, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(1, self.variables)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def scale(self, c) -> "Polynomial":
        c = _as_fraction(c)
        return Polynomial(self.variables, {e: v * c for e, v in self._terms.items()})

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.variables == other.variables and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(other, self.variables)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.variables, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"Polynomial({str(self)!r}, variables={self.variables})"

    def __str__(self):
        return to_text(self)

    # -- calculus and substitution -----------------------------------------
    def diff(self, var: int | str) -> "Polynomial":
        i = self._index(var)
        terms = {}
        for e, c in self._terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                terms[tuple(ne)] = c * e[i]
        return Polynomial(self.variables, terms)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(self.nvars)]

    def homogeneous_part(self, k: int) -> "Polynomial":
        return Polynomial(self.variables, {e: c for e, c in self._terms.items() if sum(e) == k})

    def __call__(self, point):
        return evaluate(self, point)

    def compose(self, substitutions: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute polynomial ``substitutions[i]`` for variable ``i``."""
        if len(substitutions) != self.nvars:
            raise ValueError("one substitution per variable required")
        target = substitutions[0].variables if substitutions else self.variables
        powers: list[dict[int, Polynomial]] = [dict() for _ in substitutions]

        def power(i, k):
            cache = powers[i]
            if k not in cache:
                cache[k] = substitutions[i] ** k
            return cache[k]

        out = Polynomial(target)
        for e, c in self._terms.items():
            term = Polynomial.constant(c, target)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out

    def with_variables(self, variables: Sequence[str]) -> "Polynomial":
        """Re-express over a different (super)set of variable names."""
        variables = tuple(variables)
        missing = [v for v, k in zip(self.variables, self._max_exponents()) if k and v not in variables]
        if missing:
            raise ValueError(f"variables {missing} are used but absent from {variables}")
        idx = [variables.index(v) if v in variables else None for v in self.variables]
        terms = {}
        for e, c in self._terms.items():
            ne = [0] * len(variables)
            for k, j in zip(e, idx):
                if j is not None:
                    ne[j] += k
            terms[tuple(ne)] = c
        return Polynomial(variables, terms)

    def _max_exponents(self):
        return [max((e[i] for e in self._terms), default=0) for i in range(self.nvars)]

    def used_variables(self) -> tuple[str, ...]:
        return tuple(v for v, k in zip(self.variables, self._max_exponents()) if k)

    def is_linear_form(self) -> bool:
        return bool(self._terms) and all(sum(e) == 1 for e in self._terms)

    def linear_coefficients(self) -> list[Fraction]:
        coeffs = [Fraction(0)] * self.nvars
        for e, c in self._terms.items():
            if sum(e) != 1:
                raise ValueError("not a linear form")
            coeffs[e.index(1)] = c
        return coeffs

    # -- numeric evaluation -------------------------------------------------
    @cached_property
    def _numeric(self):
        if not self._terms:
            return np.zeros((0, self.nvars), dtype=np.int64), np.zeros(0)
        exps = np.array(list(self._terms.keys()), dtype=np.int64).reshape(-1, self.nvars)
        coeffs = np.array([float(c) for c in self._terms.values()])
        return exps, coeffs

    def lambdify(self):
        """Vectorized float evaluator ``pts[..., n] -> values[...]``."""
        exps, coeffs = self._numeric
        maxdeg = exps.max(axis=0) if len(exps) else np.zeros(self.nvars, dtype=np.int64)

        def evaluate_numeric(points):
            pts = np.asarray(points, dtype=float)
            out = np.zeros(pts.shape[:-1])
            if not len(coeffs):
                return out
            pw = []
            for i in range(self.nvars):
                col = pts[..., i]
                table = [np.ones_like(col)]
                for _ in range(int(maxdeg[i])):
                    table.append(table[-1] * col)
                pw.append(table)
            for e, c in zip(exps, coeffs):
                term = np.full(pts.shape[:-1], c)
                for i, k in enumerate(e):
                    if k:
                        term = term * pw[i][k]
                out = out + term
            return out

        return evaluate_numeric

    def max_abs_coefficient(self) -> Fraction:
        return max((abs(c) for c in self._terms.values()), default=Fraction(0))


@dataclass(frozen=True)
class HomogeneousForm:
    """Nonzero homogeneous polynomial ``base`` of total degree ``degree``."""

    base: Polynomial
    degree: int

    def __post_init__(self):
        if self.base.is_zero():
            raise ValueError("homogeneous form must be nonzero")
        if any(sum(e) != self.degree for e in self.base.terms):
            raise ValueError("terms of mixed degree")

    def __str__(self):
        return str(self.base)


@dataclass(frozen=True)
class FactorList:
    """``constant * prod(factor**mult)``; factors primitive, integral, pairwise non-associate."""

    constant: Fraction
    factors: tuple[tuple[Polynomial, int], ...]

    def expand(self, variables: Sequence[str]) -> Polynomial:
        out = Polynomial.constant(self.constant, variables)
        for fac, k in self.factors:
            out = out * fac ** k
        return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------
_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<ident>x\d+|[xyz])|(?P<op>[-+*/^()])|(?P<bad>\S))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:  # only trailing whitespace is left
                break
            kind = m.lastgroup
            start = m.start(kind)
            if kind == "bad":
                raise ParseError(f"unexpected character {m.group(kind)!r}", self._byte(start), text)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0
        self.names: set[str] = set()

    def _byte(self, char_offset: int) -> int:
        return len(self.text[:char_offset].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", len(self.text))

    def advance(self):
        tok = self.peek()
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, self._byte(tok[2]), self.text)

    # Trees are nested tuples; names are resolved after the full pass so the
    # ambient variable tuple is known before any Polynomial is built.
    def parse(self):
        if not self.tokens:
            self.error("empty expression")
        tree = self.expr()
        if self.peek()[0] != "eof":
            tok = self.peek()
            if tok[0] in ("ident", "num") or tok[1] == "(":
                self.error("implicit multiplication is not allowed")
            self.error(f"unexpected token {tok[1]!r}")
        return tree

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] == "*":
            self.advance()
            if self.peek()[1] == "*":
                self.error("unsupported operator '**'")
            node = ("mul", node, self.factor())
        return node

    def factor(self):
        # Unary minus binds looser than '^' so that "-x^2" means -(x^2).
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.advance()
            return ("neg", self.factor())
        node = self.base()
        if self.peek()[1] == "^":
            self.advance()
            tok = self.advance()
            if tok[0] == "op" and tok[1] in ("-", "("):
                self.error("non-integer exponent", tok)
            if tok[0] != "num":
                self.error("exponent must be an unsigned integer", tok)
            if not tok[1].isdigit():
                self.error("non-integer exponent", tok)
            if self.peek()[1] == "/":
                self.error("non-integer exponent")
            node = ("pow", node, int(tok[1]))
        return node

    def base(self):
        tok = self.advance()
        kind, value, _ = tok
        if kind == "num":
            if "." in value:
                return ("num", Fraction(value))
            if self.peek()[1] == "/":
                self.advance()
                den = self.advance()
                if den[0] != "num" or not den[1].isdigit():
                    self.error("denominator must be an unsigned integer", den)
                if int(den[1]) == 0:
                    self.error("division by zero", den)
                return ("num", Fraction(int(value), int(den[1])))
            return ("num", Fraction(int(value)))
        if kind == "ident":
            self.names.add(value)
            return ("var", value)
        if value == "(":
            node = self.expr()
            if self.peek()[1] != ")":
                self.error("expected ')'")
            self.advance()
            return node
        if value == "-":
            return ("neg", self.base())
        if kind == "eof":
            self.error("unexpected end of input", tok)
        self.error(f"unexpected token {value!r}", tok)


def _build(tree, variables):
    kind = tree[0]
    if kind == "num":
        return Polynomial.constant(tree[1], variables)
    if kind == "var":
        return Polynomial.variable(tree[1], variables)
    if kind == "neg":
        return -_build(tree[1], variables)
    if kind == "pow":
        return _build(tree[1], variables) ** tree[2]
    a, b = _build(tree[1], variables), _build(tree[2], variables)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    return a * b


def parse(text: str, variables: Sequence[str] | None = None) -> Polynomial:
    """Parse polynomial text into a canonical :class:`Polynomial`.

    >>> parse("x*(y^2 + x^4)")
    Polynomial('x^5 + x*y^2', variables=('x', 'y'))
    """
    parser = _Parser(text)
    tree = parser.parse()
    if variables is None:
        variables = default_variables(parser.names)
    else:
        variables = tuple(variables)
        unknown = parser.names - set(variables)
        if unknown:
            raise ParseError(f"unknown variables {sorted(unknown)}", 0, text)
    if len(variables) > MAX_VARIABLES:
        raise ParseError(f"too many variables ({len(variables)} > {MAX_VARIABLES})", 0, text)
    return _build(tree, variables)


def _format_coefficient(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def to_text(f: Polynomial) -> str:
    """Canonical grammar-compatible text, graded-lex order, highest term first."""
    if f.is_zero():
        return "0"
    parts = []
    for exps, c in f.sorted_terms():
        mono = "*".join(
            v if k == 1 else f"{v}^{k}" for v, k in zip(f.variables, exps) if k
        )
        mag = abs(c)
        if not mono:
            body = _format_coefficient(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{_format_coefficient(mag)}*{mono}"
        sign = "-" if c < 0 else "+"
        parts.append((sign, body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------
def evaluate(f: Polynomial, point) -> Fraction | float:
    """Evaluate exactly for rational points, in floats otherwise."""
    if len(point) != f.nvars:
        raise ValueError(f"point of length {len(point)} for {f.nvars} variables")
    exact = all(isinstance(v, (int, Fraction)) for v in point)
    vals = [Fraction(v) for v in point] if exact else [float(v) for v in point]
    total = Fraction(0) if exact else 0.0
    for e, c in f.terms.items():
        term = c if exact else float(c)
        for v, k in zip(vals, e):
            if k:
                term *= v ** k
        total += term
    return total


def gradient(f: Polynomial) -> list[Polynomial]:
    return f.gradient()


def _exact_point(p, n: int) -> list[Fraction]:
    if len(p) != n:
        raise ValueError(f"point has dimension {len(p)}, polynomial has {n} variables")
    out = []
    for v in p:
        if isinstance(v, float):
            raise ValueError("translate requires exact rational coordinates")
        out.append(Fraction(v))
    return out


def translate(f: Polynomial, p) -> Polynomial:
    """Return ``g`` with ``g(x) = f(x + p)``."""
    pt = _exact_point(p, f.nvars)
    if not any(pt):
        return f
    subs = [Polynomial.variable(v, f.variables) + c for v, c in zip(f.variables, pt)]
    return f.compose(subs)


def leading_form(f: Polynomial) -> HomogeneousForm:
    """Lowest-degree homogeneous part of ``f`` (which must vanish at the origin)."""
    if f.is_zero():
        raise ValueError("zero polynomial has no leading form")
    if f.constant_term() != 0:
        raise ValueError("nonzero constant term: the origin is not on the variety")
    m = f.min_degree
    return HomogeneousForm(f.homogeneous_part(m), m)


def homogeneity_check(h: HomogeneousForm, lambdas=(2, 3, Fraction(1, 2)), points=None) -> bool:
    """Exactly check ``h(l*x) == l**m * h(x)`` on the given rational points."""
    n = h.base.nvars
    if points is None:
        points = [[Fraction(i + 1, j + 2) * (-1) ** (i + j) for i in range(n)] for j in range(3)]
    for lam in lambdas:
        lam = Fraction(lam)
        for x in points:
            x = [Fraction(v) for v in x]
            if evaluate(h.base, [lam * v for v in x]) != lam ** h.degree * evaluate(h.base, x):
                return False
    return True


def f_lambda(f: Polynomial, lam, m: int | None = None) -> Polynomial:
    """The rescaled polynomial ``lam**m * f(x / lam)``; tends to the leading form."""
    lam = Fraction(lam)
    if m is None:
        m = f.min_degree
    return Polynomial(f.variables, {e: c * lam ** (m - sum(e)) for e, c in f.terms.items()})


def _primitive(f: Polynomial) -> tuple[Fraction, Polynomial]:
    """Split ``f = content * g`` with ``g`` integral, primitive, leading coefficient > 0."""
    from math import gcd, lcm

    coeffs = list(f.terms.values())
    den = 1
    for c in coeffs:
        den = lcm(den, c.denominator)
    nums = [int(c * den) for c in coeffs]
    g = 0
    for v in nums:
        g = gcd(g, abs(v))
    content = Fraction(g, den)
    if f.leading_coefficient() < 0:
        content = -content
    return content, f.scale(1 / content)


def square_free_factor(f: Polynomial, degree_cap: int = DEFAULT_DEGREE_CAP) -> FactorList:
    """Factor ``f`` over the rationals into pairwise non-associate factors with multiplicities.

    Irreducible factors are returned, which refines the square-free
    decomposition (``x^2 - y^2`` splits into its two lines).
    """
    import sympy

    if f.is_zero():
        raise ValueError("cannot factor the zero polynomial")
    if f.degree > degree_cap:
        raise FactorizationTimeout(f"degree {f.degree} exceeds cap {degree_cap}")
    syms = sympy.symbols(list(f.variables))
    expr = sympy.Add(*[
        sympy.Rational(c.numerator, c.denominator) * sympy.Mul(*[s ** k for s, k in zip(syms, e)])
        for e, c in f.terms.items()
    ])
    if f.degree <= 0:
        return FactorList(f.constant_term(), ())
    const, facs = sympy.factor_list(sympy.Poly(expr, *syms, domain="QQ"))
    constant = Fraction(int(sympy.fraction(const)[0]), int(sympy.fraction(const)[1]))
    out = []
    for fac, k in facs:
        terms = {}
        for monom, c in fac.terms():
            num, den = sympy.fraction(c)
            terms[tuple(int(v) for v in monom)] = Fraction(int(num), int(den))
        poly = Polynomial(f.variables, terms)
        content, prim = _primitive(poly)
        constant *= content ** k
        out.append((prim, int(k)))
    out.sort(key=lambda fk: (fk[0].degree, to_text(fk[0])))
    result = FactorList(constant, tuple(out))
    if result.expand(f.variables) != f:
        raise ArithmeticError("factorization failed to reassemble the input")
    return result
