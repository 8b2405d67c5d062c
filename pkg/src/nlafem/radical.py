"""Exact-arithmetic radical-annihilator polynomials and witness searches.

annihilator(n, k) builds a homogeneous integer polynomial P in n+1 variables,
monic in the last, with P(t_1^k, ..., t_n^k, d^k) = 0 whenever d = sum t_j.
Construction: expand prod over (m_2,...,m_n) in (Z/k)^(n-1) of
(y - (u_1 + z^{m_2} u_2 + ... + z^{m_n} u_n)^k) with z a primitive k-th root
of unity, computing exactly in Q[z] modulo the k-th cyclotomic polynomial.
Every u-exponent of the product is divisible by k and every coefficient lands
in Z, which the code asserts rather than assumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DimensionError, DomainError, SizeError


# ---------------------------------------------------------------------------
# exact multivariate polynomials with integer exponents

@dataclass
class MultiPoly:
    nvars: int
    terms: dict = field(default_factory=dict)  # exponent tuple -> Fraction

    def __post_init__(self):
        clean = {}
        for e, c in self.terms.items():
            c = Fraction(c)
            if c != 0:
                if len(e) != self.nvars:
                    raise DimensionError("exponent tuple length mismatch")
                clean[tuple(int(x) for x in e)] = c
        self.terms = clean

    def __eq__(self, other):
        return self.nvars == other.nvars and self.terms == other.terms

    def degree(self):
        if not self.terms:
            return None
        return max(sum(e) for e in self.terms)

    def is_homogeneous(self):
        degs = {sum(e) for e in self.terms}
        return len(degs) <= 1

    def variable_degrees(self):
        """Max exponent of each variable."""
        out = [0] * self.nvars
        for e in self.terms:
            for i, x in enumerate(e):
                out[i] = max(out[i], x)
        return tuple(out)


def eval_multipoly(p: MultiPoly, point):
    if len(point) != p.nvars:
        raise DimensionError(f"point length {len(point)} != {p.nvars} variables")
    # cache powers per variable
    powers = [{0: 1} for _ in range(p.nvars)]
    total = 0
    for e, c in p.terms.items():
        prod = c
        for i, x in enumerate(e):
            cache = powers[i]
            if x not in cache:
                cache[x] = point[i] ** x
            prod = prod * cache[x]
        total = total + prod
    return total


def serialize_multipoly(p: MultiPoly) -> str:
    lines = []
    for e in sorted(p.terms):
        c = p.terms[e]
        lines.append(f"{c.numerator}/{c.denominator} " + " ".join(str(x) for x in e))
    return "\n".join(lines) + "\n"


def parse_multipoly(text: str) -> MultiPoly:
    terms = {}
    nvars = None
    for ln in text.splitlines():
        if not ln.strip():
            continue
        parts = ln.split()
        c = Fraction(parts[0])
        e = tuple(int(x) for x in parts[1:])
        if nvars is None:
            nvars = len(e)
        terms[e] = c
    return MultiPoly(nvars or 0, terms)


# ---------------------------------------------------------------------------
# cyclotomic arithmetic: elements of Q[z]/Phi_k(z) as coefficient tuples

def cyclotomic_coeffs(k: int) -> list:
    """Integer coefficients of the k-th cyclotomic polynomial (ascending)."""
    # Phi_k = (x^k - 1) / prod_{d | k, d < k} Phi_d, exact division
    num = [Fraction(-1)] + [Fraction(0)] * (k - 1) + [Fraction(1)]
    for d in range(1, k):
        if k % d == 0:
            num = _polydiv_exact(num, [Fraction(c) for c in cyclotomic_coeffs(d)])
    return [int(c) for c in num]


def _polydiv_exact(num, den):
    num = list(num)
    out = [Fraction(0)] * (len(num) - len(den) + 1)
    for i in range(len(out) - 1, -1, -1):
        q = num[i + len(den) - 1] / den[-1]
        out[i] = q
        for j, dc in enumerate(den):
            num[i + j] -= q * dc
    if any(c != 0 for c in num[: len(den) - 1]):
        raise ArithmeticError("inexact polynomial division")
    return out


class _Cyclo:
    """Arithmetic helpers in Q[z]/Phi_k with dense coefficient tuples."""

    def __init__(self, k: int):
        self.k = k
        phi = cyclotomic_coeffs(k)
        self.deg = len(phi) - 1
        self.phi = [Fraction(c) for c in phi]
        self.zero = (Fraction(0),) * self.deg
        one = [Fraction(0)] * self.deg
        one[0] = Fraction(1)
        self.one = tuple(one)
        # z^j reduced, for j = 0..k-1
        self.zpow = []
        cur = list(self.one)
        for _ in range(k):
            self.zpow.append(tuple(cur))
            cur = self._shift(cur)

    def _shift(self, coeffs):
        # multiply by z, reduce modulo Phi_k (monic)
        out = [Fraction(0)] + list(coeffs)
        if len(out) > self.deg:
            lead = out.pop()
            for j in range(self.deg):
                out[j] -= lead * self.phi[j]
        return out

    def add(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def mul(self, a, b):
        prod = [Fraction(0)] * (2 * self.deg - 1)
        for i, x in enumerate(a):
            if x == 0:
                continue
            for j, y in enumerate(b):
                if y != 0:
                    prod[i + j] += x * y
        # reduce
        for i in range(len(prod) - 1, self.deg - 1, -1):
            lead = prod[i]
            if lead != 0:
                for j in range(self.deg + 1):
                    prod[i - self.deg + j] -= lead * self.phi[j]
        return tuple(prod[: self.deg])

    def scale(self, a, c):
        return tuple(x * c for x in a)

    def as_rational(self, a):
        if any(x != 0 for x in a[1:]):
            return None
        return a[0]


# polynomials in u_1..u_n with _Cyclo coefficients: dict exponent -> coeff

def _upoly_mul(field, a, b, cap):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            c = field.mul(ca, cb)
            if e in out:
                out[e] = field.add(out[e], c)
            else:
                out[e] = c
            if len(out) > cap:
                raise SizeError(f"term cap {cap} exceeded during expansion")
    return {e: c for e, c in out.items() if any(x != 0 for x in c)}


def annihilator(n: int, k: int, term_cap: int = 10**6) -> MultiPoly:
    """Homogeneous integer annihilator of sums of k-th roots; n+1 variables."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    if n == 1:
        # delta = t_1, so s - t_1 annihilates for any k
        return MultiPoly(2, {(0, 1): Fraction(1), (1, 0): Fraction(-1)})
    if k == 1:
        terms = {tuple(0 if i != n else 1 for i in range(n + 1)): Fraction(1)}
        for j in range(n):
            terms[tuple(1 if i == j else 0 for i in range(n + 1))] = Fraction(-1)
        return MultiPoly(n + 1, terms)

    est = (k ** (n - 1) + 1) * math.comb(k ** n + n - 1, n - 1)
    if est > 50 * term_cap:
        raise SizeError(f"estimated size {est} far exceeds term cap {term_cap}")

    field = _Cyclo(k)

    def linear_form(m_tuple):
        # u_1 + z^{m_2} u_2 + ... + z^{m_n} u_n
        out = {}
        e0 = [0] * n
        e0[0] = 1
        out[tuple(e0)] = field.one
        for j, m in enumerate(m_tuple, start=1):
            e = [0] * n
            e[j] = 1
            out[tuple(e)] = field.zpow[m % k]
        return out

    # R(y) = prod (y - L^k), stored as list of u-polys by ascending y power
    R = [{(0,) * n: field.one}]  # constant 1
    tuples = _product_range(k, n - 1)
    for m_tuple in tuples:
        L = linear_form(m_tuple)
        Lk = {(0,) * n: field.one}
        for _ in range(k):
            Lk = _upoly_mul(field, Lk, L, term_cap)
        negLk = {e: field.scale(c, Fraction(-1)) for e, c in Lk.items()}
        new = [dict() for _ in range(len(R) + 1)]
        for ypow, coeff in enumerate(R):
            # times y
            tgt = new[ypow + 1]
            for e, c in coeff.items():
                tgt[e] = field.add(tgt[e], c) if e in tgt else c
            # times -L^k
            prod = _upoly_mul(field, coeff, negLk, term_cap)
            tgt = new[ypow]
            for e, c in prod.items():
                tgt[e] = field.add(tgt[e], c) if e in tgt else c
        R = [
            {e: c for e, c in coeff.items() if any(x != 0 for x in c)}
            for coeff in new
        ]
        if sum(len(c) for c in R) > term_cap:
            raise SizeError(f"term cap {term_cap} exceeded ({sum(len(c) for c in R)} terms)")

    total_deg = k ** (n - 1)
    terms = {}
    for ypow, coeff in enumerate(R):
        for e, c in coeff.items():
            if any(x % k for x in e):
                raise ArithmeticError(f"u-exponent {e} not divisible by {k}")
            r = field.as_rational(c)
            if r is None:
                raise ArithmeticError("non-rational coefficient survived symmetrization")
            if r.denominator != 1:
                raise ArithmeticError(f"non-integer coefficient {r}")
            exp = tuple(x // k for x in e) + (ypow,)
            if sum(exp) != total_deg:
                raise ArithmeticError("inhomogeneous term in annihilator")
            terms[exp] = r
    return MultiPoly(n + 1, terms)


def _product_range(k, reps):
    if reps == 0:
        return [()]
    rest = _product_range(k, reps - 1)
    return [(m,) + t for m in range(k) for t in rest]


@dataclass
class AnnihilationReport:
    max_abs_exact: Fraction
    ok: bool
    samples: int


def verify_annihilation(n: int, k: int, samples: int, seed: int = 0, poly: MultiPoly | None = None) -> AnnihilationReport:
    """Exact check of P(t_1^k, ..., t_n^k, (sum t_j)^k) = 0 on random rationals."""
    P = poly if poly is not None else annihilator(n, k)
    state = seed or 1
    worst = Fraction(0)
    for _ in range(samples):
        ts = []
        for _ in range(n):
            state = (state * 6364136223846793005 + 1442695040888963407) % 2**64
            num = (state >> 16) % 41 - 20
            state = (state * 6364136223846793005 + 1442695040888963407) % 2**64
            den = (state >> 16) % 12 + 1
            ts.append(Fraction(num, den))
        delta = sum(ts)
        point = [t**k for t in ts] + [delta**k]
        val = eval_multipoly(P, point)
        if abs(val) > worst:
            worst = abs(val)
    return AnnihilationReport(max_abs_exact=worst, ok=worst == 0, samples=samples)


# ---------------------------------------------------------------------------
# fractional-exponent polynomials and the degree calculus

NEG_INF = float("-inf")


@dataclass
class FracPoly:
    terms: dict = field(default_factory=dict)  # (Fraction q1,q2,q3) -> float coeff

    def __post_init__(self):
        clean = {}
        for e, c in self.terms.items():
            if len(e) != 3:
                raise DimensionError("FracPoly exponents are 3-tuples")
            key = tuple(Fraction(x) for x in e)
            if any(x < 0 for x in key):
                raise ValueError("exponents must be nonnegative rationals")
            if c != 0:
                clean[key] = float(c)
        self.terms = clean

    def __mul__(self, other):
        out = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                out[e] = out.get(e, 0.0) + ca * cb
        return FracPoly(out)

    def __add__(self, other):
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return FracPoly(out)

    def __neg__(self):
        return FracPoly({e: -c for e, c in self.terms.items()})

    def eval(self, point):
        x = [float(v) for v in point]
        if any(v < 0 for v in x):
            raise DomainError("fractional powers need nonnegative arguments")
        total = 0.0
        for e, c in self.terms.items():
            prod = c
            for xi, ei in zip(x, e):
                if ei != 0:
                    prod *= xi ** float(ei)
            total += prod
        return total

    def magnitude_bound(self, point):
        x = [float(v) for v in point]
        total = 0.0
        for e, c in self.terms.items():
            prod = abs(c)
            for xi, ei in zip(x, e):
                if ei != 0:
                    prod *= xi ** float(ei)
            total += prod
        return total


def frac_degree(p: FracPoly):
    """Max total degree as an exact Fraction; -inf for the zero polynomial."""
    if not p.terms:
        return NEG_INF
    return max(sum(e, Fraction(0)) for e in p.terms)


def pow_degree(p: FracPoly, mu):
    """deg p^mu = mu * deg p."""
    d = frac_degree(p)
    return NEG_INF if d == NEG_INF else Fraction(mu) * d


def quotient_degree(p: FracPoly, q: FracPoly):
    """deg(p/q) = deg p - deg q."""
    dp, dq = frac_degree(p), frac_degree(q)
    if dp == NEG_INF:
        return NEG_INF
    if dq == NEG_INF:
        raise ZeroDivisionError("degree of a quotient by the zero polynomial")
    return dp - dq


def monomial_order(alpha, beta) -> str:
    """'succ' / 'eq' / 'prec' by the sign of the first nonzero entry of alpha-beta."""
    a = tuple(Fraction(x) for x in alpha)
    b = tuple(Fraction(x) for x in beta)
    if len(a) != len(b):
        raise DimensionError("tuples of unequal length")
    for x, y in zip(a, b):
        if x != y:
            return "succ" if x > y else "prec"
    return "eq"


# ---------------------------------------------------------------------------
# numeric witness searches (one-sided: None is always inconclusive)

def _halton(i: int, base: int) -> float:
    f, r = 1.0, 0.0
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


def _box_samples(box, budget):
    (x0, x1), (y0, y1), (z0, z1) = box
    if x1 <= x0 or y1 <= y0 or z1 <= z0:
        raise ValueError("box must have positive volume")
    if min(x0, y0, z0) < 0:
        raise ValueError("box coordinates must be nonnegative")
    for i in range(1, budget + 1):
        yield (
            x0 + (x1 - x0) * _halton(i, 2),
            y0 + (y1 - y0) * _halton(i, 3),
            z0 + (z1 - z0) * _halton(i, 5),
        )


def nonvanishing_witness(p: FracPoly, box, budget: int = 1000):
    """First sample x0 with |p(x0)| above the roundoff bound, else None."""
    for pt in _box_samples(box, budget):
        bound = p.magnitude_bound(pt)
        if bound > 0 and abs(p.eval(pt)) > 1e-12 * bound:
            return pt
    return None


def logsum_witness(terms, box, budget: int = 1000):
    """Witness for sum_j p_j(x) ln q_j(x) != 0; DomainError if some q_j <= 0."""
    for pt in _box_samples(box, budget):
        total, bound = 0.0, 0.0
        for p, q in terms:
            qv = q.eval(pt)
            if qv <= 0.0:
                raise DomainError(f"log argument {qv} <= 0 at sample {pt}")
            lq = math.log(qv)
            total += p.eval(pt) * lq
            bound += p.magnitude_bound(pt) * max(abs(lq), 1.0)
        if bound > 0 and abs(total) > 1e-12 * bound:
            return pt
    return None
