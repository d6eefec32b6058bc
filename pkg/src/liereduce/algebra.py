"""Exact Lie-algebra analysis over the rationals.

Structure constants are stored as ``C[l, m, n] = C^l_{mn}``, i.e.
``[e_m, e_n] = sum_l C^l_{mn} e_l``.  Subspaces are lists of rational row
vectors in the ambient basis.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _linalg as L
from . import expr as E
from .expr import EqualityConfig
from .jet import VectorField, combine, commutator, fields_equal

ZERO = Fraction(0)


class NotClosedError(ValueError):
    def __init__(self, pair, message=""):
        self.pair = pair
        super().__init__(message or f"[{pair[0]},{pair[1]}] is not in the span of the generators")


class DependentBasisError(ValueError):
    pass


class NotSolvableError(ValueError):
    pass


class NotAbelianError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class StructureConstants:
    labels: tuple
    C: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        r = len(self.labels)
        if self.C.shape != (r, r, r):
            raise ValueError(f"tensor shape {self.C.shape} does not match {r} labels")

    @property
    def dim(self) -> int:
        return len(self.labels)

    @classmethod
    def zeros(cls, labels) -> "StructureConstants":
        r = len(labels)
        C = np.empty((r, r, r), dtype=object)
        C.fill(ZERO)
        return cls(tuple(labels), C)

    @classmethod
    def from_brackets(cls, labels, brackets) -> "StructureConstants":
        """``brackets`` maps (a, b) label pairs to {label: coefficient}."""
        out = cls.zeros(labels)
        idx = {n: i for i, n in enumerate(labels)}
        for (a, b), combo in brackets.items():
            m, n = idx[a], idx[b]
            for lab, c in combo.items():
                out.C[idx[lab], m, n] = Fraction(c)
                out.C[idx[lab], n, m] = -Fraction(c)
        return out

    def bracket_basis(self, m: int, n: int) -> list:
        return [self.C[l, m, n] for l in range(self.dim)]

    def bracket(self, a: Sequence, b: Sequence) -> list:
        out = [ZERO] * self.dim
        for m, am in enumerate(a):
            if not am:
                continue
            for n, bn in enumerate(b):
                if not bn:
                    continue
                f = am * bn
                for l in range(self.dim):
                    c = self.C[l, m, n]
                    if c:
                        out[l] += f * c
        return out

    def ad(self, a: Sequence) -> list:
        """Matrix of ad_a acting on coordinate columns."""
        r = self.dim
        cols = [self.bracket(a, unit(r, n)) for n in range(r)]
        return [[cols[n][l] for n in range(r)] for l in range(r)]

    def brackets(self) -> dict:
        """Nonzero brackets as {(a, b): {label: coefficient}} for a < b."""
        out = {}
        for m, n in itertools.combinations(range(self.dim), 2):
            combo = {self.labels[l]: self.C[l, m, n] for l in range(self.dim) if self.C[l, m, n]}
            if combo:
                out[(self.labels[m], self.labels[n])] = combo
        return out

    def __eq__(self, other):
        if not isinstance(other, StructureConstants):
            return NotImplemented
        return self.labels == other.labels and bool(np.all(self.C == other.C))

    def __hash__(self):
        return hash((self.labels, tuple(self.C.flat)))

    def equal_tensor(self, other: "StructureConstants") -> bool:
        return self.dim == other.dim and bool(np.all(self.C == other.C))

    def text_lines(self) -> list:
        lines = []
        for (a, b), combo in self.brackets().items():
            lines.append(f"[{a},{b}] = {combo_text(combo)}")
        return lines


def unit(r: int, i: int) -> list:
    return [Fraction(int(j == i)) for j in range(r)]


def combo_text(combo: dict) -> str:
    if not combo:
        return "0"
    parts = []
    for lab, c in combo.items():
        c = Fraction(c)
        mag = abs(c)
        body = lab if mag == 1 else f"{mag}*{lab}"
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append((" - " if c < 0 else " + ") + body)
    return "".join(parts)


def vector_text(v: Sequence, labels: Sequence) -> str:
    return combo_text({lab: c for lab, c in zip(labels, v) if c})


# ---------------------------------------------------------------------------
# structure constants of concrete vector fields


def _sample_matrix(fields, targets, coords, cfg, rows_needed):
    """Evaluate the fields' components at random points.

    Returns (A, B) with A[:, k] the stacked components of field k and
    B[:, j] those of target j.
    """
    names = set(coords)
    for V in list(fields) + list(targets):
        for c in V.components().values():
            names |= c.free_vars
    sampler = E.PointSampler(names, cfg, salt="structure")
    A_rows, B_rows = [], []
    retries = 0
    while len(A_rows) < rows_needed:
        pt = sampler.floating()
        try:
            a = [[E.evaluate(V.components().get(v, E.ZERO), pt) for V in fields] for v in coords]
            b = [[E.evaluate(T.components().get(v, E.ZERO), pt) for T in targets] for v in coords]
        except E.DomainError:
            retries += 1
            if retries > cfg.max_retries:
                raise E.SamplingExhausted("no valid sample point for the structure constants") from None
            continue
        A_rows += a
        B_rows += b
    return np.array(A_rows, dtype=float), np.array(B_rows, dtype=float)


def structure_constants(fields: Sequence[VectorField], cfg: EqualityConfig | None = None,
                        max_denominator: int = 1000) -> StructureConstants:
    """Recover C from concrete generators.

    Each bracket is fitted by least squares on sampled component values,
    rounded to a nearby rational and then verified as an identity of fields.
    """
    cfg = cfg or EqualityConfig()
    fields = list(fields)
    labels = [V.name for V in fields]
    if len(set(labels)) != len(labels):
        raise ValueError("generator names must be distinct")
    out = StructureConstants.zeros(labels)
    r = len(fields)
    if r == 0:
        return out
    indep = {V.independent for V in fields}
    if len(indep) != 1:
        raise ValueError("generators use different independent variables")
    coords = sorted({v for V in fields for v in V.components()})
    pairs = list(itertools.combinations(range(r), 2))
    brs = [commutator(fields[m], fields[n]) for m, n in pairs]
    points = max(3, r)
    A, B = _sample_matrix(fields, brs, coords, cfg, points * len(coords))
    if np.linalg.matrix_rank(A) < r:
        raise DependentBasisError("generators are linearly dependent over the constants")
    if not brs:
        return out
    X, *_ = np.linalg.lstsq(A, B, rcond=None)
    for j, (m, n) in enumerate(pairs):
        coeffs = [Fraction(float(x)).limit_denominator(max_denominator) for x in X[:, j]]
        guess = combine(fields, coeffs, "fit")
        ok, _ = fields_equal(brs[j], guess, cfg)
        if not ok:
            raise NotClosedError((labels[m], labels[n]))
        for l, c in enumerate(coeffs):
            out.C[l, m, n] = c
            out.C[l, n, m] = -c
    return out


# ---------------------------------------------------------------------------
# axioms


@dataclass
class AxiomReport:
    antisymmetry: list  # 1-based (L, M, N)
    jacobi: list  # 1-based (M, N, S, R)
    trace: list  # 1-based (N, S)

    @property
    def passed(self) -> bool:
        return not (self.antisymmetry or self.jacobi or self.trace)


def verify_algebra_axioms(C: StructureConstants) -> AxiomReport:
    r = C.dim
    T = C.C
    anti = [(l + 1, m + 1, n + 1) for l in range(r) for m in range(r) for n in range(m, r)
            if T[l, m, n] + T[l, n, m] != 0]
    jac = []
    for m, n, s in itertools.combinations(range(r), 3):
        for q in range(r):
            tot = ZERO
            for k in range(r):
                tot += T[k, m, n] * T[q, s, k] + T[k, n, s] * T[q, m, k] + T[k, s, m] * T[q, n, k]
            if tot:
                jac.append((m + 1, n + 1, s + 1, q + 1))
    traces = [sum((T[m, m, k] for m in range(r)), ZERO) for k in range(r)]
    tr = [(n + 1, s + 1) for n in range(r) for s in range(r)
          if sum((T[k, n, s] * traces[k] for k in range(r)), ZERO) != 0]
    return AxiomReport(anti, jac, tr)


# ---------------------------------------------------------------------------
# subspaces


@dataclass(frozen=True)
class SubalgebraBasis:
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(tuple(Fraction(x) for x in r) for r in self.rows))

    @property
    def dim(self) -> int:
        return len(self.rows)

    def as_lists(self) -> list:
        return [list(r) for r in self.rows]

    def contains(self, v) -> bool:
        return L.in_span(self.as_lists(), v)

    def names(self, labels) -> list:
        return [vector_text(r, labels) for r in self.rows]


def span_brackets(C: StructureConstants, A, B) -> list:
    vecs = [C.bracket(a, b) for a in A for b in B]
    return L.row_space(vecs, C.dim) if vecs else []


def is_closed(C: StructureConstants, rows) -> bool:
    rows = [list(r) for r in rows]
    return all(L.in_span(rows, C.bracket(a, b)) for a, b in itertools.combinations(rows, 2))


def closure(C: StructureConstants, rows) -> list:
    """Smallest subalgebra containing the rows (RREF basis)."""
    S = L.row_space([list(r) for r in rows], C.dim) if rows else []
    while True:
        new = [C.bracket(a, b) for a, b in itertools.combinations(S, 2)]
        T = L.row_space(S + new, C.dim) if S else []
        if len(T) == len(S):
            return S
        S = T


def subalgebra_constants(C: StructureConstants, rows, labels=None) -> StructureConstants:
    rows = [list(r) for r in rows]
    k = len(rows)
    labels = labels or [vector_text(r, C.labels) or "0" for r in rows]
    out = StructureConstants.zeros(labels if len(set(labels)) == k else [f"S{i + 1}" for i in range(k)])
    for a, b in itertools.combinations(range(k), 2):
        coords = L.coordinates(rows, C.bracket(rows[a], rows[b]))
        if coords is None:
            raise NotClosedError((out.labels[a], out.labels[b]))
        for l, c in enumerate(coords):
            out.C[l, a, b] = c
            out.C[l, b, a] = -c
    return out


def quotient_constants(C: StructureConstants, rows, ideal_rows, labels=None) -> StructureConstants:
    """Constants induced on span(rows) modulo an ideal."""
    rows = [list(r) for r in rows]
    ideal = [list(r) for r in ideal_rows]
    k = len(rows)
    out = StructureConstants.zeros(labels or [f"S{i + 1}" for i in range(k)])
    for a, b in itertools.combinations(range(k), 2):
        coords = L.coordinates(rows + ideal, C.bracket(rows[a], rows[b]))
        if coords is None:
            raise NotClosedError((out.labels[a], out.labels[b]))
        for l in range(k):
            out.C[l, a, b] = coords[l]
            out.C[l, b, a] = -coords[l]
    return out


# ---------------------------------------------------------------------------
# derived series, solvability, cosets


@dataclass
class DerivedSeries:
    terms: list  # SubalgebraBasis, g^(0) first
    terminal: str  # 'zero' or 'stabilized'

    def dims(self) -> list:
        return [t.dim for t in self.terms]

    @property
    def solvable(self) -> bool:
        return self.terminal == "zero"


def derived_series(C: StructureConstants) -> DerivedSeries:
    g = L.identity(C.dim)
    terms = [SubalgebraBasis(g)]
    while True:
        if not g:
            return DerivedSeries(terms, "zero")
        nxt = span_brackets(C, g, g)
        if len(nxt) == len(g):
            return DerivedSeries(terms, "stabilized")
        terms.append(SubalgebraBasis(nxt))
        g = nxt


def solvability_level(C: StructureConstants):
    """Smallest n with g^(n) = 0, or None when the series stabilizes."""
    s = derived_series(C)
    if not s.solvable:
        return None
    return len(s.terms) - 1


def cosets(series: DerivedSeries, ncols: int | None = None) -> list:
    """Complements B^(i)_(i+1) of g^(i+1) in g^(i), index i."""
    if not series.solvable:
        raise NotSolvableError("cosets need a solvable derived series")
    out = []
    terms = series.terms
    ncols = ncols if ncols is not None else (len(terms[0].rows[0]) if terms[0].rows else 0)
    for i in range(len(terms) - 1):
        out.append(SubalgebraBasis(L.complement(terms[i + 1].as_lists(), terms[i].as_lists(), ncols)))
    return out


@dataclass
class PlanStep:
    level: int  # coset B^(level)_(level+1)
    members: SubalgebraBasis
    names: list
    abelian: bool
    abelian_mod_deeper: bool
    needs_transitive: int  # number of coordinates the coset must act transitively on


@dataclass
class ReductionPlan:
    steps: list
    labels: tuple
    dimension: int | None
    r: int
    predicted: int | None
    adapted_basis: list  # rows in plan order
    series_dims: list

    def names(self) -> list:
        return [s.names for s in self.steps]


def reduction_chain(C: StructureConstants, N: int | None = None) -> ReductionPlan:
    series = derived_series(C)
    if not series.solvable:
        raise NotSolvableError(
            f"derived series stabilizes at dimension {series.terms[-1].dim}; the algebra is not solvable")
    cs = cosets(series, C.dim)
    steps = []
    adapted = []
    for i in reversed(range(len(cs))):
        rows = cs[i].as_lists()
        deeper = series.terms[i + 1].as_lists()
        brs = [C.bracket(a, b) for a, b in itertools.combinations(rows, 2)]
        abelian = all(not any(v) for v in brs)
        mod = all(L.in_span(deeper, v) for v in brs)
        names = cs[i].names(C.labels)
        steps.append(PlanStep(i, cs[i], names, abelian, mod, len(rows)))
        adapted += rows
    r = C.dim
    return ReductionPlan(steps, C.labels, N, r, None if N is None else N - r, adapted,
                         series.dims())


# ---------------------------------------------------------------------------
# inheritance and invariance


def check_inheritance(C: StructureConstants, abelian: Sequence[int], candidate: int) -> bool:
    rows = [unit(C.dim, i) for i in abelian]
    return check_inheritance_rows(C, rows, unit(C.dim, candidate))


def check_inheritance_rows(C: StructureConstants, abelian_rows, candidate) -> bool:
    rows = [list(r) for r in abelian_rows]
    for a, b in itertools.combinations(rows, 2):
        if any(C.bracket(a, b)):
            raise NotAbelianError(f"{vector_text(a, C.labels)} and {vector_text(b, C.labels)} do not commute")
    return all(L.in_span(rows, C.bracket(a, candidate)) for a in rows)


def check_invariant_subalgebra(C: StructureConstants, sub) -> bool:
    rows = sub.as_lists() if isinstance(sub, SubalgebraBasis) else [list(r) for r in sub]
    if not is_closed(C, rows):
        raise NotClosedError(("sub", "sub"), "subspace is not closed under the bracket")
    return all(L.in_span(rows, C.bracket(a, unit(C.dim, j))) for a in rows for j in range(C.dim))


# ---------------------------------------------------------------------------
# transitivity


@dataclass
class TransitivityReport:
    transitive: bool
    ranks: list
    needed: int
    exact: list  # per trial: True if computed in exact arithmetic

    def __bool__(self):
        return self.transitive


def transitivity_check(fields: Sequence[VectorField], subspace: Sequence[str],
                       cfg: EqualityConfig | None = None, trials: int = 5) -> TransitivityReport:
    """Generic rank of the coefficient matrix restricted to ``subspace``."""
    cfg = cfg or EqualityConfig()
    fields = list(fields)
    m = len(fields)
    M = [[V.components().get(v, E.ZERO) for v in subspace] for V in fields]
    names = set(subspace)
    for row in M:
        for e in row:
            names |= e.free_vars
    sampler = E.PointSampler(names, cfg, salt="transitivity")
    ranks, exact = [], []
    retries = 0
    while len(ranks) < trials:
        pt = sampler.exact()
        try:
            try:
                vals = [[E.evaluate_exact(e, pt) for e in row] for row in M]
                ranks.append(L.rank(vals))
                exact.append(True)
            except E.NotRational:
                fpt = {k: float(v) for k, v in pt.items()}
                vals = np.array([[E.evaluate(e, fpt) for e in row] for row in M], dtype=float)
                ranks.append(int(np.linalg.matrix_rank(vals)) if m else 0)
                exact.append(False)
        except (E.DomainError, ZeroDivisionError):
            retries += 1
            if retries > cfg.max_retries:
                raise E.SamplingExhausted("no valid sample point for the transitivity test") from None
    full = sum(1 for k in ranks if k == m)
    return TransitivityReport(full * 2 > trials, ranks, m, exact)


# ---------------------------------------------------------------------------
# radical and maximal solvable subalgebras


def killing_form(C: StructureConstants) -> list:
    r = C.dim
    ads = [C.ad(unit(r, i)) for i in range(r)]
    return [[sum((L.matmul(ads[i], ads[j])[k][k] for k in range(r)), ZERO) for j in range(r)]
            for i in range(r)]


def killing_radical(C: StructureConstants) -> SubalgebraBasis:
    """Largest solvable ideal, as the Killing-orthogonal of [g, g]."""
    r = C.dim
    K = killing_form(C)
    D = span_brackets(C, L.identity(r), L.identity(r))
    eqs = [[sum((K[a][b] * d[b] for b in range(r)), ZERO) for a in range(r)] for d in D]
    rows = L.nullspace(eqs, r) if eqs else L.identity(r)
    rows = L.row_space(rows, r) if rows else []
    if rows and solvability_level(subalgebra_constants(C, rows)) is None:
        raise ArithmeticError("trace-form radical is not solvable; constants violate the axioms")
    return SubalgebraBasis(rows)


def normalizer(C: StructureConstants, rows) -> list:
    """Basis of {x : [x, S] in S}."""
    r = C.dim
    rows = [list(x) for x in rows]
    if not rows:
        return L.identity(r)
    # x -> [x, s_j] must vanish modulo S; project with a complement basis
    comp = L.complement(rows, L.identity(r), r)
    basis = rows + comp
    k = len(rows)
    eqs = []
    for s in rows:
        # column i: coordinates of [e_i, s] in the adapted basis beyond S
        cols = [L.coordinates(basis, C.bracket(unit(r, i), s))[k:] for i in range(r)]
        for q in range(len(comp)):
            eqs.append([cols[i][q] for i in range(r)])
    return L.row_space(L.nullspace(eqs, r), r) if eqs else L.identity(r)


@dataclass
class SolvableSearchResult:
    basis: SubalgebraBasis
    level: int | None
    change_of_basis: list  # rows: new basis in old coordinates, solvable part first
    trials: int
    radical_dim: int
    constants: StructureConstants | None

    @property
    def dim(self) -> int:
        return self.basis.dim


def _better(rows, best) -> bool:
    if best is None or len(rows) > len(best):
        return True
    return len(rows) == len(best) and rows < best


def search_max_solvable(C: StructureConstants, budget: int = 1000, seed: int = 0) -> SolvableSearchResult:
    """Seeded best-effort search; the dimension found is a lower bound."""
    r = C.dim
    rad = killing_radical(C)
    best = rad.as_lists() if rad.dim else None
    trials = 0

    def solvable(rows) -> bool:
        return not rows or solvability_level(subalgebra_constants(C, rows)) is not None

    if solvability_level(C) is not None:
        best = L.identity(r)
    else:
        for size in range(1, r + 1):
            for subset in itertools.combinations(range(r), size):
                if trials >= budget:
                    break
                trials += 1
                S = closure(C, [unit(r, i) for i in subset])
                if solvable(S) and _better(S, best):
                    best = S
        rng = random.Random(seed)
        base = rad.as_lists()
        while trials < budget:
            trials += 1
            v = [Fraction(rng.randint(-2, 2)) for _ in range(r)]
            if not any(v):
                continue
            S = closure(C, base + [v])
            if not solvable(S):
                continue
            # greedy extension inside the normalizer
            stuck = 0
            while stuck < 4 and trials < budget:
                N = normalizer(C, S)
                extra = [n for n in N if not L.in_span(S, n)]
                if not extra:
                    break
                w = [sum((Fraction(rng.randint(-2, 2)) * n[i] for n in extra), ZERO) for i in range(r)]
                trials += 1
                T = closure(C, S + [w])
                if len(T) > len(S) and solvable(T):
                    S, stuck = T, 0
                else:
                    stuck += 1
            if _better(S, best):
                best = S
    best = L.row_space(best, r) if best else []
    comp = L.complement(best, L.identity(r), r)
    consts = subalgebra_constants(C, best) if best else None
    level = solvability_level(consts) if consts is not None else 0
    return SolvableSearchResult(SubalgebraBasis(best), level, best + comp, trials, rad.dim, consts)


def change_basis(C: StructureConstants, P, labels=None) -> StructureConstants:
    """Constants in the basis whose a-th vector is sum_c P[a][c] e_c."""
    r = C.dim
    P = L.to_fractions(P)
    if len(P) != r or any(len(row) != r for row in P):
        raise ValueError("basis change must be a square matrix of the algebra's dimension")
    try:
        Pinv = L.inverse(P)
    except ZeroDivisionError:
        raise SingularMatrixError("basis change matrix is singular") from None
    labels = labels or [vector_text(row, C.labels) for row in P]
    out = StructureConstants.zeros(labels)
    for a, b in itertools.combinations(range(r), 2):
        v = C.bracket(P[a], P[b])
        # coordinates in the new basis: v = sum_f w_f Y_f, w = v P^-1
        w = [sum((v[e] * Pinv[e][f] for e in range(r)), ZERO) for f in range(r)]
        for f in range(r):
            out.C[f, a, b] = w[f]
            out.C[f, b, a] = -w[f]
    if not verify_algebra_axioms(out).passed:
        raise ArithmeticError("basis change broke the algebra axioms")
    return out


def matrix_from_combos(rows: dict, old_labels, new_labels) -> list:
    """Matrix with rows old_i written over new_j from a {old: {new: c}} map."""
    return [[Fraction(rows.get(o, {}).get(n, 0)) for n in new_labels] for o in old_labels]


@dataclass
class SolvableCertificate:
    vectors: list
    span_dim: int
    closed: bool
    level: int | None

    @property
    def ok(self) -> bool:
        return self.closed and self.level is not None


def solvable_span_certificate(C: StructureConstants, vectors) -> SolvableCertificate:
    rows = L.row_space([list(v) for v in vectors], C.dim) if vectors else []
    closed = is_closed(C, rows)
    level = solvability_level(subalgebra_constants(C, rows)) if closed and rows else (0 if closed else None)
    return SolvableCertificate([list(v) for v in vectors], len(rows), closed, level)
