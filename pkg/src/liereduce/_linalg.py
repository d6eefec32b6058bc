"""Row reduction over Fraction.  Matrices are lists of lists."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def to_fractions(rows) -> list:
    return [[Fraction(x) for x in row] for row in rows]


def rref(rows: Sequence[Sequence], ncols: int | None = None):
    """Reduced row echelon form and pivot columns; zero rows dropped."""
    A = to_fractions(rows)
    if not A:
        return [], []
    ncols = len(A[0]) if ncols is None else ncols
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        p = A[r][c]
        A[r] = [x / p for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == len(A):
            break
    return A[:r], pivots


def rank(rows) -> int:
    return len(rref(rows)[1]) if rows else 0


def row_space(rows, ncols: int) -> list:
    return rref(rows, ncols)[0] if rows else []


def in_span(basis_rows, v) -> bool:
    if not any(Fraction(x) for x in v):
        return True
    if not basis_rows:
        return False
    return rank(list(basis_rows) + [list(v)]) == rank(basis_rows)


def nullspace(rows, ncols: int) -> list:
    """Basis of {x : A x = 0}."""
    R, piv = rref(rows, ncols) if rows else ([], [])
    free = [c for c in range(ncols) if c not in piv]
    out = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for row, pc in zip(R, piv):
            x[pc] = -row[f]
        out.append(x)
    return out


def solve(rows, rhs):
    """One solution of A x = b or None if inconsistent."""
    n = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    R, piv = rref(aug, n + 1)
    if n in piv:
        return None
    x = [Fraction(0)] * n
    for row, pc in zip(R, piv):
        x[pc] = row[n]
    return x


def coordinates(basis_rows, v):
    """Coefficients c with sum c_i basis_i = v, or None."""
    if not basis_rows:
        return [] if not any(Fraction(x) for x in v) else None
    cols = [[basis_rows[i][j] for i in range(len(basis_rows))] for j in range(len(v))]
    return solve(cols, list(v))


def inverse(M):
    n = len(M)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(M)]
    R, piv = rref(aug, n)
    if piv != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in R]


def matmul(A, B):
    return [[sum((a * B[k][j] for k, a in enumerate(row)), Fraction(0))
             for j in range(len(B[0]))] for row in A]


def identity(n: int):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def complement(sub_rows, ambient_rows, ncols: int) -> list:
    """Rows of ambient extending span(sub) to span(ambient).

    Unit vectors are tried first so that coset members coincide with basis
    elements whenever possible; then the ambient rows in order.
    """
    have = [list(r) for r in sub_rows]
    target = rank(ambient_rows)
    out = []
    units = [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    cands = [u for u in units if in_span(ambient_rows, u)] + [list(r) for r in ambient_rows]
    for c in cands:
        if len(have) == target:
            break
        if not in_span(have, c):
            have.append(c)
            out.append(c)
    return out
