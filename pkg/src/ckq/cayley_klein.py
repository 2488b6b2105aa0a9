"""Cayley-Klein combinatorics and the matrix scaffolding behind the quantum
vector spaces: axis products (i,k), the rho weight vector, the skew-to-
Cartesian transition matrices D and D_sigma = D V_sigma, and the deformed
metric matrix C_sigma(j).

sqrt(2) is handled as a formal generator s with s^2 = 1/2, so the
orthogonality check D_sigma^t C_0 D_sigma = I is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations as iter_permutations

from .scalars import G_I, G_ONE, G_ZERO, GaussianRational, ScalarExpr

__all__ = [
    "Permutation",
    "Root2Scalar",
    "ck_product",
    "rho",
    "build_D",
    "build_V",
    "build_D_sigma",
    "check_orthogonality",
    "build_C_sigma",
    "psi_exponents",
    "all_permutations",
]


@dataclass(frozen=True)
class Permutation:
    """A permutation of 1..N given by its image tuple (sigma_1, ..., sigma_N)."""

    image: tuple

    def __post_init__(self):
        n = len(self.image)
        if sorted(self.image) != list(range(1, n + 1)):
            raise ValueError(f"{self.image} is not a permutation of 1..{n}")

    @staticmethod
    def of(*values) -> "Permutation":
        if len(values) == 1 and isinstance(values[0], (tuple, list)):
            values = tuple(values[0])
        return Permutation(tuple(values))

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, pos: int) -> int:
        """Value at position pos (1-based)."""
        return self.image[pos - 1]

    def position_of(self, value: int) -> int:
        """Position (1-based) carrying the given value."""
        return self.image.index(value) + 1

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for pos, val in enumerate(self.image, start=1):
            inv[val - 1] = pos
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: (self*other)(k) = self(other(k))."""
        return Permutation(tuple(self(other(k)) for k in range(1, self.n + 1)))

    def render(self) -> str:
        return "(" + ",".join(str(v) for v in self.image) + ")"


def all_permutations(n: int):
    return [Permutation(p) for p in iter_permutations(range(1, n + 1))]


def ck_product(i: int, k: int, n: int) -> tuple:
    """Exponent vector of the axis product (i,k) = prod_{l=min..max-1} j_l,
    with (k,k) = 1.  Symmetric in its arguments."""
    if not (1 <= i <= n and 1 <= k <= n):
        raise ValueError(f"indices must lie in 1..{n}")
    lo, hi = min(i, k), max(i, k)
    return tuple(1 if lo <= l <= hi - 1 else 0 for l in range(1, n))


def rho(n: int) -> tuple:
    """Weight vector: (n'-1/2, ..., 1/2, 0, -1/2, ..., -n'+1/2) for N = 2n'+1
    and (n'-1, ..., 1, 0, 0, -1, ..., -n'+1) for N = 2n'."""
    if n < 2:
        raise ValueError("dimension must be at least 2")
    half = n // 2
    if n % 2:
        return tuple(Fraction(n - 2 * k, 2) for k in range(1, n + 1))
    out = [Fraction(half - k) for k in range(1, half + 1)]
    return tuple(out + [-x for x in reversed(out)])


def psi_exponents(n: int) -> list:
    """Diagonal of psi = diag((1,1), (1,2), ..., (1,N)) as exponent vectors."""
    return [ck_product(1, k, n) for k in range(1, n + 1)]


# ---------------------------------------------------------------------------
# The ring Q(i)[s] / (s^2 - 1/2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Root2Scalar:
    """a + b*s with s^2 = 1/2 over Gaussian rationals (s stands for 1/sqrt2)."""

    a: GaussianRational
    b: GaussianRational

    @staticmethod
    def of(a, b=0) -> "Root2Scalar":
        ga = a if isinstance(a, GaussianRational) else GaussianRational.of(a)
        gb = b if isinstance(b, GaussianRational) else GaussianRational.of(b)
        return Root2Scalar(ga, gb)

    def __add__(self, other: "Root2Scalar") -> "Root2Scalar":
        return Root2Scalar(self.a + other.a, self.b + other.b)

    def __mul__(self, other: "Root2Scalar") -> "Root2Scalar":
        half = GaussianRational.of(Fraction(1, 2))
        return Root2Scalar(
            self.a * other.a + self.b * other.b * half,
            self.a * other.b + self.b * other.a,
        )

    def __neg__(self) -> "Root2Scalar":
        return Root2Scalar(-self.a, -self.b)

    def is_zero(self) -> bool:
        return self.a.is_zero() and self.b.is_zero()


R2_ZERO = Root2Scalar.of(0)
R2_ONE = Root2Scalar.of(1)
R2_S = Root2Scalar.of(0, 1)


def mat_mul(A, B, zero):
    n, m, p = len(A), len(B), len(B[0])
    out = [[zero for _ in range(p)] for _ in range(n)]
    for i in range(n):
        for k in range(m):
            aik = A[i][k]
            if hasattr(aik, "is_zero") and aik.is_zero():
                continue
            for j in range(p):
                out[i][j] = out[i][j] + aik * B[k][j]
    return out


def mat_transpose(A):
    return [list(row) for row in zip(*A)]


def build_D(n: int):
    """Transition matrix from the skew-symmetric to the Cartesian basis:
    (1/sqrt2) [[I, 0, -i*C~], [0, sqrt2, 0], [C~, 0, i*I]] for odd N, the same
    without the middle row and column for even N."""
    half = n // 2
    D = [[R2_ZERO for _ in range(n)] for _ in range(n)]
    s = R2_S
    i_s = Root2Scalar(G_ZERO, G_I)
    for r in range(half):
        D[r][r] = s                                   # I block
        D[r][n - 1 - r] = -i_s                        # -i * C~ block
        D[n - half + r][half - 1 - r + (n - half)] = s  # C~ block (antidiagonal)
        D[n - half + r][n - half + r] = i_s           # i * I block
    if n % 2:
        D[half][half] = R2_ONE                        # sqrt2 / sqrt2
    return D


def build_V(sigma: Permutation):
    """(V_sigma)_{ik} = delta_{sigma_i, k}."""
    n = sigma.n
    return [[R2_ONE if sigma(i + 1) == k + 1 else R2_ZERO for k in range(n)]
            for i in range(n)]


def build_D_sigma(n: int, sigma: Permutation):
    if sigma.n != n:
        raise ValueError("permutation size mismatch")
    return mat_mul(build_D(n), build_V(sigma), R2_ZERO)


def _c0(n: int):
    return [[R2_ONE if i + j == n - 1 else R2_ZERO for j in range(n)]
            for i in range(n)]


def check_orthogonality(n: int, sigma: Permutation, D=None) -> bool:
    """True iff D_sigma^t C_0 D_sigma = I exactly over Q(i)[s]/(s^2-1/2)."""
    Ds = build_D_sigma(n, sigma) if D is None else D
    M = mat_mul(mat_mul(mat_transpose(Ds), _c0(n), R2_ZERO), Ds, R2_ZERO)
    for i in range(n):
        for j in range(n):
            want = R2_ONE if i == j else R2_ZERO
            if not (M[i][j] + (-want)).is_zero():
                return False
    return True


# ---------------------------------------------------------------------------
# The deformed metric C_sigma(j)
# ---------------------------------------------------------------------------

def _qpow_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for ea, ca in p.items():
        for eb, cb in q.items():
            e = ea + eb
            cur = out.get(e, R2_ZERO)
            s = cur + ca * cb
            if s.is_zero():
                out.pop(e, None)
            else:
                out[e] = s
    return out


def build_C_sigma(n: int, sigma: Permutation, multiplier: tuple) -> list:
    """psi V^t D^t C D V psi with C = C_0 q^rho and q = exp(J v), returned as a
    matrix of closed-form scalars (entries are Gaussian combinations of
    cosh(rho_k J v) and sinh(rho_k J v)).  At v = 0 it reduces to psi^2."""
    nvars = n - 1
    rh = rho(n)
    # C entries as polynomials in formal powers q^e over Root2Scalar.
    C = [[dict() for _ in range(n)] for _ in range(n)]
    for i in range(n):
        ip = n - 1 - i  # 0-based mirror of i' = N+1-i
        C[i][ip] = {rh[ip]: R2_ONE}
    D = build_D(n)
    Dq = [[({Fraction(0): e} if not e.is_zero() else {}) for e in row] for row in D]

    def qmat_mul(A, B):
        rows, mid, cols = len(A), len(B), len(B[0])
        out = [[dict() for _ in range(cols)] for _ in range(rows)]
        for i in range(rows):
            for k in range(mid):
                if not A[i][k]:
                    continue
                for j in range(cols):
                    if not B[k][j]:
                        continue
                    prod = _qpow_mul(A[i][k], B[k][j])
                    acc = out[i][j]
                    for e, c in prod.items():
                        cur = acc.get(e, R2_ZERO)
                        s = cur + c
                        if s.is_zero():
                            acc.pop(e, None)
                        else:
                            acc[e] = s
        return out

    T = qmat_mul(qmat_mul([list(r) for r in zip(*Dq)], C), Dq)

    # Convert q^e -> cosh(e Jv) + sinh(e Jv) and sandwich with V and psi.
    psi = psi_exponents(n)
    inv = sigma.inverse()
    out = [[ScalarExpr.zero(nvars) for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for l in range(n):
            entry = T[inv(k + 1) - 1][inv(l + 1) - 1]
            acc = ScalarExpr.zero(nvars)
            for e, c in entry.items():
                if not c.b.is_zero():
                    raise ArithmeticError("sqrt2 component survived in C_sigma")
                q_e = (ScalarExpr.atom(nvars, "cosh", multiplier, coeff=e)
                       + ScalarExpr.atom(nvars, "sinh", multiplier, coeff=e))
                acc = acc + q_e.scale(c.a)
            scale = ScalarExpr.mono(nvars, tuple(a + b for a, b in zip(psi[k], psi[l])))
            out[k][l] = acc * scale
    return out
