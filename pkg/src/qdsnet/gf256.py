"""Arithmetic over GF(256) and polynomials with GF(256) coefficients.

The field is GF(2)[x] / (x^8 + x^4 + x^3 + x + 1), i.e. reduction
polynomial 0x11B, with bytes encoding field elements in the usual
bit-per-coefficient way.  A full 256x256 product table is built once at
import so that bulk polynomial work reduces to numpy fancy indexing.

Polynomials over the field are stored highest-order coefficient first.
They back the message digests: digests are remainders modulo an
irreducible polynomial, so this module also provides deterministic
irreducibility testing (Rabin's algorithm with Frobenius squaring).
"""

from __future__ import annotations

import numpy as np

REDUCTION_POLY = 0x11B


def _build_mul_table() -> np.ndarray:
    acc = np.zeros((256, 256), dtype=np.uint16)
    a = np.repeat(np.arange(256, dtype=np.uint16)[:, None], 256, axis=1)
    b = np.arange(256, dtype=np.uint16)[None, :].repeat(256, axis=0)
    low = np.uint16(REDUCTION_POLY & 0xFF)
    zero = np.uint16(0)
    for _ in range(8):
        acc ^= np.where(b & 1, a, zero)
        b >>= 1
        carry = a & 0x80
        a = (a << 1) & 0xFF
        a ^= np.where(carry, low, zero)
    return acc.astype(np.uint8)


MUL = _build_mul_table()
SQR = np.ascontiguousarray(MUL.diagonal())

# inverse table: MUL[a, INV[a]] == 1 for a != 0
INV = np.zeros(256, dtype=np.uint8)
_r, _c = np.nonzero(MUL == 1)
INV[_r] = _c
del _r, _c


def gf_mul(a: int, b: int) -> int:
    """Product of two field elements (bytes)."""
    return int(MUL[a, b])


def gf_inv(a: int) -> int:
    """Multiplicative inverse; raises ZeroDivisionError for 0."""
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(INV[a])


class Poly:
    """Polynomial over GF(256), coefficients highest-order first.

    Instances are normalized on construction: leading zeros are trimmed,
    and the zero polynomial is the empty coefficient array with the
    conventional degree -1.  Treat instances as immutable.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        arr = np.asarray(coeffs, dtype=np.uint8).ravel()
        nz = np.nonzero(arr)[0]
        if nz.size == 0:
            arr = arr[:0]
        else:
            arr = arr[nz[0]:]
        self.coeffs = arr

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def is_monic(self) -> bool:
        return len(self.coeffs) > 0 and self.coeffs[0] == 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.all(self.coeffs == other.coeffs)
        )

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        if self.is_zero():
            return "Poly(0)"
        return f"Poly(deg={self.degree}, {bytes(self.coeffs).hex()})"


X = Poly([1, 0])
ONE = Poly([1])
ZERO = Poly([])


def poly_add(a: Poly, b: Poly) -> Poly:
    if a.degree < b.degree:
        a, b = b, a
    out = a.coeffs.copy()
    if len(b.coeffs):
        out[len(out) - len(b.coeffs):] ^= b.coeffs
    return Poly(out)


def poly_mul(a: Poly, b: Poly) -> Poly:
    if a.is_zero() or b.is_zero():
        return ZERO
    out = np.zeros(a.degree + b.degree + 1, dtype=np.uint8)
    bc = b.coeffs
    for i, c in enumerate(a.coeffs):
        if c:
            out[i:i + len(bc)] ^= MUL[c, bc]
    return Poly(out)


def poly_divmod(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    """Quotient and remainder; raises ZeroDivisionError on zero divisor."""
    if den.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    if num.degree < den.degree:
        return ZERO, num
    r = num.coeffs.copy()
    dl = den.coeffs
    inv_lead = gf_inv(int(dl[0]))
    steps = num.degree - den.degree + 1
    q = np.zeros(steps, dtype=np.uint8)
    for i in range(steps):
        lead = r[i]
        if lead:
            qc = MUL[lead, inv_lead]
            q[i] = qc
            r[i:i + len(dl)] ^= MUL[qc, dl]
    return Poly(q), Poly(r)


def poly_mod(num: Poly, den: Poly) -> Poly:
    return poly_divmod(num, den)[1]


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic greatest common divisor."""
    while not b.is_zero():
        a, b = b, poly_mod(a, b)
    if a.is_zero():
        return a
    lead = int(a.coeffs[0])
    if lead != 1:
        return Poly(MUL[gf_inv(lead), a.coeffs])
    return a


def _reduction_rows(p: Poly) -> np.ndarray:
    """rows[j] = coefficients of x^(d+j) mod p, for j = 0 .. d-2."""
    d = p.degree
    p_low = p.coeffs[1:].copy()
    rows = np.zeros((max(d - 1, 1), d), dtype=np.uint8)
    cur = p_low.copy()
    rows[0] = cur
    for j in range(1, d - 1):
        lead = cur[0]
        cur = np.concatenate([cur[1:], np.zeros(1, dtype=np.uint8)])
        if lead:
            cur ^= MUL[lead, p_low]
        rows[j] = cur
    return rows


def _sqr_mod(res: np.ndarray, rows_rev: np.ndarray) -> np.ndarray:
    """Square a length-d residue modulo the p behind rows_rev.

    Squaring in characteristic 2 is coefficient-wise: coefficient c of x^i
    becomes c^2 at x^(2i).  The high half is folded back with one batched
    table lookup against the precomputed reduction rows.
    """
    d = len(res)
    spread = np.zeros(2 * d - 1, dtype=np.uint8)
    spread[::2] = SQR[res]
    out = spread[d - 1:].copy()
    hi = spread[:d - 1]
    nz = np.nonzero(hi)[0]
    if nz.size:
        out ^= np.bitwise_xor.reduce(MUL[hi[nz][:, None], rows_rev[nz]], axis=0)
    return out


def _prime_factors(n: int) -> list[int]:
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(p: Poly) -> bool:
    """Rabin irreducibility test over GF(256).

    p must be monic of degree >= 1.  Requires x^(q^d) == x (mod p) with
    q = 256, and gcd(x^(q^(d/r)) - x, p) == 1 for every prime r | d.
    """
    if not p.is_monic() or p.degree < 1:
        raise ValueError("irreducibility test needs a monic polynomial of degree >= 1")
    d = p.degree
    if d == 1:
        return True

    rows = _reduction_rows(p)
    rows_rev = rows[::-1].copy()

    # residue of x, as a fixed-length-d vector (highest-order first)
    res = np.zeros(d, dtype=np.uint8)
    res[d - 2] = 1

    snapshots = sorted({8 * (d // r) for r in _prime_factors(d)})
    x_vec = res.copy()

    k = 0
    for target in snapshots:
        while k < target:
            res = _sqr_mod(res, rows_rev)
            k += 1
        diff = res ^ x_vec
        g = poly_gcd(Poly(diff), p)
        if g.degree != 0:
            return False
    while k < 8 * d:
        res = _sqr_mod(res, rows_rev)
        k += 1
    return bool(np.all(res == x_vec))
