"""Independent oracles shared across the test modules.

Everything here is deliberately written from scratch with plain Python
integers (or numpy only for batching), so it cannot share a bug with
the package's table-driven implementations.
"""

from __future__ import annotations

import numpy as np

# ---------------------------------------------------------------------------
# GF(256) scalar arithmetic, shift-and-add with explicit reduction


def slow_gf_mul(a: int, b: int) -> int:
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
    return acc


def build_log_tables() -> tuple[list[int], list[int]]:
    """exp/log tables from the generator 3; exp has period 255."""
    exp = [0] * 255
    log = [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = slow_gf_mul(x, 3)
    return exp, log


def log_table_mul(a: int, b: int, exp: list, log: list) -> int:
    if a == 0 or b == 0:
        return 0
    return exp[(log[a] + log[b]) % 255]


# ---------------------------------------------------------------------------
# Polynomials over GF(256) as plain coefficient lists, highest first


def _trim(c: list[int]) -> list[int]:
    i = 0
    while i < len(c) and c[i] == 0:
        i += 1
    return c[i:]


def slow_poly_mul(a: list[int], b: list[int]) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        if not ca:
            continue
        for j, cb in enumerate(b):
            out[i + j] ^= slow_gf_mul(ca, cb)
    return _trim(out)


def slow_poly_divmod(num: list[int], den: list[int]) -> tuple[list, list]:
    """Classic long division; den must be nonzero."""
    num = _trim(list(num))
    den = _trim(list(den))
    if not den:
        raise ZeroDivisionError
    if len(num) < len(den):
        return [], num
    inv_lead = pow_inverse(den[0])
    rem = list(num)
    quot = [0] * (len(num) - len(den) + 1)
    for i in range(len(quot)):
        factor = slow_gf_mul(rem[i], inv_lead)
        quot[i] = factor
        if factor:
            for j, dc in enumerate(den):
                rem[i + j] ^= slow_gf_mul(factor, dc)
    return _trim(quot), _trim(rem[len(quot):])


def pow_inverse(a: int) -> int:
    # a^254 by square-and-multiply; valid for a != 0
    acc = 1
    base = a
    e = 254
    while e:
        if e & 1:
            acc = slow_gf_mul(acc, base)
        base = slow_gf_mul(base, base)
        e >>= 1
    return acc


def has_root(coeffs: list[int]) -> bool:
    """True when the polynomial vanishes at some field element."""
    for r in range(256):
        acc = 0
        for c in coeffs:
            acc = slow_gf_mul(acc, r) ^ c
        if acc == 0:
            return True
    return False


def slow_irreducible_low_degree(coeffs: list[int]) -> bool:
    """Trial-division irreducibility, valid for degree <= 3.

    Degrees 2 and 3 are reducible exactly when a linear factor exists,
    i.e. when the polynomial has a root in the field.
    """
    c = _trim(list(coeffs))
    deg = len(c) - 1
    if deg > 3:
        raise ValueError("oracle only valid up to degree 3")
    if deg <= 0:
        return False
    if deg == 1:
        return True
    return not has_root(c)


def count_irreducible_degree2() -> int:
    """Vectorized count of monic irreducible x^2 + b x + c.

    x^2 + b x + c has a root r iff c == r^2 + b r, so mark every (b, c)
    reachable that way and count the complement.
    """
    from qdsnet.gf256 import MUL
    reducible = np.zeros((256, 256), dtype=bool)
    sq = MUL.diagonal()
    b = np.arange(256)
    for r in range(256):
        reducible[b, int(sq[r]) ^ MUL[r, b].astype(int)] = True
    return int((~reducible).sum())


# ---------------------------------------------------------------------------
# Batched degree-2 division hash (for the exhaustive perturbation sweep)


def batch_hash_deg2(messages: np.ndarray, p1: int, p0: int) -> np.ndarray:
    """Digest of each row of a (k, n_bytes) uint8 array, modulus
    x^2 + p1 x + p0, including the trailing x^2 multiplication.

    Returns a (k, 2) uint8 array, highest coefficient first.  Pure
    numpy Horner recurrence, independent of the package's streaming
    implementation.
    """
    from qdsnet.gf256 import MUL
    msgs = np.asarray(messages, dtype=np.uint8)
    k, n = msgs.shape
    a1 = np.zeros(k, dtype=np.uint8)
    a0 = np.zeros(k, dtype=np.uint8)
    zeros = np.zeros(k, dtype=np.uint8)
    cols = [msgs[:, j] for j in range(n)] + [zeros, zeros]
    for c in cols:
        # (a1 x + a0) * x + c, with x^2 == p1 x + p0
        new_a1 = MUL[a1, p1] ^ a0
        new_a0 = MUL[a1, p0] ^ c
        a1, a0 = new_a1, new_a0
    return np.stack([a1, a0], axis=1)


# ---------------------------------------------------------------------------
# Synthetic key material for protocol-level tests


def synthetic_stores(n_bits: int, seed: int):
    """Key stores satisfying the distribution identity K_a = K_b ^ K_c."""
    from qdsnet.protocol import KeyStore
    rng = np.random.default_rng(seed)
    k_b = rng.integers(0, 2, n_bits, dtype=np.uint8)
    k_c = rng.integers(0, 2, n_bits, dtype=np.uint8)
    return (KeyStore.from_bits(k_b ^ k_c, "alice"),
            KeyStore.from_bits(k_b, "bob"),
            KeyStore.from_bits(k_c, "charlie"))


def keyed_tally(name: str):
    """One bundled reference row's inputs by distance/link name."""
    from qdsnet.table2 import load_rows, row_inputs
    for row in load_rows():
        if row["distance_km"] == int(name.split("km")[0]) and \
                row["link"].replace("-", "") == name.split("_")[1]:
            return row_inputs(row)
    raise KeyError(name)
