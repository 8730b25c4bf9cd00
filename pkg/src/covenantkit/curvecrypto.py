"""secp256k1 ECDSA: signing, verification, public-key recovery, and the
signatures-first key derivations used by recovered-key covenants.

Everything here is desk-scale simulator code: the arithmetic is plain
Python integers, deliberately not constant-time, and must not guard real
funds.

Recovery follows the textbook identity P = r^-1(s*R - e*G), enumerating
the candidate R points for x in {r, r+n} with both y parities and keeping
the candidates that verify. The digest scalar e is the full 32-byte digest
as a big-endian integer mod n.

A NUMS ("nothing up my sleeve") signature starts from (r, s) = (1, 1) and
increments r until x = r lifts to a curve point; a seeded signature derives
(r, s) = (SHA256(seed_r) mod n, SHA256(seed_s) mod n). Both paths yield a
public key with no known private key: deriving the scalar for a recovered
P would require solving the discrete logarithm. Nonce-reuse hazards do not
apply in reverse: reusing r across two different digests recovers two
unrelated keys, which tests assert.

Signatures produced by sign() are always low-s; NUMS/seeded values record
s exactly as chosen (externally_chosen=True), and verify() only enforces
the low-s rule on signatures that are not externally chosen. Consensus
validation accepts both halves; low-s is a relay-policy lint.
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
from dataclasses import dataclass, field
from typing import Iterator, Optional

__all__ = [
    "P", "N", "CryptoError", "SeedRejectedError", "NumsSearchExhausted",
    "PrivateKey", "PublicKey", "EcdsaSignature", "SignatureSeeds",
    "sign", "verify", "recover_pubkeys", "nums_signature", "seeded_signature",
    "der_encode_signature", "der_decode_signature", "x_lifts", "lift_x",
]

P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8


class CryptoError(ValueError):
    pass


class SeedRejectedError(CryptoError):
    """A seed hash that cannot serve as the requested signature component."""


class NumsSearchExhausted(CryptoError):
    """No liftable r found within the iteration bound."""


# ---------------------------------------------------------------------------
# Jacobian point arithmetic (a = 0 curve). Points are (X, Y, Z) tuples,
# None is the point at infinity.

def _jdouble(pt):
    if pt is None:
        return None
    x, y, z = pt
    if y == 0:
        return None
    y2 = y * y % P
    s = 4 * x * y2 % P
    m = 3 * x * x % P
    x3 = (m * m - 2 * s) % P
    y3 = (m * (s - x3) - 8 * y2 * y2) % P
    return x3, y3, 2 * y * z % P


def _jadd(p, q):
    if p is None:
        return q
    if q is None:
        return p
    x1, y1, z1 = p
    x2, y2, z2 = q
    z1s, z2s = z1 * z1 % P, z2 * z2 % P
    u1, u2 = x1 * z2s % P, x2 * z1s % P
    s1, s2 = y1 * z2s * z2 % P, y2 * z1s * z1 % P
    if u1 == u2:
        return _jdouble(p) if s1 == s2 else None
    h = (u2 - u1) % P
    r = (s2 - s1) % P
    h2 = h * h % P
    h3 = h2 * h % P
    v = u1 * h2 % P
    x3 = (r * r - h3 - 2 * v) % P
    y3 = (r * (v - x3) - s1 * h3) % P
    return x3, y3, h * z1 * z2 % P


def _jadd_affine(p, q_affine):
    # q_affine is (x, y) with implicit Z = 1
    if q_affine is None:
        return p
    x2, y2 = q_affine
    if p is None:
        return x2, y2, 1
    x1, y1, z1 = p
    z1s = z1 * z1 % P
    u2 = x2 * z1s % P
    s2 = y2 * z1s * z1 % P
    if x1 == u2:
        return _jdouble(p) if y1 == s2 else None
    h = (u2 - x1) % P
    r = (s2 - y1) % P
    h2 = h * h % P
    h3 = h2 * h % P
    v = x1 * h2 % P
    x3 = (r * r - h3 - 2 * v) % P
    y3 = (r * (v - x3) - y1 * h3) % P
    return x3, y3, h * z1 % P


def _to_affine(pt):
    if pt is None:
        return None
    x, y, z = pt
    zinv = pow(z, -1, P)
    zinv2 = zinv * zinv % P
    return x * zinv2 % P, y * zinv2 * zinv % P


def _batch_to_affine(points):
    zs = [pt[2] for pt in points]
    prefix, acc = [], 1
    for z in zs:
        prefix.append(acc)
        acc = acc * z % P
    inv = pow(acc, -1, P)
    out = [None] * len(points)
    for i in range(len(points) - 1, -1, -1):
        zinv = inv * prefix[i] % P
        inv = inv * zs[i] % P
        x, y, _ = points[i]
        zinv2 = zinv * zinv % P
        out[i] = (x * zinv2 % P, y * zinv2 * zinv % P)
    return out


def _mul_window(k, pt_affine):
    """k * pt for an arbitrary affine point, 4-bit fixed window."""
    k %= N
    if k == 0 or pt_affine is None:
        return None
    tbl = [None] * 16
    tbl[1] = (pt_affine[0], pt_affine[1], 1)
    tbl[2] = _jdouble(tbl[1])
    for i in range(3, 16):
        tbl[i] = _jadd_affine(tbl[i - 1], pt_affine)
    acc = None
    for shift in range(252, -4, -4):
        if acc is not None:
            acc = _jdouble(_jdouble(_jdouble(_jdouble(acc))))
        d = (k >> shift) & 0xF
        if d:
            acc = _jadd(acc, tbl[d])
    return acc


def _build_g_table():
    # _G_TABLE[w][d] = affine d * 16**w * G for d in 1..15, w in 0..63
    rows_jac, base = [], (GX, GY)
    for _ in range(64):
        row = [(base[0], base[1], 1)]
        for _ in range(14):
            row.append(_jadd_affine(row[-1], base))
        rows_jac.append(row)
        nxt = _jdouble(_jdouble(_jdouble(_jdouble(row[0]))))
        base = _to_affine(nxt)
    flat = _batch_to_affine([pt for row in rows_jac for pt in row])
    return [[None] + flat[w * 15:(w + 1) * 15] for w in range(64)]


_G_TABLE = _build_g_table()


def _mul_g_jac(k):
    """k * G via the fixed-base table; Jacobian result."""
    k %= N
    acc = None
    for w in range(64):
        d = (k >> (4 * w)) & 0xF
        if d:
            acc = _jadd_affine(acc, _G_TABLE[w][d])
    return acc


def _mul_add(a, pt_affine, b):
    """a * pt + b * G."""
    return _jadd(_mul_window(a, pt_affine), _mul_g_jac(b))


def lift_x(x: int, odd: bool = False) -> Optional[tuple[int, int]]:
    """Affine curve point with the given x and y parity, or None."""
    if not 0 <= x < P:
        return None
    y_sq = (pow(x, 3, P) + 7) % P
    y = pow(y_sq, (P + 1) // 4, P)
    if y * y % P != y_sq:
        return None
    if (y & 1) != odd:
        y = P - y
    if y == 0:
        return None
    return x, y


def x_lifts(x: int) -> bool:
    return lift_x(x) is not None


# ---------------------------------------------------------------------------
# Keys and signatures


@dataclass(frozen=True)
class PublicKey:
    x: int
    y: int

    def __post_init__(self) -> None:
        if not (0 < self.x < P and 0 < self.y < P):
            raise CryptoError("public key coordinates out of range")
        if (self.y * self.y - pow(self.x, 3, P) - 7) % P != 0:
            raise CryptoError("public key not on curve")

    def encode(self) -> bytes:
        """33-byte compressed encoding."""
        return bytes([0x02 | (self.y & 1)]) + self.x.to_bytes(32, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "PublicKey":
        if len(data) != 33 or data[0] not in (0x02, 0x03):
            raise CryptoError("public key must be 33-byte compressed")
        pt = lift_x(int.from_bytes(data[1:], "big"), odd=data[0] == 0x03)
        if pt is None:
            raise CryptoError("x coordinate not on curve")
        return cls(*pt)

    def point(self) -> tuple[int, int]:
        return self.x, self.y


@dataclass(frozen=True)
class PrivateKey:
    secret: int = field(repr=False)

    def __post_init__(self) -> None:
        if not 0 < self.secret < N:
            raise CryptoError("private key scalar out of range")

    @classmethod
    def from_bytes(cls, data: bytes) -> "PrivateKey":
        if len(data) != 32:
            raise CryptoError("private key must be 32 bytes")
        return cls(int.from_bytes(data, "big"))

    @classmethod
    def generate(cls, rng) -> "PrivateKey":
        """Draw from a random.Random-style source (simulator determinism)."""
        return cls(rng.randrange(1, N))

    def public_key(self) -> PublicKey:
        return PublicKey(*_to_affine(_mul_g_jac(self.secret)))

    def to_bytes(self) -> bytes:
        return self.secret.to_bytes(32, "big")


@dataclass(frozen=True)
class EcdsaSignature:
    r: int
    s: int
    # True for NUMS/seeded values whose s was chosen, not computed;
    # such signatures are exempt from the low-s relay rule.
    externally_chosen: bool = False

    def __post_init__(self) -> None:
        if not (0 < self.r < N and 0 < self.s < N):
            raise CryptoError("signature components out of range")

    def low_s(self) -> bool:
        return self.s <= N // 2


@dataclass(frozen=True)
class SignatureSeeds:
    seed_r: bytes
    seed_s: bytes


def _rfc6979_nonces(secret: int, digest: bytes) -> Iterator[int]:
    h = hashlib.sha256
    mac = lambda key, msg: hmac_mod.new(key, msg, h).digest()
    x = secret.to_bytes(32, "big")
    m = (int.from_bytes(digest, "big") % N).to_bytes(32, "big")
    v, k = b"\x01" * 32, b"\x00" * 32
    k = mac(k, v + b"\x00" + x + m)
    v = mac(k, v)
    k = mac(k, v + b"\x01" + x + m)
    v = mac(k, v)
    while True:
        v = mac(k, v)
        candidate = int.from_bytes(v, "big")
        if 1 <= candidate < N:
            yield candidate
        k = mac(k, v + b"\x00")
        v = mac(k, v)


def sign(key: PrivateKey, digest: bytes) -> EcdsaSignature:
    """Deterministic-nonce ECDSA over a 32-byte digest, low-s normalized."""
    if len(digest) != 32:
        raise CryptoError("digest must be 32 bytes")
    e = int.from_bytes(digest, "big") % N
    for k in _rfc6979_nonces(key.secret, digest):
        rx = _to_affine(_mul_g_jac(k))
        r = rx[0] % N
        if r == 0:
            continue
        s = pow(k, -1, N) * (e + r * key.secret) % N
        if s == 0:
            continue
        if s > N // 2:
            s = N - s
        return EcdsaSignature(r, s)
    raise CryptoError("nonce stream exhausted")  # unreachable


def _math_verify(pub: PublicKey, digest: bytes, r: int, s: int) -> bool:
    if not (1 <= r < N and 1 <= s < N):
        return False
    e = int.from_bytes(digest, "big") % N
    w = pow(s, -1, N)
    pt = _mul_add(r * w % N, pub.point(), e * w % N)
    if pt is None:
        return False
    x, _ = _to_affine(pt)
    return x % N == r


def verify(pub: PublicKey, digest: bytes, sig: EcdsaSignature,
           *, enforce_low_s: Optional[bool] = None) -> bool:
    """Standard ECDSA verification.

    enforce_low_s=None applies the default policy: low-s required unless
    the signature is flagged externally chosen. Pass False for consensus
    checks (both halves accepted) or True to lint unconditionally.
    """
    if len(digest) != 32:
        raise CryptoError("digest must be 32 bytes")
    if enforce_low_s is None:
        enforce_low_s = not sig.externally_chosen
    if enforce_low_s and not sig.low_s():
        return False
    return _math_verify(pub, digest, sig.r, sig.s)


def recover_pubkeys(digest: bytes, sig: EcdsaSignature) -> list[PublicKey]:
    """All public keys under which (digest, sig) verifies.

    Candidates are enumerated deterministically: x = r then x = r + n,
    even y before odd, each filtered through verification.
    """
    if len(digest) != 32:
        raise CryptoError("digest must be 32 bytes")
    if not (1 <= sig.r < N and 1 <= sig.s < N):
        return []
    e = int.from_bytes(digest, "big") % N
    rinv = pow(sig.r, -1, N)
    a = rinv * sig.s % N          # coefficient on R
    b = (N - rinv * e % N) % N    # coefficient on G
    out = []
    for x in (sig.r, sig.r + N):
        if x >= P:
            continue
        for odd in (False, True):
            cand_r = lift_x(x, odd)
            if cand_r is None:
                continue
            pt = _to_affine(_mul_add(a, cand_r, b))
            if pt is None:
                continue
            candidate = PublicKey(*pt)
            if _math_verify(candidate, digest, sig.r, sig.s):
                out.append(candidate)
    return out


def nums_signature(digest: bytes, max_iterations: int = 1000
                   ) -> tuple[EcdsaSignature, PublicKey]:
    """Smallest-r nothing-up-my-sleeve signature and its recovered key.

    Starts at (r, s) = (1, 1) and increments r until it lifts to a curve
    point (succeeds for roughly half of all r); the first verifying
    recovery candidate becomes the enforcement key.
    """
    for r in range(1, max_iterations + 1):
        sig = EcdsaSignature(r, 1, externally_chosen=True)
        candidates = recover_pubkeys(digest, sig)
        if candidates:
            return sig, candidates[0]
    raise NumsSearchExhausted(
        f"no liftable r in [1, {max_iterations}]; raise max_iterations")


def seeded_signature(seeds: SignatureSeeds, digest: bytes
                     ) -> tuple[EcdsaSignature, PublicKey]:
    """Signature with components drawn from seed hashes, plus its recovered
    key. A verifier holding the seeds recomputes (r, s) exactly."""
    r = int.from_bytes(hashlib.sha256(seeds.seed_r).digest(), "big") % N
    s = int.from_bytes(hashlib.sha256(seeds.seed_s).digest(), "big") % N
    if r == 0:
        raise SeedRejectedError("seed_r hashes to zero mod n")
    if s == 0:
        raise SeedRejectedError("seed_s hashes to zero mod n")
    sig = EcdsaSignature(r, s, externally_chosen=True)
    candidates = recover_pubkeys(digest, sig)
    if not candidates:
        raise SeedRejectedError(
            f"seed_r {seeds.seed_r.hex()} gives r with no liftable x; pick a new seed")
    return sig, candidates[0]


# ---------------------------------------------------------------------------
# Strict minimal DER


def _der_int(value: int) -> bytes:
    raw = value.to_bytes((value.bit_length() + 7) // 8 or 1, "big")
    if raw[0] & 0x80:
        raw = b"\x00" + raw
    return bytes([0x02, len(raw)]) + raw


def der_encode_signature(sig: EcdsaSignature) -> bytes:
    if not (1 <= sig.r < N and 1 <= sig.s < N):
        raise CryptoError("signature components out of range")
    body = _der_int(sig.r) + _der_int(sig.s)
    if len(body) > 0x7F:
        raise CryptoError("signature too long")  # cannot happen for valid r, s
    return bytes([0x30, len(body)]) + body


def _read_der_int(data: bytes, pos: int) -> tuple[int, int]:
    if pos + 2 > len(data) or data[pos] != 0x02:
        raise CryptoError(f"expected INTEGER at byte {pos}")
    length = data[pos + 1]
    pos += 2
    if length == 0 or pos + length > len(data):
        raise CryptoError(f"bad INTEGER length at byte {pos - 1}")
    raw = data[pos:pos + length]
    if raw[0] & 0x80:
        raise CryptoError("negative INTEGER")
    if length > 1 and raw[0] == 0x00 and not raw[1] & 0x80:
        raise CryptoError("non-minimal INTEGER")
    return int.from_bytes(raw, "big"), pos + length


def der_decode_signature(data: bytes) -> EcdsaSignature:
    """Strict minimal DER decode; rejects padding, trailing bytes, and
    non-minimal integers."""
    if len(data) < 2 or data[0] != 0x30:
        raise CryptoError("expected SEQUENCE")
    if data[1] != len(data) - 2:
        raise CryptoError("SEQUENCE length mismatch")
    r, pos = _read_der_int(data, 2)
    s, pos = _read_der_int(data, pos)
    if pos != len(data):
        raise CryptoError(f"trailing bytes at byte {pos}")
    if not (1 <= r < N and 1 <= s < N):
        raise CryptoError("signature components out of range")
    return EcdsaSignature(r, s)
