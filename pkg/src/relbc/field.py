"""Exact arithmetic in the prime field F_q.

Every challenge, response and share in the protocols is a residue mod a
prime q.  Elements carry a reference to their field so that values from
different moduli can never be mixed silently.
"""

from __future__ import annotations

import random

# Largest modulus we accept.  Python integers are unbounded, but keeping q
# below 2**63 guarantees products stay cheap and makes serialized values
# portable to fixed-width consumers.
MAX_MODULUS = 2**63 - 1

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class FieldMismatchError(ValueError):
    """Raised when elements of different fields meet in one operation."""


class Field:
    """The field F_q for a prime modulus q."""

    __slots__ = ("q",)

    def __init__(self, q: int):
        if not isinstance(q, int) or q < 2:
            raise ValueError(f"modulus must be an integer >= 2, got {q!r}")
        if q > MAX_MODULUS:
            raise ValueError(f"modulus {q} exceeds cap {MAX_MODULUS}")
        if not is_prime(q):
            raise ValueError(f"modulus {q} is not prime")
        self.q = q

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Field) and other.q == self.q

    def __hash__(self) -> int:
        return hash(("Field", self.q))

    def __repr__(self) -> str:
        return f"Field({self.q})"

    def elem(self, value: int) -> "Elem":
        return Elem(self, value % self.q)

    def zero(self) -> "Elem":
        return Elem(self, 0)

    def one(self) -> "Elem":
        return Elem(self, 1 % self.q)

    # Plain-int arithmetic; the Elem wrapper forwards here.  Hot paths
    # (simulation, brute-force search) use these directly.
    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return pow(a, self.q - 2, self.q)

    def sample(self, rng: random.Random) -> int:
        """Uniform residue via rejection sampling (no modulo bias)."""
        bits = self.q.bit_length()
        while True:
            v = rng.getrandbits(bits)
            if v < self.q:
                return v

    def sample_elem(self, rng: random.Random) -> "Elem":
        return Elem(self, self.sample(rng))

    def sample_hashed(self, seed: int, *labels) -> int:
        """Uniform residue drawn directly from a named hash stream.

        Equivalent in distribution to ``sample(derived_rng(...))`` but
        without paying a full PRNG state initialization per stream; used
        on simulation hot paths where each stream yields one value.
        """
        import hashlib

        bits = self.q.bit_length()
        mask = (1 << bits) - 1
        prefix = ":".join(str(x) for x in (seed, *labels))
        ctr = 0
        while True:
            digest = hashlib.sha256(f"{prefix}:{ctr}".encode()).digest()
            val = int.from_bytes(digest, "big")
            for _ in range(256 // bits):
                v = val & mask
                val >>= bits
                if v < self.q:
                    return v
            ctr += 1


class Elem:
    """A residue in [0, q) tied to its Field."""

    __slots__ = ("field", "value")

    def __init__(self, field: Field, value: int):
        if not 0 <= value < field.q:
            raise ValueError(f"value {value} out of range for {field}")
        self.field = field
        self.value = value

    def _coerce(self, other: "Elem") -> int:
        if not isinstance(other, Elem):
            raise TypeError(f"cannot combine Elem with {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatchError(
                f"elements of {self.field} and {other.field} cannot mix"
            )
        return other.value

    def __add__(self, other: "Elem") -> "Elem":
        return Elem(self.field, self.field.add(self.value, self._coerce(other)))

    def __sub__(self, other: "Elem") -> "Elem":
        return Elem(self.field, self.field.sub(self.value, self._coerce(other)))

    def __mul__(self, other: "Elem") -> "Elem":
        return Elem(self.field, self.field.mul(self.value, self._coerce(other)))

    def __neg__(self) -> "Elem":
        return Elem(self.field, (-self.value) % self.field.q)

    def inv(self) -> "Elem":
        return Elem(self.field, self.field.inv(self.value))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Elem)
            and other.field == self.field
            and other.value == self.value
        )

    def __hash__(self) -> int:
        return hash((self.field.q, self.value))

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"{self.value} (mod {self.field.q})"


def derived_rng(seed: int, *labels) -> random.Random:
    """Child PRNG for a named stream under one master seed.

    Streams are independent per label tuple (trial index, station, node, ...),
    so adding or removing instrumentation on one stream never perturbs
    another.  Hashing keeps the derivation stable across Python versions.
    """
    import hashlib

    payload = ":".join(str(x) for x in (seed, *labels)).encode()
    h = hashlib.sha256(payload).digest()
    return random.Random(int.from_bytes(h[:16], "big"))
