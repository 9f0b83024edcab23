"""Secret random oracle: quorum-gated, verifiable randomness per slot index.

Two interchangeable backends:

* ``SEEDED_HASH`` models a sealed enclave holding a shared secret seed;
  the oracle value for slot k is HASH(seed || k) and the proof is
  HASH(value).
* ``THRESHOLD_DPRF`` is a discrete-log threshold distributed PRF: Shamir
  shares s_i of a master secret s over a prime field of order p, share
  values s_i * h(k) mod p, commitments g^{s_i} in an order-p subgroup,
  and Lagrange combination at 0.  Any quorum of valid shares yields the
  same value; fewer reveal nothing about it.

Node "signatures" over a slot index are HMAC tags under per-node keys;
the oracle acts as the trusted verifier of those tags.  That is enough
unforgeability for a deterministic simulation.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from enum import Enum

from .domain import ContractError


class SroError(Exception):
    """Base class for reveal-protocol failures."""


class InvalidSignatureSet(SroError):
    """Fewer than n - f valid, distinct signatures over the slot index."""


class InsufficientValidShares(SroError):
    """Too many invalid shares: no quorum left to combine."""


class Backend(Enum):
    SEEDED_HASH = "seeded"
    THRESHOLD_DPRF = "threshold"


# 1536-bit MODP group (RFC 3526 group 5).  q is a safe prime, so the
# quadratic residues form a subgroup of prime order p = (q - 1) / 2,
# generated by 4.  p far exceeds the 2^128 floor required outside test mode.
_MODP1536_Q = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA237327FFFFFFFFFFFFFFFF",
    16,
)


@dataclass(frozen=True)
class GroupParams:
    """Multiplicative group modulo q with a generator g of prime order p."""

    q: int
    p: int
    g: int


def production_group() -> GroupParams:
    return GroupParams(q=_MODP1536_Q, p=(_MODP1536_Q - 1) // 2, g=4)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for sp in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % sp == 0:
            return n == sp
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def small_field_group(p: int) -> GroupParams:
    """Embed the order-p field in the smallest group q = k*p + 1.

    Test-mode fields are tiny (p <= a few hundred), so a linear search for
    a prime q and a generator of the order-p subgroup is instant.
    """
    if not _is_prime(p):
        raise ContractError(f"test field modulus {p} is not prime")
    k = 2
    while not _is_prime(k * p + 1):
        k += 2 if p % 2 else 1
    q = k * p + 1
    for x in range(2, q):
        g = pow(x, (q - 1) // p, q)
        if g != 1:
            return GroupParams(q=q, p=p, g=g)
    raise ContractError(f"no generator found for subgroup of order {p}")  # pragma: no cover


@dataclass(frozen=True)
class SroConfig:
    n: int
    f: int
    backend: Backend
    test_field: int | None = None  # small prime p; None selects the production group

    def __post_init__(self):
        if self.n < 3 * self.f + 1:
            raise ContractError(f"need n >= 3f+1, got n={self.n}, f={self.f}")
        if self.quorum <= self.f:
            raise ContractError("quorum must exceed f")

    @property
    def quorum(self) -> int:
        return self.n - self.f


@dataclass(frozen=True)
class RevealRequest:
    k: int
    signatures: frozenset  # {(node_id, tag_bytes)}

    def __post_init__(self):
        ids = [node for node, _ in self.signatures]
        if len(ids) != len(set(ids)):
            raise ContractError("duplicate node_id in signature set")


@dataclass(frozen=True)
class Share:
    node_id: int
    value: int  # s_i * h(k) mod p
    proof: int  # commitment C_i = g^{s_i} mod q


@dataclass(frozen=True)
class Proof:
    """Verification material returned by generate_proof.

    Seeded-hash backend: digest = HASH(value).  Threshold backend: the
    commitment set plus the quorum of shares that reproduce the value.
    """

    backend: Backend
    digest: bytes = b""
    group: GroupParams | None = None
    commitments: tuple = ()  # ((node_id, C_i), ...)
    shares: tuple = ()  # (Share, ...)
    quorum: int = 0


def _hash(*parts: bytes) -> bytes:
    h = hashlib.sha512()
    for p in parts:
        h.update(p)
    return h.digest()


def _k_bytes(k: int) -> bytes:
    if not (0 <= k < 2**64):
        raise ContractError("slot index must be an unsigned 64-bit integer")
    return k.to_bytes(8, "big")


def hash_to_field(k: int, p: int) -> int:
    """Map a slot index into [1, p-1]; zero would void the exponent check."""
    ctr = 0
    while True:
        h = int.from_bytes(_hash(b"h2f", _k_bytes(k), ctr.to_bytes(4, "big")), "big") % p
        if h != 0:
            return h
        ctr += 1


def _derive_int(seed: bytes, label: bytes, index: int, modulus: int) -> int:
    return int.from_bytes(_hash(b"derive", seed, label, index.to_bytes(4, "big")), "big") % modulus


def node_signing_key(rng_seed: bytes, node_id: int) -> bytes:
    return _hash(b"sig-key", rng_seed, node_id.to_bytes(4, "big"))[:32]


def sign_slot(key: bytes, k: int) -> bytes:
    return hmac.new(key, _k_bytes(k), hashlib.sha256).digest()


class DprfNode:
    """One node's share holder; refuses to produce without a valid quorum."""

    def __init__(self, node_id, secret_share, commitment, group, config, verifier):
        self.node_id = node_id
        self._secret_share = secret_share
        self.commitment = commitment
        self.group = group
        self.config = config
        self._verifier = verifier

    def produce_share(self, k: int, signatures) -> Share:
        if not self._verifier(k, signatures):
            raise InvalidSignatureSet(
                f"node {self.node_id} refuses to produce a share for k={k}"
            )
        h = hash_to_field(k, self.group.p)
        return Share(self.node_id, self._secret_share * h % self.group.p, self.commitment)


def share_is_valid(group: GroupParams, k: int, node_id: int, share: Share, commitments) -> bool:
    """Check g^value == C_i^{h(k)} against the registered commitment for node_id."""
    expected = commitments.get(node_id)
    if expected is None or share.proof != expected:
        return False
    if not (0 <= share.value < group.p):
        return False
    h = hash_to_field(k, group.p)
    return pow(group.g, share.value, group.q) == pow(expected, h, group.q)


def _lagrange_at_zero(points, p: int) -> int:
    """Interpolate poly(0) from (x, y) points over GF(p)."""
    total = 0
    xs = [x for x, _ in points]
    for xi, yi in points:
        num, den = 1, 1
        for xj in xs:
            if xj != xi:
                num = num * (-xj) % p
                den = den * (xi - xj) % p
        total = (total + yi * num * pow(den, -1, p)) % p
    return total


def combine_shares(group: GroupParams, shares) -> bytes:
    """Lagrange-combine shares at 0 and hash into the 64-byte output space."""
    points = [(s.node_id, s.value) for s in shares]
    if len({x for x, _ in points}) != len(points):
        raise ContractError("duplicate node ids in share set")
    value = _lagrange_at_zero(points, group.p)
    return _hash(b"dprf", value.to_bytes((group.p.bit_length() + 7) // 8, "big"))


class SroHandle:
    """Initialized oracle state.  Immutable after init; reveal/verify are pure.

    The seeded-hash secret and the per-node DPRF shares live in
    double-underscore attributes: sealed by convention, the way an enclave
    or an honest node would hold them.  Scenario code only sees reveal().
    """

    def __init__(self, config: SroConfig, rng_seed: bytes):
        if len(rng_seed) != 32:
            raise ContractError("rng_seed must be exactly 32 bytes")
        self.config = config
        self._signing_keys = {i: node_signing_key(rng_seed, i) for i in range(config.n)}
        self._certificates = {}  # k -> frozenset, memoized full-quorum signatures
        self._revealed = {}  # k -> value; sound by uniqueness, saves recombination
        if config.backend is Backend.SEEDED_HASH:
            self.__seed = _hash(b"sro-seed", rng_seed)[:32]
            self.group = None
            self.nodes = None
        else:
            group = small_field_group(config.test_field) if config.test_field else production_group()
            self.group = group
            # Shamir polynomial of degree quorum-1 with poly(0) = s; the
            # master secret is dropped once shares and commitments exist.
            coeffs = [1 + _derive_int(rng_seed, b"master", 0, group.p - 1)]
            coeffs += [
                _derive_int(rng_seed, b"coef", j, group.p) for j in range(1, config.quorum)
            ]
            shares, commitments = {}, {}
            for i in range(1, config.n + 1):
                y = 0
                for c in reversed(coeffs):
                    y = (y * i + c) % group.p
                shares[i] = y
                commitments[i] = pow(group.g, y, group.q)
            self.commitments = commitments
            self.nodes = [
                DprfNode(i, shares[i], commitments[i], group, config, self.signatures_valid)
                for i in range(1, config.n + 1)
            ]

    def signing_key(self, node_id: int) -> bytes:
        return self._signing_keys[node_id]

    def signatures_valid(self, k: int, signatures) -> bool:
        valid_ids = set()
        for node_id, tag in signatures:
            key = self._signing_keys.get(node_id)
            if key is not None and hmac.compare_digest(tag, sign_slot(key, k)):
                valid_ids.add(node_id)
        return len(valid_ids) >= self.config.quorum

    def quorum_signatures(self, k: int, node_ids=None) -> frozenset:
        """Signatures over k from n - f nodes (all nodes would sign an agreed slot)."""
        if node_ids is not None:
            return frozenset((i, sign_slot(self._signing_keys[i], k)) for i in node_ids)
        cached = self._certificates.get(k)
        if cached is None:
            cached = frozenset(
                (i, sign_slot(self._signing_keys[i], k)) for i in range(self.config.quorum)
            )
            self._certificates[k] = cached
        return cached

    def _seeded_value(self, k: int) -> bytes:
        return _hash(b"reveal", self.__seed, _k_bytes(k))

    def _combine(self, shares) -> bytes:
        return combine_shares(self.group, shares)

    def reveal(self, req: RevealRequest) -> bytes:
        """The unique 64-byte value for slot k, or an error leaking nothing."""
        if not self.signatures_valid(req.k, req.signatures):
            raise InvalidSignatureSet(f"fewer than {self.config.quorum} valid signatures")
        if self.config.backend is Backend.SEEDED_HASH:
            return self._seeded_value(req.k)
        cached = self._revealed.get(req.k)
        if cached is not None:
            return cached
        collected = []
        for node in self.nodes:
            try:
                share = node.produce_share(req.k, req.signatures)
            except SroError:
                continue
            if share_is_valid(self.group, req.k, share.node_id, share, self.commitments):
                collected.append(share)
            if len(collected) == self.config.quorum:
                break
        if len(collected) < self.config.quorum:
            raise InsufficientValidShares(
                f"only {len(collected)} valid shares, need {self.config.quorum}"
            )
        value = self._combine(collected)
        self._revealed[req.k] = value
        return value

    def generate_proof(self, k: int) -> Proof:
        if self.config.backend is Backend.SEEDED_HASH:
            return Proof(Backend.SEEDED_HASH, digest=_hash(b"proof", self._seeded_value(k)))
        shares = tuple(
            node.produce_share(k, self.quorum_signatures(k))
            for node in self.nodes[: self.config.quorum]
        )
        return Proof(
            Backend.THRESHOLD_DPRF,
            group=self.group,
            commitments=tuple(sorted(self.commitments.items())),
            shares=shares,
            quorum=self.config.quorum,
        )


def sro_init(config: SroConfig, rng_seed: bytes) -> SroHandle:
    """Trusted key-generation ceremony; fully determined by rng_seed."""
    return SroHandle(config, rng_seed)


def reveal(handle: SroHandle, req: RevealRequest) -> bytes:
    return handle.reveal(req)


def generate_proof(handle: SroHandle, k: int) -> Proof:
    return handle.generate_proof(k)


def verify(k: int, proof: Proof, r: bytes) -> bool:
    """True iff r is the unique value reveal would return for k."""
    try:
        if proof.backend is Backend.SEEDED_HASH:
            return hmac.compare_digest(proof.digest, _hash(b"proof", r))
        group = proof.group
        commitments = dict(proof.commitments)
        seen = set()
        valid = []
        for share in proof.shares:
            if share.node_id in seen:
                return False
            seen.add(share.node_id)
            if not share_is_valid(group, k, share.node_id, share, commitments):
                return False
            valid.append(share)
        if len(valid) < proof.quorum or proof.quorum < 1:
            return False
        return hmac.compare_digest(combine_shares(group, valid), r)
    except (AttributeError, TypeError, ValueError, ContractError):
        return False


def produce_share(node: DprfNode, k: int, signatures) -> Share:
    return node.produce_share(k, signatures)
