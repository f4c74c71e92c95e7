"""Three-party signing protocol: distribution and messaging stages.

Distribution turns two reconciled point-to-point keys into the signing
geometry: Bob holds K_b, Charlie holds K_c, and the signer Alice holds
K_a = K_b xor K_c, so either receiver alone knows nothing about Alice's
key but the two together can reconstruct any part of it.

Messaging consumes 2L fresh key bits per signature.  Alice announces
the positions, splits her bits into an X half (masks the digest) and a
Y half (masks the one-time hash seed), and sends {Sig, M, P_a} to Bob.
Bob forwards the bundle plus his own key share to Charlie before he
verifies anything, Charlie returns his share to Bob, and both check
that unmasking the signature with the recombined X key reproduces the
digest of the message under the recombined seed.  Bob rejecting
short-circuits Charlie's check.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .divhash import HashSeed, hash_document
from .framing import (BundleMsg, DecisionMsg, KeyShareMsg, MsgType,
                      PositionList, parse_payload)

ROLE_ALICE = "alice"
ROLE_BOB = "bob"
ROLE_CHARLIE = "charlie"


class ProtocolError(RuntimeError):
    pass


class DistributionError(ProtocolError):
    """A link arrived unverified; aborting is the robustness pathway."""


class KeyExhaustedError(ProtocolError):
    """Not enough unconsumed key bits for the requested extraction."""


class KeyReuseError(ProtocolError):
    """A position was consumed twice; the one-time property forbids it."""


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or (arr.size and arr.max() > 1):
        raise ValueError("expected a flat 0/1 bit array")
    return arr


@dataclass
class KeyStore:
    """A party's raw key string with consumption bookkeeping."""

    key_bits: np.ndarray
    used_mask: np.ndarray
    owner: str

    @classmethod
    def from_bits(cls, bits, owner: str) -> "KeyStore":
        arr = _as_bits(bits).copy()
        return cls(arr, np.zeros(len(arr), dtype=bool), owner)

    @property
    def available(self) -> int:
        return int(len(self.key_bits) - np.count_nonzero(self.used_mask))

    def bits_at(self, positions) -> np.ndarray:
        idx = np.asarray(positions, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.key_bits)):
            raise ValueError("position out of range")
        return self.key_bits[idx].copy()

    def consume(self, positions) -> np.ndarray:
        """Return the bits at positions and mark them used, exactly once."""
        idx = np.asarray(positions, dtype=np.int64)
        if len(np.unique(idx)) != len(idx):
            raise KeyReuseError("duplicate positions in one extraction")
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.key_bits)):
            raise ValueError("position out of range")
        if np.any(self.used_mask[idx]):
            raise KeyReuseError(f"{self.owner}: position already consumed")
        self.used_mask[idx] = True
        return self.key_bits[idx].copy()


@dataclass(frozen=True)
class PositionAnnouncement:
    """Ordered 2L key positions; the first half indexes the X-keys."""

    positions: tuple

    def __post_init__(self):
        if len(self.positions) % 2:
            raise ValueError("announcement must hold 2L positions")
        if len(set(self.positions)) != len(self.positions):
            raise ValueError("announced positions must be distinct")

    @property
    def half(self) -> int:
        return len(self.positions) // 2


@dataclass(frozen=True)
class SignatureBundle:
    """{Sig, M, P_a} as transmitted from the signer to the first receiver."""

    sig: np.ndarray
    message: bytes
    p_a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sig", _as_bits(self.sig))
        object.__setattr__(self, "p_a", _as_bits(self.p_a))
        if len(self.sig) != len(self.p_a):
            raise ValueError("sig and p_a must have equal bit length")

    @property
    def signature_len_bits(self) -> int:
        return len(self.sig)


@dataclass(frozen=True)
class KeyShare:
    """One receiver's halves of the announced positions."""

    x_key: np.ndarray
    y_key: np.ndarray
    role: str

    def __post_init__(self):
        object.__setattr__(self, "x_key", _as_bits(self.x_key))
        object.__setattr__(self, "y_key", _as_bits(self.y_key))
        if len(self.x_key) != len(self.y_key):
            raise ValueError("x and y halves must have equal length")


@dataclass(frozen=True)
class VerifyDecision:
    accept: bool
    reason: str

    @property
    def decision(self) -> str:
        return "accept" if self.accept else "reject"


def run_distribution(link_b, link_c) -> tuple[KeyStore, KeyStore, KeyStore]:
    """Form the three key stores from two reconciled links.

    Each link is the (corrector result, reference result) pair returned
    by reconciliation: the corrector side is Alice's copy, the reference
    the partner's.  Returns (alice, bob, charlie) stores with
    K_a = K_b xor K_c.
    """
    (a_b, bob_res), (a_c, charlie_res) = link_b, link_c
    for res, name in ((a_b, "bob link"), (bob_res, "bob link"),
                      (a_c, "charlie link"), (charlie_res, "charlie link")):
        if not res.verified:
            raise DistributionError(f"{name} failed verification")
    k_ab = _as_bits(a_b.corrected_key)
    k_ac = _as_bits(a_c.corrected_key)
    if len(k_ab) != len(k_ac):
        raise DistributionError("links produced unequal key lengths")
    alice = KeyStore.from_bits(k_ab ^ k_ac, ROLE_ALICE)
    bob = KeyStore.from_bits(bob_res.corrected_key, ROLE_BOB)
    charlie = KeyStore.from_bits(charlie_res.corrected_key, ROLE_CHARLIE)
    return alice, bob, charlie


def select_positions(store: KeyStore, signature_len_bits: int,
                     seed) -> PositionAnnouncement:
    """Sample 2L unused positions from Alice's store and consume them."""
    L = signature_len_bits
    if L % 8 or L < 8:
        raise ValueError("signature length must be a multiple of 8 bits")
    free = np.flatnonzero(~store.used_mask)
    if len(free) < 2 * L:
        raise KeyExhaustedError(
            f"{store.owner}: need {2 * L} fresh bits, have {len(free)}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(free, size=2 * L, replace=False)
    store.consume(picked)
    return PositionAnnouncement(tuple(int(p) for p in picked))


def extract_share(store: KeyStore, announcement: PositionAnnouncement
                  ) -> KeyShare:
    """Consume the announced positions from a receiver's store."""
    bits = store.consume(announcement.positions)
    L = announcement.half
    return KeyShare(bits[:L], bits[L:], store.owner)


def _bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(bits).tobytes()


def _bytes_to_bits(data: bytes, n_bits: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:n_bits]


def sign(message: bytes, x_a, y_a, p_seed) -> SignatureBundle:
    """Mask the digest with X_a and the one-time hash seed with Y_a."""
    if not message:
        raise ValueError("cannot sign an empty message")
    x = _as_bits(x_a)
    y = _as_bits(y_a)
    L = len(x)
    if len(y) != L:
        raise ValueError("x_a and y_a must have equal length")
    if L % 8 or L < 8:
        raise ValueError("signature length must be a multiple of 8 bits")
    rng = np.random.default_rng(p_seed)
    p_bits = rng.integers(0, 2, L, dtype=np.uint8)
    seed = HashSeed(_bits_to_bytes(p_bits), L)
    dig = _bytes_to_bits(hash_document(message, seed), L)
    return SignatureBundle(sig=dig ^ x, message=bytes(message),
                           p_a=p_bits ^ y)


def verify_as_receiver(bundle: SignatureBundle, own: KeyShare,
                       peer: KeyShare) -> VerifyDecision:
    """Recombine shares, unmask, and compare digests."""
    L = bundle.signature_len_bits
    if (len(own.x_key) != L or len(peer.x_key) != L
            or len(own.y_key) != L or len(peer.y_key) != L):
        return VerifyDecision(False, "malformed-bundle: share length mismatch")
    if not bundle.message:
        return VerifyDecision(False, "malformed-bundle: empty message")
    k_x = own.x_key ^ peer.x_key
    k_y = own.y_key ^ peer.y_key
    expected = bundle.sig ^ k_x
    p_bits = bundle.p_a ^ k_y
    seed = HashSeed(_bits_to_bytes(p_bits), L)
    actual = _bytes_to_bits(hash_document(bundle.message, seed), L)
    if np.array_equal(expected, actual):
        return VerifyDecision(True, "digest match")
    return VerifyDecision(False, "digest mismatch")


# --- messaging orchestration -------------------------------------------------

@dataclass
class Party:
    store: KeyStore
    endpoints: dict


@dataclass
class MessagingOutcome:
    status: str
    bob_decision: str
    bob_reason: str
    charlie_decision: str
    charlie_reason: str
    bundle: Optional[SignatureBundle] = None
    announcement: Optional[PositionAnnouncement] = None
    transcripts: dict = field(default_factory=dict)
    error: str = ""


def connect_parties(alice: KeyStore, bob: KeyStore, charlie: KeyStore,
                    transport: str = "inproc") -> tuple[dict, dict]:
    """Wire the triangle with transcript recording on every endpoint.

    transport "inproc" uses queue channels, "socket" real socket pairs;
    both speak the identical frame codec.  Returns
    ({role: Party}, {"<role>:<peer>": entry list}).
    """
    from .transport import RecordingEndpoint, memory_pair, socket_pair

    if transport not in ("inproc", "socket"):
        raise ValueError(f"unknown transport {transport!r}")
    make_pair = memory_pair if transport == "inproc" else socket_pair
    parties = {role: Party(store, {}) for role, store in
               ((ROLE_ALICE, alice), (ROLE_BOB, bob), (ROLE_CHARLIE, charlie))}
    transcripts: dict = {}
    for left, right in ((ROLE_ALICE, ROLE_BOB), (ROLE_ALICE, ROLE_CHARLIE),
                        (ROLE_BOB, ROLE_CHARLIE)):
        ep_l, ep_r = make_pair()
        log_l: list = []
        log_r: list = []
        transcripts[f"{left}:{right}"] = log_l
        transcripts[f"{right}:{left}"] = log_r
        parties[left].endpoints[right] = RecordingEndpoint(ep_l, log_l)
        parties[right].endpoints[left] = RecordingEndpoint(ep_r, log_r)
    return parties, transcripts


def _share_to_msg(share: KeyShare) -> KeyShareMsg:
    return KeyShareMsg(share.role, _bits_to_bytes(share.x_key),
                       _bits_to_bytes(share.y_key))


def _msg_to_share(msg: KeyShareMsg, L: int) -> KeyShare:
    return KeyShare(_bytes_to_bits(msg.x_key, L),
                    _bytes_to_bits(msg.y_key, L), msg.role)


def _bundle_to_msg(bundle: SignatureBundle) -> BundleMsg:
    return BundleMsg(_bits_to_bytes(bundle.sig), bundle.message,
                     _bits_to_bytes(bundle.p_a))


def _msg_to_bundle(msg: BundleMsg) -> SignatureBundle:
    L = len(msg.sig) * 8
    return SignatureBundle(_bytes_to_bits(msg.sig, L), msg.message,
                           _bytes_to_bits(msg.p_a, L))


def _recv_typed(endpoint, msg_type: MsgType):
    frame = endpoint.recv()
    if frame.msg_type != msg_type:
        raise ProtocolError(f"expected {msg_type.name}, got "
                            f"{frame.msg_type.name}")
    return parse_payload(frame)


def run_messaging(parties: dict, message: bytes, *,
                  signature_len_bits: int, position_seed, p_seed,
                  tamper: Optional[Callable[[SignatureBundle],
                                            SignatureBundle]] = None,
                  transcripts: Optional[dict] = None) -> MessagingOutcome:
    """Drive one signing round across three connected roles.

    Each role runs as its own thread speaking only through its
    endpoints.  A tamper callable turns Bob malicious: he forwards the
    altered bundle and reports "accept" to Charlie without checking
    anything, modelling a forging receiver.
    """
    L = signature_len_bits
    results: dict = {}
    errors: list = []

    def alice_script():
        party = parties[ROLE_ALICE]
        ann = select_positions(party.store, L, position_seed)
        x_a = party.store.bits_at(ann.positions[:L])
        y_a = party.store.bits_at(ann.positions[L:])
        msg = PositionList(tuple(ann.positions)).encode()
        party.endpoints[ROLE_BOB].send(msg)
        party.endpoints[ROLE_CHARLIE].send(msg)
        bundle = sign(message, x_a, y_a, p_seed)
        party.endpoints[ROLE_BOB].send(_bundle_to_msg(bundle).encode())
        results["alice"] = (ann, bundle)

    def bob_script():
        party = parties[ROLE_BOB]
        to_alice = party.endpoints[ROLE_ALICE]
        to_charlie = party.endpoints[ROLE_CHARLIE]
        ann_msg = _recv_typed(to_alice, MsgType.POSITION_ANNOUNCEMENT)
        share = extract_share(party.store,
                              PositionAnnouncement(ann_msg.positions))
        bundle = _msg_to_bundle(_recv_typed(to_alice,
                                            MsgType.SIGNATURE_BUNDLE))
        forwarded = tamper(bundle) if tamper is not None else bundle
        # transference precedes verification: Bob commits his share
        # to Charlie before learning anything about Charlie's half
        to_charlie.send(_bundle_to_msg(forwarded).encode())
        to_charlie.send(_share_to_msg(share).encode())
        peer = _msg_to_share(_recv_typed(to_charlie, MsgType.KEY_SHARE), L)
        if tamper is not None:
            decision = VerifyDecision(True, "malicious: forwarded unchecked")
        else:
            decision = verify_as_receiver(bundle, share, peer)
        to_charlie.send(DecisionMsg(decision.decision,
                                    decision.reason).encode())
        results["bob"] = decision

    def charlie_script():
        party = parties[ROLE_CHARLIE]
        to_alice = party.endpoints[ROLE_ALICE]
        to_bob = party.endpoints[ROLE_BOB]
        ann_msg = _recv_typed(to_alice, MsgType.POSITION_ANNOUNCEMENT)
        share = extract_share(party.store,
                              PositionAnnouncement(ann_msg.positions))
        bundle = _msg_to_bundle(_recv_typed(to_bob, MsgType.SIGNATURE_BUNDLE))
        peer = _msg_to_share(_recv_typed(to_bob, MsgType.KEY_SHARE), L)
        to_bob.send(_share_to_msg(share).encode())
        bob_said = _recv_typed(to_bob, MsgType.DECISION)
        if bob_said.decision != "accept":
            results["charlie"] = ("skipped",
                                  "first receiver rejected; check skipped")
            return
        decision = verify_as_receiver(bundle, share, peer)
        results["charlie"] = (decision.decision, decision.reason)

    def _guard(role, fn):
        def runner():
            try:
                fn()
            except Exception as exc:
                errors.append((fn.__name__, exc))
                # unblock peers waiting on this role
                for ep in parties[role].endpoints.values():
                    try:
                        ep.close()
                    except Exception:
                        pass
        return runner

    scripts = ((ROLE_ALICE, alice_script), (ROLE_BOB, bob_script),
               (ROLE_CHARLIE, charlie_script))
    threads = [threading.Thread(target=_guard(role, fn), name=fn.__name__)
               for role, fn in scripts]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=120.0)

    transcripts = transcripts if transcripts is not None else {}
    if errors:
        name, exc = errors[0]
        return MessagingOutcome(
            status="abort", bob_decision="abort", bob_reason="",
            charlie_decision="abort", charlie_reason="",
            transcripts=transcripts,
            error=f"{name}: {type(exc).__name__}: {exc}")

    ann, bundle = results["alice"]
    bob_dec = results["bob"]
    ch_dec, ch_reason = results["charlie"]
    return MessagingOutcome(
        status="ok",
        bob_decision=bob_dec.decision, bob_reason=bob_dec.reason,
        charlie_decision=ch_dec, charlie_reason=ch_reason,
        bundle=bundle, announcement=ann, transcripts=transcripts)
