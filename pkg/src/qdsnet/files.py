"""On-disk formats: key stores, bundles, announcements, shares.

Key stores are binary and checksummed; consumption rewrites the store
through a temp file and os.replace, so a crash can never leave a store
half-updated (either the old mask or the new one, never a torn file).
Bundles, announcements, and shares are single wire frames written to
disk unchanged, so files and network traffic share one codec.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile

import numpy as np

from .framing import (BundleMsg, Frame, KeyShareMsg, MsgType, PositionList,
                      decode_frame, encode_frame, parse_payload)
from .protocol import (KeyShare, KeyStore, PositionAnnouncement,
                       SignatureBundle)

STORE_MAGIC = b"QDSK"
_ROLE_CODES = {"alice": 0, "bob": 1, "charlie": 2}
_ROLE_NAMES = {v: k for k, v in _ROLE_CODES.items()}


class FileFormatError(ValueError):
    pass


def store_to_bytes(store: KeyStore) -> bytes:
    n = len(store.key_bits)
    body = (STORE_MAGIC + bytes([1, _ROLE_CODES[store.owner]])
            + struct.pack(">I", n)
            + np.packbits(store.key_bits).tobytes()
            + np.packbits(store.used_mask.astype(np.uint8)).tobytes())
    return body + hashlib.sha256(body).digest()


def store_from_bytes(data: bytes) -> KeyStore:
    if len(data) < 42 or data[:4] != STORE_MAGIC:
        raise FileFormatError("not a key store file")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise FileFormatError("key store checksum mismatch (corrupted file)")
    version, role_code = body[4], body[5]
    if version != 1:
        raise FileFormatError(f"unsupported store version {version}")
    (n,) = struct.unpack(">I", body[6:10])
    packed_len = (n + 7) // 8
    if len(body) != 10 + 2 * packed_len:
        raise FileFormatError("key store length mismatch")
    keys = np.unpackbits(np.frombuffer(body[10:10 + packed_len],
                                       dtype=np.uint8))[:n]
    used = np.unpackbits(np.frombuffer(body[10 + packed_len:],
                                       dtype=np.uint8))[:n].astype(bool)
    return KeyStore(keys, used, _ROLE_NAMES[role_code])


def write_store(store: KeyStore, path: str) -> None:
    """Atomic write: temp file in the same directory, then replace."""
    data = store_to_bytes(store)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".store-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_store(path: str) -> KeyStore:
    with open(path, "rb") as fh:
        return store_from_bytes(fh.read())


def _write_frame_file(frame: Frame, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_frame(frame))


def _read_frame_file(path: str, expected: MsgType):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        frame, used = decode_frame(data)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}")
    if used != len(data):
        raise FileFormatError(f"{path}: trailing bytes after frame")
    if frame.msg_type != expected:
        raise FileFormatError(f"{path}: expected a {expected.name} frame, "
                              f"found {frame.msg_type.name}")
    return parse_payload(frame)


def write_bundle(bundle: SignatureBundle, path: str) -> None:
    msg = BundleMsg(np.packbits(bundle.sig).tobytes(), bundle.message,
                    np.packbits(bundle.p_a).tobytes())
    _write_frame_file(msg.encode(), path)


def read_bundle(path: str) -> SignatureBundle:
    msg = _read_frame_file(path, MsgType.SIGNATURE_BUNDLE)
    L = len(msg.sig) * 8
    return SignatureBundle(
        np.unpackbits(np.frombuffer(msg.sig, dtype=np.uint8))[:L],
        msg.message,
        np.unpackbits(np.frombuffer(msg.p_a, dtype=np.uint8))[:L])


def write_announcement(ann: PositionAnnouncement, path: str) -> None:
    _write_frame_file(PositionList(tuple(ann.positions)).encode(), path)


def read_announcement(path: str) -> PositionAnnouncement:
    msg = _read_frame_file(path, MsgType.POSITION_ANNOUNCEMENT)
    return PositionAnnouncement(tuple(msg.positions))


def write_share(share: KeyShare, path: str) -> None:
    msg = KeyShareMsg(share.role, np.packbits(share.x_key).tobytes(),
                      np.packbits(share.y_key).tobytes())
    _write_frame_file(msg.encode(), path)


def read_share(path: str) -> KeyShare:
    msg = _read_frame_file(path, MsgType.KEY_SHARE)
    L = len(msg.x_key) * 8
    return KeyShare(
        np.unpackbits(np.frombuffer(msg.x_key, dtype=np.uint8))[:L],
        np.unpackbits(np.frombuffer(msg.y_key, dtype=np.uint8))[:L],
        msg.role)
