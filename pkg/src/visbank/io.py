"""Binary bank files and MLP parameter files.

Bank layout (all little-endian)::

    magic      4s   b"VBNK"
    version    u16
    policy     u8   0 = averaging, 1 = fifo
    categories u32
    n          u16
    d          u32
    then per category: occupancy u16, write_cursor u16, n*d float32 row-major
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .bank import Policy, VisualBank
from .errors import BadMagic, BankFileError, TruncatedFile, VersionMismatch
from .fusion import MlpParams

MAGIC = b"VBNK"
VERSION = 1
_HEADER = struct.Struct("<4sHBIHI")
_CAT = struct.Struct("<HH")


def bank_to_bytes(bank: VisualBank) -> bytes:
    if bank.n > 0xFFFF:
        raise BankFileError(f"n={bank.n} does not fit the u16 header field")
    parts = [_HEADER.pack(MAGIC, VERSION, int(bank.policy), bank.num_categories, bank.n, bank.d)]
    for c in range(bank.num_categories):
        parts.append(_CAT.pack(int(bank.occupancy[c]), int(bank.cursor[c])))
        parts.append(bank.slots[c].astype("<f4").tobytes())
    return b"".join(parts)


def bank_from_bytes(blob: bytes) -> VisualBank:
    if len(blob) < _HEADER.size:
        if blob[:4] != MAGIC[:len(blob[:4])]:
            raise BadMagic("not a bank file")
        raise TruncatedFile(f"header needs {_HEADER.size} bytes, file has {len(blob)}")
    magic, version, policy, C, n, d = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"file version {version}, reader supports {VERSION}")
    try:
        policy = Policy(policy)
    except ValueError:
        raise BankFileError(f"unknown policy code {policy}") from None
    block = _CAT.size + 4 * n * d
    expected = _HEADER.size + C * block
    if len(blob) < expected:
        raise TruncatedFile(f"expected {expected} bytes, file has {len(blob)}")
    if len(blob) > expected:
        raise BankFileError(f"{len(blob) - expected} trailing bytes after payload")
    # parse everything before building the bank so a bad file never half-loads
    occ = np.empty(C, dtype=np.int64)
    cur = np.empty(C, dtype=np.int64)
    slots = np.empty((C, n, d), dtype=np.float32)
    off = _HEADER.size
    for c in range(C):
        occ[c], cur[c] = _CAT.unpack_from(blob, off)
        off += _CAT.size
        slots[c] = np.frombuffer(blob, dtype="<f4", count=n * d, offset=off).reshape(n, d)
        off += 4 * n * d
    if np.any(occ > n) or np.any(cur >= n):
        raise BankFileError("occupancy or cursor out of range")
    bank = VisualBank(C, n, d, policy)
    bank.slots = slots
    bank.occupancy = occ
    bank.cursor = cur
    return bank


def bank_export(bank: VisualBank, path: str | Path) -> None:
    Path(path).write_bytes(bank_to_bytes(bank))


def bank_import(path: str | Path) -> VisualBank:
    return bank_from_bytes(Path(path).read_bytes())


def save_params(params: MlpParams, path: str | Path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, **params.arrays())


def load_params(path: str | Path) -> MlpParams:
    with np.load(path) as data:
        return MlpParams(**{k: data[k] for k in ("W1", "b1", "W2", "b2")})
