"""Segregated state stores.

Three stores with different survivability:

* in-process session store -- fast, no checksum verification, survives
  component microreboots but dies with its hosting process;
* external session store -- checksummed, lease-based, survives microreboots,
  process restarts, and node reboots;
* transactional store -- persistent rows with all-or-nothing commits.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

READ_OK = "ok"
READ_MISSING = "missing"
READ_DISCARDED = "discarded"


def checksum(payload: bytes) -> int:
    return zlib.crc32(payload) & 0xFFFFFFFF


@dataclass
class SessionRecord:
    session_key: str
    payload: bytes
    lease_expires_at: int
    checksum: int
    home_store: str


class SessionStore:
    """Key-value session store with lease expiry.

    `verify_checksums` is on for the external store only; the in-process path
    returns whatever bytes are there and lets the application notice.
    """

    def __init__(self, kind: str, access_latency_ms: int, lease_ms: int,
                 verify_checksums: bool):
        self.kind = kind
        self.access_latency_ms = access_latency_ms
        self.lease_ms = lease_ms
        self.verify_checksums = verify_checksums
        self.records: dict[str, SessionRecord] = {}

    def write(self, key: str, payload: bytes, now: int) -> None:
        self.records[key] = SessionRecord(
            session_key=key,
            payload=payload,
            lease_expires_at=now + self.lease_ms,
            checksum=checksum(payload),
            home_store=self.kind,
        )

    def read(self, key: str, now: int) -> tuple[str, bytes | None]:
        rec = self.records.get(key)
        if rec is None or rec.lease_expires_at <= now:
            self.records.pop(key, None)
            return READ_MISSING, None
        if self.verify_checksums and checksum(rec.payload) != rec.checksum:
            del self.records[key]
            return READ_DISCARDED, None
        rec.lease_expires_at = now + self.lease_ms   # sliding lease renewal
        return READ_OK, rec.payload

    def delete(self, key: str) -> None:
        self.records.pop(key, None)

    def corrupt(self, key: str, mode: str) -> bool:
        """Mutate a stored payload in place; stored checksum is left stale."""
        rec = self.records.get(key)
        if rec is None:
            return False
        if mode == "null":
            rec.payload = b""
        else:
            rec.payload = rec.payload + b"!" + mode.encode()
        return True

    def gc(self, now: int) -> int:
        expired = [k for k, r in self.records.items() if r.lease_expires_at <= now]
        for k in expired:
            del self.records[k]
        return len(expired)

    def clear(self) -> None:
        self.records.clear()


@dataclass
class TxRecord:
    row_key: str
    value: bytes
    tainted: bool = False


TX_COMMITTED = "committed"
TX_ABORTED = "aborted"


class Transaction:
    """Staged writes; nothing is visible until commit."""

    __slots__ = ("owner", "writes", "taint", "state")

    def __init__(self, owner: str):
        self.owner = owner
        self.writes: list[tuple[str, bytes]] = []
        self.taint = False
        self.state = "open"


class TransactionalStore:
    """Persistent row store; survives every reboot level."""

    def __init__(self) -> None:
        self.rows: dict[str, TxRecord] = {}
        self.committed = 0
        self.aborted = 0

    def begin(self, owner: str) -> Transaction:
        return Transaction(owner)

    def commit(self, tx: Transaction) -> str:
        if tx.state != "open":
            return tx.state
        for key, value in tx.writes:
            self.rows[key] = TxRecord(key, value, tainted=tx.taint)
        tx.state = TX_COMMITTED
        self.committed += 1
        return TX_COMMITTED

    def abort(self, tx: Transaction) -> str:
        if tx.state == "open":
            tx.state = TX_ABORTED
            self.aborted += 1
        return tx.state

    def execute(self, writes: list[tuple[str, bytes]], owner: str,
                *, taint: bool = False, abort: bool = False) -> str:
        """One-shot transaction, for direct use and tests."""
        tx = self.begin(owner)
        tx.writes.extend(writes)
        tx.taint = taint
        if abort:
            return self.abort(tx)
        return self.commit(tx)

    def read(self, row_key: str) -> TxRecord | None:
        return self.rows.get(row_key)

    def taint_row(self, row_key: str, value: bytes = b"wrong") -> None:
        self.rows[row_key] = TxRecord(row_key, value, tainted=True)

    def repair(self, row_key: str) -> bool:
        rec = self.rows.get(row_key)
        if rec is None or not rec.tainted:
            return False
        rec.tainted = False
        return True

    def tainted_rows(self) -> list[str]:
        return sorted(k for k, r in self.rows.items() if r.tainted)


@dataclass
class StoreProfile:
    kind: str
    access_latency_ms: int
    survives_murb: bool
    survives_process_restart: bool
    survives_node_reboot: bool


def store_profile(store: SessionStore) -> StoreProfile:
    external = store.kind == "external"
    return StoreProfile(
        kind=store.kind,
        access_latency_ms=store.access_latency_ms,
        survives_murb=True,
        survives_process_restart=external,
        survives_node_reboot=external,
    )
