"""A small embedded log-structured key-value store with ordered keys.

Every write is appended to a single log file; the live table is rebuilt by
replaying the log on open. Keys and values are strings. Writes that would
not change the stored value are skipped, which makes repeated upserts free
on disk.
"""
from __future__ import annotations

import logging
import os
import struct
import threading
from pathlib import Path

from sortedcontainers import SortedDict

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<II")
_TOMBSTONE = 0xFFFFFFFF
_MAX_CHAR = "\U0010ffff"  # upper bound for prefix scans


class KVStore:
    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._table = SortedDict()
        self._lock = threading.RLock()
        self._log = None
        self.recovered_tail = 0
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.path.exists():
                self._replay()
            self._log = open(self.path, "ab")

    def _replay(self):
        with open(self.path, "rb") as fh:
            data = fh.read()
        pos, end = 0, len(data)
        while pos + _HEADER.size <= end:
            klen, vlen = _HEADER.unpack_from(data, pos)
            body = pos + _HEADER.size
            vsize = 0 if vlen == _TOMBSTONE else vlen
            if body + klen + vsize > end:
                break
            key = data[body:body + klen].decode("utf-8")
            if vlen == _TOMBSTONE:
                self._table.pop(key, None)
            else:
                self._table[key] = data[body + klen:body + klen + vlen].decode("utf-8")
            pos = body + klen + vsize
        if pos != end:
            # torn final write: drop it so appends start on a record boundary
            self.recovered_tail = end - pos
            logger.warning("%s: discarding %d trailing bytes", self.path, end - pos)
            with open(self.path, "r+b") as fh:
                fh.truncate(pos)

    def _append(self, key, value):
        if self._log is None:
            return
        k = key.encode("utf-8")
        if value is None:
            self._log.write(_HEADER.pack(len(k), _TOMBSTONE) + k)
        else:
            v = value.encode("utf-8")
            self._log.write(_HEADER.pack(len(k), len(v)) + k + v)

    def put(self, key: str, value: str = "") -> bool:
        """Store `value`; returns False when it was already there."""
        with self._lock:
            if self._table.get(key) == value:
                return False
            self._table[key] = value
            self._append(key, value)
            return True

    def put_if_absent(self, key, value=""):
        with self._lock:
            if key in self._table:
                return False
            self._table[key] = value
            self._append(key, value)
            return True

    def get(self, key, default=None):
        return self._table.get(key, default)

    def __contains__(self, key):
        return key in self._table

    def __len__(self):
        return len(self._table)

    def delete(self, key):
        with self._lock:
            if key not in self._table:
                return False
            del self._table[key]
            self._append(key, None)
            return True

    def scan(self, prefix="", start=None, stop=None):
        """``(key, value)`` pairs in key order, snapshotted at call time.

        `start`/`stop` bound the keys (inclusive / exclusive) within `prefix`.
        """
        lo = prefix + start if start is not None else prefix
        hi = prefix + stop if stop is not None else prefix + _MAX_CHAR
        with self._lock:
            table = self._table
            return [(k, table[k]) for k in table.irange(lo, hi, inclusive=(True, False))]

    def count(self, prefix=""):
        with self._lock:
            t = self._table
            return t.bisect_left(prefix + _MAX_CHAR) - t.bisect_left(prefix)

    def flush(self, fsync=False):
        if self._log is not None:
            self._log.flush()
            if fsync:
                os.fsync(self._log.fileno())

    def compact(self):
        """Rewrite the log with only live entries."""
        if self.path is None:
            return
        with self._lock:
            tmp = self.path.with_suffix(".compact")
            self._log.close()
            with open(tmp, "wb") as fh:
                for key, value in self._table.items():
                    k, v = key.encode("utf-8"), value.encode("utf-8")
                    fh.write(_HEADER.pack(len(k), len(v)) + k + v)
            os.replace(tmp, self.path)
            self._log = open(self.path, "ab")

    def close(self):
        if self._log is not None:
            self._log.close()
            self._log = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
