"""Per-router FIFO memory of the best request seen for each recent flood.

The queue replaces flood-completion timers: new floods push old records
toward the front until they fall out, so retention time is set by queue
capacity and call frequency, not by a clock. Updating an entry (a better
CDM arrived) never changes its FIFO position.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

from .wire import FloodKey

# try_improve outcomes
IMPROVED = "improved"
NOT_BETTER = "not_better"
COMMITTED_REJECT = "committed_reject"

ACTIVE = "active"
COMMITTED = "committed"

DEFAULT_CAPACITY = 1024


class DuplicateKeyError(Exception):
    """record_new called for a key already present."""


class MissingEntryError(Exception):
    """try_improve/commit called for an absent key."""


@dataclass
class FloodQueueEntry:
    key: FloodKey
    best_cdm: int  # as received, pre-increment
    arrival_link: str  # link toward the best partial route to the source
    state: str = ACTIVE
    inserted_at: int = 0  # simulation time, ns


class FloodQueue:
    """FIFO map keyed by flood; bounded, evicting the oldest on overflow."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._entries: "OrderedDict[FloodKey, FloodQueueEntry]" = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, key: FloodKey) -> Optional[FloodQueueEntry]:
        return self._entries.get(key)

    def record_new(
        self, key: FloodKey, cdm: int, arrival_link: str, now: int = 0
    ) -> Optional[FloodQueueEntry]:
        """Append a fresh entry; returns the evicted oldest entry, if any."""
        if key in self._entries:
            raise DuplicateKeyError(repr(key))
        evicted = None
        if len(self._entries) >= self.capacity:
            _, evicted = self._entries.popitem(last=False)
        self._entries[key] = FloodQueueEntry(
            key=key, best_cdm=cdm, arrival_link=arrival_link, inserted_at=now
        )
        return evicted

    def try_improve(self, key: FloodKey, cdm: int, arrival_link: str) -> str:
        """Update the entry if *cdm* is strictly better; ties are discarded.

        Committed entries never change: a late better request must not
        invalidate a circuit that is already being installed.
        """
        entry = self._entries.get(key)
        if entry is None:
            raise MissingEntryError(repr(key))
        if entry.state == COMMITTED:
            return COMMITTED_REJECT
        if cdm < entry.best_cdm:
            entry.best_cdm = cdm
            entry.arrival_link = arrival_link
            return IMPROVED
        return NOT_BETTER

    def commit(self, key: FloodKey) -> None:
        """Freeze the entry's reverse-path choice. Idempotent."""
        entry = self._entries.get(key)
        if entry is None:
            raise MissingEntryError(repr(key))
        entry.state = COMMITTED
