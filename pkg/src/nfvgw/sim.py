"""Single-threaded discrete-event simulator with a virtual millisecond clock.

All state mutation happens inside callbacks dispatched by the loop; other
threads may inject work with :meth:`Simulator.post`, which is the asynchronous
command boundary used by the REST adapters.  Runs are deterministic given the
seed: ties at the same timestamp dispatch in scheduling order.

The event log is the system of record for every metric.  It exports to JSON
lines with sorted keys so identical runs produce identical bytes.
"""

from __future__ import annotations

import heapq
import itertools
import json
import threading
import time
from dataclasses import dataclass, field
from random import Random


@dataclass
class SimClock:
    """Monotone virtual clock.  ``compression`` is the real-time factor used
    by :meth:`Simulator.run_realtime`; 0 means as-fast-as-possible."""

    now_ms: int = 0
    compression: float = 0.0

    def advance_to(self, ts_ms: int) -> None:
        if ts_ms < self.now_ms:
            raise ValueError(f"clock cannot move backwards ({ts_ms} < {self.now_ms})")
        self.now_ms = ts_ms


@dataclass(frozen=True)
class Event:
    ts_ms: int
    entity: str
    kind: str
    details: tuple[tuple[str, object], ...] = ()

    def as_dict(self) -> dict:
        d = {"ts": self.ts_ms, "entity": self.entity, "kind": self.kind}
        d.update(dict(self.details))
        return d

    def get(self, key: str, default=None):
        return dict(self.details).get(key, default)


class EventLog:
    def __init__(self, clock: SimClock):
        self._clock = clock
        self.events: list[Event] = []

    def emit(self, entity: str, kind: str, **details) -> Event:
        event = Event(self._clock.now_ms, entity, kind,
                      tuple(sorted(details.items())))
        self.events.append(event)
        return event

    def kinds(self) -> list[str]:
        return [e.kind for e in self.events]

    def filter(self, kind: str | None = None, **details) -> list[Event]:
        out = []
        for e in self.events:
            if kind is not None and e.kind != kind:
                continue
            d = dict(e.details)
            if all(d.get(k) == v for k, v in details.items()):
                out.append(e)
        return out

    def to_jsonl(self) -> bytes:
        lines = [json.dumps(e.as_dict(), sort_keys=True, separators=(",", ":"))
                 for e in self.events]
        return ("\n".join(lines) + "\n").encode() if lines else b""


class Simulator:
    def __init__(self, seed: int = 0, compression: float = 0.0):
        self.clock = SimClock(0, compression)
        self.rng = Random(seed)
        self.log = EventLog(self.clock)
        self._heap: list[tuple[int, int, object]] = []
        self._seq = itertools.count()
        self._lock = threading.Lock()

    @property
    def now_ms(self) -> int:
        return self.clock.now_ms

    def at(self, ts_ms: int, fn) -> None:
        """Schedule ``fn()`` at an absolute virtual time."""
        if ts_ms < self.clock.now_ms:
            raise ValueError("cannot schedule in the past")
        with self._lock:
            heapq.heappush(self._heap, (int(ts_ms), next(self._seq), fn))

    def after(self, delay_ms: int, fn) -> None:
        self.at(self.clock.now_ms + int(delay_ms), fn)

    def post(self, fn) -> None:
        """Thread-safe injection of work at the current virtual time."""
        self.at(self.clock.now_ms, fn)

    def _pop(self):
        with self._lock:
            if not self._heap:
                return None
            return heapq.heappop(self._heap)

    def peek_ts(self) -> int | None:
        """Timestamp of the next scheduled event, if any."""
        with self._lock:
            return self._heap[0][0] if self._heap else None

    def step(self) -> bool:
        """Dispatch exactly one event; False when nothing is scheduled."""
        entry = self._pop()
        if entry is None:
            return False
        ts, _, fn = entry
        self.clock.advance_to(ts)
        fn()
        return True

    def run(self, until_ms: int | None = None) -> int:
        """Dispatch events as fast as possible.  Returns the final time."""
        while True:
            with self._lock:
                head = self._heap[0] if self._heap else None
            if head is None or (until_ms is not None and head[0] > until_ms):
                break
            ts, _, fn = self._pop()
            self.clock.advance_to(ts)
            fn()
        if until_ms is not None and until_ms > self.clock.now_ms:
            self.clock.advance_to(until_ms)
        return self.clock.now_ms

    def run_realtime(self, factor: float | None = None,
                     until_ms: int | None = None) -> int:
        """Dispatch events paced against the wall clock.

        ``factor`` is virtual-ms per wall-ms (e.g. 10.0 runs ten times faster
        than real time).  Falls back to :meth:`run` when the factor is 0.
        """
        factor = self.clock.compression if factor is None else factor
        if not factor:
            return self.run(until_ms)
        wall_start = time.monotonic()
        virt_start = self.clock.now_ms
        while True:
            with self._lock:
                head = self._heap[0] if self._heap else None
            if head is None or (until_ms is not None and head[0] > until_ms):
                break
            ts = head[0]
            due_wall = wall_start + (ts - virt_start) / (1000.0 * factor)
            delay = due_wall - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            ts, _, fn = self._pop()
            self.clock.advance_to(ts)
            fn()
        return self.clock.now_ms

    def idle(self) -> bool:
        with self._lock:
            return not self._heap
