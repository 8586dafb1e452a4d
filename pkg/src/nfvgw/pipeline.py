"""Message transport through deployed chains.

:class:`SimChainPath` runs each hop as a single-server FIFO queue on the
simulator, charging the image's per-request cost and dropping (with a count)
whenever the chain is missing, dissolved, or any instance is not RUNNING.
:class:`DirectPath` applies the same conversions inline with no infrastructure
at all; it is the non-virtualized gateway used as the measurement baseline.
"""

from __future__ import annotations

from .dataplane import behavior_for
from .errors import ParseError
from .sim import Simulator


class SimChainPath:
    """One direction of a gateway data path over a forwarding chain."""

    def __init__(self, sim: Simulator, get_chain, name: str = "path"):
        self.sim = sim
        self.get_chain = get_chain  # callable -> ForwardingChain | None
        self.name = name
        self.delivered = 0
        self.drops = 0
        self._busy_until: dict[str, int] = {}
        self._subscribers: list = []  # (deliver, on_drop) pairs

    def subscribe(self, deliver, on_drop=None) -> None:
        self._subscribers.append((deliver, on_drop))

    def send(self, message, meta=None) -> None:
        chain = self.get_chain()
        if chain is None or not chain.active or \
                any(not inst.is_running() for inst in chain.instances):
            self._drop(meta)
            return
        self._hop(chain, 0, message, meta)

    def _hop(self, chain, index: int, message, meta) -> None:
        if index == len(chain.instances):
            self.delivered += 1
            for deliver, _ in self._subscribers:
                deliver(message, meta)
            return
        inst = chain.instances[index]
        if not chain.active or not inst.is_running():
            self._drop(meta)
            return
        convert = behavior_for(inst.image.input, inst.image.output)
        if convert is None:
            raise ParseError(f"image {inst.image_id} has no data-plane behavior")
        start = max(self.sim.now_ms, self._busy_until.get(inst.instance_id, 0))
        completion = start + inst.image.cost_per_request_ms
        self._busy_until[inst.instance_id] = completion

        def serve():
            if not inst.is_running():
                self._drop(meta)
                return
            self._hop(chain, index + 1, convert(message), meta)

        self.sim.at(completion, serve)

    def _drop(self, meta) -> None:
        self.drops += 1
        self.sim.log.emit(self.name, "MSG_DROP",
                          sensor=getattr(meta, "sensor_id", None))
        for _, on_drop in self._subscribers:
            if on_drop is not None:
                on_drop(meta)


class DirectPath:
    """The laptop-gateway bypass: same conversions, no VMs, no delay."""

    def __init__(self, sim: Simulator, images, name: str = "direct"):
        self.sim = sim
        self.images = list(images)
        self.name = name
        self.delivered = 0
        self.drops = 0
        self._subscribers: list = []

    def subscribe(self, deliver, on_drop=None) -> None:
        self._subscribers.append((deliver, on_drop))

    def send(self, message, meta=None) -> None:
        for image in self.images:
            convert = behavior_for(image.input, image.output)
            if convert is None:
                raise ParseError(f"image {image.image_id} has no data-plane behavior")
            message = convert(message)
        self.delivered += 1
        for deliver, _ in self._subscribers:
            deliver(message, meta)
