"""Central repository of converter images and the chain resolver.

Feasibility of a conversion is reachability in the directed graph whose nodes
are interface descriptors and whose edges are registered images.  Resolution
returns the shortest path; among equally short paths the one whose image-id
sequence is lexicographically smallest wins.  Chains longer than
``MAX_CHAIN_LEN`` hops are treated as infeasible.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import DuplicateEdge, InconsistentKind, MalformedRequest, NoConversionPath
from .interfaces import InterfaceDescriptor

MAX_CHAIN_LEN = 6


@dataclass(frozen=True)
class ResourceProfile:
    vcpu: int = 1
    ram_mb: int = 2048


class VnfKind(str, Enum):
    PROTOCOL_CONVERTER = "PROTOCOL_CONVERTER"
    INFO_MODEL_CONVERTER = "INFO_MODEL_CONVERTER"


@dataclass(frozen=True)
class VnfImage:
    image_id: str
    kind: VnfKind
    input: InterfaceDescriptor
    output: InterfaceDescriptor
    resource_profile: ResourceProfile = ResourceProfile()
    cost_per_request_ms: int = 1

    def __post_init__(self):
        if self.cost_per_request_ms <= 0:
            raise MalformedRequest("costPerRequestMs must be positive")
        changes_protocol = self.input.protocol is not self.output.protocol
        changes_model = self.input.info_model is not self.output.info_model
        if self.kind is VnfKind.PROTOCOL_CONVERTER and not (
                changes_protocol and not changes_model):
            raise InconsistentKind(
                f"{self.image_id}: protocol converter must change exactly the protocol")
        if self.kind is VnfKind.INFO_MODEL_CONVERTER and not (
                changes_model and not changes_protocol):
            raise InconsistentKind(
                f"{self.image_id}: info-model converter must change exactly the model")

    def as_dict(self) -> dict:
        return {
            "imageId": self.image_id,
            "kind": self.kind.value,
            "input": self.input.as_dict(),
            "output": self.output.as_dict(),
            "resourceProfile": {"vcpu": self.resource_profile.vcpu,
                                "ramMb": self.resource_profile.ram_mb},
            "costPerRequestMs": self.cost_per_request_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VnfImage":
        try:
            profile = d.get("resourceProfile", {})
            return cls(
                image_id=str(d["imageId"]),
                kind=VnfKind(d["kind"]),
                input=InterfaceDescriptor.from_dict(d["input"]),
                output=InterfaceDescriptor.from_dict(d["output"]),
                resource_profile=ResourceProfile(int(profile.get("vcpu", 1)),
                                                 int(profile.get("ramMb", 2048))),
                cost_per_request_ms=int(d.get("costPerRequestMs", 1)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedRequest(f"bad image record: {exc}") from exc


class VnfStore:
    """Registry plus resolver over the conversion graph."""

    def __init__(self):
        self._images: dict[str, VnfImage] = {}
        self._edges: dict[tuple[InterfaceDescriptor, InterfaceDescriptor], VnfImage] = {}
        self._adjacency: dict[InterfaceDescriptor, list[VnfImage]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._images)

    def get(self, image_id: str) -> VnfImage | None:
        return self._images.get(image_id)

    def images(self) -> list[VnfImage]:
        return sorted(self._images.values(), key=lambda i: i.image_id)

    def register(self, image: VnfImage) -> None:
        with self._lock:
            key = (image.input, image.output)
            if key in self._edges:
                raise DuplicateEdge(
                    f"{image.input} -> {image.output} already registered")
            if image.image_id in self._images:
                raise DuplicateEdge(f"image id {image.image_id} already registered")
            self._images[image.image_id] = image
            self._edges[key] = image
            self._adjacency.setdefault(image.input, []).append(image)

    def resolve_chain(self, south: InterfaceDescriptor,
                      north: InterfaceDescriptor) -> list[VnfImage]:
        """Shortest conversion chain from ``south`` to ``north`` (uplink).

        Downlink chains are resolved by calling with swapped endpoints.
        Returns [] when the endpoints already match.  Raises
        :class:`NoConversionPath` when no chain of at most ``MAX_CHAIN_LEN``
        hops exists.
        """
        with self._lock:
            if south == north:
                return []
            dist = self._distances_to(north)
            total = dist.get(south)
            if total is None or total > MAX_CHAIN_LEN:
                raise NoConversionPath(f"no conversion {south} -> {north}")
            # Greedy lexicographic walk over shortest-path edges: among equal
            # length paths this picks the smallest image-id sequence.
            chain: list[VnfImage] = []
            node = south
            remaining = total
            while node != north:
                step = min(
                    (img for img in self._adjacency.get(node, [])
                     if dist.get(img.output) == remaining - 1),
                    key=lambda img: img.image_id,
                )
                chain.append(step)
                node = step.output
                remaining -= 1
            return chain

    def _distances_to(self, target: InterfaceDescriptor) -> dict[InterfaceDescriptor, int]:
        """BFS hop counts toward ``target`` along reversed edges."""
        reverse: dict[InterfaceDescriptor, list[InterfaceDescriptor]] = {}
        for (inp, out) in self._edges:
            reverse.setdefault(out, []).append(inp)
        dist = {target: 0}
        queue = deque([target])
        while queue:
            node = queue.popleft()
            for prev in reverse.get(node, []):
                if prev not in dist:
                    dist[prev] = dist[node] + 1
                    queue.append(prev)
        return dist

    # --- catalog ---

    def load_catalog(self, source) -> int:
        """Load images from a catalog: a JSON file path or a list of dicts."""
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8") as fh:
                records = json.load(fh)
        else:
            records = source
        if not isinstance(records, list):
            raise MalformedRequest("catalog must be a JSON list of images")
        for record in records:
            self.register(VnfImage.from_dict(record))
        return len(records)
