"""Typed model of the substation BOM document.

A CycloneDX v1.6 subset extended with a ``substation`` component type: the
metadata component is the substation itself, the components array holds the
devices and their firmware, services describe what each device exposes, and
the dependencies array carries the three-level substation -> device ->
firmware graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar

from .cpe import CpeName
from .scl_model import ServiceKind

SERIAL_NUMBER_PROPERTY = "subs-bom:serialNumber"
COMPONENT_TYPE_PROPERTY = "subs-bom:componentType"

SERIAL_RE = re.compile(
    r"^urn:uuid:[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$"
)


class BomError(Exception):
    """Base class for BOM structure errors."""


class InvalidBom(BomError):
    pass


class CycleDetected(BomError):
    pass


class DanglingRef(BomError):
    pass


class ComponentType(str, Enum):
    SUBSTATION = "substation"
    DEVICE = "device"
    FIRMWARE = "firmware"


@dataclass(frozen=True)
class Component:
    bom_ref: str
    component_type: ComponentType
    name: str
    manufacturer: str | None = None
    version: str | None = None
    cpe: CpeName | None = None
    properties: tuple[tuple[str, str], ...] = ()

    def property_value(self, name: str) -> str | None:
        for key, value in self.properties:
            if key == name:
                return value
        return None


@dataclass(frozen=True)
class ServiceEntry:
    """One exposed IEC 61850 service, linked to the device providing it."""

    bom_ref: str
    name: str
    provider_ref: str
    kind: ServiceKind
    endpoints: tuple[str, ...] = ()


@dataclass(frozen=True)
class DependencyEntry:
    ref: str
    depends_on: tuple[str, ...] = ()


@dataclass(frozen=True)
class BomMetadata:
    timestamp: str
    component: Component
    tools: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class SubsBom:
    BOM_FORMAT: ClassVar[str] = "CycloneDX"
    SPEC_VERSION: ClassVar[str] = "1.6"

    serial_number: str
    metadata: BomMetadata
    components: tuple[Component, ...] = ()
    services: tuple[ServiceEntry, ...] = ()
    dependencies: tuple[DependencyEntry, ...] = ()
    version: int = 1

    def all_components(self) -> tuple[Component, ...]:
        """Metadata component followed by the components array."""
        return (self.metadata.component, *self.components)

    def component_by_ref(self, ref: str) -> Component | None:
        for comp in self.all_components():
            if comp.bom_ref == ref:
                return comp
        return None


def check_bom(bom: SubsBom) -> None:
    """Raise InvalidBom when any document invariant is violated."""
    if not SERIAL_RE.match(bom.serial_number):
        raise InvalidBom(f"serial number {bom.serial_number!r} is not a urn:uuid")
    if bom.version < 1:
        raise InvalidBom("version must be a positive integer")
    if bom.metadata.component.component_type is not ComponentType.SUBSTATION:
        raise InvalidBom("metadata component must have type substation")

    refs: set[str] = set()
    for comp in bom.all_components():
        if not comp.bom_ref:
            raise InvalidBom(f"component {comp.name!r} has an empty bom_ref")
        if comp.bom_ref in refs:
            raise InvalidBom(f"duplicate bom_ref {comp.bom_ref!r}")
        refs.add(comp.bom_ref)
    for comp in bom.components:
        if comp.component_type is ComponentType.SUBSTATION:
            raise InvalidBom(
                f"component {comp.bom_ref!r}: substation type is reserved for the metadata component"
            )
        if (
            comp.component_type is ComponentType.FIRMWARE
            and comp.property_value(SERIAL_NUMBER_PROPERTY) is not None
        ):
            raise InvalidBom(
                f"firmware component {comp.bom_ref!r} must not carry a serial-number property"
            )

    service_refs: set[str] = set()
    for service in bom.services:
        if not service.bom_ref:
            raise InvalidBom(f"service {service.name!r} has an empty bom_ref")
        if service.bom_ref in refs or service.bom_ref in service_refs:
            raise InvalidBom(f"duplicate bom_ref {service.bom_ref!r}")
        service_refs.add(service.bom_ref)
        provider = bom.component_by_ref(service.provider_ref)
        if provider is None or provider.component_type is not ComponentType.DEVICE:
            raise InvalidBom(
                f"service {service.bom_ref!r}: provider {service.provider_ref!r} is not a device component"
            )

    for entry in bom.dependencies:
        if entry.ref not in refs:
            raise InvalidBom(f"dependency ref {entry.ref!r} does not resolve")
        for target in entry.depends_on:
            if target not in refs:
                raise InvalidBom(f"dependency target {target!r} does not resolve")
        if entry.ref in entry.depends_on:
            raise InvalidBom(f"component {entry.ref!r} depends on itself")


def dependency_graph(bom: SubsBom) -> dict[str, tuple[str, ...]]:
    """Build the directed dependency graph over bom_refs.

    Every component (metadata included) is a node; edges follow the
    dependency entries. Raises DanglingRef for unresolved refs and
    CycleDetected when the graph is not acyclic.
    """
    nodes = [comp.bom_ref for comp in bom.all_components()]
    known = set(nodes)
    edges: dict[str, list[str]] = {ref: [] for ref in nodes}
    for entry in bom.dependencies:
        if entry.ref not in known:
            raise DanglingRef(f"dependency ref {entry.ref!r} does not resolve")
        for target in entry.depends_on:
            if target not in known:
                raise DanglingRef(f"dependency target {target!r} does not resolve")
            if target not in edges[entry.ref]:
                edges[entry.ref].append(target)

    # Iterative three-color DFS; recursion depth must not bound graph size.
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {ref: WHITE for ref in nodes}
    for start in nodes:
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            node, index = stack[-1]
            if index < len(edges[node]):
                stack[-1] = (node, index + 1)
                child = edges[node][index]
                if color[child] == GRAY:
                    raise CycleDetected(f"dependency cycle through {child!r}")
                if color[child] == WHITE:
                    color[child] = GRAY
                    stack.append((child, 0))
            else:
                color[node] = BLACK
                stack.pop()

    return {ref: tuple(targets) for ref, targets in edges.items()}


def max_depth(bom: SubsBom) -> int:
    """Longest path (counted in nodes) starting at the substation node."""
    graph = dependency_graph(bom)
    root = bom.metadata.component.bom_ref
    depth: dict[str, int] = {}

    order: list[str] = []
    visited: set[str] = set()
    stack: list[tuple[str, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if node in visited:
            continue
        visited.add(node)
        stack.append((node, True))
        for child in graph[node]:
            if child not in visited:
                stack.append((child, False))

    for node in order:
        children = [depth[c] for c in graph[node] if c in depth]
        depth[node] = 1 + max(children, default=0)
    return depth[root]
