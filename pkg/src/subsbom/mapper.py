"""Transform a parsed SCL document into a substation BOM.

Field mapping per IED: the device component takes its name from IED.name,
manufacturer from the nameplate vendor, version from the hardware revision
(literal "unknown" when missing) and a serial-number property; the firmware
component is named "<vendor> <model> <swRev>" and versioned by the software
revision. Dependencies form the three-level graph: substation -> devices ->
firmware.

When an IED has no LPHD nameplate, the device falls back to the IED
element's own attributes (manufacturer, type, configVersion) and no firmware
component is emitted.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable, Sequence

from . import __version__
from .bom_model import (
    SERIAL_NUMBER_PROPERTY,
    BomMetadata,
    Component,
    ComponentType,
    DependencyEntry,
    ServiceEntry,
    SubsBom,
)
from .cpe import synthesize_cpe
from .scl_model import (
    ConnectedAccessPoint,
    IedRecord,
    Nameplate,
    SclDocument,
    ServiceKind,
)

TOOL_NAME = "subsbom"

DEVICE_VERSION_FALLBACK = "unknown"

MMS_PORT = 102

_ENDPOINT_SCHEMES = {
    ServiceKind.GOOSE: "goose",
    ServiceKind.SMV: "smv",
}


class MissingName(ValueError):
    """Raised for an IED with an empty name (callers should validate first)."""


@dataclass(frozen=True)
class MapOptions:
    synthesize_cpe: bool = True
    substation_name_override: str | None = None


def substation_ref(name: str) -> str:
    return f"substation:{name}"


def device_ref(ied_name: str) -> str:
    return f"device:{ied_name}"


def firmware_ref(ied_name: str) -> str:
    return f"firmware:{ied_name}"


def service_ref(ied_name: str, kind: ServiceKind) -> str:
    return f"service:{ied_name}:{kind.value}"


def _effective_nameplate(ied: IedRecord) -> Nameplate | None:
    """The real nameplate, or one improvised from IED attributes."""
    if ied.nameplate is not None:
        return ied.nameplate
    if ied.manufacturer_attr:
        return Nameplate(
            vendor=ied.manufacturer_attr,
            model=ied.type_attr,
            sw_rev=ied.config_version,
        )
    return None


def map_device(ied: IedRecord, *, synthesize: bool = True) -> Component:
    """Map one IED to its device component."""
    if not ied.name:
        raise MissingName("IED has no name")
    nameplate = _effective_nameplate(ied)

    hw_rev = ied.nameplate.hw_rev if ied.nameplate else None
    properties = ()
    if ied.nameplate and ied.nameplate.ser_num:
        properties = ((SERIAL_NUMBER_PROPERTY, ied.nameplate.ser_num),)

    cpe = ied.cpe_device
    if cpe is None and synthesize and nameplate is not None:
        cpe = synthesize_cpe(nameplate, "device")

    return Component(
        bom_ref=device_ref(ied.name),
        component_type=ComponentType.DEVICE,
        name=ied.name,
        manufacturer=nameplate.vendor if nameplate else None,
        version=hw_rev or DEVICE_VERSION_FALLBACK,
        cpe=cpe,
        properties=properties,
    )


def map_firmware(ied: IedRecord, *, synthesize: bool = True) -> Component | None:
    """Map one IED to its firmware component, or None when the SCD carries
    no firmware identity (no LPHD nameplate)."""
    if not ied.name:
        raise MissingName("IED has no name")
    nameplate = ied.nameplate
    if nameplate is None:
        return None
    name_parts = [p for p in (nameplate.vendor, nameplate.model, nameplate.sw_rev) if p]
    if not name_parts:
        return None

    cpe = ied.cpe_firmware
    if cpe is None and synthesize:
        cpe = synthesize_cpe(nameplate, "firmware")

    return Component(
        bom_ref=firmware_ref(ied.name),
        component_type=ComponentType.FIRMWARE,
        name=" ".join(name_parts),
        manufacturer=nameplate.vendor,
        version=nameplate.sw_rev,
        cpe=cpe,
    )


def map_services(
    ied: IedRecord,
    device_ref: str,
    connected: Sequence[ConnectedAccessPoint] = (),
) -> list[ServiceEntry]:
    """One service entry per capability flag, with endpoints where the
    communication section provides addresses."""
    entries = []
    for kind in ied.service_caps.sorted_flags():
        endpoints: list[str] = []
        if kind is ServiceKind.MMS:
            endpoints = [
                f"mms://{ap.ip}:{MMS_PORT}" for ap in ied.access_points if ap.ip
            ]
        elif kind in _ENDPOINT_SCHEMES:
            scheme = _ENDPOINT_SCHEMES[kind]
            blocks = [
                entry
                for cap in connected
                for entry in (cap.gse_entries if kind is ServiceKind.GOOSE else cap.smv_entries)
            ]
            endpoints = [f"{scheme}://{b.mac}" for b in blocks if b.mac]
        entries.append(
            ServiceEntry(
                bom_ref=service_ref(ied.name, kind),
                name=f"{ied.name} {kind.value}",
                provider_ref=device_ref,
                kind=kind,
                endpoints=tuple(endpoints),
            )
        )
    return entries


def build_dependencies(
    substation_ref: str,
    device_firmware_pairs: Iterable[tuple[str, str | None]],
) -> list[DependencyEntry]:
    """Dependency entries for the three-level graph: the substation depends
    on every device, every device on its firmware (empty when unknown)."""
    pairs = list(device_firmware_pairs)
    entries = [DependencyEntry(ref=substation_ref, depends_on=tuple(d for d, _ in pairs))]
    for dev, fw in pairs:
        entries.append(DependencyEntry(ref=dev, depends_on=(fw,) if fw else ()))
    return entries


def map_document(
    doc: SclDocument,
    opts: MapOptions | None = None,
    *,
    clock: Callable[[], datetime] | None = None,
) -> SubsBom:
    """Build the full BOM for one document.

    The serial number is freshly random per call; callers needing
    reproducible output pin it (and the timestamp) at serialization time.
    """
    opts = opts or MapOptions()
    name = opts.substation_name_override or doc.substation.name
    substation = Component(
        bom_ref=substation_ref(name),
        component_type=ComponentType.SUBSTATION,
        name=name,
    )

    connected_by_ied: dict[str, list[ConnectedAccessPoint]] = {}
    for cap in doc.communication:
        connected_by_ied.setdefault(cap.ied_name, []).append(cap)

    components: list[Component] = []
    services: list[ServiceEntry] = []
    pairs: list[tuple[str, str | None]] = []
    for ied in doc.ieds:
        device = map_device(ied, synthesize=opts.synthesize_cpe)
        components.append(device)
        firmware = map_firmware(ied, synthesize=opts.synthesize_cpe)
        if firmware is not None:
            components.append(firmware)
        pairs.append((device.bom_ref, firmware.bom_ref if firmware else None))
        services.extend(
            map_services(ied, device.bom_ref, connected_by_ied.get(ied.name, []))
        )

    now = clock() if clock is not None else datetime.now(timezone.utc)
    timestamp = now.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    return SubsBom(
        serial_number=f"urn:uuid:{uuid.uuid4()}",
        metadata=BomMetadata(
            timestamp=timestamp,
            component=substation,
            tools=((TOOL_NAME, __version__),),
        ),
        components=tuple(components),
        services=tuple(services),
        dependencies=tuple(build_dependencies(substation.bom_ref, pairs)),
    )
