"""Shared test helpers: fixture paths, an SclDocument -> XML serializer for
round-trip checks, seeded random BOM/dataset generators, and a brute-force
scan oracle kept independent of the production scan path."""

from __future__ import annotations

import random
import uuid
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from subsbom.bom_model import (
    BomMetadata,
    Component,
    ComponentType,
    DependencyEntry,
    ServiceEntry,
    SubsBom,
)
from subsbom.cpe import ANY, CpeName
from subsbom.scl_model import SclDocument, ServiceKind
from subsbom.vulnscan import Finding, Provenance, Severity, VulnRecord

FIXTURES = Path(__file__).parent / "fixtures"

GOLDEN_SERIAL = "urn:uuid:00000000-0000-4000-8000-000000000000"
GOLDEN_TIMESTAMP = "2024-01-01T00:00:00Z"


@pytest.fixture
def laboratory_scd() -> bytes:
    return (FIXTURES / "laboratory" / "input.scd").read_bytes()


@pytest.fixture
def laboratory_dataset() -> bytes:
    return (FIXTURES / "laboratory" / "dataset.json").read_bytes()


# --- SclDocument -> SCL XML ------------------------------------------------

_SERVICE_FLAG_ELEMENTS = {
    ServiceKind.GOOSE: "GOOSE",
    ServiceKind.SMV: "SMVsc",
    ServiceKind.REPORTING: "ReportSettings",
    ServiceKind.MMS: "ClientServices",
    ServiceKind.LOGGING: "LogSettings",
    ServiceKind.FILE_TRANSFER: "FileHandling",
    ServiceKind.TIME_SYNC: "TimeSyncProt",
}


def serialize_fixture(doc: SclDocument) -> bytes:
    """Render a document back to SCL XML such that parsing it reproduces the
    document. An IED with a nameplate is rendered as a server, which implies
    the MMS flag; documents violating that are not representable."""
    root = ET.Element("SCL")
    header = ET.SubElement(root, "Header", id=doc.header.id)
    for attr, value in (
        ("version", doc.header.version),
        ("revision", doc.header.revision),
        ("toolId", doc.header.tool_id),
    ):
        if value is not None:
            header.set(attr, value)

    substation = ET.SubElement(root, "Substation", name=doc.substation.name)
    if doc.substation.description is not None:
        substation.set("desc", doc.substation.description)

    if doc.communication:
        comm = ET.SubElement(root, "Communication")
        subnet = ET.SubElement(comm, "SubNetwork", name="NET1")
        for cap in doc.communication:
            cap_el = ET.SubElement(
                subnet, "ConnectedAP", iedName=cap.ied_name, apName=cap.ap_name
            )
            if cap.address_params:
                address = ET.SubElement(cap_el, "Address")
                for name, value in cap.address_params:
                    p = ET.SubElement(address, "P", type=name)
                    p.text = value
            for kind, entries in (("GSE", cap.gse_entries), ("SMV", cap.smv_entries)):
                for entry in entries:
                    block = ET.SubElement(
                        cap_el, kind, ldInst=entry.ld_inst, cbName=entry.cb_name
                    )
                    params = [
                        ("MAC-Address", entry.mac),
                        ("APPID", entry.app_id),
                    ]
                    params = [(n, v) for n, v in params if v is not None]
                    if params:
                        address = ET.SubElement(block, "Address")
                        for name, value in params:
                            p = ET.SubElement(address, "P", type=name)
                            p.text = value

    for ied in doc.ieds:
        if ied.nameplate is not None:
            assert ServiceKind.MMS in ied.service_caps.flags, (
                "a nameplate implies a server access point, which implies MMS"
            )
        ied_el = ET.SubElement(root, "IED", name=ied.name)
        for attr, value in (
            ("manufacturer", ied.manufacturer_attr),
            ("type", ied.type_attr),
            ("configVersion", ied.config_version),
        ):
            if value is not None:
                ied_el.set(attr, value)
        for cpe in (ied.cpe_device, ied.cpe_firmware):
            if cpe is not None:
                private = ET.SubElement(ied_el, "Private", type="subs-bom:cpe")
                private.text = cpe.format()
        if ied.service_caps.flags:
            services = ET.SubElement(ied_el, "Services")
            for kind in ied.service_caps.sorted_flags():
                ET.SubElement(services, _SERVICE_FLAG_ELEMENTS[kind])
        if ied.nameplate is not None:
            ap = ET.SubElement(ied_el, "AccessPoint", name="AP1")
            server = ET.SubElement(ap, "Server")
            ldevice = ET.SubElement(server, "LDevice", inst="LD0")
            ln = ET.SubElement(ldevice, "LN", lnClass="LPHD", inst="1", lnType="LPHD_0")
            doi = ET.SubElement(ln, "DOI", name="PhyNam")
            nameplate = ied.nameplate
            for dai_name, value in (
                ("vendor", nameplate.vendor),
                ("model", nameplate.model),
                ("swRev", nameplate.sw_rev),
                ("hwRev", nameplate.hw_rev),
                ("serNum", nameplate.ser_num),
                ("location", nameplate.location),
            ):
                if value is not None:
                    dai = ET.SubElement(doi, "DAI", name=dai_name)
                    val = ET.SubElement(dai, "Val")
                    val.text = value

    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


# --- random BOM / dataset generators ---------------------------------------

_VENDORS = ("ingeteam", "ziv", "siemens", "abb", "ge_grid")
_PRODUCTS = ("relay_9000", "bcu_x", "merging_unit", "rtu_7", "feeder_prot")
_VERSIONS = ("1.0", "2.5.1", "8.1.0.20", "irv8", "3.2")


def random_cpe(rng: random.Random, part: str) -> CpeName:
    return CpeName(
        part=part,
        vendor=rng.choice(_VENDORS),
        product=rng.choice(_PRODUCTS),
        version=rng.choice(_VERSIONS + (ANY,)),
    )


def random_criteria(rng: random.Random) -> CpeName:
    return CpeName(
        part=rng.choice(("h", "o", "a", ANY)),
        vendor=rng.choice(_VENDORS + (ANY,)),
        product=rng.choice(_PRODUCTS + (ANY, ANY)),
        version=rng.choice(_VERSIONS + (ANY, ANY)),
    )


def random_bom(rng: random.Random, *, with_services: bool = True) -> SubsBom:
    """A valid BOM with at most 9 components: one substation, up to four
    devices, firmware for some of them (occasionally shared)."""
    sub_name = f"SUB{rng.randrange(1000)}"
    substation = Component(
        bom_ref=f"substation:{sub_name}",
        component_type=ComponentType.SUBSTATION,
        name=sub_name,
        cpe=random_cpe(rng, "h") if rng.random() < 0.1 else None,
    )

    components: list[Component] = []
    services: list[ServiceEntry] = []
    dependencies: list[DependencyEntry] = []
    device_refs: list[str] = []
    firmware_refs: list[str] = []

    for i in range(rng.randrange(0, 5)):
        dev_name = f"DEV{i}"
        dev_ref = f"device:{dev_name}"
        device_refs.append(dev_ref)
        properties = ()
        if rng.random() < 0.5:
            properties = (("subs-bom:serialNumber", f"SN{rng.randrange(10**6)}"),)
        components.append(
            Component(
                bom_ref=dev_ref,
                component_type=ComponentType.DEVICE,
                name=dev_name,
                manufacturer=rng.choice(_VENDORS) if rng.random() < 0.8 else None,
                version=rng.choice(_VERSIONS) if rng.random() < 0.7 else None,
                cpe=random_cpe(rng, "h") if rng.random() < 0.7 else None,
                properties=properties,
            )
        )

        targets: tuple[str, ...] = ()
        roll = rng.random()
        if roll < 0.6:
            fw_ref = f"firmware:{dev_name}"
            firmware_refs.append(fw_ref)
            components.append(
                Component(
                    bom_ref=fw_ref,
                    component_type=ComponentType.FIRMWARE,
                    name=f"{dev_name} firmware",
                    version=rng.choice(_VERSIONS) if rng.random() < 0.8 else None,
                    cpe=random_cpe(rng, "o") if rng.random() < 0.8 else None,
                )
            )
            targets = (fw_ref,)
        elif roll < 0.75 and firmware_refs:
            # shared firmware: a second device running an existing image
            targets = (rng.choice(firmware_refs),)
        dependencies.append(DependencyEntry(ref=dev_ref, depends_on=targets))

        if with_services and rng.random() < 0.4:
            kind = rng.choice(list(ServiceKind))
            endpoints = ()
            if rng.random() < 0.5:
                endpoints = (f"mms://192.0.2.{rng.randrange(1, 255)}:102",)
            services.append(
                ServiceEntry(
                    bom_ref=f"service:{dev_name}:{kind.value}",
                    name=f"{dev_name} {kind.value}",
                    provider_ref=dev_ref,
                    kind=kind,
                    endpoints=endpoints,
                )
            )

    dependencies.insert(0, DependencyEntry(ref=substation.bom_ref, depends_on=tuple(device_refs)))

    return SubsBom(
        serial_number=f"urn:uuid:{uuid.UUID(int=rng.getrandbits(128), version=4)}",
        metadata=BomMetadata(
            timestamp="2024-01-01T00:00:00Z",
            component=substation,
            tools=(("subsbom", "0.1.0"),),
        ),
        components=tuple(components),
        services=tuple(services),
        dependencies=tuple(dependencies),
        version=rng.randrange(1, 4),
    )


def random_dataset(rng: random.Random) -> list[VulnRecord]:
    records = []
    for i in range(rng.randrange(0, 11)):
        records.append(
            VulnRecord(
                id=f"CVE-2020-{1000 + i}",
                criteria=tuple(random_criteria(rng) for _ in range(rng.randrange(1, 4))),
                severity=rng.choice(list(Severity)),
                cvss_score=round(rng.uniform(0, 10), 1) if rng.random() < 0.5 else None,
                summary="seeded record",
            )
        )
    return records


# --- independent scan oracle ------------------------------------------------

_CPE_ATTRS = (
    "part",
    "vendor",
    "product",
    "version",
    "update",
    "edition",
    "language",
    "sw_edition",
    "target_sw",
    "target_hw",
    "other",
)


def _oracle_match(target: CpeName, criteria: CpeName) -> bool:
    for attr in _CPE_ATTRS:
        wanted = getattr(criteria, attr)
        if wanted == "*":
            continue
        if wanted != getattr(target, attr):
            return False
    return True


def oracle_scan(bom: SubsBom, dataset: list[VulnRecord]) -> list[Finding]:
    """Brute-force reference: triple loop over (component, record, criteria)
    plus explicit propagation along device -> firmware dependency entries."""
    comps = [bom.metadata.component, *bom.components]
    by_ref = {c.bom_ref: c for c in comps}

    direct: set[tuple[str, str]] = set()
    for comp in comps:
        for record in dataset:
            for criteria in record.criteria:
                if comp.cpe is not None and _oracle_match(comp.cpe, criteria):
                    direct.add((comp.bom_ref, record.id))

    transitive: dict[tuple[str, str], str] = {}
    for entry in bom.dependencies:
        source = by_ref.get(entry.ref)
        if source is None or source.component_type is not ComponentType.DEVICE:
            continue
        for target in entry.depends_on:
            target_comp = by_ref.get(target)
            if target_comp is None or target_comp.component_type is not ComponentType.FIRMWARE:
                continue
            for ref, vuln_id in direct:
                if ref != target:
                    continue
                key = (entry.ref, vuln_id)
                if key in direct:
                    continue
                if key not in transitive or target < transitive[key]:
                    transitive[key] = target

    findings = [Finding(ref, vid, Provenance.DIRECT) for ref, vid in direct]
    findings += [
        Finding(ref, vid, Provenance.TRANSITIVE, via_ref=via)
        for (ref, vid), via in transitive.items()
    ]
    findings.sort(key=lambda f: (f.component_ref, f.vuln_id))
    return findings
