"""Parse SCD/CID XML into the typed SCL document model.

Elements are matched by local name so that the SCL default namespace and
vendor namespaces do not matter. Input must be UTF-8; anything else is
rejected up front. CID files are treated exactly like SCD files (they are
simply single-IED documents).
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .cpe import CpeName, InvalidCpeString, parse_cpe
from .scl_model import (
    AccessPointInfo,
    ConnectedAccessPoint,
    ControlBlockEntry,
    Diagnostic,
    DiagnosticSeverity,
    IedRecord,
    Nameplate,
    SclDocument,
    SclHeader,
    ServiceCapabilities,
    ServiceKind,
    SubstationInfo,
)

DEFAULT_CPE_PRIVATE_TYPE = "subs-bom:cpe"

# Top-level children of SCL that strict mode accepts.
_KNOWN_TOP_LEVEL = {
    "Header",
    "Substation",
    "Communication",
    "IED",
    "DataTypeTemplates",
    "Private",
    "Text",
    "History",
    "Line",
    "Process",
}

# Services child element -> capability flag. MMS is additionally inferred
# from ClientServices or from the presence of a Server access point.
_SERVICE_ELEMENT_FLAGS = {
    "GOOSE": ServiceKind.GOOSE,
    "SMVsc": ServiceKind.SMV,
    "SMVSettings": ServiceKind.SMV,
    "ReportSettings": ServiceKind.REPORTING,
    "ConfReportControl": ServiceKind.REPORTING,
    "LogSettings": ServiceKind.LOGGING,
    "ConfLogControl": ServiceKind.LOGGING,
    "FileHandling": ServiceKind.FILE_TRANSFER,
    "TimeSyncProt": ServiceKind.TIME_SYNC,
    "ClientServices": ServiceKind.MMS,
}

_ENCODING_RE = re.compile(rb'encoding\s*=\s*["\']([^"\']+)["\']')


class ScdError(Exception):
    """Base class for SCD parsing failures."""


class MalformedXml(ScdError):
    pass


class NotScl(ScdError):
    pass


class StrictViolation(ScdError):
    pass


@dataclass(frozen=True)
class ParseOptions:
    strict: bool = False
    cpe_private_type: str = DEFAULT_CPE_PRIVATE_TYPE

    def __post_init__(self) -> None:
        if not self.cpe_private_type:
            raise ValueError("cpe_private_type must be non-empty")


def _local(tag: object) -> str:
    """Local name of an element tag, ignoring any namespace."""
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _children(element: ET.Element, name: str) -> list[ET.Element]:
    return [child for child in element if _local(child.tag) == name]


def _attr(element: ET.Element, name: str) -> str | None:
    value = element.get(name)
    if value is None:
        return None
    value = value.strip()
    return value or None


def _reject_non_utf8(data: bytes) -> None:
    if data.startswith(b"\xff\xfe") or data.startswith(b"\xfe\xff") or data.startswith(b"\x00"):
        raise MalformedXml("only UTF-8 input is supported")
    head = data[3:] if data.startswith(b"\xef\xbb\xbf") else data
    if head.lstrip().startswith(b"<?xml"):
        end = head.find(b">")
        declaration = head[: end + 1] if end >= 0 else head[:200]
        match = _ENCODING_RE.search(declaration)
        if match and match.group(1).lower().replace(b"-", b"") != b"utf8":
            raise MalformedXml(
                f"declared encoding {match.group(1).decode('ascii', 'replace')!r} is not UTF-8"
            )


def parse_scd(data: bytes, opts: ParseOptions | None = None) -> SclDocument:
    """Parse SCD/CID bytes into an SclDocument.

    Never crashes on arbitrary input: raises MalformedXml for anything that
    is not well-formed UTF-8 XML, NotScl when the root element is not SCL,
    and StrictViolation for unknown top-level elements in strict mode.
    Unknown elements are skipped otherwise.
    """
    opts = opts or ParseOptions()
    _reject_non_utf8(data)
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedXml(f"not well-formed XML: {exc}") from exc
    except ValueError as exc:
        raise MalformedXml(str(exc)) from exc

    if _local(root.tag) != "SCL":
        raise NotScl(f"root element is {_local(root.tag)!r}, expected 'SCL'")

    if opts.strict:
        for child in root:
            name = _local(child.tag)
            if name not in _KNOWN_TOP_LEVEL:
                raise StrictViolation(f"unknown top-level element {name!r}")

    diagnostics: list[Diagnostic] = []

    header_el = next(iter(_children(root, "Header")), None)
    if header_el is not None:
        header = SclHeader(
            id=_attr(header_el, "id") or "",
            version=_attr(header_el, "version"),
            revision=_attr(header_el, "revision"),
            tool_id=_attr(header_el, "toolId"),
        )
    else:
        header = SclHeader(id="")

    substation_els = _children(root, "Substation")
    if len(substation_els) > 1:
        diagnostics.append(
            Diagnostic(
                DiagnosticSeverity.WARNING,
                "MULTIPLE_SUBSTATIONS",
                f"{len(substation_els)} Substation sections found; using the first",
                "Substation",
            )
        )
    if substation_els:
        name = _attr(substation_els[0], "name") or f"substation-{header.id}"
        substation = SubstationInfo(name=name, description=_attr(substation_els[0], "desc"))
    else:
        substation = SubstationInfo(name=f"substation-{header.id}")

    communication = _parse_communication(root)

    ieds = []
    for ied_el in _children(root, "IED"):
        name = _attr(ied_el, "name") or ""
        device_cpe, firmware_cpe, cpe_diags = extract_cpes(ied_el, opts)
        diagnostics.extend(cpe_diags)
        caps, access_points = extract_services(ied_el, communication)
        ieds.append(
            IedRecord(
                name=name,
                manufacturer_attr=_attr(ied_el, "manufacturer"),
                type_attr=_attr(ied_el, "type"),
                config_version=_attr(ied_el, "configVersion"),
                nameplate=extract_nameplate(ied_el),
                service_caps=caps,
                access_points=access_points,
                cpe_device=device_cpe,
                cpe_firmware=firmware_cpe,
            )
        )

    return SclDocument(
        header=header,
        substation=substation,
        ieds=tuple(ieds),
        communication=communication,
        diagnostics=tuple(diagnostics),
    )


def extract_nameplate(ied_el: ET.Element) -> Nameplate | None:
    """Pull the device nameplate out of the first LPHD logical node.

    Reads the DAI values under DOI name="PhyNam": vendor, model (also
    accepted under the name "mdl"), swRev, hwRev, serNum and location.
    Returns None when no LPHD exists, or when it carries no vendor (a
    nameplate without a vendor is not usable).
    """
    lphd = None
    for element in ied_el.iter():
        if _local(element.tag) in ("LN", "LN0") and element.get("lnClass") == "LPHD":
            lphd = element
            break
    if lphd is None:
        return None

    values: dict[str, str] = {}
    for doi in _children(lphd, "DOI"):
        if doi.get("name") != "PhyNam":
            continue
        for dai in _children(doi, "DAI"):
            dai_name = dai.get("name")
            if dai_name in ("model", "mdl"):
                dai_name = "model"
            if dai_name not in ("vendor", "model", "swRev", "hwRev", "serNum", "location"):
                continue
            if dai_name in values:
                continue
            val_el = next(iter(_children(dai, "Val")), None)
            if val_el is None:
                continue
            text = (val_el.text or "").strip()
            if text:
                values[dai_name] = text
        break

    if "vendor" not in values:
        return None
    return Nameplate(
        vendor=values["vendor"],
        model=values.get("model"),
        sw_rev=values.get("swRev"),
        hw_rev=values.get("hwRev"),
        ser_num=values.get("serNum"),
        location=values.get("location"),
    )


def extract_cpes(
    ied_el: ET.Element, opts: ParseOptions
) -> tuple[CpeName | None, CpeName | None, list[Diagnostic]]:
    """Read CPE annotations from Private children of an IED element.

    A Private element whose type attribute equals opts.cpe_private_type must
    contain a CPE 2.3 formatted string: part "h" fills the device slot, part
    "o" or "a" the firmware slot. The first value per slot wins; later ones
    and unparseable strings are reported as warning diagnostics.
    """
    ied_name = _attr(ied_el, "name") or "?"
    device_cpe: CpeName | None = None
    firmware_cpe: CpeName | None = None
    diags: list[Diagnostic] = []
    path = f"IED[{ied_name}]/Private"

    for private in _children(ied_el, "Private"):
        if private.get("type") != opts.cpe_private_type:
            continue
        text = (private.text or "").strip()
        try:
            cpe = parse_cpe(text)
        except InvalidCpeString as exc:
            diags.append(
                Diagnostic(DiagnosticSeverity.WARNING, "INVALID_CPE", str(exc), path)
            )
            continue
        if cpe.part == "h":
            slot = "device"
        elif cpe.part in ("o", "a"):
            slot = "firmware"
        else:
            diags.append(
                Diagnostic(
                    DiagnosticSeverity.WARNING,
                    "INVALID_CPE",
                    f"CPE part {cpe.part!r} binds to no slot (need h, o, or a)",
                    path,
                )
            )
            continue
        if slot == "device":
            if device_cpe is None:
                device_cpe = cpe
            else:
                diags.append(
                    Diagnostic(
                        DiagnosticSeverity.WARNING,
                        "DUPLICATE_CPE",
                        f"second device CPE for IED {ied_name!r} ignored",
                        path,
                    )
                )
        else:
            if firmware_cpe is None:
                firmware_cpe = cpe
            else:
                diags.append(
                    Diagnostic(
                        DiagnosticSeverity.WARNING,
                        "DUPLICATE_CPE",
                        f"second firmware CPE for IED {ied_name!r} ignored",
                        path,
                    )
                )
    return device_cpe, firmware_cpe, diags


def extract_services(
    ied_el: ET.Element, communication: tuple[ConnectedAccessPoint, ...]
) -> tuple[ServiceCapabilities, tuple[AccessPointInfo, ...]]:
    """Derive service capabilities and access-point data for one IED.

    Capability flags come from the children of any Services element in the
    IED subtree; MMS is also implied by a Server access point. Access-point
    entries are built from the ConnectedAP records matching the IED name,
    counting GSE/SMV control blocks and picking up the IP address parameter.
    """
    flags: set[ServiceKind] = set()
    for element in ied_el.iter():
        name = _local(element.tag)
        if name == "Services":
            for child in element:
                flag = _SERVICE_ELEMENT_FLAGS.get(_local(child.tag))
                if flag is not None:
                    flags.add(flag)
        elif name == "Server":
            flags.add(ServiceKind.MMS)

    ied_name = _attr(ied_el, "name") or ""
    access_points = tuple(
        AccessPointInfo(
            ied_name=cap.ied_name,
            ap_name=cap.ap_name,
            ip=cap.address("IP"),
            gse_blocks=len(cap.gse_entries),
            smv_blocks=len(cap.smv_entries),
        )
        for cap in communication
        if cap.ied_name == ied_name
    )
    return ServiceCapabilities(flags=frozenset(flags)), access_points


def _parse_address_params(element: ET.Element) -> tuple[tuple[str, str], ...]:
    params: list[tuple[str, str]] = []
    seen: set[str] = set()
    for address in _children(element, "Address"):
        for p in _children(address, "P"):
            p_type = p.get("type")
            text = (p.text or "").strip()
            if p_type and text and p_type not in seen:
                params.append((p_type, text))
                seen.add(p_type)
    return tuple(params)


def _parse_control_blocks(cap_el: ET.Element, kind: str) -> tuple[ControlBlockEntry, ...]:
    entries = []
    for block in _children(cap_el, kind):
        params = dict(_parse_address_params(block))
        entries.append(
            ControlBlockEntry(
                ld_inst=block.get("ldInst") or "",
                cb_name=block.get("cbName") or "",
                mac=params.get("MAC-Address"),
                app_id=params.get("APPID"),
            )
        )
    return tuple(entries)


def _parse_communication(root: ET.Element) -> tuple[ConnectedAccessPoint, ...]:
    connected = []
    for comm in _children(root, "Communication"):
        for subnet in _children(comm, "SubNetwork"):
            for cap_el in _children(subnet, "ConnectedAP"):
                connected.append(
                    ConnectedAccessPoint(
                        ied_name=cap_el.get("iedName") or "",
                        ap_name=cap_el.get("apName") or "",
                        address_params=_parse_address_params(cap_el),
                        gse_entries=_parse_control_blocks(cap_el, "GSE"),
                        smv_entries=_parse_control_blocks(cap_el, "SMV"),
                    )
                )
    return tuple(connected)
