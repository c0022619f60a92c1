"""Typed in-memory model of the SCL subset needed to build a substation BOM.

Covers the document header, the substation section, one record per IED
(nameplate, service capabilities, access points, optional CPE annotations)
and the communication section. All types are immutable after construction
and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .cpe import CpeName


class DiagnosticSeverity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    """One validation or parse finding; diagnostics are data, never raised."""

    severity: DiagnosticSeverity
    code: str
    message: str
    path: str = ""


@dataclass(frozen=True)
class SclHeader:
    id: str
    version: str | None = None
    revision: str | None = None
    tool_id: str | None = None


@dataclass(frozen=True)
class SubstationInfo:
    name: str
    description: str | None = None


@dataclass(frozen=True)
class Nameplate:
    """Physical-device nameplate taken from the LPHD logical node.

    A nameplate always carries a vendor; every other attribute is optional.
    """

    vendor: str
    model: str | None = None
    sw_rev: str | None = None
    hw_rev: str | None = None
    ser_num: str | None = None
    location: str | None = None


class ServiceKind(str, Enum):
    GOOSE = "GOOSE"
    SMV = "SMV"
    REPORTING = "Reporting"
    MMS = "MMS"
    LOGGING = "Logging"
    FILE_TRANSFER = "FileTransfer"
    TIME_SYNC = "TimeSync"


@dataclass(frozen=True)
class ServiceCapabilities:
    flags: frozenset[ServiceKind] = frozenset()

    def sorted_flags(self) -> tuple[ServiceKind, ...]:
        """Flags in declaration order of ServiceKind, for deterministic output."""
        order = list(ServiceKind)
        return tuple(sorted(self.flags, key=order.index))


@dataclass(frozen=True)
class AccessPointInfo:
    ied_name: str
    ap_name: str
    ip: str | None = None
    gse_blocks: int = 0
    smv_blocks: int = 0

    def __post_init__(self) -> None:
        if self.gse_blocks < 0 or self.smv_blocks < 0:
            raise ValueError("block counts must be non-negative")


@dataclass(frozen=True)
class ControlBlockEntry:
    """One GSE or SMV control-block binding under a connected access point."""

    ld_inst: str
    cb_name: str
    mac: str | None = None
    app_id: str | None = None


@dataclass(frozen=True)
class ConnectedAccessPoint:
    ied_name: str
    ap_name: str
    address_params: tuple[tuple[str, str], ...] = ()
    gse_entries: tuple[ControlBlockEntry, ...] = ()
    smv_entries: tuple[ControlBlockEntry, ...] = ()

    def address(self, name: str) -> str | None:
        for key, value in self.address_params:
            if key == name:
                return value
        return None


@dataclass(frozen=True)
class IedRecord:
    name: str
    manufacturer_attr: str | None = None
    type_attr: str | None = None
    config_version: str | None = None
    nameplate: Nameplate | None = None
    service_caps: ServiceCapabilities = field(default_factory=ServiceCapabilities)
    access_points: tuple[AccessPointInfo, ...] = ()
    cpe_device: CpeName | None = None
    cpe_firmware: CpeName | None = None


@dataclass(frozen=True)
class SclDocument:
    header: SclHeader
    substation: SubstationInfo
    ieds: tuple[IedRecord, ...] = ()
    communication: tuple[ConnectedAccessPoint, ...] = ()
    # Warnings collected while parsing (bad CPE text, extra Substation
    # sections, ...); validate_document folds these into its result.
    diagnostics: tuple[Diagnostic, ...] = ()


def validate_document(doc: SclDocument) -> list[Diagnostic]:
    """Check a document for BOM-generation readiness.

    Returns parse-time diagnostics followed by structural findings, in a
    deterministic order. An empty list means fully well-formed; warnings
    (missing nameplate, no IEDs, dangling communication entries) do not
    block generation, errors do.
    """
    diags = list(doc.diagnostics)

    if not doc.header.id:
        diags.append(
            Diagnostic(
                DiagnosticSeverity.ERROR,
                "MISSING_HEADER_ID",
                "Header id is empty",
                "Header",
            )
        )

    seen: set[str] = set()
    for index, ied in enumerate(doc.ieds):
        path = f"IED[{ied.name or index}]"
        if not ied.name:
            diags.append(
                Diagnostic(
                    DiagnosticSeverity.ERROR,
                    "EMPTY_IED_NAME",
                    f"IED at position {index} has no name",
                    path,
                )
            )
            continue
        if ied.name in seen:
            diags.append(
                Diagnostic(
                    DiagnosticSeverity.ERROR,
                    "DUPLICATE_IED_NAME",
                    f"IED name {ied.name!r} occurs more than once",
                    path,
                )
            )
        seen.add(ied.name)

    if not doc.ieds:
        diags.append(
            Diagnostic(
                DiagnosticSeverity.WARNING,
                "NO_IEDS",
                "document contains no IED elements",
                "SCL",
            )
        )

    for ied in doc.ieds:
        if ied.nameplate is None and ied.name:
            diags.append(
                Diagnostic(
                    DiagnosticSeverity.WARNING,
                    "MISSING_LPHD",
                    f"IED {ied.name!r} has no LPHD nameplate; device fields fall back to IED attributes",
                    f"IED[{ied.name}]",
                )
            )

    names = {ied.name for ied in doc.ieds}
    for cap in doc.communication:
        if cap.ied_name not in names:
            diags.append(
                Diagnostic(
                    DiagnosticSeverity.WARNING,
                    "DANGLING_CONNECTED_AP",
                    f"ConnectedAP references unknown IED {cap.ied_name!r}",
                    f"Communication/ConnectedAP[{cap.ied_name}]",
                )
            )

    return diags
