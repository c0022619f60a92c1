"""Correlate BOM components against a local vulnerability dataset.

Matching is CPE-based: a component with a CPE is directly affected by every
record whose match criteria it satisfies. Because firmware runs on a device,
every direct firmware finding additionally propagates to the device(s)
depending on that firmware as a transitive finding. The dataset is a local
JSON file; no network feeds are consulted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .bom_model import Component, ComponentType, SubsBom, dependency_graph
from .cpe import CpeName, InvalidCpeString, cpe_matches, parse_cpe


class MalformedDataset(Exception):
    pass


class DuplicateVulnId(MalformedDataset):
    pass


class Severity(str, Enum):
    NONE = "none"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"

    @property
    def rank(self) -> int:
        return list(Severity).index(self)


class Provenance(str, Enum):
    DIRECT = "direct"
    TRANSITIVE = "transitive"


@dataclass(frozen=True)
class VulnRecord:
    id: str
    criteria: tuple[CpeName, ...]
    severity: Severity
    cvss_score: float | None = None
    summary: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("vulnerability id must be non-empty")
        if self.cvss_score is not None and not 0.0 <= self.cvss_score <= 10.0:
            raise ValueError(f"cvss score {self.cvss_score} outside [0.0, 10.0]")


@dataclass(frozen=True)
class Finding:
    component_ref: str
    vuln_id: str
    provenance: Provenance
    via_ref: str | None = None

    def __post_init__(self) -> None:
        if self.provenance is Provenance.TRANSITIVE:
            if not self.via_ref or self.via_ref == self.component_ref:
                raise ValueError("transitive findings need a distinct via_ref")


@dataclass(frozen=True)
class ReportRow:
    component_name: str
    vuln_id: str
    severity: Severity
    provenance: Provenance


@dataclass(frozen=True)
class ScanReport:
    substation: str
    affected_components: int
    distinct_vulns: int
    max_severity: Severity | None
    rows: tuple[ReportRow, ...]


def load_dataset(data: bytes) -> list[VulnRecord]:
    """Parse a vulnerability dataset file.

    Format: JSON array of objects with keys id, criteria (CPE 2.3 formatted
    strings), severity, and optional cvssScore and summary.
    """
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDataset(str(exc)) from exc
    if not isinstance(raw, list):
        raise MalformedDataset("dataset must be a JSON array")

    records = []
    seen: set[str] = set()
    for i, obj in enumerate(raw):
        where = f"record[{i}]"
        if not isinstance(obj, dict):
            raise MalformedDataset(f"{where}: must be an object")
        vuln_id = obj.get("id")
        if not isinstance(vuln_id, str) or not vuln_id:
            raise MalformedDataset(f"{where}: id is required")
        if vuln_id in seen:
            raise DuplicateVulnId(f"duplicate vulnerability id {vuln_id!r}")
        seen.add(vuln_id)

        criteria_raw = obj.get("criteria", [])
        if not isinstance(criteria_raw, list):
            raise MalformedDataset(f"{where}: criteria must be an array")
        try:
            criteria = tuple(parse_cpe(str(c)) for c in criteria_raw)
        except InvalidCpeString as exc:
            raise MalformedDataset(f"{where}: {exc}") from exc

        try:
            severity = Severity(obj.get("severity"))
        except ValueError:
            raise MalformedDataset(
                f"{where}: severity must be one of {[s.value for s in Severity]}"
            ) from None

        cvss = obj.get("cvssScore")
        if cvss is not None and not isinstance(cvss, (int, float)):
            raise MalformedDataset(f"{where}: cvssScore must be a number")
        try:
            records.append(
                VulnRecord(
                    id=vuln_id,
                    criteria=criteria,
                    severity=severity,
                    cvss_score=float(cvss) if cvss is not None else None,
                    summary=str(obj.get("summary", "")),
                )
            )
        except ValueError as exc:
            raise MalformedDataset(f"{where}: {exc}") from exc
    return records


def scan(bom: SubsBom, dataset: list[VulnRecord]) -> list[Finding]:
    """Match every component CPE against the dataset.

    Direct findings come from CPE matches; each direct finding on a firmware
    component also yields a transitive finding on every device depending on
    it. Findings are deduplicated per (component, vulnerability) with direct
    provenance winning, and sorted by (component_ref, vuln_id).
    """
    graph = dependency_graph(bom)
    components: dict[str, Component] = {c.bom_ref: c for c in bom.all_components()}

    direct: dict[tuple[str, str], Finding] = {}
    for ref, comp in components.items():
        if comp.cpe is None:
            continue
        for record in dataset:
            if any(cpe_matches(comp.cpe, crit) for crit in record.criteria):
                direct[(ref, record.id)] = Finding(ref, record.id, Provenance.DIRECT)

    transitive: dict[tuple[str, str], Finding] = {}
    for (firmware_ref, vuln_id), _ in sorted(direct.items()):
        if components[firmware_ref].component_type is not ComponentType.FIRMWARE:
            continue
        parents = [
            ref
            for ref, targets in graph.items()
            if firmware_ref in targets
            and components[ref].component_type is ComponentType.DEVICE
        ]
        for parent in sorted(parents):
            key = (parent, vuln_id)
            if key in direct:
                continue
            existing = transitive.get(key)
            # Several firmware components may induce the same finding; keep
            # the lexicographically smallest via_ref for determinism.
            if existing is None or firmware_ref < (existing.via_ref or ""):
                transitive[key] = Finding(
                    parent, vuln_id, Provenance.TRANSITIVE, via_ref=firmware_ref
                )

    findings = list(direct.values()) + list(transitive.values())
    findings.sort(key=lambda f: (f.component_ref, f.vuln_id))
    return findings


def summarize(
    findings: list[Finding], bom: SubsBom, dataset: list[VulnRecord]
) -> ScanReport:
    """Roll findings up into a per-substation report."""
    severity_by_id = {record.id: record.severity for record in dataset}
    rows = []
    for finding in findings:
        comp = bom.component_by_ref(finding.component_ref)
        rows.append(
            ReportRow(
                component_name=comp.name if comp else finding.component_ref,
                vuln_id=finding.vuln_id,
                severity=severity_by_id.get(finding.vuln_id, Severity.NONE),
                provenance=finding.provenance,
            )
        )
    max_severity = None
    if rows:
        max_severity = max((row.severity for row in rows), key=lambda s: s.rank)
    return ScanReport(
        substation=bom.metadata.component.name,
        affected_components=len({f.component_ref for f in findings}),
        distinct_vulns=len({f.vuln_id for f in findings}),
        max_severity=max_severity,
        rows=tuple(rows),
    )
