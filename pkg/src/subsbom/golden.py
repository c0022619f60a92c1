"""Golden-corpus runner.

Each corpus case is a directory holding ``input.scd`` plus any of:
``expected.diag.json`` (list of {severity, code} entries, or a single
{error: CODE} object for inputs that must fail to parse),
``expected.bom.json`` (byte-exact compat-mode BOM generated with the pinned
serial/timestamp below), ``dataset.json`` and ``expected.findings.json``
(structural comparison of scan results).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .mapper import MapOptions, map_document
from .scl_model import validate_document
from .scl_parser import MalformedXml, NotScl, ParseOptions, ScdError, parse_scd
from .serializer import MODE_COMPAT, SerializeOptions, to_json
from .vulnscan import load_dataset, scan

GOLDEN_SERIAL = "urn:uuid:00000000-0000-4000-8000-000000000000"
GOLDEN_TIMESTAMP = "2024-01-01T00:00:00Z"

_PARSE_ERROR_CODES = {
    MalformedXml: "MALFORMED_XML",
    NotScl: "NOT_SCL",
}


@dataclass(frozen=True)
class FixtureCase:
    name: str
    input_path: Path
    expected_bom_path: Path | None = None
    expected_diag_path: Path | None = None
    dataset_path: Path | None = None
    expected_findings_path: Path | None = None


@dataclass(frozen=True)
class CaseResult:
    name: str
    passed: bool
    details: tuple[str, ...] = ()


@dataclass(frozen=True)
class SuiteReport:
    results: tuple[CaseResult, ...]

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def summary(self) -> str:
        lines = []
        for result in self.results:
            status = "PASS" if result.passed else "FAIL"
            lines.append(f"{status} {result.name}")
            lines.extend(f"  {detail}" for detail in result.details)
        return "\n".join(lines)


def discover_cases(corpus_dir: str | Path) -> list[FixtureCase]:
    cases = []
    for case_dir in sorted(Path(corpus_dir).iterdir()):
        input_path = case_dir / "input.scd"
        if not input_path.is_file():
            continue

        def optional(filename: str) -> Path | None:
            path = case_dir / filename
            return path if path.is_file() else None

        cases.append(
            FixtureCase(
                name=case_dir.name,
                input_path=input_path,
                expected_bom_path=optional("expected.bom.json"),
                expected_diag_path=optional("expected.diag.json"),
                dataset_path=optional("dataset.json"),
                expected_findings_path=optional("expected.findings.json"),
            )
        )
    return cases


def golden_serialize_options() -> SerializeOptions:
    return SerializeOptions(
        mode=MODE_COMPAT,
        pinned_serial=GOLDEN_SERIAL,
        pinned_timestamp=GOLDEN_TIMESTAMP,
    )


def run_case(case: FixtureCase) -> CaseResult:
    details: list[str] = []
    data = case.input_path.read_bytes()

    expected_diag = None
    if case.expected_diag_path is not None:
        expected_diag = json.loads(case.expected_diag_path.read_text(encoding="utf-8"))

    try:
        doc = parse_scd(data, ParseOptions())
    except ScdError as exc:
        code = _PARSE_ERROR_CODES.get(type(exc), "PARSE_ERROR")
        if expected_diag != {"error": code}:
            details.append(f"unexpected parse failure {code}: {exc}")
        return CaseResult(case.name, not details, tuple(details))

    if isinstance(expected_diag, dict):
        details.append(f"expected parse error {expected_diag.get('error')!r}, parse succeeded")

    diagnostics = validate_document(doc)
    if isinstance(expected_diag, list):
        actual = [{"severity": d.severity.value, "code": d.code} for d in diagnostics]
        if actual != expected_diag:
            details.append(f"diagnostics mismatch: expected {expected_diag}, got {actual}")

    has_errors = any(d.severity.value == "error" for d in diagnostics)
    bom = None
    if not has_errors:
        bom = map_document(doc, MapOptions())
        if case.expected_bom_path is not None:
            produced = to_json(bom, golden_serialize_options())
            expected = case.expected_bom_path.read_bytes()
            if produced != expected:
                details.append("generated BOM differs from golden file")
    elif case.expected_bom_path is not None:
        details.append("document has error diagnostics; golden BOM not comparable")

    if case.dataset_path is not None and bom is not None:
        dataset = load_dataset(case.dataset_path.read_bytes())
        findings = scan(bom, dataset)
        actual_findings = []
        for finding in findings:
            entry = {
                "componentRef": finding.component_ref,
                "vulnId": finding.vuln_id,
                "provenance": finding.provenance.value,
            }
            if finding.via_ref:
                entry["viaRef"] = finding.via_ref
            actual_findings.append(entry)
        if case.expected_findings_path is not None:
            expected_findings = json.loads(
                case.expected_findings_path.read_text(encoding="utf-8")
            )
            if actual_findings != expected_findings:
                details.append(
                    f"findings mismatch: expected {expected_findings}, got {actual_findings}"
                )

    return CaseResult(case.name, not details, tuple(details))


def run_golden_suite(corpus_dir: str | Path) -> SuiteReport:
    return SuiteReport(results=tuple(run_case(c) for c in discover_cases(corpus_dir)))
