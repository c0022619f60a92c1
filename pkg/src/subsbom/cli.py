"""Command-line frontend.

Subcommands: ``generate`` (SCD -> BOM), ``scan`` (BOM x dataset -> report),
``merge`` (manually modeled auxiliary equipment into an existing BOM) and
``fleet`` (store and bulk-scan BOMs for many substations).

Exit codes: 0 success / no findings, 1 input or processing error, 2 usage
error, 3 findings present (so pipelines can gate on scan results).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .bom_model import (
    ComponentType,
    DanglingRef,
    DependencyEntry,
    InvalidBom,
    SubsBom,
    check_bom,
)
from .fleet import FleetStore, NameCollision, scan_all
from .mapper import MapOptions, map_document
from .scl_model import DiagnosticSeverity, validate_document
from .scl_parser import DEFAULT_CPE_PRIVATE_TYPE, ParseOptions, ScdError, parse_scd
from .serializer import (
    MODE_COMPAT,
    MODE_EXTENDED,
    MalformedJson,
    SerializeOptions,
    UnsupportedSpecVersion,
    read_component,
    from_json,
    to_json,
)
from .vulnscan import (
    Finding,
    MalformedDataset,
    ScanReport,
    load_dataset,
    scan,
    summarize,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_FINDINGS = 3

_INPUT_ERRORS = (
    OSError,
    ScdError,
    InvalidBom,
    DanglingRef,
    MalformedJson,
    UnsupportedSpecVersion,
    MalformedDataset,
    NameCollision,
    KeyError,
    ValueError,
)


class RefCollision(Exception):
    pass


class InvalidComponentType(Exception):
    pass


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


def _serial_arg(value: str) -> str:
    from .bom_model import SERIAL_RE

    if not SERIAL_RE.match(value):
        raise argparse.ArgumentTypeError(f"{value!r} is not a urn:uuid serial number")
    return value


def _add_generate_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode", choices=(MODE_EXTENDED, MODE_COMPAT), default=MODE_EXTENDED,
        help="extended keeps the substation component type; compat downgrades it for strict consumers",
    )
    parser.add_argument(
        "--no-synth-cpe", action="store_true",
        help="do not synthesize ad-hoc CPEs from nameplate data",
    )
    parser.add_argument(
        "--cpe-private-type", default=DEFAULT_CPE_PRIVATE_TYPE, metavar="TEXT",
        help="type attribute marking CPE Private elements (default %(default)s)",
    )
    parser.add_argument(
        "--pin-serial", type=_serial_arg, metavar="URN",
        help="use this urn:uuid serial number instead of a random one",
    )
    parser.add_argument(
        "--pin-timestamp", metavar="ISO8601",
        help="use this timestamp instead of the current UTC time",
    )
    parser.add_argument("--name", metavar="TEXT", help="override the substation name")
    parser.add_argument(
        "--strict", action="store_true",
        help="reject unknown top-level SCL elements instead of skipping them",
    )


def _generate(args: argparse.Namespace) -> tuple[bytes, str] | None:
    """Run the parse -> validate -> map -> serialize pipeline.

    Returns (bom bytes, substation name), or None after printing errors.
    """
    data = Path(args.scd).read_bytes()
    doc = parse_scd(
        data,
        ParseOptions(strict=args.strict, cpe_private_type=args.cpe_private_type),
    )
    diagnostics = validate_document(doc)
    for diag in diagnostics:
        location = f" [{diag.path}]" if diag.path else ""
        print(f"{diag.severity.value} {diag.code}{location}: {diag.message}", file=sys.stderr)
    if any(d.severity is DiagnosticSeverity.ERROR for d in diagnostics):
        return None

    bom = map_document(
        doc,
        MapOptions(
            synthesize_cpe=not args.no_synth_cpe,
            substation_name_override=args.name,
        ),
    )
    payload = to_json(
        bom,
        SerializeOptions(
            mode=args.mode,
            pinned_serial=args.pin_serial,
            pinned_timestamp=args.pin_timestamp,
        ),
    )
    return payload, bom.metadata.component.name


def _write_output(path: str, payload: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(payload)
    else:
        Path(path).write_bytes(payload)


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        result = _generate(args)
        if result is None:
            return EXIT_ERROR
        _write_output(args.out, result[0])
    except _INPUT_ERRORS as exc:
        return _fail(str(exc))
    return EXIT_OK


def _report_json(report: ScanReport, findings: list[Finding] | None = None) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "substation": report.substation,
        "affectedComponents": report.affected_components,
        "distinctVulns": report.distinct_vulns,
        "maxSeverity": report.max_severity.value if report.max_severity else None,
        "findings": [
            {
                "componentName": row.component_name,
                "vulnId": row.vuln_id,
                "severity": row.severity.value,
                "provenance": row.provenance.value,
            }
            for row in report.rows
        ],
    }
    if findings is not None:
        for entry, finding in zip(obj["findings"], findings):
            entry["componentRef"] = finding.component_ref
            if finding.via_ref:
                entry["viaRef"] = finding.via_ref
    return obj


def _format_report(report: ScanReport) -> str:
    lines = [
        f"substation: {report.substation}",
        f"affected components: {report.affected_components}"
        f"  distinct vulnerabilities: {report.distinct_vulns}"
        f"  max severity: {report.max_severity.value if report.max_severity else '-'}",
    ]
    if report.rows:
        headers = ("COMPONENT", "VULNERABILITY", "SEVERITY", "PROVENANCE")
        table = [
            (row.component_name, row.vuln_id, row.severity.value, row.provenance.value)
            for row in report.rows
        ]
        widths = [
            max(len(headers[i]), *(len(row[i]) for row in table)) for i in range(4)
        ]
        lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
        for row in table:
            lines.append(
                "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
            )
    return "\n".join(lines)


def cmd_scan(args: argparse.Namespace) -> int:
    try:
        bom = from_json(Path(args.bom).read_bytes())
        dataset = load_dataset(Path(args.dataset).read_bytes())
        findings = scan(bom, dataset)
        report = summarize(findings, bom, dataset)
    except _INPUT_ERRORS as exc:
        return _fail(str(exc))

    if args.json:
        print(json.dumps(_report_json(report, findings), indent=2))
    else:
        print(_format_report(report))
    return EXIT_FINDINGS if findings else EXIT_OK


def merge_extra_components(bom: SubsBom, extras: Any) -> SubsBom:
    """Attach manually modeled components (firewalls, SCADA PCs, ...) to an
    existing BOM.

    ``extras`` is either a JSON array of device/firmware component objects,
    or an object with "components" plus optional "dependencies" declaring
    device -> firmware edges. New devices (and firmware left untargeted by a
    declared edge) hang off the substation node.
    """
    if isinstance(extras, list):
        component_objs, dependency_objs = extras, []
    elif isinstance(extras, dict):
        component_objs = extras.get("components", [])
        dependency_objs = extras.get("dependencies", [])
    else:
        raise InvalidBom("extras must be a JSON array or object")

    new_components = [
        read_component(obj, f"extras[{i}]") for i, obj in enumerate(component_objs)
    ]
    for comp in new_components:
        if comp.component_type is ComponentType.SUBSTATION:
            raise InvalidComponentType(
                f"extra component {comp.bom_ref!r} may not have type substation"
            )

    used_refs = {c.bom_ref for c in bom.all_components()}
    used_refs |= {s.bom_ref for s in bom.services}
    for comp in new_components:
        if comp.bom_ref in used_refs:
            raise RefCollision(f"bom_ref {comp.bom_ref!r} already exists")
        used_refs.add(comp.bom_ref)

    merged = {c.bom_ref: c for c in (*bom.all_components(), *new_components)}

    declared: list[DependencyEntry] = []
    for i, obj in enumerate(dependency_objs):
        if not isinstance(obj, dict) or "ref" not in obj:
            raise InvalidBom(f"extras dependencies[{i}]: malformed entry")
        ref = str(obj["ref"])
        targets = tuple(str(t) for t in obj.get("dependsOn", []))
        source = merged.get(ref)
        if source is None:
            raise DanglingRef(f"declared dependency ref {ref!r} does not resolve")
        if source.component_type is not ComponentType.DEVICE:
            raise InvalidComponentType(f"declared dependency ref {ref!r} is not a device")
        for target in targets:
            target_comp = merged.get(target)
            if target_comp is None:
                raise DanglingRef(f"declared dependency target {target!r} does not resolve")
            if target_comp.component_type is not ComponentType.FIRMWARE:
                raise InvalidComponentType(
                    f"declared dependency target {target!r} is not firmware"
                )
        declared.append(DependencyEntry(ref=ref, depends_on=targets))

    targeted = {t for entry in declared for t in entry.depends_on}
    attach = [
        comp.bom_ref
        for comp in new_components
        if comp.component_type is ComponentType.DEVICE or comp.bom_ref not in targeted
    ]

    substation_ref = bom.metadata.component.bom_ref
    entries = list(bom.dependencies)
    index = {entry.ref: i for i, entry in enumerate(entries)}

    def extend(ref: str, extra_targets: Sequence[str]) -> None:
        if ref in index:
            entry = entries[index[ref]]
            fresh = [t for t in extra_targets if t not in entry.depends_on]
            entries[index[ref]] = DependencyEntry(
                ref=ref, depends_on=entry.depends_on + tuple(fresh)
            )
        else:
            index[ref] = len(entries)
            entries.append(DependencyEntry(ref=ref, depends_on=tuple(extra_targets)))

    extend(substation_ref, attach)
    for entry in declared:
        extend(entry.ref, entry.depends_on)
    for comp in new_components:
        if comp.component_type is ComponentType.DEVICE:
            extend(comp.bom_ref, ())

    merged_bom = SubsBom(
        serial_number=bom.serial_number,
        metadata=bom.metadata,
        components=bom.components + tuple(new_components),
        services=bom.services,
        dependencies=tuple(entries),
        version=bom.version,
    )
    check_bom(merged_bom)
    return merged_bom


def cmd_merge(args: argparse.Namespace) -> int:
    try:
        bom = from_json(Path(args.bom).read_bytes())
        try:
            extras = json.loads(Path(args.extras).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedJson(str(exc)) from exc
        merged = merge_extra_components(bom, extras)
        payload = to_json(merged, SerializeOptions(mode=args.mode))
        _write_output(args.out, payload)
    except (RefCollision, InvalidComponentType, *_INPUT_ERRORS) as exc:
        return _fail(str(exc))
    return EXIT_OK


def cmd_fleet(args: argparse.Namespace) -> int:
    store = FleetStore(args.root)
    try:
        if args.fleet_command == "add":
            result = _generate(args)
            if result is None:
                return EXIT_ERROR
            payload, name = result
            entry = store.add(name, payload, force=args.force)
            print(f"stored {entry.name} ({entry.components} components) as {entry.file}")
            return EXIT_OK

        if args.fleet_command == "list":
            for entry in store.list():
                print(
                    f"{entry.name}  components={entry.components}  digest={entry.digest[:12]}"
                )
            return EXIT_OK

        if args.fleet_command == "scan-all":
            dataset = load_dataset(Path(args.dataset).read_bytes())
            reports = scan_all(store, dataset)
            if args.json:
                print(json.dumps([_report_json(r) for r in reports], indent=2))
            else:
                print("\n\n".join(_format_report(r) for r in reports))
            return EXIT_FINDINGS if any(r.rows for r in reports) else EXIT_OK

        if args.fleet_command == "remove":
            if not store.remove(args.name):
                return _fail(f"substation {args.name!r} not in fleet")
            return EXIT_OK
    except _INPUT_ERRORS as exc:
        return _fail(str(exc))
    raise AssertionError(f"unhandled fleet command {args.fleet_command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subsbom",
        description="Generate substation BOMs from IEC 61850 SCD files and correlate them against a vulnerability dataset.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="parse an SCD file and write its BOM")
    p_gen.add_argument("scd", help="SCD/CID input file")
    p_gen.add_argument("out", help="output BOM path ('-' for stdout)")
    _add_generate_flags(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_scan = sub.add_parser("scan", help="correlate a BOM against a vulnerability dataset")
    p_scan.add_argument("bom", help="BOM JSON file")
    p_scan.add_argument("dataset", help="vulnerability dataset JSON file")
    p_scan.add_argument("--json", action="store_true", help="machine-readable output")
    p_scan.set_defaults(func=cmd_scan)

    p_merge = sub.add_parser(
        "merge", help="add manually modeled components to an existing BOM"
    )
    p_merge.add_argument("bom", help="BOM JSON file")
    p_merge.add_argument("extras", help="JSON file with extra components")
    p_merge.add_argument("out", help="output BOM path ('-' for stdout)")
    p_merge.add_argument(
        "--mode", choices=(MODE_EXTENDED, MODE_COMPAT), default=MODE_EXTENDED
    )
    p_merge.set_defaults(func=cmd_merge)

    p_fleet = sub.add_parser("fleet", help="manage BOMs for multiple substations")
    fleet_sub = p_fleet.add_subparsers(dest="fleet_command", required=True)

    pf_add = fleet_sub.add_parser("add", help="generate from an SCD file and store")
    pf_add.add_argument("scd", help="SCD/CID input file")
    pf_add.add_argument("--root", default="fleet", help="fleet directory (default %(default)s)")
    pf_add.add_argument("--force", action="store_true", help="replace an existing entry")
    _add_generate_flags(pf_add)
    pf_add.set_defaults(func=cmd_fleet)

    pf_list = fleet_sub.add_parser("list", help="list stored substations")
    pf_list.add_argument("--root", default="fleet")
    pf_list.set_defaults(func=cmd_fleet)

    pf_scan = fleet_sub.add_parser("scan-all", help="scan every stored substation")
    pf_scan.add_argument("dataset", help="vulnerability dataset JSON file")
    pf_scan.add_argument("--root", default="fleet")
    pf_scan.add_argument("--json", action="store_true")
    pf_scan.set_defaults(func=cmd_fleet)

    pf_remove = fleet_sub.add_parser("remove", help="remove a stored substation")
    pf_remove.add_argument("name", help="substation name")
    pf_remove.add_argument("--root", default="fleet")
    pf_remove.set_defaults(func=cmd_fleet)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
