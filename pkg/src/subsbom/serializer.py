"""CycloneDX v1.6 JSON emission, ingestion, and schema validation.

Two output modes: ``extended`` writes the metadata component with the
non-standard type "substation"; ``compat`` downgrades it to "device" and
records the real type in the property ``subs-bom:componentType`` so strict
CycloneDX consumers accept the file. Output keys follow schema order and
absent optional fields are omitted (never null), so serialization is
byte-deterministic given a pinned serial number and timestamp.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any

from jsonschema import Draft7Validator
from referencing import Registry, Resource

from .bom_model import (
    COMPONENT_TYPE_PROPERTY,
    SERIAL_RE,
    BomMetadata,
    Component,
    ComponentType,
    DependencyEntry,
    InvalidBom,
    ServiceEntry,
    SubsBom,
    check_bom,
)
from .cpe import InvalidCpeString, parse_cpe
from .scl_model import ServiceKind

logger = logging.getLogger(__name__)

MODE_EXTENDED = "extended"
MODE_COMPAT = "compat"

PROVIDER_REF_PROPERTY = "subs-bom:providerRef"
SERVICE_KIND_PROPERTY = "subs-bom:serviceKind"

_SCHEMA_FILES = {
    "bom": "bom-1.6.schema.json",
    "spdx": "spdx.schema.json",
    "jsf": "jsf-0.82.schema.json",
}

_KNOWN_TOP_KEYS = {
    "$schema",
    "bomFormat",
    "specVersion",
    "serialNumber",
    "version",
    "metadata",
    "components",
    "services",
    "dependencies",
}
_KNOWN_COMPONENT_KEYS = {"type", "bom-ref", "manufacturer", "name", "version", "cpe", "properties"}
_KNOWN_SERVICE_KEYS = {"bom-ref", "name", "endpoints", "properties"}


class MalformedJson(Exception):
    pass


class UnsupportedSpecVersion(Exception):
    pass


@dataclass(frozen=True)
class SchemaViolation:
    path: str
    message: str


@dataclass(frozen=True)
class SerializeOptions:
    mode: str = MODE_EXTENDED
    pretty: bool = True
    pinned_serial: str | None = None
    pinned_timestamp: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in (MODE_EXTENDED, MODE_COMPAT):
            raise ValueError(f"mode must be {MODE_EXTENDED!r} or {MODE_COMPAT!r}")
        if self.pinned_serial is not None and not SERIAL_RE.match(self.pinned_serial):
            raise ValueError(f"pinned serial {self.pinned_serial!r} is not a urn:uuid")


def _properties_obj(properties: tuple[tuple[str, str], ...]) -> list[dict[str, str]]:
    return [{"name": name, "value": value} for name, value in properties]


def _component_obj(comp: Component, mode: str) -> dict[str, Any]:
    comp_type = comp.component_type.value
    properties = list(comp.properties)
    if comp.component_type is ComponentType.SUBSTATION and mode == MODE_COMPAT:
        comp_type = ComponentType.DEVICE.value
        properties.append((COMPONENT_TYPE_PROPERTY, ComponentType.SUBSTATION.value))

    obj: dict[str, Any] = {"type": comp_type, "bom-ref": comp.bom_ref}
    if comp.manufacturer is not None:
        obj["manufacturer"] = {"name": comp.manufacturer}
    obj["name"] = comp.name
    if comp.version is not None:
        obj["version"] = comp.version
    if comp.cpe is not None:
        obj["cpe"] = comp.cpe.format()
    if properties:
        obj["properties"] = _properties_obj(tuple(properties))
    return obj


def _service_obj(service: ServiceEntry) -> dict[str, Any]:
    obj: dict[str, Any] = {"bom-ref": service.bom_ref, "name": service.name}
    if service.endpoints:
        obj["endpoints"] = list(service.endpoints)
    obj["properties"] = _properties_obj(
        (
            (PROVIDER_REF_PROPERTY, service.provider_ref),
            (SERVICE_KIND_PROPERTY, service.kind.value),
        )
    )
    return obj


def to_json(bom: SubsBom, opts: SerializeOptions | None = None) -> bytes:
    """Serialize a BOM to CycloneDX 1.6 JSON (UTF-8 bytes).

    Raises InvalidBom when the document violates a model invariant.
    """
    opts = opts or SerializeOptions()
    check_bom(bom)

    doc: dict[str, Any] = {
        "bomFormat": SubsBom.BOM_FORMAT,
        "specVersion": SubsBom.SPEC_VERSION,
        "serialNumber": opts.pinned_serial or bom.serial_number,
        "version": bom.version,
        "metadata": {
            "timestamp": opts.pinned_timestamp or bom.metadata.timestamp,
            "tools": [
                {"name": name, "version": version}
                for name, version in bom.metadata.tools
            ],
            "component": _component_obj(bom.metadata.component, opts.mode),
        },
        "components": [_component_obj(c, opts.mode) for c in bom.components],
        "services": [_service_obj(s) for s in bom.services],
        "dependencies": [
            {"ref": d.ref, "dependsOn": list(d.depends_on)} for d in bom.dependencies
        ],
    }
    if opts.pretty:
        text = json.dumps(doc, indent=2, ensure_ascii=False)
    else:
        text = json.dumps(doc, separators=(",", ":"), ensure_ascii=False)
    return text.encode("utf-8") + b"\n"


def _warn_unknown(keys: set[str], known: set[str], where: str) -> None:
    unknown = sorted(keys - known)
    if unknown:
        logger.warning("ignoring unknown %s field(s): %s", where, ", ".join(unknown))


def _read_properties(obj: dict[str, Any], where: str) -> tuple[tuple[str, str], ...]:
    raw = obj.get("properties", [])
    if not isinstance(raw, list):
        raise InvalidBom(f"{where}: properties must be an array")
    pairs = []
    for item in raw:
        if not isinstance(item, dict) or "name" not in item:
            raise InvalidBom(f"{where}: malformed property entry")
        pairs.append((str(item["name"]), str(item.get("value", ""))))
    return tuple(pairs)


def read_component(obj: Any, where: str, *, is_metadata: bool = False) -> Component:
    if not isinstance(obj, dict):
        raise InvalidBom(f"{where}: component must be an object")
    _warn_unknown(set(obj), _KNOWN_COMPONENT_KEYS, where)

    type_text = obj.get("type")
    properties = list(_read_properties(obj, where))
    if is_metadata and type_text == ComponentType.DEVICE.value:
        marker = [
            (n, v) for n, v in properties if n == COMPONENT_TYPE_PROPERTY
        ]
        if marker and marker[0][1] == ComponentType.SUBSTATION.value:
            type_text = ComponentType.SUBSTATION.value
            properties = [(n, v) for n, v in properties if n != COMPONENT_TYPE_PROPERTY]
    try:
        comp_type = ComponentType(type_text)
    except ValueError:
        raise InvalidBom(f"{where}: unsupported component type {type_text!r}") from None

    manufacturer = obj.get("manufacturer")
    if isinstance(manufacturer, dict):
        manufacturer = manufacturer.get("name")
    if manufacturer is not None and not isinstance(manufacturer, str):
        raise InvalidBom(f"{where}: malformed manufacturer")

    cpe = None
    if "cpe" in obj:
        try:
            cpe = parse_cpe(str(obj["cpe"]))
        except InvalidCpeString as exc:
            raise InvalidBom(f"{where}: {exc}") from exc

    name = obj.get("name")
    if not isinstance(name, str):
        raise InvalidBom(f"{where}: component name is required")
    bom_ref = obj.get("bom-ref")
    if not isinstance(bom_ref, str) or not bom_ref:
        raise InvalidBom(f"{where}: bom-ref is required")

    version = obj.get("version")
    if version is not None and not isinstance(version, str):
        raise InvalidBom(f"{where}: version must be a string")

    return Component(
        bom_ref=bom_ref,
        component_type=comp_type,
        name=name,
        manufacturer=manufacturer,
        version=version,
        cpe=cpe,
        properties=tuple(properties),
    )


def _read_service(obj: Any, where: str) -> ServiceEntry:
    if not isinstance(obj, dict):
        raise InvalidBom(f"{where}: service must be an object")
    _warn_unknown(set(obj), _KNOWN_SERVICE_KEYS, where)
    properties = dict(_read_properties(obj, where))
    provider_ref = properties.get(PROVIDER_REF_PROPERTY)
    if not provider_ref:
        raise InvalidBom(f"{where}: missing {PROVIDER_REF_PROPERTY} property")
    kind_text = properties.get(SERVICE_KIND_PROPERTY)
    try:
        kind = ServiceKind(kind_text)
    except ValueError:
        raise InvalidBom(f"{where}: unsupported service kind {kind_text!r}") from None
    name = obj.get("name")
    if not isinstance(name, str):
        raise InvalidBom(f"{where}: service name is required")
    bom_ref = obj.get("bom-ref")
    if not isinstance(bom_ref, str) or not bom_ref:
        raise InvalidBom(f"{where}: bom-ref is required")
    endpoints = obj.get("endpoints", [])
    if not isinstance(endpoints, list) or not all(isinstance(e, str) for e in endpoints):
        raise InvalidBom(f"{where}: endpoints must be an array of strings")
    return ServiceEntry(
        bom_ref=bom_ref,
        name=name,
        provider_ref=provider_ref,
        kind=kind,
        endpoints=tuple(endpoints),
    )


def _read_tools(raw: Any) -> tuple[tuple[str, str], ...]:
    if raw is None:
        return ()
    entries: list[Any]
    if isinstance(raw, list):
        entries = raw
    elif isinstance(raw, dict):
        entries = raw.get("components", [])
    else:
        raise InvalidBom("metadata.tools must be an array or an object")
    tools = []
    for item in entries:
        if isinstance(item, dict) and "name" in item:
            tools.append((str(item["name"]), str(item.get("version", ""))))
    return tuple(tools)


def from_json(data: bytes) -> SubsBom:
    """Reconstruct a SubsBom from CycloneDX 1.6 JSON bytes.

    Unknown fields are ignored with a logged warning; a compat-mode marker
    property restores the substation component type.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from exc
    if not isinstance(doc, dict):
        raise InvalidBom("top-level JSON value must be an object")

    spec_version = doc.get("specVersion")
    if spec_version != SubsBom.SPEC_VERSION:
        raise UnsupportedSpecVersion(
            f"specVersion {spec_version!r} is not supported (need {SubsBom.SPEC_VERSION!r})"
        )
    if doc.get("bomFormat") != SubsBom.BOM_FORMAT:
        raise InvalidBom(f"bomFormat {doc.get('bomFormat')!r} is not CycloneDX")
    _warn_unknown(set(doc), _KNOWN_TOP_KEYS, "document")

    serial = doc.get("serialNumber")
    if not isinstance(serial, str):
        raise InvalidBom("serialNumber is required")

    version = doc.get("version", 1)
    if not isinstance(version, int) or isinstance(version, bool):
        raise InvalidBom("version must be an integer")

    metadata_obj = doc.get("metadata")
    if not isinstance(metadata_obj, dict):
        raise InvalidBom("metadata is required")
    _warn_unknown(set(metadata_obj), {"timestamp", "tools", "component"}, "metadata")
    timestamp = metadata_obj.get("timestamp")
    if not isinstance(timestamp, str):
        raise InvalidBom("metadata.timestamp is required")
    component_obj = metadata_obj.get("component")
    if component_obj is None:
        raise InvalidBom("metadata.component is required")

    metadata = BomMetadata(
        timestamp=timestamp,
        component=read_component(component_obj, "metadata.component", is_metadata=True),
        tools=_read_tools(metadata_obj.get("tools")),
    )

    components = tuple(
        read_component(obj, f"components[{i}]")
        for i, obj in enumerate(doc.get("components", []))
    )
    services = tuple(
        _read_service(obj, f"services[{i}]")
        for i, obj in enumerate(doc.get("services", []))
    )
    dependencies = []
    for i, obj in enumerate(doc.get("dependencies", [])):
        if not isinstance(obj, dict) or "ref" not in obj:
            raise InvalidBom(f"dependencies[{i}]: malformed entry")
        depends_on = obj.get("dependsOn", [])
        if not isinstance(depends_on, list):
            raise InvalidBom(f"dependencies[{i}]: dependsOn must be an array")
        dependencies.append(
            DependencyEntry(ref=str(obj["ref"]), depends_on=tuple(str(t) for t in depends_on))
        )

    bom = SubsBom(
        serial_number=serial,
        metadata=metadata,
        components=components,
        services=services,
        dependencies=tuple(dependencies),
        version=version,
    )
    check_bom(bom)
    return bom


@lru_cache(maxsize=1)
def _schema_validator() -> Draft7Validator:
    schemas = {}
    for key, filename in _SCHEMA_FILES.items():
        path = resources.files(__package__) / "schemas" / filename
        schemas[key] = json.loads(path.read_text(encoding="utf-8"))
    # Register each schema under its $id plus the relative names used by the
    # $refs inside the vendored CycloneDX schema.
    pairs = [(schemas[key]["$id"], schemas[key]) for key in schemas]
    pairs += [
        ("spdx.SNAPSHOT.schema.json", schemas["spdx"]),
        ("jsf-0.82.SNAPSHOT.schema.json", schemas["jsf"]),
        ("http://cyclonedx.org/schema/spdx.SNAPSHOT.schema.json", schemas["spdx"]),
        ("http://cyclonedx.org/schema/jsf-0.82.SNAPSHOT.schema.json", schemas["jsf"]),
    ]
    registry = Registry().with_resources(
        (uri, Resource.from_contents(contents)) for uri, contents in pairs
    )
    return Draft7Validator(schemas["bom"], registry=registry)


def _violation_path(error_path: Any) -> str:
    parts = []
    for item in error_path:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(f".{item}" if parts else str(item))
    return "".join(parts)


def validate_against_schema(data: bytes) -> list[SchemaViolation]:
    """Validate JSON bytes against the vendored CycloneDX 1.6 schema.

    Returns one violation per schema error, sorted by path. Extended-mode
    documents fail with exactly one violation (the substation component
    type); compat-mode documents pass clean.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from exc
    validator = _schema_validator()
    violations = [
        SchemaViolation(path=_violation_path(error.absolute_path), message=error.message)
        for error in validator.iter_errors(doc)
    ]
    return sorted(violations, key=lambda v: (v.path, v.message))
