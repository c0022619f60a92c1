"""CPE 2.3 names: formatted-string parsing, ad-hoc synthesis, and wildcard matching.

Only the formatted-string binding is supported (13 colon-delimited segments,
``cpe:2.3:`` prefix). Matching is deliberately simplified: an attribute is
either the whole-field wildcard ``*`` (ANY), the not-applicable marker ``-``
(NA), or an exact token; embedded wildcards and backslash escapes are
rejected rather than interpreted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import TYPE_CHECKING, Literal

if TYPE_CHECKING:
    from .scl_model import Nameplate

ANY = "*"
NA = "-"

# Grammar of a normalized token; uppercase input is lowercased on parse.
_TOKEN_RE = re.compile(r"^[a-z0-9._-]+$")

# h = hardware, o = operating system / firmware, a = application.
# ANY is allowed so that match criteria can wildcard the part.
_PARTS = ("h", "o", "a", ANY)


class InvalidCpeString(ValueError):
    """Raised when text cannot be parsed as a CPE 2.3 formatted string."""


class MissingVendor(ValueError):
    """Raised when synthesis is attempted without a vendor."""


@dataclass(frozen=True)
class CpeName:
    """A CPE 2.3 well-formed name with normalized attribute values.

    Every attribute holds ANY (``*``), NA (``-``), or a lowercase token
    limited to ``[a-z0-9._-]``.
    """

    part: str
    vendor: str = ANY
    product: str = ANY
    version: str = ANY
    update: str = ANY
    edition: str = ANY
    language: str = ANY
    sw_edition: str = ANY
    target_sw: str = ANY
    target_hw: str = ANY
    other: str = ANY

    def __post_init__(self) -> None:
        if self.part not in _PARTS:
            raise InvalidCpeString(f"invalid part {self.part!r}: must be one of h, o, a, *")
        for f in fields(self):
            if f.name == "part":
                continue
            value = getattr(self, f.name)
            if value in (ANY, NA):
                continue
            if not _TOKEN_RE.match(value):
                raise InvalidCpeString(f"invalid {f.name} value {value!r}")

    def format(self) -> str:
        """Bind to the ``cpe:2.3:`` formatted string."""
        return "cpe:2.3:" + ":".join(getattr(self, f.name) for f in fields(self))

    def __str__(self) -> str:
        return self.format()


def parse_cpe(text: str) -> CpeName:
    """Parse a CPE 2.3 formatted string into a CpeName.

    Uppercase letters are lowercased; any other deviation (wrong prefix,
    wrong segment count, backslash escapes, illegal characters, embedded
    wildcards) raises InvalidCpeString.
    """
    if "\\" in text:
        raise InvalidCpeString("backslash escapes are not supported")
    segments = text.split(":")
    if len(segments) != 13:
        raise InvalidCpeString(
            f"expected 13 colon-separated segments, got {len(segments)}"
        )
    if segments[0] != "cpe" or segments[1] != "2.3":
        raise InvalidCpeString("string must start with 'cpe:2.3:'")
    values = []
    for raw in segments[2:]:
        if raw in (ANY, NA):
            values.append(raw)
            continue
        token = raw.lower()
        if not _TOKEN_RE.match(token):
            raise InvalidCpeString(f"illegal attribute value {raw!r}")
        values.append(token)
    return CpeName(*values)


def normalize_token(value: str) -> str:
    """Reduce free text to a CPE attribute token.

    Lowercases, maps runs of spaces and slashes to a single underscore, and
    drops any remaining character outside ``[a-z0-9._-]``. Returns "" when
    nothing survives, or when the result would be exactly ``-`` (which would
    collide with the NA marker).
    """
    token = re.sub(r"[ /]+", "_", value.strip().lower())
    token = re.sub(r"[^a-z0-9._-]", "", token)
    if token == NA:
        return ""
    return token


def synthesize_cpe(nameplate: "Nameplate", kind: Literal["device", "firmware"]) -> CpeName:
    """Build an ad-hoc CPE from nameplate data for products absent from the
    public CPE dictionary.

    Devices become part ``h`` with version taken from the hardware revision;
    firmware becomes part ``o`` with the product suffixed ``_firmware`` and
    version taken from the software revision. Attributes with no usable
    source value fall back to ANY.
    """
    vendor = normalize_token(nameplate.vendor or "")
    if not vendor:
        raise MissingVendor("cannot synthesize a CPE without a vendor")
    product = normalize_token(nameplate.model or "")
    if kind == "device":
        part = "h"
        version = normalize_token(nameplate.hw_rev or "")
    elif kind == "firmware":
        part = "o"
        if product:
            product += "_firmware"
        version = normalize_token(nameplate.sw_rev or "")
    else:
        raise ValueError(f"unknown synthesis kind {kind!r}")
    return CpeName(
        part=part,
        vendor=vendor,
        product=product or ANY,
        version=version or ANY,
    )


def cpe_matches(target: CpeName, criteria: CpeName) -> bool:
    """True when ``target`` satisfies ``criteria``.

    Attribute-wise: a criteria value of ANY absorbs anything; otherwise the
    values must be identical (covers exact tokens and NA-to-NA).
    """
    for f in fields(CpeName):
        wanted = getattr(criteria, f.name)
        if wanted != ANY and wanted != getattr(target, f.name):
            return False
    return True
