"""Substation BOM toolkit: SCD parsing, BOM generation, and CPE-based
vulnerability correlation for IEC 61850 substations."""

__version__ = "0.1.0"

from .bom_model import SubsBom, dependency_graph, max_depth
from .mapper import MapOptions, map_document
from .scl_model import SclDocument, validate_document
from .scl_parser import ParseOptions, parse_scd
from .serializer import SerializeOptions, from_json, to_json, validate_against_schema
from .vulnscan import load_dataset, scan, summarize

__all__ = [
    "__version__",
    "SubsBom",
    "dependency_graph",
    "max_depth",
    "MapOptions",
    "map_document",
    "SclDocument",
    "validate_document",
    "ParseOptions",
    "parse_scd",
    "SerializeOptions",
    "from_json",
    "to_json",
    "validate_against_schema",
    "load_dataset",
    "scan",
    "summarize",
]
