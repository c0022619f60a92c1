import hashlib
import json

import pytest

from conftest import FIXTURES
from subsbom.cli import EXIT_ERROR, EXIT_FINDINGS, EXIT_OK, main
from subsbom.fleet import FleetStore, NameCollision, scan_all
from subsbom.serializer import from_json
from subsbom.vulnscan import load_dataset, scan, summarize

LAB_SCD = FIXTURES / "laboratory" / "input.scd"
LAB_DATASET = FIXTURES / "laboratory" / "dataset.json"


def _add(root, name, *extra) -> int:
    return main(
        ["fleet", "add", str(LAB_SCD), "--root", str(root), "--name", name, *extra]
    )


class TestFleetCli:
    def test_add_and_list(self, tmp_path, capsys):
        root = tmp_path / "fleet"
        assert _add(root, "NORTH") == EXIT_OK
        assert _add(root, "SOUTH") == EXIT_OK
        capsys.readouterr()
        assert main(["fleet", "list", "--root", str(root)]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 2
        assert out[0].startswith("NORTH")
        assert out[1].startswith("SOUTH")
        assert "components=4" in out[0]

    def test_name_collision_requires_force(self, tmp_path, capsys):
        root = tmp_path / "fleet"
        assert _add(root, "NORTH") == EXIT_OK
        assert _add(root, "NORTH") == EXIT_ERROR
        assert "already stored" in capsys.readouterr().err
        assert _add(root, "NORTH", "--force") == EXIT_OK

    def test_remove(self, tmp_path, capsys):
        root = tmp_path / "fleet"
        _add(root, "NORTH")
        assert main(["fleet", "remove", "NORTH", "--root", str(root)]) == EXIT_OK
        capsys.readouterr()
        main(["fleet", "list", "--root", str(root)])
        assert capsys.readouterr().out == ""

    def test_remove_missing(self, tmp_path):
        root = tmp_path / "fleet"
        _add(root, "NORTH")
        assert main(["fleet", "remove", "GHOST", "--root", str(root)]) == EXIT_ERROR

    def test_scan_all_exit_codes(self, tmp_path, capsys):
        root = tmp_path / "fleet"
        _add(root, "NORTH")
        capsys.readouterr()
        assert main(["fleet", "scan-all", str(LAB_DATASET), "--root", str(root)]) == EXIT_FINDINGS
        empty = tmp_path / "empty.json"
        empty.write_text("[]")
        assert main(["fleet", "scan-all", str(empty), "--root", str(root)]) == EXIT_OK


class TestFleetStore:
    def test_digest_matches_file(self, tmp_path):
        root = tmp_path / "fleet"
        _add(root, "NORTH")
        store = FleetStore(root)
        entry = store.list()[0]
        payload = (root / entry.file).read_bytes()
        assert entry.digest == hashlib.sha256(payload).hexdigest()

    def test_filenames_are_sanitized(self, tmp_path):
        root = tmp_path / "fleet"
        _add(root, "North / West #2")
        store = FleetStore(root)
        entry = store.list()[0]
        assert entry.file == "north_west_2.bom.json"
        assert (root / entry.file).exists()

    def test_sanitized_filename_collision(self, tmp_path):
        root = tmp_path / "fleet"
        _add(root, "North West")
        with pytest.raises(NameCollision):
            FleetStore(root).add("north_west", b"{}")

    def test_index_is_valid_json(self, tmp_path):
        root = tmp_path / "fleet"
        _add(root, "NORTH")
        index = json.loads((root / "index.json").read_text())
        assert "NORTH" in index["entries"]


class TestScanAllAggregation:
    def _populate(self, root) -> None:
        # ALPHA and CHARLIE carry CPEs and will match; BRAVO has none
        assert _add(root, "ALPHA") == EXIT_OK
        assert (
            _add(
                root,
                "BRAVO",
                "--no-synth-cpe",
                "--cpe-private-type",
                "unused:type",
            )
            == EXIT_OK
        )
        assert _add(root, "CHARLIE") == EXIT_OK

    def test_matches_individual_scans(self, tmp_path):
        root = tmp_path / "fleet"
        self._populate(root)
        store = FleetStore(root)
        dataset = load_dataset(LAB_DATASET.read_bytes())

        aggregated = scan_all(store, dataset)

        individual = []
        for entry in store.list():
            bom = from_json(store.load_bom_bytes(entry.name))
            findings = scan(bom, dataset)
            individual.append(summarize(findings, bom, dataset))
        individual.sort(
            key=lambda r: (-(r.max_severity.rank if r.max_severity else -1), r.substation)
        )
        assert aggregated == individual

    def test_ranking_by_severity(self, tmp_path, capsys):
        root = tmp_path / "fleet"
        self._populate(root)
        capsys.readouterr()
        code = main(
            ["fleet", "scan-all", str(LAB_DATASET), "--root", str(root), "--json"]
        )
        assert code == EXIT_FINDINGS
        reports = json.loads(capsys.readouterr().out)
        assert [r["substation"] for r in reports] == ["ALPHA", "CHARLIE", "BRAVO"]
        assert reports[0]["maxSeverity"] == "high"
        assert reports[2]["maxSeverity"] is None

    def test_cli_equals_concatenation_of_single_scans(self, tmp_path, capsys):
        root = tmp_path / "fleet"
        self._populate(root)
        store = FleetStore(root)
        capsys.readouterr()

        main(["fleet", "scan-all", str(LAB_DATASET), "--root", str(root), "--json"])
        aggregated = json.loads(capsys.readouterr().out)

        single_reports = []
        for entry in store.list():
            path = root / entry.file
            main(["scan", str(path), str(LAB_DATASET), "--json"])
            report = json.loads(capsys.readouterr().out)
            for finding in report["findings"]:
                finding.pop("componentRef", None)
                finding.pop("viaRef", None)
            single_reports.append(report)
        rank = {"critical": 4, "high": 3, "medium": 2, "low": 1, "none": 0}
        single_reports.sort(
            key=lambda r: (
                -(rank[r["maxSeverity"]] if r["maxSeverity"] else -1),
                r["substation"],
            )
        )
        assert aggregated == single_reports
