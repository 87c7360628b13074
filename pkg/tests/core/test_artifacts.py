import math

import pytest

from core.adapters import FilesystemArtifactAdapter, format_cell
from core.errors import SchemaMismatchError
from core.models import SinogramArtifact, SummaryArtifact
from core.repositories import ArtifactRepository, sidecar_name
from core.utils import chunked, ordered_map, stable_hash

COLUMNS = ["quantity", "value"]


def staging_dirs(root):
    return list(root.parent.glob(f".{root.name}.staging-*"))


@pytest.mark.unit
class TestFilesystemArtifactAdapter:
    def test_files_appear_only_on_commit(self, tmp_path):
        root = tmp_path / "out"
        with FilesystemArtifactAdapter(root) as adapter:
            adapter.write_table("summary.csv", COLUMNS, [{"quantity": "mass", "value": 0.5}])
            assert not (root / "summary.csv").exists()
            assert adapter.read_table("summary.csv") == [{"quantity": "mass", "value": "0.5"}]
        assert (root / "summary.csv").read_text(encoding="utf-8") == "quantity,value\nmass,0.5\n"
        assert staging_dirs(root) == []

    def test_failure_discards_staged_files(self, tmp_path):
        root = tmp_path / "out"
        with pytest.raises(RuntimeError, match="boom"):
            with FilesystemArtifactAdapter(root) as adapter:
                adapter.write_document("report.json", {"rows": []})
                raise RuntimeError("boom")
        assert not root.exists()
        assert staging_dirs(root) == []

    def test_commit_replaces_existing_files(self, tmp_path):
        root = tmp_path / "out"
        root.mkdir()
        (root / "report.json").write_text("{}", encoding="utf-8")
        (root / "keep.txt").write_text("kept", encoding="utf-8")
        with FilesystemArtifactAdapter(root) as adapter:
            adapter.write_document("report.json", {"value": 1})
        assert FilesystemArtifactAdapter(root, staged=False).read_document("report.json") == {"value": 1}
        assert (root / "keep.txt").read_text(encoding="utf-8") == "kept"

    def test_missing_document(self, tmp_path):
        adapter = FilesystemArtifactAdapter(tmp_path, staged=False)
        with pytest.raises(RuntimeError, match="Reading document absent.json failed"):
            adapter.read_document("absent.json")


@pytest.mark.unit
def test_format_cell():
    assert format_cell(True) == "true"
    assert format_cell(False) == "false"
    assert format_cell(None) == ""
    assert format_cell(math.nan) == "nan"
    assert format_cell(3) == "3"
    assert float(format_cell(0.1)) == 0.1
    assert float(format_cell(1.0 / 3.0)) == 1.0 / 3.0


@pytest.mark.unit
class TestArtifactRepository:
    def test_table_and_sidecar(self, tmp_path):
        with FilesystemArtifactAdapter(tmp_path / "out") as adapter:
            repository = ArtifactRepository(adapter)
            sidecar = SinogramArtifact(config_hash="abc", angles=2, offsets=3, mode="analytic")
            repository.save_table("sinogram.csv", COLUMNS, [{"quantity": "x", "value": 1.0}], sidecar)

        repository = ArtifactRepository(FilesystemArtifactAdapter(tmp_path / "out", staged=False))
        rows, loaded = repository.load_table("sinogram.csv", SinogramArtifact)
        assert rows == [{"quantity": "x", "value": "1"}]
        assert loaded == sidecar

    def test_other_schema_versions_are_refused(self, tmp_path):
        adapter = FilesystemArtifactAdapter(tmp_path, staged=False)
        adapter.write_document("summary.json", {"schema_version": "0.9", "kind": "summary", "experiment": "forward"})
        with pytest.raises(SchemaMismatchError, match="schema version '0.9'"):
            ArtifactRepository(adapter).load_report("summary.json", SummaryArtifact)

    def test_wrong_model_is_refused(self, tmp_path):
        adapter = FilesystemArtifactAdapter(tmp_path, staged=False)
        repository = ArtifactRepository(adapter)
        repository.save_report("summary.json", SummaryArtifact(experiment="forward"))
        with pytest.raises(SchemaMismatchError, match="SinogramArtifact"):
            repository.load_report("summary.json", SinogramArtifact)

    def test_sidecar_name(self):
        assert sidecar_name("response.csv") == "response.json"
        assert sidecar_name("tail.rows.csv") == "tail.rows.json"


@pytest.mark.unit
class TestUtils:
    def test_stable_hash_ignores_key_order(self):
        assert stable_hash({"a": 1, "b": [1, 2]}) == stable_hash({"b": [1, 2], "a": 1})
        assert stable_hash({"a": 1}) != stable_hash({"a": 2})
        assert len(stable_hash({"a": 1}, length=8)) == 8

    def test_chunked(self):
        assert chunked(10, 4) == [slice(0, 4), slice(4, 8), slice(8, 10)]
        assert chunked(0, 4) == []
        assert chunked(3, 0) == [slice(0, 1), slice(1, 2), slice(2, 3)]

    @pytest.mark.parametrize("threads", [None, 1, 4])
    def test_ordered_map_keeps_input_order(self, threads):
        assert ordered_map(lambda x: x * x, range(20), threads=threads) == [x * x for x in range(20)]
