import json

import pytest

from lamp.services.artifacts import (
    RunManifest,
    atomic_write_json,
    atomic_write_text,
    load_manifest,
    read_json,
    sha256_file,
    write_manifest,
)
from lamp.services.exceptions import FormatError, LoadError


def test_atomic_write_creates_parents_and_leaves_no_temp_files(tmp_path):
    path = atomic_write_text(tmp_path / "a" / "b.txt", "hello\n")
    assert path.read_text() == "hello\n"
    assert [p.name for p in path.parent.iterdir()] == ["b.txt"]


def test_json_is_sorted_and_stable(tmp_path):
    path = atomic_write_json(tmp_path / "x.json", {"b": 1, "a": [1, 2]})
    assert list(json.loads(path.read_text())) == ["a", "b"]
    assert read_json(path) == {"a": [1, 2], "b": 1}


def test_sha256_matches_known_digest(tmp_path):
    path = tmp_path / "abc"
    path.write_bytes(b"abc")
    assert sha256_file(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_manifest_hashes_outputs_and_detects_tampering(tmp_path):
    output = tmp_path / "history.csv"
    output.write_text("epoch,total\n1,0.5\n")
    manifest = RunManifest(command="pretrain", seed=3, outputs={"history": str(output)})
    path = write_manifest(tmp_path, manifest)
    loaded = load_manifest(path)
    assert loaded.hashes["history"] == sha256_file(output)
    assert loaded.started_at
    assert loaded.verify() == []
    output.write_text("epoch,total\n1,0.4\n")
    assert loaded.verify() == ["history"]


def test_read_json_errors(tmp_path):
    with pytest.raises(LoadError, match="not found"):
        read_json(tmp_path / "absent.json")
    path = tmp_path / "bad.json"
    path.write_text("[")
    with pytest.raises(FormatError, match="bad.json"):
        read_json(path)
