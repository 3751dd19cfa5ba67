import hashlib

from pytest import fail, raises

import tjpy_sampled_control.files as mut


def test_assert_path_is_file__missing(tmp_path):
    try:
        mut.assert_path_is_file(tmp_path / "absent.json")
        fail("should have thrown exception")
    except FileNotFoundError as ex:
        assert "does not exist" in ex.args[0]


def test_assert_path_is_file__success(tmp_path):
    some_file = tmp_path / "some_file"
    some_file.write_text("", encoding="utf-8")
    mut.assert_path_is_file(some_file)


def test_assert_path_is_file__directory(tmp_path):
    try:
        mut.assert_path_is_file(tmp_path)
        fail("should have thrown exception")
    except FileNotFoundError as ex:
        assert "is not a regular file" in ex.args[0]


def test_file_digest(tmp_path):
    some_file = tmp_path / "model.json"
    some_file.write_bytes(b"{}")
    assert mut.file_digest(some_file) == hashlib.sha256(b"{}").hexdigest()


def test_file_digest__missing(tmp_path):
    with raises(FileNotFoundError):
        mut.file_digest(tmp_path / "model.json")


class TestWriteTextAtomically:

    def test_creates_parents(self, tmp_path):
        target = tmp_path / "reports" / "run.json"
        assert mut.write_text_atomically(target, "{}\n") == target
        assert target.read_text(encoding="utf-8") == "{}\n"
        assert [p.name for p in target.parent.iterdir()] == ["run.json"]

    def test_overwrites(self, tmp_path):
        target = tmp_path / "run.json"
        target.write_text("old", encoding="utf-8")
        mut.write_text_atomically(target, "new")
        assert target.read_text(encoding="utf-8") == "new"

    def test_failed_move__keeps_old_content(self, tmp_path, mocker):
        target = tmp_path / "run.json"
        target.write_text("old", encoding="utf-8")
        mocker.patch("tjpy_sampled_control.files.os.replace", side_effect=OSError("disk full"))
        with raises(OSError):
            mut.write_text_atomically(target, "new")
        assert target.read_text(encoding="utf-8") == "old"
        assert [p.name for p in tmp_path.iterdir()] == ["run.json"]
