import hashlib
import logging
import os
import tempfile
from pathlib import Path

_logger = logging.getLogger(__name__)


def assert_path_is_file(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"input file {str(path)} does not exist")
    if not path.is_file():
        raise FileNotFoundError(f"input {str(path)} is not a regular file")


def file_digest(path: Path) -> str:
    """SHA-256 of the file contents, hex encoded. Recorded in run reports for every input file."""
    assert_path_is_file(path)
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_text_atomically(path: Path, text: str) -> Path:
    """
    Writes `text` next to `path` into a temporary file and moves it into place,
    so readers never observe a half written report or certificate.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary_file_fd, temporary_file_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    temp_file = Path(temporary_file_name)
    try:
        with os.fdopen(temporary_file_fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(str(temp_file), str(path))
        _logger.debug(f"wrote {len(text)} characters to {str(path)}")
    finally:
        if temp_file.is_file():
            _logger.debug(f"removing temp file {str(temp_file)}")
            temp_file.unlink()
    return path
