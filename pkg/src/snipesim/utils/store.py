"""Directory-backed persistence for scenario documents and reports."""

import json
import os
import shutil
from pathlib import Path
from typing import Any, List, Optional


class StoreError(Exception):
    """Base exception for storage errors."""
    pass


class DocumentNotFoundError(StoreError):
    """Raised when a requested document does not exist."""
    pass


class DocumentStore:
    """Reads and writes documents in one directory.

    Writes go through a temporary file and an atomic replace; the previous
    version is kept as a backup.
    """

    BACKUP_SUFFIX = ".backup"

    def __init__(self, directory: str) -> None:
        """Initialize the store.

        Args:
            directory: Directory holding the documents; created on first write
        """
        self.directory = Path(os.path.expanduser(directory))

    def path(self, name: str) -> Path:
        return self.directory / name

    def _ensure_directory(self) -> None:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StoreError(f"Failed to create directory {self.directory}: {e}")

    def save_bytes(self, name: str, data: bytes, backup: bool = True) -> Path:
        """Write a document atomically.

        Args:
            name: File name inside the store
            data: Content to write
            backup: Whether to keep a copy of the existing file

        Returns:
            Path of the written document

        Raises:
            StoreError: If the write fails
        """
        self._ensure_directory()
        file_path = self.path(name)
        try:
            if backup and file_path.exists():
                backup_path = file_path.with_suffix(file_path.suffix + self.BACKUP_SUFFIX)
                shutil.copy2(file_path, backup_path)

            # Write to temporary file first for atomic operation
            temp_path = file_path.with_suffix(file_path.suffix + ".tmp")
            temp_path.write_bytes(data)
            temp_path.replace(file_path)
        except OSError as e:
            raise StoreError(f"Failed to save {file_path}: {e}")
        return file_path

    def load_bytes(self, name: str) -> bytes:
        """Read a document.

        Raises:
            DocumentNotFoundError: If it does not exist
            StoreError: If it cannot be read
        """
        file_path = self.path(name)
        if not file_path.exists():
            raise DocumentNotFoundError(f"Document '{file_path}' not found")
        try:
            return file_path.read_bytes()
        except OSError as e:
            raise StoreError(f"Failed to load {file_path}: {e}")

    def load_json(self, name: str) -> Any:
        """Read and parse a JSON document.

        Raises:
            StoreError: If the content is not valid JSON
        """
        content = self.load_bytes(name)
        try:
            return json.loads(content)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise StoreError(f"Failed to parse {self.path(name)}: {e}")

    def save_json(self, name: str, data: Any, backup: bool = True) -> Path:
        text = json.dumps(data, indent=2, sort_keys=True) + "\n"
        return self.save_bytes(name, text.encode("utf-8"), backup)

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def list(self, suffix: Optional[str] = None) -> List[str]:
        """Document names, sorted, excluding backups and temp files."""
        if not self.directory.exists():
            return []
        names = []
        for entry in self.directory.iterdir():
            if not entry.is_file() or entry.name.endswith((self.BACKUP_SUFFIX, ".tmp")):
                continue
            if suffix is None or entry.name.endswith(suffix):
                names.append(entry.name)
        return sorted(names)

    def cleanup_backups(self, max_backups: int = 5) -> None:
        """Clean up old backup files.

        Args:
            max_backups: Maximum number of backup files to keep
        """
        if not self.directory.exists():
            return
        backup_files = list(self.directory.glob(f"*{self.BACKUP_SUFFIX}"))
        if len(backup_files) <= max_backups:
            return

        # Sort by modification time (oldest first)
        backup_files.sort(key=lambda f: f.stat().st_mtime)
        for backup_file in backup_files[:-max_backups]:
            try:
                backup_file.unlink()
            except OSError:
                pass  # Ignore errors when cleaning up
