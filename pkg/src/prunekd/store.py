"""Content-addressed artifact store for experiment runs.

Artifacts (datasets, score tables, prune lists, teacher caches, model
checkpoints, cached run records) are filed under a directory per kind and
named by a hash of the producing configuration, so grid cells that share a
producer reuse the same file.  Writes go through a temp file and an atomic
rename, which makes the store safe for concurrent writers.
"""

import json
import os
import tempfile

from .common import sha256_bytes

__all__ = ["ArtifactStore", "config_key", "canonical_json"]

KINDS = ("datasets", "scores", "prunes", "caches", "models", "reports", "runs")


def canonical_json(obj):
    """Deterministic JSON encoding (sorted keys, no whitespace drift)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_key(config):
    """Hash of the producing configuration; names the artifact file."""
    return sha256_bytes(canonical_json(config).encode())[:24]


class ArtifactStore:
    def __init__(self, root):
        self.root = root
        for kind in KINDS:
            os.makedirs(os.path.join(root, kind), exist_ok=True)

    def path(self, kind, key, suffix):
        if kind not in KINDS:
            raise ValueError(f"unknown artifact kind {kind!r}")
        return os.path.join(self.root, kind, f"{key}{suffix}")

    def has(self, kind, key, suffix):
        return os.path.exists(self.path(kind, key, suffix))

    def write_atomic(self, kind, key, suffix, writer):
        """Write via ``writer(tmp_path)`` then rename into place; returns the
        final path and the file's content hash."""
        final = self.path(kind, key, suffix)
        fd, tmp = tempfile.mkstemp(
            dir=os.path.dirname(final), prefix=".tmp-", suffix=suffix
        )
        os.close(fd)
        try:
            writer(tmp)
            os.replace(tmp, final)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return final, self.file_digest(final)

    @staticmethod
    def file_digest(path):
        with open(path, "rb") as fh:
            return sha256_bytes(fh.read())

    def put_json(self, kind, key, obj):
        def writer(tmp):
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(canonical_json(obj))

        return self.write_atomic(kind, key, ".json", writer)

    def get_json(self, kind, key):
        with open(self.path(kind, key, ".json"), encoding="utf-8") as fh:
            return json.load(fh)
