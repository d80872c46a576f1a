"""Stage directories, content hashes and manifests for cached re-runs."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__

MANIFEST = "manifest.json"


class MissingUpstream(RuntimeError):
    def __init__(self, stage: str, required: str, path: Path):
        super().__init__(f"stage {stage!r} needs artifacts from {required!r} (missing {path}); "
                         f"run `cascade-forensics {required}` first")
        self.stage, self.required, self.path = stage, required, path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(obj, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def read_json(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def stage_manifest(stage: str, inputs: dict[str, str], config_digest: str, seed: int) -> dict:
    """Everything that determines a stage's outputs; outputs are added after the run."""
    return {"stage": stage, "version": __version__, "inputs": dict(sorted(inputs.items())),
            "config": config_digest, "seed": seed}


def output_hashes(stage_dir: Path) -> dict[str, str]:
    return {p.relative_to(stage_dir).as_posix(): sha256_file(p)
            for p in sorted(stage_dir.rglob("*")) if p.is_file() and p.name != MANIFEST}


def is_fresh(stage_dir: Path, expected: dict) -> bool:
    """True if the stored manifest matches ``expected`` and every listed output is intact."""
    path = stage_dir / MANIFEST
    if not path.exists():
        return False
    try:
        stored = read_json(path)
    except (OSError, json.JSONDecodeError):
        return False
    if {k: stored.get(k) for k in expected} != expected:
        return False
    outputs = stored.get("outputs", {})
    return bool(outputs) and output_hashes(stage_dir) == outputs


def finish_stage(stage_dir: Path, manifest: dict) -> dict:
    manifest = dict(manifest, outputs=output_hashes(stage_dir))
    write_json(manifest, stage_dir / MANIFEST)
    return manifest


def clear_stage(stage_dir: Path) -> None:
    if stage_dir.exists():
        for p in sorted(stage_dir.rglob("*"), reverse=True):
            if p.is_file():
                p.unlink()
            elif p.is_dir():
                p.rmdir()
    stage_dir.mkdir(parents=True, exist_ok=True)
