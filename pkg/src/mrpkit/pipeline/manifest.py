"""Run manifest: digests, config snapshot, stage records, artifact index."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from mrpkit import __version__
from mrpkit.errors import ArtifactError

MANIFEST_NAME = "manifest.json"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_of(parts: list[str]) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode())
        h.update(b"\x00")
    return h.hexdigest()


class RunManifest:
    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        self.path = self.run_dir / MANIFEST_NAME
        if self.path.exists():
            self.doc = json.loads(self.path.read_text())
        else:
            self.doc = {
                "run_id": None,
                "tool_version": __version__,
                "inputs": {},
                "config": {},
                "stages": {},
            }

    def init_run(self, inputs: dict[str, str], config: dict) -> str:
        digests = {name: sha256_file(p) for name, p in inputs.items() if p is not None}
        run_id = digest_of(
            [json.dumps(digests, sort_keys=True), json.dumps(config, sort_keys=True, default=str)]
        )[:16]
        self.doc["run_id"] = run_id
        self.doc["inputs"] = {
            name: {"path": str(p), "sha256": digests[name]}
            for name, p in inputs.items()
            if p is not None
        }
        self.doc["config"] = config
        return run_id

    def verify_inputs(self) -> None:
        for name, entry in self.doc.get("inputs", {}).items():
            path = Path(entry["path"])
            if not path.exists():
                raise ArtifactError(f"input {name} vanished: {path}")
            if sha256_file(path) != entry["sha256"]:
                raise ArtifactError(f"input {name} changed since preprocess: {path}")

    def record_stage(self, stage: str, artifacts: dict[str, Path], started: str, extra: dict | None = None) -> None:
        self.doc["stages"][stage] = {
            "started": started,
            "finished": now_iso(),
            "artifacts": {
                name: {
                    "path": str(Path(p).relative_to(self.run_dir)),
                    "sha256": sha256_file(p),
                }
                for name, p in artifacts.items()
            },
            **(extra or {}),
        }
        self.save()

    def artifact(self, stage: str, name: str) -> Path:
        try:
            rel = self.doc["stages"][stage]["artifacts"][name]["path"]
        except KeyError as exc:
            raise ArtifactError(
                f"missing artifact {name!r} from stage {stage!r}; run that stage first"
            ) from exc
        path = self.run_dir / rel
        if not path.exists():
            raise ArtifactError(f"artifact file vanished: {path}")
        return path

    def stage_done(self, stage: str) -> bool:
        return stage in self.doc["stages"]

    def save(self) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.path)


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
