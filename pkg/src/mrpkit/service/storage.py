"""Dataset and fit persistence for the service.

Layout under the data root:

    datasets/<id>/raw/        uploaded files
    datasets/<id>/run/        preprocess + describe artifacts (a run directory)
    fits/<id>/                one run directory per fit job (preprocess
                              artifacts copied in, so concurrent fits on one
                              dataset never share state)
    jobs/                     job registry records
"""

from __future__ import annotations

import hashlib
import json
import shutil
import uuid
from pathlib import Path

from mrpkit.errors import ArtifactError
from mrpkit.pipeline.manifest import MANIFEST_NAME, RunManifest

RAW_NAMES = ("records", "population", "tracts", "crosswalk", "config")
RAW_FILENAMES = {
    "records": "records.csv",
    "population": "population.csv",
    "tracts": "tracts.csv",
    "crosswalk": "crosswalk.csv",
    "config": "schema_config.json",
}


class Storage:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "datasets").mkdir(parents=True, exist_ok=True)
        (self.root / "fits").mkdir(parents=True, exist_ok=True)

    # -- datasets -------------------------------------------------------------

    def new_dataset(self) -> str:
        return uuid.uuid4().hex[:12]

    def dataset_dir(self, dataset_id: str) -> Path:
        return self.root / "datasets" / dataset_id

    def raw_dir(self, dataset_id: str) -> Path:
        return self.dataset_dir(dataset_id) / "raw"

    def run_dir(self, dataset_id: str) -> Path:
        return self.dataset_dir(dataset_id) / "run"

    def dataset_exists(self, dataset_id: str) -> bool:
        return self.dataset_dir(dataset_id).exists()

    def save_raw(self, dataset_id: str, name: str, content: bytes) -> Path:
        path = self.raw_dir(dataset_id) / RAW_FILENAMES[name]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)
        return path

    def raw_path(self, dataset_id: str, name: str) -> Path | None:
        path = self.raw_dir(dataset_id) / RAW_FILENAMES[name]
        return path if path.exists() else None

    def dataset_digest(self, dataset_id: str) -> str:
        h = hashlib.sha256()
        for path in sorted(self.raw_dir(dataset_id).glob("*")):
            h.update(path.name.encode())
            h.update(path.read_bytes())
        return h.hexdigest()

    def find_by_digest(self, digest: str, exclude: str | None = None) -> str | None:
        for info_path in sorted(self.root.glob("datasets/*/info.json")):
            doc = json.loads(info_path.read_text())
            if doc.get("digest") == digest and doc.get("id") != exclude:
                return doc["id"]
        return None

    def write_info(self, dataset_id: str, doc: dict) -> None:
        path = self.dataset_dir(dataset_id) / "info.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        tmp.replace(path)

    def read_info(self, dataset_id: str) -> dict | None:
        path = self.dataset_dir(dataset_id) / "info.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def preprocessed(self, dataset_id: str) -> bool:
        run = self.run_dir(dataset_id)
        return (run / MANIFEST_NAME).exists() and RunManifest(run).stage_done("preprocess")

    # -- fits -----------------------------------------------------------------

    def new_fit_dir(self, dataset_id: str, fit_id: str) -> Path:
        """Run directory for a fit, seeded with the dataset's preprocess artifacts."""
        source = self.run_dir(dataset_id)
        if not self.preprocessed(dataset_id):
            raise ArtifactError(f"dataset {dataset_id} is not preprocessed")
        target = self.fit_dir(fit_id)
        target.mkdir(parents=True, exist_ok=True)
        shutil.copy(source / MANIFEST_NAME, target / MANIFEST_NAME)
        shutil.copytree(source / "preprocess", target / "preprocess", dirs_exist_ok=True)
        if (source / "describe").exists():
            shutil.copytree(source / "describe", target / "describe", dirs_exist_ok=True)
        return target

    def fit_dir(self, fit_id: str) -> Path:
        return self.root / "fits" / fit_id

    def fit_exists(self, fit_id: str) -> bool:
        return (self.fit_dir(fit_id) / MANIFEST_NAME).exists()
