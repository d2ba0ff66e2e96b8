"""HTTP service exposing the pipeline as asynchronous jobs.

Endpoints (JSON over HTTP, polling only):

    POST /datasets                      multipart upload; inline validation
    GET  /datasets/{id}                 dataset info
    GET  /datasets/{id}/describe        descriptive payloads (after preprocess)
    POST /datasets/{id}/preprocess      queue the preprocessing job
    POST /fits                          queue fit + diagnose + poststratify + report
    GET  /jobs/{id}                     job state, progress, error detail
    GET  /fits/{id}/summary|loo|ppc|estimates
    GET  /healthz

Results endpoints stream persisted artifacts; nothing heavy happens on a GET.
"""

from __future__ import annotations

import io
import json
import os
from pathlib import Path

from fastapi import FastAPI, File, Query, Request, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from mrpkit.errors import InputError, MrpError, SpecError
from mrpkit.ingest.config import SchemaConfig
from mrpkit.ingest.records import parse_records
from mrpkit.model.spec import ModelSpec
from mrpkit.pipeline import stages
from mrpkit.pipeline.manifest import RunManifest
from mrpkit.sampler.run import SamplerConfig
from mrpkit.service.jobs import JobRegistry
from mrpkit.service.models import (
    DatasetInfo,
    FitRequest,
    JobInfo,
    PreprocessRequest,
    ValidationSummary,
)
from mrpkit.service.storage import Storage

DEFAULT_SIZE_CAP = 64 * 1024 * 1024

ESTIMATE_GROUP_FILES = {
    "overall": "overall",
    "week": "week",
    "sex": "sex_week",
    "race": "race_week",
    "age": "age_week",
    "county": "county_week",
}


def create_app(
    data_root: str | Path | None = None,
    workers: int | None = None,
    size_cap: int = DEFAULT_SIZE_CAP,
    frontend_dist: str | Path | None = None,
) -> FastAPI:
    data_root = Path(data_root or os.environ.get("MRP_DATA_ROOT", "mrp_data"))
    workers = workers if workers is not None else int(os.environ.get("MRP_WORKERS", "2"))
    storage = Storage(data_root)
    registry = JobRegistry(data_root / "jobs", workers=workers)

    app = FastAPI(title="mrpkit service", version="0.1.0")
    app.state.storage = storage
    app.state.registry = registry

    @app.exception_handler(MrpError)
    async def engine_error(_req: Request, exc: MrpError):
        if isinstance(exc, SpecError):
            return JSONResponse(
                status_code=422,
                content={"detail": [{"field": exc.field, "msg": str(exc)}]},
            )
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    # -- datasets -------------------------------------------------------------

    @app.post("/datasets", status_code=201)
    async def upload_dataset(
        records: UploadFile = File(...),
        population: UploadFile | None = File(None),
        tracts: UploadFile | None = File(None),
        crosswalk: UploadFile | None = File(None),
        config: UploadFile | None = File(None),
    ):
        dataset_id = storage.new_dataset()
        uploads = {
            "records": records,
            "population": population,
            "tracts": tracts,
            "crosswalk": crosswalk,
            "config": config,
        }
        total = 0
        contents: dict[str, bytes] = {}
        for name, upload in uploads.items():
            if upload is None:
                continue
            data = await upload.read()
            total += len(data)
            if total > size_cap:
                return JSONResponse(
                    status_code=413,
                    content={"detail": f"payload exceeds the {size_cap} byte cap"},
                )
            contents[name] = data
        for name, data in contents.items():
            storage.save_raw(dataset_id, name, data)

        schema = (
            SchemaConfig.from_dict(json.loads(contents["config"].decode()))
            if "config" in contents
            else SchemaConfig()
        )
        parsed = parse_records(io.StringIO(contents["records"].decode()), schema)
        validation = ValidationSummary(
            rows_read=parsed.rows_read,
            accepted=len(parsed.records),
            rejected=len(parsed.rejects),
            reject_reasons=parsed.reject_reasons,
        )

        digest = storage.dataset_digest(dataset_id)
        duplicate = storage.find_by_digest(digest, exclude=dataset_id)
        info = DatasetInfo(
            id=dataset_id,
            digest=digest,
            files=sorted(contents),
            validation=validation,
            dedup_note=(
                f"identical content already uploaded as dataset {duplicate}" if duplicate else None
            ),
        )
        storage.write_info(dataset_id, info.model_dump())
        return info.model_dump()

    @app.get("/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        info = storage.read_info(dataset_id)
        if info is None:
            return JSONResponse(status_code=404, content={"detail": "unknown dataset"})
        info["preprocessed"] = storage.preprocessed(dataset_id)
        return info

    @app.post("/datasets/{dataset_id}/preprocess", status_code=202)
    def submit_preprocess(dataset_id: str, request: PreprocessRequest | None = None):
        if storage.read_info(dataset_id) is None:
            return JSONResponse(status_code=404, content={"detail": "unknown dataset"})
        missing = [
            name
            for name in ("records", "population", "tracts", "crosswalk")
            if storage.raw_path(dataset_id, name) is None
        ]
        if missing:
            return JSONResponse(
                status_code=422,
                content={"detail": [{"field": m, "msg": f"{m} file not uploaded"} for m in missing]},
            )
        seed = request.seed if request is not None else 0

        def runner(report):
            report({"stage": "preprocess"})
            stages.stage_preprocess(
                records_path=storage.raw_path(dataset_id, "records"),
                acs_path=storage.raw_path(dataset_id, "population"),
                crosswalk_path=storage.raw_path(dataset_id, "crosswalk"),
                tracts_path=storage.raw_path(dataset_id, "tracts"),
                config_path=storage.raw_path(dataset_id, "config"),
                seed=seed,
                run_dir=storage.run_dir(dataset_id),
            )
            report({"stage": "describe"})
            stages.stage_describe(storage.run_dir(dataset_id))

        job_id = registry.submit("preprocess", runner, dataset_id=dataset_id)
        return {"job_id": job_id}

    @app.get("/datasets/{dataset_id}/describe")
    def get_describe(dataset_id: str):
        if storage.read_info(dataset_id) is None:
            return JSONResponse(status_code=404, content={"detail": "unknown dataset"})
        run = storage.run_dir(dataset_id)
        if not storage.preprocessed(dataset_id):
            return JSONResponse(
                status_code=409, content={"detail": "dataset not preprocessed yet"}
            )
        manifest = RunManifest(run)
        return {
            "report": json.loads(manifest.artifact("preprocess", "report").read_text()),
            "weekly": json.loads(manifest.artifact("describe", "weekly_json").read_text()),
            "county": json.loads(manifest.artifact("describe", "county_json").read_text()),
            "demographics": json.loads(
                manifest.artifact("describe", "demographics_json").read_text()
            ),
        }

    # -- fits -----------------------------------------------------------------

    @app.post("/fits", status_code=202)
    def submit_fit(request: FitRequest):
        if storage.read_info(request.dataset_id) is None:
            return JSONResponse(status_code=404, content={"detail": "unknown dataset"})
        if not storage.preprocessed(request.dataset_id):
            return JSONResponse(
                status_code=409, content={"detail": "dataset not preprocessed yet"}
            )
        spec = ModelSpec.from_dict(request.spec)  # raises SpecError -> 422
        sampler = request.sampler
        SamplerConfig(
            chains=sampler.chains,
            warmup_iters=sampler.warmup_iters,
            sampling_iters=sampler.sampling_iters,
            seed=sampler.seed,
            target_accept=sampler.target_accept,
            max_tree_depth=sampler.max_tree_depth,
            init_radius=sampler.init_radius,
        ).validate()

        fit_id = os.urandom(6).hex()
        storage.new_fit_dir(request.dataset_id, fit_id)
        groupings = tuple(request.groupings) if request.groupings else stages.DEFAULT_GROUPINGS

        def runner(report):
            run_dir = storage.fit_dir(fit_id)
            spec_path = run_dir / "spec_request.json"
            spec.to_json(spec_path)

            def fit_progress(label, chain, phase, iteration, total):
                report(
                    {
                        "stage": phase,
                        "chain": chain,
                        "iteration": iteration,
                        "total": total,
                    }
                )

            report({"stage": "compile"})
            stages.stage_fit(
                run_dir,
                spec_paths=[spec_path],
                seed=sampler.seed,
                chains=sampler.chains,
                sampling_iters=sampler.sampling_iters,
                warmup_iters=sampler.warmup_iters,
                progress=fit_progress,
            )
            report({"stage": "diagnose"})
            stages.stage_diagnose(run_dir, seed=sampler.seed, n_reps=request.ppc_replicates)
            report({"stage": "poststratify"})
            stages.stage_poststratify(run_dir, groupings=groupings, seed=sampler.seed)
            report({"stage": "report"})
            stages.stage_report(run_dir)

        job_id = registry.submit("fit", runner, dataset_id=request.dataset_id, fit_id=fit_id)
        return {"job_id": job_id, "fit_id": fit_id}

    # -- jobs -----------------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def poll_job(job_id: str):
        record = registry.get(job_id)
        if record is None:
            return JSONResponse(status_code=404, content={"detail": "unknown job"})
        return JobInfo(
            id=record["id"],
            kind=record["kind"],
            state=record["state"],
            progress=record.get("progress") or {},
            error=record.get("error"),
            dataset_id=record.get("dataset_id"),
            fit_id=record.get("fit_id"),
            created=record["created"],
            updated=record["updated"],
        ).model_dump()

    # -- results --------------------------------------------------------------

    def _fit_guard(fit_id: str):
        if not storage.fit_exists(fit_id):
            return JSONResponse(status_code=404, content={"detail": "unknown fit"})
        for record in registry.all_jobs():
            if record.get("fit_id") == fit_id:
                if record["state"] in ("queued", "running"):
                    return JSONResponse(
                        status_code=409,
                        content={"detail": f"fit still {record['state']}"},
                    )
                if record["state"] == "failed":
                    return JSONResponse(
                        status_code=409,
                        content={"detail": f"fit failed: {record.get('error')}"},
                    )
                break
        return None

    def _fit_label(run_dir: Path) -> str:
        labels = stages.fit_labels(run_dir)
        return labels[0]

    @app.get("/fits/{fit_id}/summary")
    def fit_summary(fit_id: str):
        guard = _fit_guard(fit_id)
        if guard is not None:
            return guard
        run_dir = storage.fit_dir(fit_id)
        label = _fit_label(run_dir)
        summary = json.loads((run_dir / "fit" / label / "summary.json").read_text())
        flags = json.loads((run_dir / "fit" / label / "flags.json").read_text())
        return {"label": label, "columns_note": None, "rows": summary, "flags": flags}

    @app.get("/fits/{fit_id}/loo")
    def fit_loo(fit_id: str):
        guard = _fit_guard(fit_id)
        if guard is not None:
            return guard
        run_dir = storage.fit_dir(fit_id)
        label = _fit_label(run_dir)
        loo = json.loads((run_dir / "diagnose" / label / "loo.json").read_text())
        comparison = json.loads((run_dir / "diagnose" / "comparison.json").read_text())
        return {"label": label, "loo": loo, "comparison": comparison}

    @app.get("/fits/{fit_id}/ppc")
    def fit_ppc(fit_id: str):
        guard = _fit_guard(fit_id)
        if guard is not None:
            return guard
        run_dir = storage.fit_dir(fit_id)
        label = _fit_label(run_dir)
        return json.loads((run_dir / "diagnose" / label / "ppc.json").read_text())

    @app.get("/fits/{fit_id}/estimates")
    def fit_estimates(
        fit_id: str,
        group: str = Query("week"),
        week: str | None = Query(None),
    ):
        guard = _fit_guard(fit_id)
        if guard is not None:
            return guard
        if group not in ESTIMATE_GROUP_FILES:
            return JSONResponse(
                status_code=422,
                content={
                    "detail": [
                        {
                            "field": "group",
                            "msg": f"group must be one of {sorted(ESTIMATE_GROUP_FILES)}",
                        }
                    ]
                },
            )
        run_dir = storage.fit_dir(fit_id)
        label = _fit_label(run_dir)
        path = run_dir / "poststratify" / label / f"estimates_{ESTIMATE_GROUP_FILES[group]}.json"
        if not path.exists():
            return JSONResponse(
                status_code=404, content={"detail": f"no estimates for group {group!r}"}
            )
        payload = json.loads(path.read_text())
        if week is not None:
            rows = [
                r
                for r in payload["rows"]
                if str(r.get("week_label")) == week or str(r.get("week_index")) == week
            ]
            payload = {**payload, "rows": rows, "week_filter": week}
        return payload

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": app.version}

    dist = frontend_dist or os.environ.get("MRP_FRONTEND_DIST")
    if dist and Path(dist).is_dir():
        app.mount("/ui", StaticFiles(directory=dist, html=True), name="ui")

    return app


def main() -> None:
    """Entry point: run with uvicorn (port/workers/data root via env or flags)."""
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="mrpkit HTTP service")
    parser.add_argument("--port", type=int, default=int(os.environ.get("MRP_PORT", "8000")))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--data-root", default=os.environ.get("MRP_DATA_ROOT", "mrp_data"))
    parser.add_argument("--workers", type=int, default=int(os.environ.get("MRP_WORKERS", "2")))
    parser.add_argument("--frontend-dist", default=os.environ.get("MRP_FRONTEND_DIST"))
    args = parser.parse_args()
    app = create_app(
        data_root=args.data_root, workers=args.workers, frontend_dist=args.frontend_dist
    )
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
