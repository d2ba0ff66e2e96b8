"""Pipeline stages. One code path: the CLI and the HTTP service both call these.

Each stage reads upstream artifacts through the run manifest, writes its own
artifacts under <run>/<stage>/, and records them (with digests) in the
manifest. All randomness descends from the run seed.
"""

from __future__ import annotations

import json
from dataclasses import replace
from datetime import date
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from filelock import FileLock

from mrpkit.errors import ArtifactError, InputError
from mrpkit.evaluate.loglik import pointwise_loglik
from mrpkit.evaluate.loo import LooResult, loo_compare, psis_loo
from mrpkit.evaluate.ppc import ppc_replicates
from mrpkit.ingest.cells import aggregate_to_cells, filter_geography
from mrpkit.ingest.config import SchemaConfig
from mrpkit.ingest.geo import (
    GeoPredictorTable,
    link_zip_predictors,
    standardize_predictors,
    zip_state_from_crosswalk,
)
from mrpkit.ingest.poststrat_table import build_poststrat_table
from mrpkit.ingest.records import impute_missing, parse_records
from mrpkit.model.compile import compile_spec
from mrpkit.model.spec import ModelSpec
from mrpkit.pipeline.describe import county_summary, demographic_comparison, weekly_positivity
from mrpkit.pipeline.manifest import RunManifest, now_iso
from mrpkit.poststrat import export_estimates, parse_grouping, poststratify
from mrpkit.sampler.run import DrawsMatrix, SamplerConfig, run_nuts
from mrpkit.sampler.summary import summarize, write_summary
from mrpkit.tables import FLOAT_FORMAT, read_table, write_table

RHAT_FLAG_THRESHOLD = 1.01
DEFAULT_GROUPINGS = ("overall", "week", "sex:week", "race:week", "age:week", "county:week")


def _write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _stage_lock(run_dir: Path):
    run_dir.mkdir(parents=True, exist_ok=True)
    return FileLock(run_dir / ".lock")


def stage_preprocess(
    records_path: str | Path,
    acs_path: str | Path,
    crosswalk_path: str | Path,
    tracts_path: str | Path,
    run_dir: str | Path,
    config_path: str | Path | None = None,
    seed: int = 0,
) -> dict[str, Path]:
    """Parse, impute, aggregate, filter, link, standardize, cross-classify."""
    run_dir = Path(run_dir)
    with _stage_lock(run_dir):
        started = now_iso()
        manifest = RunManifest(run_dir)
        config = SchemaConfig.from_json(config_path) if config_path else SchemaConfig()
        config_doc = json.loads(Path(config_path).read_text()) if config_path else {}
        manifest.init_run(
            inputs={
                "records": records_path,
                "acs": acs_path,
                "crosswalk": crosswalk_path,
                "tracts": tracts_path,
                **({"config": config_path} if config_path else {}),
            },
            config={"seed": seed, "schema": config_doc},
        )

        parsed = parse_records(str(records_path), config)
        records, imputed_counts = impute_missing(parsed.records, seed=seed)
        cells_all, week_origin = aggregate_to_cells(records, config.age_bins)

        crosswalk = read_table(crosswalk_path)
        state_map = zip_state_from_crosswalk(crosswalk)
        missing_states = sorted(set(cells_all["zip"]) - set(state_map))
        if missing_states:
            raise InputError(f"zips with no crosswalk entry: {missing_states[:20]}")
        cells, filter_report = filter_geography(cells_all, state_map)
        retained_zips = filter_report["retained_zips"]

        tracts = read_table(tracts_path)
        geo = standardize_predictors(
            link_zip_predictors(crosswalk, tracts, zips=retained_zips)
        )
        population = read_table(acs_path)
        poststrat = build_poststrat_table(
            population, retained_zips, config.age_bins,
            sex_map=config.sex_map, race_map=config.race_map,
        )

        out = run_dir / "preprocess"
        out.mkdir(parents=True, exist_ok=True)
        artifacts = {
            "cells": write_table(cells, out / "cells.csv"),
            "poststrat": write_table(poststrat, out / "poststrat.csv"),
            "geo_predictors": write_table(geo.frame, out / "geo_predictors.csv"),
            "rejects": write_table(parsed.rejects, out / "rejects.csv"),
        }
        geo_scale = out / "geo_scale.json"
        _write_json(geo_scale, geo.scale)
        artifacts["geo_scale"] = geo_scale

        report = {
            "rows_read": parsed.rows_read,
            "accepted": int(len(parsed.records)),
            "rejected": int(len(parsed.rejects)),
            "reject_reasons": parsed.reject_reasons,
            "imputed": imputed_counts,
            "geography_filter": filter_report,
            "week_origin": week_origin.isoformat(),
            "age_bins": list(config.age_bins),
            "n_cells": int(len(cells)),
            "n_weeks": int(cells["week_index"].max()) + 1,
            "total_tests": int(cells["n_tests"].sum()),
            "total_positives": int(cells["n_positive"].sum()),
            "population_total": float(poststrat["population_count"].sum()),
        }
        artifacts["report"] = _write_json(out / "report.json", report)
        manifest.record_stage("preprocess", artifacts, started)
        return artifacts


def _load_preprocess(manifest: RunManifest):
    manifest.verify_inputs()
    cells = read_table(manifest.artifact("preprocess", "cells"))
    poststrat = read_table(manifest.artifact("preprocess", "poststrat"))
    geo = GeoPredictorTable.load(
        manifest.artifact("preprocess", "geo_predictors"),
        manifest.artifact("preprocess", "geo_scale"),
    )
    report = json.loads(manifest.artifact("preprocess", "report").read_text())
    return cells, poststrat, geo, report


def stage_describe(run_dir: str | Path) -> dict[str, Path]:
    run_dir = Path(run_dir)
    with _stage_lock(run_dir):
        started = now_iso()
        manifest = RunManifest(run_dir)
        cells, poststrat, geo, report = _load_preprocess(manifest)
        week_origin = date.fromisoformat(report["week_origin"])
        county_map = dict(zip(geo.frame["zip"].astype(str), geo.frame["county_fips"].astype(str)))

        out = run_dir / "describe"
        weekly = weekly_positivity(cells, week_origin)
        county = county_summary(cells, county_map)
        demo = demographic_comparison(cells, poststrat)

        artifacts = {
            "weekly": write_table(weekly, out / "weekly_positivity.csv"),
            "county": write_table(county, out / "county_summary.csv"),
            "demographics": write_table(demo, out / "demographics.csv"),
            "weekly_json": _write_json(
                out / "weekly_positivity.json", json.loads(weekly.to_json(orient="records"))
            ),
            "county_json": _write_json(
                out / "county_summary.json", json.loads(county.to_json(orient="records"))
            ),
            "demographics_json": _write_json(
                out / "demographics.json", json.loads(demo.to_json(orient="records"))
            ),
        }
        manifest.record_stage("describe", artifacts, started)
        return artifacts


def _fit_dir(run_dir: Path, label: str) -> Path:
    return Path(run_dir) / "fit" / label


def fit_labels(run_dir: str | Path) -> list[str]:
    manifest = RunManifest(Path(run_dir))
    stage = manifest.doc["stages"].get("fit", {})
    return stage.get("labels", [])


def stage_fit(
    run_dir: str | Path,
    spec_paths: list[str | Path],
    seed: int | None = None,
    chains: int | None = None,
    sampling_iters: int | None = None,
    warmup_iters: int | None = None,
    progress: Callable[[str, int, str, int, int], None] | None = None,
) -> dict[str, Path]:
    """Fit one or more model specs; writes draws, summaries, layout manifests."""
    run_dir = Path(run_dir)
    with _stage_lock(run_dir):
        started = now_iso()
        manifest = RunManifest(run_dir)
        cells, _poststrat, geo, report = _load_preprocess(manifest)

        base_seed = seed if seed is not None else int(manifest.doc["config"].get("seed", 0))
        cfg = SamplerConfig(seed=base_seed)
        if chains is not None:
            cfg = replace(cfg, chains=chains)
        if sampling_iters is not None:
            cfg = replace(cfg, sampling_iters=sampling_iters)
        if warmup_iters is not None:
            cfg = replace(cfg, warmup_iters=warmup_iters)

        artifacts: dict[str, Path] = {}
        labels: list[str] = []
        flags: dict[str, list[str]] = {}
        for spec_path in spec_paths:
            spec = ModelSpec.from_json(spec_path)
            label = spec.label or Path(spec_path).stem
            if label in labels:
                raise InputError(f"duplicate model label {label!r}")
            labels.append(label)
            data = compile_spec(spec, cells, geo)
            model_progress = None
            if progress is not None:
                model_progress = lambda c, ph, it, tot, _l=label: progress(_l, c, ph, it, tot)
            draws = run_nuts(data, cfg=replace(cfg, seed=base_seed), progress=model_progress)

            fit_dir = _fit_dir(run_dir, label)
            saved = draws.save(fit_dir)
            artifacts[f"{label}/draws"] = saved["draws"]
            artifacts[f"{label}/draws_meta"] = saved["meta"]
            spec_out = fit_dir / "spec.json"
            spec.to_json(spec_out)
            artifacts[f"{label}/spec"] = spec_out
            layout_path = fit_dir / "layout.json"
            data.layout.write_manifest(layout_path)
            artifacts[f"{label}/layout"] = layout_path

            table = summarize(draws)
            write_summary(table, fit_dir / "summary.csv", fit_dir / "summary.json")
            artifacts[f"{label}/summary"] = fit_dir / "summary.csv"
            artifacts[f"{label}/summary_json"] = fit_dir / "summary.json"

            fit_flags = list(draws.warnings())
            worst = table["R-hat"].dropna()
            if not worst.empty and (worst > RHAT_FLAG_THRESHOLD).any():
                bad = worst[worst > RHAT_FLAG_THRESHOLD]
                fit_flags.append(
                    f"WARNING: R-hat above {RHAT_FLAG_THRESHOLD} for "
                    f"{list(bad.index[:10])}; chains may not have converged"
                )
            flags[label] = fit_flags
            artifacts[f"{label}/flags"] = _write_json(fit_dir / "flags.json", fit_flags)

        manifest.record_stage("fit", artifacts, started, extra={"labels": labels, "flags": flags})
        return artifacts


def _load_fit(run_dir: Path, label: str):
    fit_dir = _fit_dir(run_dir, label)
    if not fit_dir.exists():
        raise ArtifactError(f"no fit artifacts for model {label!r}; run fit first")
    draws = DrawsMatrix.load(fit_dir)
    spec = ModelSpec.from_json(fit_dir / "spec.json")
    return draws, spec


def stage_diagnose(
    run_dir: str | Path, seed: int | None = None, n_reps: int = 10
) -> dict[str, Path]:
    """LOO per fit, cross-model comparison, and posterior predictive checks."""
    run_dir = Path(run_dir)
    with _stage_lock(run_dir):
        started = now_iso()
        manifest = RunManifest(run_dir)
        cells, _poststrat, geo, report = _load_preprocess(manifest)
        labels = fit_labels(run_dir)
        if not labels:
            raise ArtifactError("no fits recorded; run fit first")
        base_seed = seed if seed is not None else int(manifest.doc["config"].get("seed", 0))

        cell_ids = [
            "|".join(map(str, key))
            for key in zip(
                cells["sex"], cells["age_group"], cells["race"], cells["zip"], cells["week_index"]
            )
        ]
        out = run_dir / "diagnose"
        artifacts: dict[str, Path] = {}
        results: list[LooResult] = []
        for label in labels:
            draws, spec = _load_fit(run_dir, label)
            data = compile_spec(spec, cells, geo)
            ll = pointwise_loglik(draws, data)
            mask_ids = [cid for cid, n in zip(cell_ids, data.n) if n > 0]
            loo = psis_loo(ll, label=label, cell_ids=mask_ids)
            results.append(loo)
            artifacts[f"{label}/loo"] = _write_json(out / label / "loo.json", loo.to_dict())
            pointwise = pd.DataFrame(
                {"cell_id": mask_ids, "elpd": loo.pointwise, "pareto_k": loo.pareto_k}
            )
            artifacts[f"{label}/loo_pointwise"] = write_table(
                pointwise, out / label / "loo_pointwise.csv"
            )

            reps = ppc_replicates(
                draws, data, n_reps=n_reps, group="week", seed=base_seed
            )
            merged = reps.replicates.pivot(index="week_index", columns="rep", values="rate")
            merged.columns = [f"rep{i}" for i in merged.columns]
            ppc_frame = reps.observed.merge(merged, on="week_index")
            artifacts[f"{label}/ppc"] = write_table(ppc_frame, out / label / "ppc.csv")
            artifacts[f"{label}/ppc_json"] = _write_json(
                out / label / "ppc.json",
                {
                    "group": reps.group,
                    "observed": json.loads(reps.observed.to_json(orient="records")),
                    "replicates": json.loads(reps.replicates.to_json(orient="records")),
                    "notes": reps.notes,
                },
            )

        comparison = loo_compare(results, labels)
        artifacts["comparison"] = Path(out / "comparison.csv")
        comparison.to_csv(artifacts["comparison"])
        artifacts["comparison_json"] = Path(out / "comparison.json")
        comparison.to_json(artifacts["comparison_json"])
        manifest.record_stage("diagnose", artifacts, started, extra={"labels": labels})
        return artifacts


def stage_poststratify(
    run_dir: str | Path,
    groupings: tuple[str, ...] = DEFAULT_GROUPINGS,
    seed: int | None = None,
    keep_draws: bool = False,
) -> dict[str, Path]:
    run_dir = Path(run_dir)
    with _stage_lock(run_dir):
        started = now_iso()
        manifest = RunManifest(run_dir)
        cells, poststrat, geo, report = _load_preprocess(manifest)
        week_origin = date.fromisoformat(report["week_origin"])
        labels = fit_labels(run_dir)
        if not labels:
            raise ArtifactError("no fits recorded; run fit first")
        base_seed = seed if seed is not None else int(manifest.doc["config"].get("seed", 0))

        out = run_dir / "poststratify"
        artifacts: dict[str, Path] = {}
        for label in labels:
            draws, spec = _load_fit(run_dir, label)
            data = compile_spec(spec, cells, geo)
            for grouping in groupings:
                parsed = parse_grouping(grouping)
                series = poststratify(
                    draws, data, poststrat, grouping=grouping, geo=geo.frame,
                    seed=base_seed, keep_draws=keep_draws,
                )
                name = "overall" if not parsed else "_".join(parsed)
                csv_path = out / label / f"estimates_{name}.csv"
                export_estimates(series, "delimited", path=csv_path, week_origin=week_origin)
                json_path = out / label / f"estimates_{name}.json"
                json_path.write_text(
                    export_estimates(series, "json", week_origin=week_origin)
                )
                artifacts[f"{label}/estimates_{name}"] = csv_path
                artifacts[f"{label}/estimates_{name}_json"] = json_path
                if keep_draws and series.draw_estimates is not None:
                    dump = pd.DataFrame(
                        series.draw_estimates,
                        columns=[f"g{i}" for i in range(series.draw_estimates.shape[1])],
                    )
                    dump.insert(0, "draw", np.arange(len(dump)))
                    draws_path = out / label / f"estimate_draws_{name}.csv"
                    artifacts[f"{label}/estimate_draws_{name}"] = write_table(dump, draws_path)
        manifest.record_stage(
            "poststratify", artifacts, started, extra={"groupings": list(groupings)}
        )
        return artifacts


def stage_report(run_dir: str | Path) -> dict[str, Path]:
    """Bundle summaries, LOO, PPC, and estimates into one JSON + plot-data dir."""
    run_dir = Path(run_dir)
    with _stage_lock(run_dir):
        started = now_iso()
        manifest = RunManifest(run_dir)
        labels = fit_labels(run_dir)
        if not labels:
            raise ArtifactError("no fits recorded; run fit first")

        bundle: dict = {
            "run_id": manifest.doc["run_id"],
            "preprocess": json.loads(manifest.artifact("preprocess", "report").read_text()),
            "summary": {},
            "loo": {},
            "ppc": {},
            "estimates": {},
            "flags": manifest.doc["stages"].get("fit", {}).get("flags", {}),
        }
        out = run_dir / "report"
        plots = out / "plots"
        plots.mkdir(parents=True, exist_ok=True)
        artifacts: dict[str, Path] = {}

        for label in labels:
            fit_dir = _fit_dir(run_dir, label)
            bundle["summary"][label] = json.loads((fit_dir / "summary.json").read_text())
            loo_path = run_dir / "diagnose" / label / "loo.json"
            if loo_path.exists():
                bundle["loo"][label] = json.loads(loo_path.read_text())
            ppc_path = run_dir / "diagnose" / label / "ppc.json"
            if ppc_path.exists():
                bundle["ppc"][label] = json.loads(ppc_path.read_text())
            est_dir = run_dir / "poststratify" / label
            if est_dir.exists():
                bundle["estimates"][label] = {}
                for path in sorted(est_dir.glob("estimates_*.json")):
                    key = path.stem.replace("estimates_", "")
                    bundle["estimates"][label][key] = json.loads(path.read_text())
        comparison_path = run_dir / "diagnose" / "comparison.json"
        if comparison_path.exists():
            bundle["loo"]["comparison"] = json.loads(comparison_path.read_text())

        artifacts["report"] = _write_json(out / "report.json", bundle)
        for section in ("summary", "loo", "ppc", "estimates"):
            artifacts[f"plots_{section}"] = _write_json(
                plots / f"{section}.json", bundle[section]
            )
        manifest.record_stage("report", artifacts, started)
        return artifacts
