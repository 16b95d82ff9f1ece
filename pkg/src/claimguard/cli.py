"""Operator command line: fixtures, enrollment, checks, evaluation, serving.

Machine-readable output (JSON or CSV) goes to stdout; human summaries go to
stderr, so every subcommand is scriptable in CI. Exit codes: 0 success,
1 domain error (validation, not-found, file problems), 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .config import AppConfig, load_config
from .errors import ClaimGuardError
from .evaluation.detection import pr_curve
from .evaluation.fixtures import (
    FixtureSpec,
    PerturbationSpec,
    fixture_claims,
    generate_fixture,
    simulate_detector,
)
from .evaluation.io import (
    dataset_from_manifest,
    load_manifest,
    read_annotations,
    read_detections,
    write_ablation_csv,
    write_cmc_csv,
    write_pr_curve_csv,
    write_pr_table_csv,
)
from .evaluation.retrieval import AblationConfig, ablation_run, cmc
from .evaluation.splits import make_probe_gallery
from .features import FusionConfig, ToyEmbeddingProvider
from .imaging import decode_image
from .matcher import FraudMode, FraudPolicy, fraud_check
from .model import DamageClass, DamageRegion, NormalizedBBox, RegionSource
from .pipeline import CasePair, DescriptorPipeline
from .store import ClaimStore, now_ms


def _echo_err(message: str) -> None:
    click.echo(message, err=True)


def _fail(message: str) -> "click.exceptions.Exit":
    _echo_err(f"error: {message}")
    return click.exceptions.Exit(1)


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(), default=None, help="Config file (JSON).")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Anti-fraud tooling for photo-based car-insurance claims."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


def _app_config(ctx: click.Context, store: str | None = None) -> AppConfig:
    config = load_config(ctx.obj.get("config_path"))
    if store is not None:
        config = AppConfig(
            store_path=store,
            host=config.host,
            port=config.port,
            fusion=config.fusion,
            policy=config.policy,
            provider=config.provider,
            lookup_local_path=config.lookup_local_path,
            lookup_global_path=config.lookup_global_path,
            hist_source=config.hist_source,
            max_image_bytes=config.max_image_bytes,
        )
    return config


@main.command("gen-fixtures")
@click.option("--vehicles", type=int, default=50, show_default=True)
@click.option("--images-per-vehicle", type=int, default=2, show_default=True)
@click.option("--duplicates", type=int, default=None, help="Duplicate pairs (default: one per vehicle).")
@click.option("--brightness-delta", type=float, default=10.0, show_default=True)
@click.option("--crop-jitter", type=float, default=0.02, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def gen_fixtures(
    vehicles: int,
    images_per_vehicle: int,
    duplicates: int | None,
    brightness_delta: float,
    crop_jitter: float,
    seed: int,
    out_dir: str,
) -> None:
    """Generate a deterministic synthetic claims dataset."""
    try:
        spec = FixtureSpec(
            vehicles=vehicles,
            images_per_vehicle=images_per_vehicle,
            duplicate_pairs=duplicates,
            perturbation=PerturbationSpec(
                brightness_delta=brightness_delta, crop_jitter_frac=crop_jitter
            ),
            seed=seed,
        )
        manifest = generate_fixture(spec, out_dir)
    except ClaimGuardError as exc:
        raise _fail(str(exc))
    _echo_err(
        f"wrote {vehicles} vehicles to {out_dir} "
        f"(threshold {manifest['calibration']['threshold']})"
    )
    click.echo(json.dumps({"out": out_dir, "calibration": manifest["calibration"]}))


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--store", "store_path", type=click.Path(), required=True)
@click.pass_context
def enroll(ctx: click.Context, manifest_path: str, store_path: str) -> None:
    """Enroll every vehicle in a fixture manifest into a claim store."""
    config = _app_config(ctx, store=store_path)
    try:
        manifest = load_manifest(manifest_path)
        dataset = dataset_from_manifest(manifest, Path(manifest_path).parent)
        store = ClaimStore(config.store_path, config=config.fusion)
        pipeline = DescriptorPipeline(
            config.build_provider(), config.fusion, hist_source=config.hist_source  # type: ignore[arg-type]
        )
        enrolled = features = 0
        with store:
            for record, images in fixture_claims(manifest, dataset):
                entries = pipeline.entries_for_claim(record, images)
                store.enroll_claim(record, entries)
                enrolled += 1
                features += len(entries)
    except (ClaimGuardError, OSError) as exc:
        raise _fail(str(exc))
    _echo_err(f"enrolled {enrolled} claims ({features} descriptors) into {config.store_path}")
    click.echo(json.dumps({"enrolled": enrolled, "features": features}))


def _parse_region(value: str) -> DamageRegion:
    parts = value.split(",")
    if len(parts) not in (4, 5):
        raise click.BadParameter("expected cx,cy,w,h[,class]")
    damage_class = DamageClass(parts[4]) if len(parts) == 5 else DamageClass.SCRATCH
    bbox = NormalizedBBox(*(float(v) for v in parts[:4]))
    bbox.validate()
    return DamageRegion(bbox=bbox, damage_class=damage_class, source=RegionSource.ANNOTATION)


@main.command()
@click.option("--store", "store_path", type=click.Path(), required=True)
@click.option("--vehicle-id", required=True)
@click.option("--body", "body_path", type=click.Path(), required=True)
@click.option("--close-up", "close_path", type=click.Path(), required=True)
@click.option("--region", "regions", multiple=True, required=True, help="cx,cy,w,h[,class]")
@click.option("--threshold", type=float, default=None)
@click.option("--mode", type=click.Choice(["cross_vehicle", "same_vehicle"]), default=None)
@click.pass_context
def check(
    ctx: click.Context,
    store_path: str,
    vehicle_id: str,
    body_path: str,
    close_path: str,
    regions: tuple[str, ...],
    threshold: float | None,
    mode: str | None,
) -> None:
    """Read-only fraud check of probe images against an enrolled store."""
    config = _app_config(ctx, store=store_path)
    try:
        store = ClaimStore(config.store_path)
        fusion = store.config
        pipeline = DescriptorPipeline(
            ToyEmbeddingProvider(fusion.local_dim, fusion.global_dim)
            if config.provider == "toy"
            else config.build_provider(),
            fusion,
            hist_source=config.hist_source,  # type: ignore[arg-type]
        )
        case = CasePair(
            body_id="probe-body",
            body=decode_image(Path(body_path).read_bytes()),
            close_up_id="probe-close",
            close_up=decode_image(Path(close_path).read_bytes()),
        )
        descriptors = [
            pipeline.descriptor_for_region(case, _parse_region(r).bbox) for r in regions
        ]
        policy = config.policy
        policy = FraudPolicy(
            mode=FraudMode(mode) if mode else policy.mode,
            threshold=threshold if threshold is not None else policy.threshold,
            top_k=policy.top_k,
        )
        assessment = fraud_check(f"probe-{now_ms()}", vehicle_id, descriptors, store, policy)
    except (ClaimGuardError, OSError) as exc:
        raise _fail(str(exc))
    verdict = "flagged" if assessment.flagged else "not flagged"
    if assessment.best is not None:
        _echo_err(f"{verdict} (best {assessment.best.similarity:.4f})")
    else:
        _echo_err(f"{verdict} (empty history)")
    click.echo(json.dumps(assessment.to_json()))


@main.command("eval-det")
@click.option("--annotations", "annotations_path", type=click.Path(), required=True)
@click.option("--detections", "detections_path", type=click.Path(), required=True)
@click.option("--iou", "iou_threshold", type=float, default=0.5, show_default=True)
@click.option("--thresholds", default="0.1,0.3,0.5", show_default=True, help="Comma-separated, ascending.")
@click.option("--out-table", type=click.Path(), default=None, help="Write the PR table CSV here.")
@click.option("--out-curve", type=click.Path(), default=None, help="Write recall,precision plot CSV here.")
def eval_det(
    annotations_path: str,
    detections_path: str,
    iou_threshold: float,
    thresholds: str,
    out_table: str | None,
    out_curve: str | None,
) -> None:
    """Detection precision/recall over a confidence-threshold sweep."""
    try:
        gts = read_annotations(annotations_path)
        preds = read_detections(detections_path)
        values = [float(v) for v in thresholds.split(",") if v]
        curve = pr_curve(preds, gts, iou_threshold=iou_threshold, thresholds=values)
        if out_table:
            write_pr_table_csv(out_table, curve)
        if out_curve:
            write_pr_curve_csv(out_curve, curve)
    except (ClaimGuardError, OSError, ValueError) as exc:
        raise _fail(str(exc))
    for point in curve.points:
        _echo_err(
            f"t={point.confidence_threshold:g} precision={point.precision:.4f} "
            f"recall={point.recall:.4f}"
        )
    lines = ["confidence_threshold,precision,recall,tp,fp,fn"]
    for p in curve.points:
        lines.append(
            f"{p.confidence_threshold:.6f},{p.precision:.6f},{p.recall:.6f},{p.tp},{p.fp},{p.fn}"
        )
    click.echo("\n".join(lines))


def _fusion_options(hist_bins: int, weights: str) -> FusionConfig:
    parts = [float(v) for v in weights.split(",")]
    if len(parts) != 3:
        raise click.BadParameter("weights must be w_local,w_global,w_hist")
    return FusionConfig(hist_bins=hist_bins, block_weights=(parts[0], parts[1], parts[2]))


@main.command("eval-cmc")
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--max-rank", type=int, default=10, show_default=True)
@click.option("--hist-bins", type=int, default=8, show_default=True)
@click.option("--weights", default="1,1,1", show_default=True)
@click.option("--roi-source", type=click.Choice(["annotation", "detector"]), default="annotation")
@click.option("--detections", "detections_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_cmc(
    manifest_path: str,
    seed: int,
    max_rank: int,
    hist_bins: int,
    weights: str,
    roi_source: str,
    detections_path: str | None,
    out_path: str | None,
) -> None:
    """CMC rank-k rates for one fusion config on a fixture dataset."""
    from .evaluation.retrieval import _FixtureDescriptorCache

    try:
        if roi_source == "detector" and detections_path is None:
            raise ClaimGuardError("--roi-source detector requires --detections")
        manifest = load_manifest(manifest_path)
        dataset = dataset_from_manifest(manifest, Path(manifest_path).parent)
        fusion = _fusion_options(hist_bins, weights)
        split = make_probe_gallery(dataset, seed)
        pipeline = DescriptorPipeline(
            ToyEmbeddingProvider(fusion.local_dim, fusion.global_dim), fusion
        )
        cache = _FixtureDescriptorCache(
            dataset,
            pipeline,
            roi_source,  # type: ignore[arg-type]
            read_detections(detections_path) if detections_path else None,
        )
        curve = cmc(split.probes, split.gallery, max_rank, cache.descriptor)
        if out_path:
            write_cmc_csv(out_path, curve.rates)
    except (ClaimGuardError, OSError) as exc:
        raise _fail(str(exc))
    _echo_err(f"rank-1 {curve.rank(1):.4f} rank-{max_rank} {curve.rates[-1]:.4f} over {curve.probe_count} probes")
    lines = ["rank,match_rate"] + [f"{r},{rate:.6f}" for r, rate in enumerate(curve.rates, 1)]
    click.echo("\n".join(lines))


_DEFAULT_ABLATION = [
    {"label": "global-only", "hist_bins": 8, "weights": [0, 1, 0], "roi_source": "annotation"},
    {"label": "global+local", "hist_bins": 8, "weights": [1, 1, 0], "roi_source": "annotation"},
    {"label": "fused-hist8", "hist_bins": 8, "weights": [1, 1, 1], "roi_source": "annotation"},
    {"label": "fused-hist16", "hist_bins": 16, "weights": [1, 1, 1], "roi_source": "annotation"},
    {"label": "fused-hist32", "hist_bins": 32, "weights": [1, 1, 1], "roi_source": "annotation"},
    {"label": "fused-hist8-detector", "hist_bins": 8, "weights": [1, 1, 1], "roi_source": "detector"},
]


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--configs", "configs_path", type=click.Path(), default=None, help="JSON list of run configs (default: standard battery).")
@click.option("--detections", "detections_path", type=click.Path(), default=None, help="Detector output file for roi_source=detector rows; generated when omitted.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def ablate(
    ctx: click.Context,
    manifest_path: str,
    seed: int,
    configs_path: str | None,
    detections_path: str | None,
    out_path: str | None,
) -> None:
    """Rank-1/rank-10 across fusion configs and ROI sources."""
    try:
        manifest = load_manifest(manifest_path)
        root = Path(manifest_path).parent
        dataset = dataset_from_manifest(manifest, root)
        raw = (
            json.loads(Path(configs_path).read_text())
            if configs_path
            else _DEFAULT_ABLATION
        )
        configs = [
            AblationConfig(
                label=item["label"],
                fusion=FusionConfig(
                    hist_bins=int(item.get("hist_bins", 8)),
                    block_weights=tuple(float(w) for w in item.get("weights", (1, 1, 1))),  # type: ignore[arg-type]
                ),
                roi_source=item.get("roi_source", "annotation"),
            )
            for item in raw
        ]
        needs_detector = any(c.roi_source == "detector" for c in configs)
        if needs_detector and detections_path is None:
            detections_path = str(root / "detections-simulated.txt")
            simulate_detector(dataset, detections_path, seed=seed)
            _echo_err(f"simulated detector boxes -> {detections_path}")
        rows = ablation_run(
            dataset,
            configs,
            seed=seed,
            provider_factory=lambda f: ToyEmbeddingProvider(f.local_dim, f.global_dim),
            detector_file=detections_path,
        )
        if out_path:
            write_ablation_csv(out_path, rows)
    except (ClaimGuardError, OSError, KeyError) as exc:
        raise _fail(str(exc))
    for row in rows:
        _echo_err(f"{row.label}: rank1={row.rank1:.4f} rank10={row.rank10:.4f}")
    lines = ["label,roi_source,hist_bins,weights,rank1,rank10,probes"]
    for row in rows:
        weights_str = "|".join(f"{w:g}" for w in row.fusion.block_weights)
        lines.append(
            f"{row.label},{row.roi_source},{row.fusion.hist_bins},{weights_str},"
            f"{row.rank1:.6f},{row.rank10:.6f},{row.probe_count}"
        )
    click.echo("\n".join(lines))


@main.command()
@click.option("--store", "store_path", type=click.Path(), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx: click.Context, store_path: str | None, host: str | None, port: int | None) -> None:
    """Start the claim-intake HTTP service."""
    import uvicorn

    from .service import create_app

    config = _app_config(ctx, store=store_path)
    try:
        app = create_app(config)
    except ClaimGuardError as exc:
        raise _fail(str(exc))
    uvicorn.run(app, host=host or config.host, port=port or config.port)


if __name__ == "__main__":
    main()
