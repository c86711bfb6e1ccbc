"""Command-line surface: segment, explain, check-t, metrics, compare-cost, bench.

Exit codes: 0 success, 2 invalid input or validation failure, 3 consistency
check failed.  Every command is deterministic given its flags and seed.
"""

from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import CapacityError, InvalidInputError
from .games import (
    EvalCache,
    ValueFunction,
    make_masked_image_game,
    mask_to_bool,
    masks_to_bool,
)
from .hierarchy import PartitionHierarchy
from .imageio import heatmap_bytes, read_csv_matrix, read_image, write_csv_matrix, write_pgm
from .metrics import MetricsReport, evaluate_all
from .models import load_fixture_file, pixel_sum_scorer, template_mean_scorer
from .owen import owen_multilevel, per_feature_eval_counts, predicted_eval_count
from .segmentation import SegmentationConfig, build_hierarchy
from .shapley import exact_shapley, permutation_shapley
from .tproperty import check_t_property


def _scorer_from_spec(spec: str):
    if spec == "sum":
        return pixel_sum_scorer()
    if spec == "mean":
        return template_mean_scorer()
    path = Path(spec)
    if path.exists():
        return load_fixture_file(path)
    raise InvalidInputError(
        f"unknown scorer {spec!r}: expected 'sum', 'mean' or a fixture JSON path"
    )


def _seg_config(pct_lower, pct_upper, dilate, fanout, max_depth, epsilon, refine=False):
    eps = "median" if epsilon == "median" else float(epsilon)
    return SegmentationConfig(
        pct_lower=pct_lower,
        pct_upper=pct_upper,
        dilate_ksize=dilate,
        fanout_target=fanout,
        max_depth=max_depth,
        epsilon=eps,
        refine=refine,
    )


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


scorer_option = click.option("--scorer", default="mean", show_default=True,
                             help="'sum', 'mean', or a fixture JSON path")
baseline_option = click.option("--baseline", type=click.Choice(["mean", "zero"]),
                               default="mean", show_default=True)


@click.group()
@click.version_option(__version__)
def main():
    """Game-theoretic feature attribution over coalition hierarchies."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@scorer_option
@baseline_option
@click.option("--pct-lower", type=float, default=75.0, show_default=True)
@click.option("--pct-upper", type=float, default=90.0, show_default=True)
@click.option("--dilate", type=int, default=2, show_default=True)
@click.option("--fanout", type=int, default=5, show_default=True)
@click.option("--max-depth", type=int, default=6, show_default=True)
@click.option("--epsilon", default="median", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def segment(input_path, scorer, baseline, pct_lower, pct_upper, dilate, fanout,
            max_depth, epsilon, threads, out_dir):
    """Build the edge-based hierarchy and write JSON plus level label maps."""
    try:
        image = read_image(input_path)
        vf = make_masked_image_game(image, baseline, _scorer_from_spec(scorer))
        config = _seg_config(pct_lower, pct_upper, dilate, fanout, max_depth, epsilon)
        result = build_hierarchy(image, vf, config)
        report = result.hierarchy.validate()
        if not report.ok:
            _fail("; ".join(report.issues), 2)
    except InvalidInputError as exc:
        _fail(str(exc), 2)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "hierarchy.json").write_text(result.hierarchy.to_json(indent=2))
    for idx, labels in enumerate(result.level_labels, start=1):
        write_pgm(out / f"level_{idx:02d}.pgm", labels % 256)
    (out / "meta.json").write_text(json.dumps(result.metadata, indent=2, sort_keys=True))
    click.echo(f"wrote hierarchy with {len(result.level_labels)} segment levels to {out}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@scorer_option
@baseline_option
@click.option("--method", type=click.Choice(["shapley", "owen"]), default="owen",
              show_default=True)
@click.option("--mc", "mc_samples", type=int, default=0,
              help="Monte Carlo permutation samples (shapley only; 0 = exact)")
@click.option("--pct-lower", type=float, default=75.0, show_default=True)
@click.option("--pct-upper", type=float, default=90.0, show_default=True)
@click.option("--dilate", type=int, default=2, show_default=True)
@click.option("--fanout", type=int, default=5, show_default=True)
@click.option("--max-depth", type=int, default=6, show_default=True)
@click.option("--epsilon", default="median", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def explain(input_path, scorer, baseline, method, mc_samples, pct_lower, pct_upper,
            dilate, fanout, max_depth, epsilon, seed, threads, out_dir):
    """Per-pixel attribution: CSV of raw scores, min-max heatmap, stats JSON."""
    try:
        image = read_image(input_path)
        vf = make_masked_image_game(image, baseline, _scorer_from_spec(scorer))
        cache = EvalCache()
        start = time.perf_counter()
        predicted = None
        if method == "shapley":
            if mc_samples > 0:
                attribution = permutation_shapley(vf, mc_samples, seed=seed, cache=cache)
            else:
                predicted = 1 << vf.n
                attribution = exact_shapley(vf, cache=cache)
        else:
            config = _seg_config(pct_lower, pct_upper, dilate, fanout, max_depth,
                                 epsilon, refine=True)
            result = build_hierarchy(image, vf, config, cache=cache)
            predicted = predicted_eval_count(result.hierarchy)
            attribution = owen_multilevel(vf, result.hierarchy, cache=cache,
                                          limit=1 << 26)
        elapsed = time.perf_counter() - start
    except (InvalidInputError, CapacityError) as exc:
        _fail(str(exc), 2)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scores = attribution.scores.reshape(image.shape[:2])
    write_csv_matrix(out / "attribution.csv", scores)
    write_pgm(out / "heatmap.pgm", heatmap_bytes(scores))
    stats = {
        "method": attribution.method,
        "seed": seed,
        "predicted_eval_count": predicted,
        "distinct_evals": attribution.eval_stats.get("distinct_calls"),
        "total_requests": attribution.eval_stats.get("total_requests"),
        "wall_time_s": elapsed,
    }
    (out / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True))
    click.echo(f"wrote attribution for {vf.n} pixels to {out}")


@main.command("check-t")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--hierarchy", "hierarchy_path", required=True, type=click.Path(exists=True))
@scorer_option
@baseline_option
@click.option("--tau", type=float, default=0.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="write the report JSON here as well as stdout")
def check_t(input_path, hierarchy_path, scorer, baseline, tau, out_path):
    """Check upward label consistency; exit 0 on pass, 3 on violations."""
    try:
        image = read_image(input_path)
        vf = make_masked_image_game(image, baseline, _scorer_from_spec(scorer))
        h = PartitionHierarchy.from_json(Path(hierarchy_path).read_text())
        report = check_t_property(h, vf, tau)
    except InvalidInputError as exc:
        _fail(str(exc), 2)
    doc = json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(doc)
    click.echo(doc)
    if not report.passed:
        sys.exit(3)


@main.command("metrics")
@click.option("--attr", "attr_path", required=True, type=click.Path(exists=True))
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--bbox", default=None, help="x0,y0,x1,y1 (inclusive)")
@click.option("--out", "out_path", type=click.Path(), default=None)
def metrics_cmd(attr_path, mask_path, bbox, out_path):
    """Score an attribution CSV against a mask PGM and/or bounding box."""
    try:
        attr = read_csv_matrix(attr_path)
        mask = read_image(mask_path) > 127 if mask_path else None
        box = tuple(int(v) for v in bbox.split(",")) if bbox else None
        if box is not None and len(box) != 4:
            raise InvalidInputError("bbox must have four components")
        report = evaluate_all(attr, mask=mask, bbox=box)
    except InvalidInputError as exc:
        _fail(str(exc), 2)
    doc = json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(doc)
    click.echo(doc)
    click.echo(MetricsReport.csv_header())
    click.echo(report.to_csv_row())


@main.command("compare-cost")
@click.option("--n-features", type=int, required=True)
@click.option("--fanout", required=True, help="comma list, e.g. 2,5,5")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--measure/--no-measure", default=True, show_default=True,
              help="also run the hierarchical attribution on a random game")
def compare_cost(n_features, fanout, seed, measure):
    """Predicted vs measured evaluation counts: flat vs hierarchical."""
    try:
        fanouts = [int(v) for v in fanout.split(",")]
        total = math.prod(fanouts)
        if total != n_features:
            raise InvalidInputError(
                f"fan-outs {fanouts} cover {total} features, not {n_features}"
            )
        h = PartitionHierarchy.balanced(fanouts)
        hier_predicted = predicted_eval_count(h)
        flat_predicted = 1 << n_features
        measured = None
        if measure:
            if max(per_feature_eval_counts(h)) > (1 << 22):
                raise CapacityError("hierarchy too costly to measure at desk scale")
            cache = EvalCache()
            # the distinct-evaluation count depends only on the hierarchy,
            # so a cheap additive game suffices for instrumentation
            rng = np.random.default_rng(seed)
            weights = rng.uniform(-1.0, 1.0, n_features)
            game = ValueFunction(
                n_features,
                lambda m: float(weights[mask_to_bool(m, n_features)].sum()),
                lambda ms: masks_to_bool(ms, n_features).astype(float) @ weights,
            )
            owen_multilevel(game, h, cache=cache, limit=1 << 23)
            measured = cache.distinct_calls
    except (InvalidInputError, CapacityError) as exc:
        _fail(str(exc), 2)
    click.echo("method,predicted_per_feature,measured_distinct")
    click.echo(f"flat_shapley,{flat_predicted},")
    click.echo(f"hierarchical_owen,{hier_predicted},{'' if measured is None else measured}")


@main.command("bench")
@click.option("--sizes", required=True, help="comma list of square image sizes")
@scorer_option
@baseline_option
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def bench(sizes, scorer, baseline, seed, out_path):
    """Wall time and evaluation counts of the full pipeline per image size."""
    try:
        size_list = [int(v) for v in sizes.split(",")]
        rows = ["size,pixels,shapley_feasible,distinct_evals,total_requests,wall_time_s"]
        for size in size_list:
            rng = np.random.default_rng(seed)
            image = np.zeros((size, size))
            q = max(1, size // 4)
            image[q : 3 * q, q : 3 * q] = 200.0
            image += rng.normal(0.0, 1.0, image.shape)
            vf = make_masked_image_game(image, baseline, _scorer_from_spec(scorer))
            cache = EvalCache()
            start = time.perf_counter()
            config = SegmentationConfig(refine=True)
            result = build_hierarchy(image, vf, config, cache=cache)
            owen_multilevel(vf, result.hierarchy, cache=cache, limit=1 << 26)
            elapsed = time.perf_counter() - start
            feasible = "yes" if size * size <= 24 else "no"
            rows.append(
                f"{size},{size * size},{feasible},{cache.distinct_calls},"
                f"{cache.total_requests},{elapsed:.4f}"
            )
    except (InvalidInputError, CapacityError) as exc:
        _fail(str(exc), 2)
    text = "\n".join(rows)
    if out_path:
        Path(out_path).write_text(text + "\n")
    click.echo(text)


if __name__ == "__main__":
    main()
