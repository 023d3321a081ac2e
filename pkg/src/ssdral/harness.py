"""Active-learning cycle orchestration, metrics records, and run summaries.

Each cycle trains the learner on the current labels, predicts the whole
scene, scores and selects superpoints with the configured strategy, labels
them under the click budget, and appends one JSON record. A full run is a
pure function of its configuration: identical configs produce byte-identical
logs regardless of the thread cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud, SuperpointPartition, read_cloud_file, validate_partition
from .config import RunConfig
from .errors import ConfigError, DataError
from .graph import aggregate, build_graph, fps_select, superpoint_feature
from .labeling import AnnotationState, ClickLedger, dominant_labeling, noise_aware_labeling
from .learner import make_learner
from .metrics import EvalResult, evaluate
from .partition import dominant_class, generate_superpoints
from .scene import generate_scene
from .scoring import (
    POINT_SCORERS,
    class_weights,
    classbal_rank,
    random_select,
    region_margin_uncertainty,
    region_mean_uncertainty,
)


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    clicks_used: int
    labeled_superpoints: int
    labeled_superpoint_fraction: float
    labeled_point_fraction: float
    discarded_regions: int
    accuracy: float
    miou: float
    per_class_iou: tuple

    def to_json(self) -> str:
        iou = [None if (isinstance(v, float) and math.isnan(v)) else v for v in self.per_class_iou]
        payload = {
            "cycle": self.cycle,
            "clicks_used": self.clicks_used,
            "labeled_superpoints": self.labeled_superpoints,
            "labeled_superpoint_fraction": self.labeled_superpoint_fraction,
            "labeled_point_fraction": self.labeled_point_fraction,
            "discarded_regions": self.discarded_regions,
            "accuracy": self.accuracy,
            "miou": self.miou,
            "per_class_iou": iou,
        }
        return json.dumps(payload)


def _record(cycle: int, clicks: int, state: AnnotationState, ev: EvalResult) -> CycleRecord:
    n_points = state.partition.num_points
    n_sp = len(state.partition)
    return CycleRecord(
        cycle=cycle,
        clicks_used=clicks,
        labeled_superpoints=state.labeled_superpoint_count,
        labeled_superpoint_fraction=state.labeled_superpoint_count / n_sp,
        labeled_point_fraction=state.labeled_point_count / n_points,
        discarded_regions=len(state.discarded),
        accuracy=ev.accuracy,
        miou=ev.miou,
        per_class_iou=tuple(float(v) for v in ev.per_class_iou),
    )


def seed_labeled_set(partition: SuperpointPartition, seed_fraction: float, rng,
                     gt_labels) -> tuple[AnnotationState, int]:
    """Label ceil(fraction * count) uniformly chosen superpoints, one click each."""
    if not 0.0 < seed_fraction <= 1.0:
        raise ConfigError(f"seed fraction must be in (0, 1], got {seed_fraction}")
    count = math.ceil(seed_fraction * len(partition))
    if count < 1:
        raise ConfigError("seed fraction yields no superpoints")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    state = AnnotationState(partition)
    ledger = ClickLedger(count)
    for sid in sorted(random_select(np.arange(len(partition)), count, rng)):
        dominant_labeling(sid, partition, gt_labels, state, ledger)
    return state, ledger.clicks_used


def _rank_pool(config: RunConfig, prediction, partition, state, limit: int):
    """Class-balanced ranking of the unlabeled pool."""
    pool = state.unlabeled_ids()
    u_point = POINT_SCORERS["bvsb"](prediction.probs)
    mode_margin = config.strategy == "ssdr"
    u_region, dom_pred = [], []
    for sid in pool:
        region = partition.superpoints[sid]
        if mode_margin:
            u_region.append(region_margin_uncertainty(u_point, prediction.pred_labels, region))
        else:
            u_region.append(region_mean_uncertainty(u_point, region))
        dom_pred.append(dominant_class(region, prediction.pred_labels))
    # pooled dominant classes over U and L: predicted for unlabeled,
    # annotated for labeled superpoints
    pooled = list(dom_pred) + sorted(state.annotated_superpoint_classes().values())
    weights = class_weights(pooled, config.num_classes)
    return classbal_rank(pool, u_region, dom_pred, weights, limit)


def select_candidates(config: RunConfig, prediction, cloud: PointCloud,
                      partition: SuperpointPartition, state: AnnotationState,
                      rng: np.random.Generator) -> list[int]:
    """Pick this cycle's candidate superpoints, ordered by labeling priority."""
    pool = state.unlabeled_ids()
    if not pool:
        raise DataError("unlabeled set is empty")
    batch = min(config.batch, len(pool))

    if config.strategy == "random":
        return random_select(pool, batch, rng)

    if config.strategy in ("entropy", "lc", "bvsb"):
        u_point = POINT_SCORERS[config.strategy](prediction.probs)
        scores = np.array([
            region_mean_uncertainty(u_point, partition.superpoints[sid]) for sid in pool
        ])
        order = np.lexsort((np.asarray(pool), -scores))
        return [pool[i] for i in order[:batch]]

    if config.strategy == "classbal":
        ranked = _rank_pool(config, prediction, partition, state, batch)
        return [r.superpoint_id for r in ranked]

    if config.strategy == "ssdr":
        limit = min(config.graph.pool_factor * batch, len(pool))
        ranked = _rank_pool(config, prediction, partition, state, limit)
        candidates = [
            superpoint_feature(partition.superpoints[r.superpoint_id], prediction,
                               cloud.positions, r.superpoint_id)
            for r in ranked
        ]
        graph = build_graph(candidates, k=config.graph.k)
        merged = aggregate(graph, rounds=config.graph.rounds,
                           agg_nodes=config.graph.agg_nodes,
                           normalize=config.graph.normalize)
        picked = fps_select(merged, min(batch, len(candidates)), start=0)
        return [ranked[i].superpoint_id for i in picked]

    raise ConfigError(f"unknown strategy {config.strategy!r}")


def label_candidates(config: RunConfig, candidates, cloud, prediction,
                     partition, state) -> int:
    """Apply the configured labeling strategy; returns clicks spent."""
    ledger = ClickLedger(config.budget)
    if config.label_strategy == "dominant":
        for sid in candidates:
            if not ledger.within_budget:
                break
            dominant_labeling(sid, partition, cloud.gt_labels, state, ledger)
    else:
        noise_aware_labeling(candidates, config.theta, cloud.gt_labels,
                             prediction.pred_labels, partition, state, ledger)
    return ledger.clicks_used


def run_cycle(state: AnnotationState, config: RunConfig, cloud: PointCloud,
              partition: SuperpointPartition, cycle: int, clicks_before: int,
              rng: np.random.Generator) -> CycleRecord:
    """One train -> predict -> select -> label -> evaluate iteration."""
    learner = make_learner(config.learner.kind, k=config.learner.k, rho=config.learner.rho,
                           c_hi=config.learner.c_hi, seed=config.learner.seed)
    learner.fit(cloud, state.point_labels)
    prediction = learner.predict_full(cloud)
    candidates = select_candidates(config, prediction, cloud, partition, state, rng)
    clicks = label_candidates(config, candidates, cloud, prediction, partition, state)
    ev = evaluate(prediction.pred_labels, cloud.gt_labels, config.num_classes)
    return _record(cycle, clicks_before + clicks, state, ev)


def reference_accuracy(config: RunConfig, cloud: PointCloud,
                       partition: SuperpointPartition) -> float:
    """Accuracy ceiling: every superpoint dominant-labeled, then one train/eval."""
    state = AnnotationState(partition)
    ledger = ClickLedger(len(partition))
    for sid in range(len(partition)):
        dominant_labeling(sid, partition, cloud.gt_labels, state, ledger)
    learner = make_learner(config.learner.kind, k=config.learner.k, rho=config.learner.rho,
                           c_hi=config.learner.c_hi, seed=config.learner.seed)
    learner.fit(cloud, state.point_labels)
    ev = evaluate(learner.predict(cloud), cloud.gt_labels, config.num_classes)
    return ev.accuracy


def load_run_inputs(config: RunConfig) -> tuple[PointCloud, SuperpointPartition]:
    """Resolve the configured cloud and partition (loading or generating both)."""
    if config.scene_spec is not None:
        cloud = generate_scene(config.scene_spec)
        partition = None
    else:
        cloud, partition = read_cloud_file(config.cloud_path, config.num_classes)
    if partition is None:
        p = config.partition
        partition = generate_superpoints(
            cloud, voxel_size=p.voxel_size, color_threshold=p.color_threshold,
            normal_threshold=p.normal_threshold, min_region=p.min_region,
            rng_seed=p.rng_seed,
        )
    report = validate_partition(partition, cloud)
    if not report.is_valid:
        raise DataError("invalid partition: " + "; ".join(report.violations()))
    return cloud, partition


def clicks_to_target(records: list[CycleRecord], target: float) -> int | None:
    """Clicks paid for the first model whose accuracy reached the target.

    Record i's accuracy comes from the model trained on the labels record
    i-1 paid for (record 0 pairs the seed set with the seed-trained model).
    """
    for i, rec in enumerate(records):
        if rec.accuracy >= target:
            return records[i - 1].clicks_used if i > 0 else records[0].clicks_used
    return None


def run_experiment(config: RunConfig, cloud: PointCloud | None = None,
                   partition: SuperpointPartition | None = None,
                   write_log: bool = True):
    """Run seeding plus the configured number of cycles; returns (records, summary)."""
    if cloud is None or partition is None:
        cloud, partition = load_run_inputs(config)

    target = None
    reference = None
    if config.target_fraction is not None:
        reference = reference_accuracy(config, cloud, partition)
        target = config.target_fraction * reference

    seeds = np.random.SeedSequence(config.rng_seed).spawn(config.cycles + 1)
    state, seed_clicks = seed_labeled_set(
        partition, config.seed_fraction, np.random.default_rng(seeds[0]), cloud.gt_labels
    )

    learner = make_learner(config.learner.kind, k=config.learner.k, rho=config.learner.rho,
                           c_hi=config.learner.c_hi, seed=config.learner.seed)
    learner.fit(cloud, state.point_labels)
    ev = evaluate(learner.predict(cloud), cloud.gt_labels, config.num_classes)
    records = [_record(0, seed_clicks, state, ev)]

    for cycle in range(1, config.cycles + 1):
        if not state.unlabeled:
            break
        rng = np.random.default_rng(seeds[cycle])
        records.append(
            run_cycle(state, config, cloud, partition, cycle, records[-1].clicks_used, rng)
        )

    summary = {
        "strategy": config.strategy,
        "cycles_run": records[-1].cycle,
        "total_clicks": records[-1].clicks_used,
        "final_accuracy": records[-1].accuracy,
        "final_miou": records[-1].miou,
        "reference_accuracy": reference,
        "target_accuracy": target,
        "clicks_to_target": clicks_to_target(records, target) if target is not None else None,
    }

    if write_log:
        out = Path(config.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
            fh.write(json.dumps({"summary": summary}) + "\n")
    return records, summary
