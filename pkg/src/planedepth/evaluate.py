"""Depth metrics and the cross-validation/ablation harness.

Metrics over valid ground-truth pixels: mean |log10 d - log10 dhat| and
mean |(d - dhat) / d|, optionally broken down by the argmax layout class.
Cross-validation splits whole videos into k folds, trains the forests on
k-1 folds, and evaluates the held-out videos; ablations retrain on feature
subsets (Appearance, App+Flow, ALL).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError
from .features import GC_CLASSES
from .pipeline import (
    depth_training_data,
    predict_unary_depths,
    region_feature_table,
    render_unary_maps,
    smoothed_gates,
    solve_video,
    train_depth_forest,
    train_occlusion_forest,
    occlusion_graph,
    unary_fn_from_predictions,
)


@dataclass
class EvalReport:
    log10_error: float
    rel_error: float
    pixel_count: int
    per_class: dict = None
    per_fold: list = field(default_factory=list)

    def as_dict(self):
        out = {
            "log10_error": self.log10_error,
            "rel_error": self.rel_error,
            "pixel_count": self.pixel_count,
        }
        if self.per_class is not None:
            out["per_class"] = {
                name: {"log10_error": v[0], "rel_error": v[1], "pixels": v[2]}
                for name, v in self.per_class.items()
            }
        if self.per_fold:
            out["per_fold"] = [r.as_dict() for r in self.per_fold]
        return out

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def format_table(self):
        lines = [
            f"{'scope':<12} {'log10':>10} {'rel':>10} {'pixels':>12}",
            f"{'overall':<12} {self.log10_error:>10.4f} "
            f"{self.rel_error:>10.4f} {self.pixel_count:>12d}",
        ]
        if self.per_class:
            for name, (lg, rel, n) in self.per_class.items():
                lines.append(f"{name:<12} {lg:>10.4f} {rel:>10.4f} {n:>12d}")
        for i, fold in enumerate(self.per_fold):
            lines.append(
                f"{f'fold {i}':<12} {fold.log10_error:>10.4f} "
                f"{fold.rel_error:>10.4f} {fold.pixel_count:>12d}"
            )
        return "\n".join(lines)


def _accumulate(pred, gt, log_base):
    if pred.values.shape != gt.values.shape:
        raise DimensionMismatchError(
            f"prediction {pred.values.shape} vs ground truth {gt.values.shape}"
        )
    mask = gt.valid & pred.valid & (pred.values > 0) & (gt.values > 0)
    d = gt.values[mask]
    dh = pred.values[mask]
    # |log d - log dh| computed on the ratio: one rounding fewer, and exact
    # whenever dh/d is a representable power of the base
    if log_base == 10.0:
        log_err = np.abs(np.log10(dh / d))
    else:
        log_err = np.abs(np.log(dh / d)) / np.log(log_base)
    rel_err = np.abs((d - dh) / d)
    return mask, log_err, rel_err


def evaluate(preds, gts, class_maps=None, log_base=10.0):
    """Error report over one or more (prediction, ground truth) map pairs.

    class_maps (optional, per frame (h, w, n_classes)) adds a per-class
    breakdown; pixels belong to their argmax class.
    """
    if len(preds) != len(gts):
        raise DimensionMismatchError("one prediction per ground-truth map")
    if len(preds) == 0:
        raise EmptyInputError("nothing to evaluate")
    total_log, total_rel, total_n = 0.0, 0.0, 0
    class_sums = np.zeros((len(GC_CLASSES), 3))
    for idx, (pred, gt) in enumerate(zip(preds, gts)):
        mask, log_err, rel_err = _accumulate(pred, gt, log_base)
        total_log += log_err.sum()
        total_rel += rel_err.sum()
        total_n += log_err.size
        if class_maps is not None:
            classes = np.argmax(class_maps[idx], axis=-1)[mask]
            for c in range(len(GC_CLASSES)):
                sel = classes == c
                class_sums[c] += [log_err[sel].sum(), rel_err[sel].sum(),
                                  sel.sum()]
    if total_n == 0:
        raise EmptyInputError("no valid pixels in common")
    per_class = None
    if class_maps is not None:
        per_class = {}
        for c, name in enumerate(GC_CLASSES):
            n = int(class_sums[c, 2])
            if n:
                per_class[name] = (class_sums[c, 0] / n, class_sums[c, 1] / n, n)
    return EvalReport(
        log10_error=float(total_log / total_n),
        rel_error=float(total_rel / total_n),
        pixel_count=int(total_n),
        per_class=per_class,
    )


def _aggregate(reports):
    n = sum(r.pixel_count for r in reports)
    log10 = sum(r.log10_error * r.pixel_count for r in reports) / n
    rel = sum(r.rel_error * r.pixel_count for r in reports) / n
    return EvalReport(float(log10), float(rel), int(n), per_fold=list(reports))


@dataclass
class FeaturizedVideo:
    """A video with everything cross-validation needs, featurized once."""

    rows: np.ndarray
    keys: list
    rindex: object
    labels: np.ndarray
    gt_maps: list
    gc_maps: np.ndarray
    video: np.ndarray


def featurize_scene(scene, config):
    rows, keys, rindex = region_feature_table(
        scene.video, scene.labels, scene.gc_maps, config
    )
    return FeaturizedVideo(rows, keys, rindex, scene.labels,
                           scene.depth_maps, scene.gc_maps, scene.video)


def crossval(scenes, config, k=5, ablation=None, use_mrf=None, seed=None):
    """k-fold cross-validation over whole videos.

    Returns the aggregate EvalReport with per-fold reports attached.
    Deterministic in ``seed`` (defaults to config.seed).
    """
    ablation = ablation or config.ablation
    use_mrf = config.use_mrf if use_mrf is None else use_mrf
    seed = config.seed if seed is None else seed
    if len(scenes) < k:
        raise EmptyInputError(f"need at least {k} videos for {k} folds")
    featurized = [
        s if isinstance(s, FeaturizedVideo) else featurize_scene(s, config)
        for s in scenes
    ]
    order = np.random.default_rng(seed).permutation(len(scenes))
    folds = np.array_split(order, k)
    reports = []
    for fold in folds:
        test_ids = set(int(i) for i in fold)
        train_ids = [i for i in range(len(scenes)) if i not in test_ids]
        assert not test_ids.intersection(train_ids)
        X_parts, y_parts = [], []
        for i in train_ids:
            fv = featurized[i]
            X, y = depth_training_data(fv.rows, fv.keys, fv.gt_maps, fv.rindex)
            X_parts.append(X)
            y_parts.append(y)
        model = train_depth_forest(
            np.vstack(X_parts), np.concatenate(y_parts), config, ablation
        )
        occl_model = None
        if use_mrf:
            graphs, gt_lists = [], []
            for i in train_ids:
                fv = featurized[i]
                graphs.append(occlusion_graph(
                    fv.video, fv.labels, fv.rows, fv.keys, config, fv.rindex
                ))
                gt_lists.append(fv.gt_maps)
            occl_model = train_occlusion_forest(graphs, gt_lists, config)
        fold_preds, fold_gts, fold_classes = [], [], []
        for i in sorted(test_ids):
            fv = featurized[i]
            unary = predict_unary_depths(model, fv.rows, fv.keys, ablation)
            if use_mrf:
                graph = occlusion_graph(
                    fv.video, fv.labels, fv.rows, fv.keys, config, fv.rindex
                )
                gates = smoothed_gates(graph, occl_model, config)
                K = config.camera(fv.labels.shape[2], fv.labels.shape[1])
                maps, _, _ = solve_video(
                    fv.labels, K, unary_fn_from_predictions(unary), gates,
                    config,
                )
            else:
                maps = render_unary_maps(fv.labels, unary)
            fold_preds.extend(maps)
            fold_gts.extend(fv.gt_maps)
            fold_classes.extend(list(fv.gc_maps))
        reports.append(evaluate(fold_preds, fold_gts, fold_classes))
    return _aggregate(reports)
