"""Experiment orchestration: data preparation, pretraining, probing, ablation.

A pretraining variant is a set of (anchor pool, negative pool) pairs plus a
flag for self-paced mining. The canonical run trains three level pairs; the
ablation grid swaps in pooled or truncated pair sets so the contribution of
each ingredient can be ranked. Pool variants use three times the per-level
anchor count so every variant sees the same number of anchor slots per step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, write_resolved_config
from .downstream import LinearProbe, MetricsReport, evaluate, train_probe
from .encoder import Encoder
from .errors import ContractViolationError, NumericalFailureError
from .loss import info_nce, row_dot
from .optim import init_adam, adam_step
from .patches import (
    BuildReport,
    DetectorParams,
    LevelTag,
    Patch,
    build_level_sets,
    partition,
)
from .seeding import STREAM_AUGMENT, STREAM_BATCH, STREAM_PROBE, derive_seed, rng_for
from .spl import (
    SimilarityMatrix,
    hard_negative_budget,
    resample_hard_negatives,
    select_anchors,
    spl_objective,
    weight_penalty,
)
from .synthgen import DatasetSpec, SynthImage, dump_dataset, make_dataset
from .tensor import Tensor

# -- variants -----------------------------------------------------------------

MULTILEVEL_PAIRS = (
    ("lesion_high", "lesion_low"),
    ("lesion_high", "healthy_high"),
    ("lesion_low", "healthy_low"),
)


@dataclass(frozen=True)
class VariantSpec:
    name: str
    pairs: tuple[tuple[str, str], ...]
    use_spl: bool
    anchor_multiplier: int = 1

    def signature(self) -> tuple:
        return (self.pairs, self.use_spl, self.anchor_multiplier)


VARIANTS: dict[str, VariantSpec] = {
    "baseline": VariantSpec("baseline", (), use_spl=False),
    # generic instance discrimination on plain random crops: no detector
    # guidance, no level structure, no mining
    "basic_cl": VariantSpec("basic_cl", (("generic", "generic"),), use_spl=False,
                            anchor_multiplier=3),
    "no_multilevel": VariantSpec("no_multilevel", (("lesion_all", "healthy_all"),),
                                 use_spl=True, anchor_multiplier=3),
    "no_spl": VariantSpec("no_spl", MULTILEVEL_PAIRS, use_spl=False),
    "full": VariantSpec("full", MULTILEVEL_PAIRS, use_spl=True),
    # level-combination grid; v3 coincides with the full method
    "v1": VariantSpec("v1", MULTILEVEL_PAIRS[:1], use_spl=True),
    "v2": VariantSpec("v2", MULTILEVEL_PAIRS[:2], use_spl=True),
    "v3": VariantSpec("v3", MULTILEVEL_PAIRS, use_spl=True),
}

ABLATION_VARIANTS = ("baseline", "basic_cl", "no_multilevel", "no_spl", "full")
LEVEL_COMBINATION_VARIANTS = ("v1", "v2", "v3")

_POOL_MEMBERS: dict[str, tuple[LevelTag, ...]] = {
    "lesion_high": (LevelTag.LESION_HIGH,),
    "lesion_low": (LevelTag.LESION_LOW,),
    "healthy_high": (LevelTag.HEALTHY_HIGH,),
    "healthy_low": (LevelTag.HEALTHY_LOW,),
    "lesion_all": (LevelTag.LESION_HIGH, LevelTag.LESION_LOW),
    "healthy_all": (LevelTag.HEALTHY_HIGH, LevelTag.HEALTHY_LOW),
    "all": tuple(LevelTag),
}
_POOL_INDEX = {name: i for i, name in enumerate(_POOL_MEMBERS)}
_POOL_INDEX["generic"] = len(_POOL_MEMBERS)


# -- data preparation -----------------------------------------------------------


@dataclass
class PreparedData:
    train_level_sets: dict[LevelTag, list[Patch]]
    eval_level_sets: dict[LevelTag, list[Patch]]
    build_report: BuildReport
    # detector-free random crops over all training images, for the generic
    # instance-discrimination baseline
    generic_crops: list[Patch] = field(default_factory=list)


def split_images(dataset: list[SynthImage], every_nth: int) -> tuple[list, list]:
    """Deterministic train/eval split, striped per condition position."""
    train, held_out = [], []
    counters: dict[tuple[str, str], int] = {}
    for image in dataset:
        key = (image.disease, image.quality)
        position = counters.get(key, 0)
        counters[key] = position + 1
        if every_nth > 0 and position % every_nth == every_nth - 1:
            held_out.append(image)
        else:
            train.append(image)
    return train, held_out


def prepare_data(config: RunConfig) -> PreparedData:
    dataset = make_dataset(DatasetSpec(
        images_per_condition=config.dataset.images_per_condition,
        image_size=config.dataset.image_size,
        num_grades=config.dataset.num_grades,
        seed=config.dataset.seed,
    ))
    train_images, eval_images = split_images(dataset, config.patches.eval_every_nth_image)
    detector = DetectorParams(
        miss_rate=config.patches.miss_rate,
        box_jitter=config.patches.box_jitter,
        conf=config.patches.conf,
        seed=config.patches.seed,
    )
    train_sets, report = build_level_sets(
        partition(train_images), detector, config.patches.patch_side,
        config.patches.patches_per_healthy_image, seed=derive_seed(config.patches.seed, 1),
    )
    eval_sets, _ = build_level_sets(
        partition(eval_images), detector, config.patches.patch_side,
        config.patches.patches_per_healthy_image, seed=derive_seed(config.patches.seed, 2),
    )
    generic = generic_crop_pool(
        train_images, config.patches.patch_side,
        crops_per_image=config.patches.patches_per_healthy_image + 1,
        seed=derive_seed(config.patches.seed, 3),
    )
    return PreparedData(train_sets, eval_sets, report, generic)


def generic_crop_pool(images: list[SynthImage], patch_side: int,
                      crops_per_image: int, seed: int) -> list[Patch]:
    """Plain random crops over every image, ignoring the detector entirely."""
    from .patches import _CONDITION_TO_TAG, rand_crop

    crops: list[Patch] = []
    for idx, image in enumerate(images):
        tag = _CONDITION_TO_TAG[(image.disease, image.quality)]
        for crop_idx in range(crops_per_image):
            window = rand_crop(image, patch_side,
                               seed=derive_seed(seed, idx, crop_idx))
            pixels = image.pixels[window.y1 : window.y2, window.x1 : window.x2].copy()
            crops.append(Patch(pixels, tag, f"generic:{idx:05d}", window, image.grade))
    return crops


def build_pools(level_sets: dict[LevelTag, list[Patch]],
                generic_crops: list[Patch] | None = None) -> dict[str, list[Patch]]:
    pools = {
        name: [p for tag in members for p in level_sets[tag]]
        for name, members in _POOL_MEMBERS.items()
    }
    pools["generic"] = list(generic_crops or [])
    return pools


def flatten_level_sets(level_sets: dict[LevelTag, list[Patch]]) -> list[Patch]:
    return [p for tag in LevelTag for p in level_sets[tag]]


# -- batch composition ----------------------------------------------------------


def compose_batch(pools: dict[str, list[Patch]], counts: dict[str, int],
                  seed: int) -> dict[str, list[Patch]]:
    """Sample ``counts[name]`` patches per pool without replacement, seeded."""
    sampled: dict[str, list[Patch]] = {}
    for name in sorted(counts, key=lambda n: _POOL_INDEX.get(n, 99)):
        count = counts[name]
        pool = pools[name]
        if count > len(pool):
            raise ContractViolationError(
                f"pool '{name}' holds {len(pool)} patches, {count} requested"
            )
        rng = rng_for(STREAM_BATCH, seed, _POOL_INDEX.get(name, 99))
        indices = rng.choice(len(pool), size=count, replace=False)
        sampled[name] = [pool[int(i)] for i in indices]
    return sampled


def stack_pixels(patches: list[Patch]) -> np.ndarray:
    return np.stack([p.pixels for p in patches])


def augmented_stack(patches: list[Patch], seed: int, stream: int) -> np.ndarray:
    """Augment every patch with choices drawn from one derived stream."""
    from .patches import apply_augment, draw_augment_params_from

    rng = rng_for(STREAM_AUGMENT, seed, stream)
    side = patches[0].pixels.shape[0] if patches else 0
    return np.stack([
        apply_augment(p, draw_augment_params_from(rng, side)).pixels for p in patches
    ])


# -- pretraining -----------------------------------------------------------------


@dataclass
class PretrainResult:
    encoder: Encoder
    trace: list[dict]
    variant: VariantSpec


def _numpy_per_anchor_loss(pos: np.ndarray, neg: np.ndarray, tau: float) -> np.ndarray:
    """Detached monitor of the full-negative contrastive loss."""
    pos_logit = pos / tau
    if neg.shape[1] == 0:
        return np.zeros_like(pos_logit)
    neg_logit = neg / tau
    shift = np.maximum(pos_logit, neg_logit.max(axis=1))
    lse = shift + np.log(
        np.exp(pos_logit - shift) + np.exp(neg_logit - shift[:, None]).sum(axis=1)
    )
    return lse - pos_logit


def _dump_nan_batch(out_dir: Path | None, step: int,
                    stacks: dict[str, np.ndarray]) -> Path | None:
    if out_dir is None:
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"nan_dump_step{step}.npz"
    np.savez(path, **stacks)
    return path


def pretrain(
    config: RunConfig,
    data: PreparedData | None = None,
    out_dir: Path | None = None,
    k_override: int | None = None,
    force_select_all: bool = False,
) -> PretrainResult:
    """Run one pretraining loop for the configured variant.

    Per step: compose pool batches, embed anchors / augmented twins /
    negatives, build per-pair similarity matrices, mine hard negatives under
    the current budget, select anchors, and take one Adam step on the
    selected losses plus the weight penalty. ``k_override`` and
    ``force_select_all`` pin the mining budget and the selection for
    equivalence experiments.
    """
    if config.pretrain.variant not in VARIANTS:
        raise ContractViolationError(f"unknown variant '{config.pretrain.variant}'")
    spec = VARIANTS[config.pretrain.variant]
    encoder = Encoder(config.model, seed=config.pretrain.seed)
    if not spec.pairs or config.pretrain.steps == 0:
        return PretrainResult(encoder, [], spec)
    if data is None:
        data = prepare_data(config)
    pools = build_pools(data.train_level_sets, data.generic_crops)
    params = encoder.parameters()
    state = init_adam(params, lr=config.pretrain.lr)
    batch_per_level = config.pretrain.batch_per_level
    anchor_count = batch_per_level * spec.anchor_multiplier
    delta = batch_per_level  # negatives per anchor
    steps = config.pretrain.steps
    tau = config.pretrain.temperature
    trace: list[dict] = []

    counts: dict[str, int] = {}
    for a_pool, n_pool in spec.pairs:
        if a_pool == n_pool:
            counts[a_pool] = max(counts.get(a_pool, 0), anchor_count + batch_per_level)
        else:
            counts[a_pool] = max(counts.get(a_pool, 0), anchor_count)
            counts[n_pool] = max(counts.get(n_pool, 0), batch_per_level)

    # fixed per-variant segment plan: (pool, start, stop) slices of each pool's
    # step sample, with anchors also embedded in augmented form
    anchor_segments: list[tuple[str, int, int]] = []
    negative_segments: dict[tuple[str, str], tuple[str, int, int]] = {}
    for a_pool, n_pool in spec.pairs:
        anchor_seg = (a_pool, 0, anchor_count)
        if anchor_seg not in anchor_segments:
            anchor_segments.append(anchor_seg)
        if a_pool == n_pool:
            negative_segments[(a_pool, n_pool)] = (n_pool, anchor_count,
                                                   anchor_count + batch_per_level)
        else:
            negative_segments[(a_pool, n_pool)] = (n_pool, 0, batch_per_level)
    plain_segments: list[tuple[str, int, int]] = list(anchor_segments)
    for seg in negative_segments.values():
        if seg not in plain_segments:
            plain_segments.append(seg)

    for t in range(steps):
        step_seed = derive_seed(config.pretrain.seed, STREAM_BATCH, t)
        sampled = compose_batch(pools, counts, step_seed)
        stacks: dict[str, np.ndarray] = {}
        blocks: list[np.ndarray] = []
        offsets: dict[tuple, tuple[int, int]] = {}
        cursor = 0
        for pool, start, stop in plain_segments:
            stack = stack_pixels(sampled[pool][start:stop])
            stacks[f"{pool}_{start}_{stop}"] = stack
            blocks.append(stack)
            offsets[(pool, start, stop)] = (cursor, cursor + len(stack))
            cursor += len(stack)
        for pool, start, stop in anchor_segments:
            aug = augmented_stack(sampled[pool][start:stop], step_seed, _POOL_INDEX[pool])
            stacks[f"{pool}_{start}_{stop}_aug"] = aug
            blocks.append(aug)
            offsets[(pool, start, stop, "aug")] = (cursor, cursor + len(aug))
            cursor += len(aug)
        # one batched forward for every segment and augmented twin
        all_embedded = encoder.embed(np.concatenate(blocks, axis=0))
        embeddings = {
            key: T.take_rows(all_embedded, lo, hi) for key, (lo, hi) in offsets.items()
        }

        k_t: int | None = None
        if spec.use_spl:
            k_t = k_override if k_override is not None else hard_negative_budget(
                t, steps, delta
            )
        pair_losses: list[Tensor] = []
        selections: list[np.ndarray] = []
        monitor_total = 0.0
        kept_sim_sum, kept_sim_count = 0.0, 0
        rule_selected, rule_total = 0, 0
        for a_pool, n_pool in spec.pairs:
            anchors = embeddings[(a_pool, 0, anchor_count)]
            positives = embeddings[(a_pool, 0, anchor_count, "aug")]
            negatives = embeddings[negative_segments[(a_pool, n_pool)]]
            matrix = SimilarityMatrix(
                pos=row_dot(anchors, positives),
                neg=T.matmul(anchors, T.transpose(negatives)),
                anchor_level=a_pool,
                negative_level=n_pool,
            )
            monitor_total += float(
                _numpy_per_anchor_loss(matrix.pos.data, matrix.neg.data, tau).mean()
            )
            if spec.use_spl:
                assert k_t is not None
                mined, _ = resample_hard_negatives(matrix, k_t)
                per_anchor, _ = info_nce(mined.pos, mined.neg, tau)
                if not np.isfinite(per_anchor.data).all():
                    dump = _dump_nan_batch(out_dir, t, stacks)
                    raise NumericalFailureError(
                        f"non-finite loss for pair {a_pool}|{n_pool} at step {t}"
                        + (f" (batch dumped to {dump})" if dump else "")
                    )
                if force_select_all:
                    s = np.ones(per_anchor.shape[0], dtype=np.int64)
                else:
                    s = select_anchors(per_anchor.data, k_t)
                    rule_selected += int(s.sum())
                    rule_total += s.size
                    if not s.any():
                        # pace cannot discriminate yet (all losses above 1/k):
                        # train on the whole batch instead of wasting the step
                        s = np.ones_like(s)
                selections.append(s)
                kept_sim_sum += float(mined.neg.data.sum())
                kept_sim_count += mined.neg.data.size
            else:
                per_anchor, _ = info_nce(matrix.pos, matrix.neg, tau)
                kept_sim_sum += float(matrix.neg.data.sum())
                kept_sim_count += matrix.neg.data.size
            pair_losses.append(per_anchor)

        if spec.use_spl:
            assert k_t is not None
            objective = spl_objective(pair_losses, selections, k_t, params.values(),
                                      config.pretrain.weight_decay)
            selected_fraction = float(np.concatenate(selections).mean())
        else:
            objective = weight_penalty(params.values(), config.pretrain.weight_decay)
            for per_anchor in pair_losses:
                objective = objective + T.tensor_sum(per_anchor)
            selected_fraction = 1.0
        if not np.isfinite(objective.data):
            dump = _dump_nan_batch(out_dir, t, stacks)
            raise NumericalFailureError(
                f"non-finite objective at step {t}"
                + (f" (batch dumped to {dump})" if dump else "")
            )
        grads = T.forward_backward(objective, list(params.values()))
        adam_step(params, dict(zip(params.keys(), grads)), state)
        trace.append({
            "step": t,
            "k": k_t if k_t is not None else delta,
            "selected_fraction": selected_fraction,
            "rule_selected_fraction": (
                rule_selected / rule_total if rule_total else selected_fraction
            ),
            "mean_kept_negative_similarity": kept_sim_sum / max(kept_sim_count, 1),
            "multilevel_loss": monitor_total,
            "objective": float(objective.data),
        })
    return PretrainResult(encoder, trace, spec)


def write_trace(trace: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["step", "k", "selected_fraction", "rule_selected_fraction",
               "mean_kept_negative_similarity", "multilevel_loss", "objective"]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in trace:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in columns])


# -- probing ---------------------------------------------------------------------


def labeled_probe_patches(data: PreparedData,
                          config: RunConfig) -> tuple[list[Patch], list[Patch]]:
    """Labeled train subset (budgeted per class) and the full held-out eval set."""
    train_all = flatten_level_sets(data.train_level_sets)
    eval_all = flatten_level_sets(data.eval_level_sets)
    budget = config.probe.train_patches_per_class
    if budget <= 0:
        return train_all, eval_all
    rng = rng_for(STREAM_PROBE, config.patches.seed, 17)
    chosen: list[Patch] = []
    for grade in range(config.dataset.num_grades):
        candidates = [p for p in train_all if p.grade == grade]
        take = min(budget, len(candidates))
        indices = rng.choice(len(candidates), size=take, replace=False)
        chosen.extend(candidates[int(i)] for i in indices)
    return chosen, eval_all


def run_probe(config: RunConfig, encoder: Encoder,
              data: PreparedData) -> tuple[LinearProbe, MetricsReport]:
    train_patches, eval_patches = labeled_probe_patches(data, config)
    probe = train_probe(
        encoder, train_patches, config.probe.mode, config.probe.epochs,
        config.probe.lr, config.probe.seed, num_classes=config.dataset.num_grades,
    )
    return probe, evaluate(encoder, probe, eval_patches)


def clone_encoder(config: RunConfig, encoder: Encoder) -> Encoder:
    clone = Encoder(config.model, seed=0)
    clone.load_state(encoder.state_dict())
    return clone


# -- ablation ---------------------------------------------------------------------


@dataclass
class AblationArtifact:
    """Per-run byproducts kept for trend and embedding-quality checks."""

    trace: list[dict]
    encoder_state: dict[str, np.ndarray]
    report: MetricsReport


def run_ablation(
    config: RunConfig,
    seeds: list[int],
    variants: tuple[str, ...] = ABLATION_VARIANTS,
    include_level_combinations: bool = True,
    data: PreparedData | None = None,
    artifacts: dict[tuple[str, int], AblationArtifact] | None = None,
) -> list[dict]:
    """Train/probe every variant per seed and emit per-run plus aggregate rows.

    Variants with identical training signatures (the full method and the
    all-levels combination) share runs; determinism makes their results
    interchangeable. When ``artifacts`` is given, each executed run stores
    its trace, encoder state, and report there.
    """
    if len(seeds) < 3:
        raise ContractViolationError("ablation needs at least 3 seeds")
    if data is None:
        data = prepare_data(config)
    wanted = list(variants) + (
        [v for v in LEVEL_COMBINATION_VARIANTS if v not in variants]
        if include_level_combinations else []
    )
    cache: dict[tuple, MetricsReport] = {}
    rows: list[dict] = []
    for variant in wanted:
        spec = VARIANTS[variant]
        for seed in seeds:
            key = (spec.signature(), seed)
            if key not in cache:
                run_config = replace(
                    config,
                    pretrain=replace(config.pretrain, variant=variant, seed=seed),
                    probe=replace(config.probe, seed=derive_seed(seed, STREAM_PROBE)),
                )
                result = pretrain(run_config, data=data)
                probe_encoder = clone_encoder(run_config, result.encoder)
                _, report = run_probe(run_config, probe_encoder, data)
                cache[key] = report
                if artifacts is not None:
                    artifacts[(variant, seed)] = AblationArtifact(
                        trace=result.trace,
                        encoder_state=result.encoder.state_dict(),
                        report=report,
                    )
            report = cache[key]
            rows.append({
                "variant": variant,
                "seed": seed,
                "accuracy": report.accuracy,
                "kappa": report.kappa,
                "quadratic_weighted_kappa": report.quadratic_weighted_kappa,
            })
    for variant in wanted:
        values = {
            metric: np.array([r[metric] for r in rows if r["variant"] == variant])
            for metric in ("accuracy", "kappa", "quadratic_weighted_kappa")
        }
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            rows.append({
                "variant": variant,
                "seed": stat,
                **{metric: float(fn(v)) for metric, v in values.items()},
            })
    return rows


def write_ablation_csv(rows: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["variant", "seed", "accuracy", "kappa", "quadratic_weighted_kappa"]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in columns])


def ablation_means(rows: list[dict], metric: str = "accuracy") -> dict[str, float]:
    return {
        row["variant"]: row[metric] for row in rows if row["seed"] == "mean"
    }


# -- embedding export ---------------------------------------------------------------


def export_embeddings(config: RunConfig, checkpoint_path: str | Path,
                      out_path: str | Path, split: str = "eval",
                      data: PreparedData | None = None) -> Path:
    if data is None:
        data = prepare_data(config)
    encoder = Encoder(config.model, seed=0)
    encoder.load_state(load_checkpoint(checkpoint_path))
    level_sets = data.eval_level_sets if split == "eval" else data.train_level_sets
    patches_list = flatten_level_sets(level_sets)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    dim = config.model.projection_dim
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patch_id", "level", "grade"] + [f"c{i}" for i in range(dim)])
        for start in range(0, len(patches_list), 256):
            chunk = patches_list[start : start + 256]
            with T.no_grad():
                projected = encoder.embed(stack_pixels(chunk)).data
            for patch, row in zip(chunk, projected):
                patch_id = f"{patch.source_image_id}#{patch.window.x1}-{patch.window.y1}"
                writer.writerow([patch_id, patch.level.value, patch.grade]
                                + [repr(float(v)) for v in row])
    return out


# -- command wrappers ----------------------------------------------------------------


def run_gen_data_command(config: RunConfig, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    images = make_dataset(DatasetSpec(
        images_per_condition=config.dataset.images_per_condition,
        image_size=config.dataset.image_size,
        num_grades=config.dataset.num_grades,
        seed=config.dataset.seed,
    ))
    manifest = dump_dataset(images, out)
    write_resolved_config(config, out)
    return manifest


def run_pretrain_command(config: RunConfig, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = pretrain(config, out_dir=out)
    checkpoint_path = out / "encoder.ckpt"
    save_checkpoint(checkpoint_path, result.encoder.parameters())
    trace_path = out / "spl_trace.csv"
    write_trace(result.trace, trace_path)
    config_path = write_resolved_config(config, out)
    return {"checkpoint": checkpoint_path, "trace": trace_path, "config": config_path}


def run_probe_command(config: RunConfig, checkpoint_path: str | Path,
                      out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = prepare_data(config)
    encoder = Encoder(config.model, seed=0)
    encoder.load_state(load_checkpoint(checkpoint_path))
    _, report = run_probe(config, encoder, data)
    metrics_path = out / "metrics.csv"
    metrics_path.write_text(MetricsReport.csv_header() + "\n" + report.csv_row() + "\n")
    (out / "metrics.json").write_text(report.to_json() + "\n")
    config_path = write_resolved_config(config, out)
    return {"metrics": metrics_path, "config": config_path}


def run_ablate_command(config: RunConfig, seeds: list[int],
                       out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_ablation(config, seeds)
    ablation_path = out / "ablation.csv"
    write_ablation_csv(rows, ablation_path)
    config_path = write_resolved_config(config, out)
    return {"ablation": ablation_path, "config": config_path}
