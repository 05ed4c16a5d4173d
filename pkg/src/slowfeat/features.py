"""Accumulated squared derivative (ASD) features over snippets.

A snippet is the set of cuboids sampled from ``d`` successive frames of
one sequence.  For every cuboid, each slow feature function contributes
the mean of its squared forward differences over the reformatted cuboid
(``1/(d - delta_t) * sum_t (y(t+1) - y(t))^2``); per-cuboid vectors are
laid out in the bank's model order and summed over the snippet's
cuboids, then L1-normalized.  A function that stays flat on a cuboid
contributes nearly zero, so small ASD entries mark the class (and
region) whose functions the motion obeys.

For a region-gridded bank each cuboid contributes only to the block of
its own region; mirroring a feature permutes those region blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import sfa
from .cuboid import (
    Cuboid,
    FrameSequence,
    default_delta,
    motion_boundary,
    reformat,
    region_label,
)
from .errors import EmptySnippet, InvalidDimension, InvalidInput, TooShort
from .sfa import ModelBank, SlowFeatureModel


@dataclass(frozen=True)
class Snippet:
    """Cuboids sampled from frames [start_frame, start_frame + d)."""

    sequence_id: str
    start_frame: int
    cuboids: tuple[Cuboid, ...]


@dataclass(frozen=True)
class ASDFeature:
    """One snippet's feature vector.

    ``normalized`` records whether L1 normalization was applied; an
    all-zero vector (a snippet with no motion) stays unnormalized.
    """

    values: np.ndarray
    snippet_span: tuple[str, int]
    normalized: bool


def _window_length(model: SlowFeatureModel, c: Cuboid) -> int:
    patch = c.h * c.w
    if model.input_dim % patch != 0:
        raise InvalidDimension(
            f"model input dim {model.input_dim} is not a multiple of the "
            f"cuboid patch size {c.h}x{c.w}")
    delta_t = model.input_dim // patch
    if c.d - delta_t < 1:
        raise TooShort(
            f"cuboid depth {c.d} leaves no differences for window {delta_t}")
    return delta_t


def squared_derivative(c: Cuboid, model: SlowFeatureModel) -> np.ndarray:
    """Mean squared forward difference of each model output on a cuboid.

    The cuboid is reformatted with the model's own window length
    (inferred from its input dimension), producing d - delta_t + 1
    response vectors and d - delta_t differences.
    """
    delta_t = _window_length(model, c)
    rows = reformat(c, delta_t)
    y = sfa.apply(model, rows)
    dy = np.diff(y, axis=0)
    # outputs are a function of the row alone, so bit-equal consecutive
    # rows must difference to exactly zero (batched BLAS may not)
    dy[(rows[1:] == rows[:-1]).all(axis=1)] = 0.0
    return (dy * dy).mean(axis=0)


def _batch_squared_derivatives(cuboids, model: SlowFeatureModel) -> np.ndarray:
    """squared_derivative of many same-shaped cuboids in one pass."""
    delta_t = _window_length(model, cuboids[0])
    stacked = np.stack([reformat(c, delta_t) for c in cuboids])
    n, length, dim = stacked.shape
    y = sfa.apply(model, stacked.reshape(n * length, dim))
    dy = np.diff(y.reshape(n, length, -1), axis=1)
    dy[(stacked[:, 1:] == stacked[:, :-1]).all(axis=2)] = 0.0
    return (dy * dy).mean(axis=1)


def _canonical_order(cuboids):
    return sorted(cuboids, key=lambda c: (c.t, c.y, c.x))


def _bank_blocks(bank: ModelBank):
    """(offset, model) pairs in bank order plus the total width."""
    blocks = []
    offset = 0
    for m in bank.models:
        blocks.append((offset, m))
        offset += m.k
    return blocks, offset


def asd_feature(snippet: Snippet, bank: ModelBank) -> ASDFeature:
    """Sum per-cuboid squared derivatives into one normalized vector.

    Cuboids are summed in canonical (t, y, x) order, so any input
    ordering produces a bit-identical result.  For an ``sdsfa`` bank a
    cuboid contributes only to the models of its own region and every
    cuboid must be region-labeled.  The vector is L1-normalized unless
    its sum is zero, in which case it is returned as-is and flagged.
    """
    if not snippet.cuboids:
        raise EmptySnippet(
            f"snippet at frame {snippet.start_frame} of "
            f"{snippet.sequence_id!r} has no cuboids")
    ordered = _canonical_order(snippet.cuboids)
    blocks, total = _bank_blocks(bank)

    per_cuboid = np.zeros((len(ordered), total))
    if bank.strategy == "sdsfa":
        if any(c.region_label is None for c in ordered):
            raise InvalidInput("sdsfa features need region-labeled cuboids")
        by_region: dict[int, list[int]] = {}
        for i, c in enumerate(ordered):
            by_region.setdefault(c.region_label, []).append(i)
        for region, idx in by_region.items():
            group = [ordered[i] for i in idx]
            for offset, model in blocks:
                if model.region_label == region:
                    per_cuboid[idx, offset:offset + model.k] = \
                        _batch_squared_derivatives(group, model)
    else:
        for offset, model in blocks:
            per_cuboid[:, offset:offset + model.k] = \
                _batch_squared_derivatives(ordered, model)

    values = per_cuboid.sum(axis=0)
    total_mass = float(values.sum())
    span = (snippet.sequence_id, snippet.start_frame)
    if total_mass > 0.0:
        return ASDFeature(values / total_mass, span, True)
    return ASDFeature(values, span, False)


def mirror_feature(f: ASDFeature, grid, per_region_block_dim: int) -> ASDFeature:
    """Permute region blocks as a horizontal flip of the grid would.

    Block ``iy * n_x + ix`` moves to ``iy * n_x + (n_x - 1 - ix)``; the
    values inside each block are untouched, so mirroring twice is the
    identity bit for bit.
    """
    nx, ny = int(grid[0]), int(grid[1])
    expected = nx * ny * per_region_block_dim
    if f.values.shape != (expected,):
        raise InvalidDimension(
            f"feature has shape {f.values.shape}, grid {grid} with "
            f"block dim {per_region_block_dim} needs ({expected},)")
    blocks = f.values.reshape(ny, nx, per_region_block_dim)
    return ASDFeature(blocks[:, ::-1, :].reshape(-1).copy(),
                      f.snippet_span, f.normalized)


def featurize_sequence(seq: FrameSequence, bank: ModelBank, size,
                       fraction: float, seed: int, delta: float | None = None,
                       stride: int = 1, sequence_id: str = "seq",
                       use_boxes: bool = True) -> list[ASDFeature]:
    """One ASD feature per snippet of ``d`` successive frames.

    ``seq`` is the (already differenced) sequence that cuboids are cut
    from.  Snippet starts run from 0 to num_frames - d in steps of
    ``stride``; each start samples cuboids from the motion boundaries of
    its own first frame, seeded per snippet so results do not depend on
    processing order.  ``delta = None`` applies the data-relative
    default.  A snippet with no cuboids yields an all-zero, unnormalized
    feature.
    """
    h, w, d = (int(v) for v in size)
    n = seq.num_frames
    if n < d:
        raise TooShort(f"sequence has {n} frames, snippets need {d}")
    if stride < 1:
        raise InvalidInput(f"stride must be >= 1, got {stride}")
    if delta is None:
        delta = default_delta(seq)
    boxes = seq.boxes if use_boxes else None
    if bank.strategy == "sdsfa" and boxes is None:
        raise InvalidInput("sdsfa featurization needs bounding boxes")

    out = []
    for start in range(0, n - d + 1, stride):
        bbox = None if boxes is None else tuple(int(v) for v in boxes[start])
        mask = motion_boundary(seq.frames[start], delta, bbox)
        snippet_seed = np.random.SeedSequence([int(seed), start])
        cuboids = _sample_snippet_cuboids(seq, mask, start, fraction,
                                          (h, w, d), snippet_seed)
        if bank.strategy == "sdsfa":
            cuboids = [replace(c, region_label=region_label(
                (c.x, c.y), bbox, bank.grid)) for c in cuboids]
        if cuboids:
            out.append(asd_feature(
                Snippet(sequence_id, start, tuple(cuboids)), bank))
        else:
            out.append(ASDFeature(np.zeros(bank.k_total),
                                  (sequence_id, start), False))
    return out


def _sample_snippet_cuboids(seq, mask, start, fraction, size, rng_seed):
    """Cuboids for one snippet: one mask, one start frame."""
    h, w, d = size
    frames = np.asarray(seq.frames, dtype=float)
    height, width = frames.shape[1], frames.shape[2]
    ys, xs = np.nonzero(mask.mask)
    if ys.size == 0:
        return []
    rng = np.random.default_rng(rng_seed)
    count = math.ceil(fraction * ys.size)
    picks = rng.choice(ys.size, size=count, replace=False)
    out = []
    for i in picks:
        y, x = int(ys[i]), int(xs[i])
        y0, x0 = y - h // 2, x - w // 2
        if y0 < 0 or x0 < 0 or y0 + h > height or x0 + w > width:
            continue
        out.append(Cuboid(x=x, y=y, t=start,
                          data=frames[start:start + d, y0:y0 + h, x0:x0 + w].copy()))
    return out


def block_sum_matrix(cuboids, bank: ModelBank):
    """Class-by-class mean block sums, the selectivity table's input.

    Entry (i, j) is the mean over class-i cuboids of the summed
    squared-derivative block under class-j's functions; for an
    ``sdsfa`` bank each cuboid is scored by the models of its own
    region.  Returns (matrix, class label order).  Cuboids must carry
    class labels (and region labels for ``sdsfa``).
    """
    classes = bank.class_labels
    if not classes:
        raise InvalidInput("block sums need a class-keyed bank")
    if any(c.class_label is None for c in cuboids):
        raise InvalidInput("block sums need class-labeled cuboids")
    blocks, _ = _bank_blocks(bank)
    matrix = np.zeros((len(classes), len(classes)))
    for i, ci in enumerate(classes):
        own = [c for c in cuboids if c.class_label == ci]
        if not own:
            raise InvalidInput(f"no cuboids for class {ci}")
        for j, cj in enumerate(classes):
            total = 0.0
            for offset, model in blocks:
                if model.class_label != cj:
                    continue
                if bank.strategy == "sdsfa":
                    group = [c for c in own
                             if c.region_label == model.region_label]
                    if not group:
                        continue
                    total += float(_batch_squared_derivatives(group, model).sum())
                else:
                    total += float(_batch_squared_derivatives(own, model).sum())
            matrix[i, j] = total / len(own)
    return matrix, classes
