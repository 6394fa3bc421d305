"""Synthetic vessel-like scenes and controlled topological perturbations.

Scenes are branching tube systems rendered onto a noisy background. All
topology claims are verified rather than assumed: generation recomputes
Betti numbers after every structural edit and retries with a fresh
sub-stream until the requested component and loop counts hold exactly.

Randomness is split per tree and per perturbation via ``SeedSequence`` so
that editing one part of a scene never reshuffles the rest.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientStructure, InvalidParams
from .maskio import BinaryMask, GrayImage, as_mask, save_image, save_mask
from .topology import TopologySummary, betti_numbers, label_components, skeletonize

_MAX_SCENE_ATTEMPTS = 100
_MAX_SITE_ATTEMPTS = 1000


@dataclass(frozen=True)
class VesselParams:
    width: int = 128
    height: int = 128
    n_trees: int = 1
    branch_depth: int = 4
    branch_prob: float = 0.7
    radius_root: float = 2.5
    radius_min: float = 1.0
    n_loops: int = 0
    background_noise_sigma: float = 0.04
    seed: int = 0

    def validate(self) -> None:
        if self.radius_min < 1:
            raise InvalidParams("radius_min must be >= 1")
        if self.radius_root < self.radius_min:
            raise InvalidParams("radius_root must be >= radius_min")
        if self.branch_depth < 1:
            raise InvalidParams("branch_depth must be >= 1")
        if not 0.0 <= self.branch_prob <= 1.0:
            raise InvalidParams("branch_prob must be in [0, 1]")
        if self.n_trees < 1 or self.n_loops < 0:
            raise InvalidParams("need n_trees >= 1 and n_loops >= 0")
        if self.background_noise_sigma < 0:
            raise InvalidParams("background_noise_sigma must be >= 0")
        if min(self.width, self.height) < 8 * self.radius_root:
            raise InvalidParams(
                f"canvas {self.width}x{self.height} too small for "
                f"radius_root={self.radius_root}"
            )


@dataclass(frozen=True)
class PerturbationLog:
    kind: str  # disconnect | merge | hole | dilate-noise
    sites: tuple[tuple[int, int], ...]
    expected_beta0_delta: int | None
    expected_beta1_delta: int | None


def _stamp_disk(canvas: np.ndarray, cy: float, cx: float, r: float,
                value: bool = True) -> None:
    h, w = canvas.shape
    y0 = max(0, int(math.floor(cy - r)))
    y1 = min(h, int(math.ceil(cy + r)) + 1)
    x0 = max(0, int(math.floor(cx - r)))
    x1 = min(w, int(math.ceil(cx + r)) + 1)
    if y0 >= y1 or x0 >= x1:
        return
    yy = np.arange(y0, y1, dtype=np.float64)[:, None] - cy
    xx = np.arange(x0, x1, dtype=np.float64)[None, :] - cx
    canvas[y0:y1, x0:x1][yy * yy + xx * xx <= r * r] = value


def _stamp_tube(canvas: np.ndarray, p0, p1, r0: float, r1: float,
                value: bool = True) -> None:
    """Stamp overlapping disks along the segment p0 -> p1 (radii lerped)."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    dist = float(np.hypot(*(p1 - p0)))
    n = max(2, int(dist * 2) + 1)
    for t in np.linspace(0.0, 1.0, n):
        pos = p0 + t * (p1 - p0)
        _stamp_disk(canvas, pos[0], pos[1], r0 + t * (r1 - r0), value)


def _grow_tree(mask: np.ndarray, rng: np.random.Generator,
               params: VesselParams, origin, direction) -> None:
    h, w = mask.shape
    margin = params.radius_root + 2.0
    seg_len = 0.13 * min(h, w)
    stack = [(np.asarray(origin, dtype=np.float64), float(direction), 1,
              float(params.radius_root))]
    while stack:
        pos, angle, depth, radius = stack.pop()
        n_steps = max(4, int(rng.uniform(0.8, 1.3) * seg_len))
        alive = True
        for _ in range(n_steps):
            _stamp_disk(mask, pos[0], pos[1], radius)
            angle += rng.normal(0.0, 0.12)
            pos = pos + np.array([math.sin(angle), math.cos(angle)])
            if not (margin <= pos[0] < h - margin and margin <= pos[1] < w - margin):
                alive = False
                break
        if not alive or depth >= params.branch_depth:
            continue
        if rng.random() < params.branch_prob:
            spread = rng.uniform(0.35, 0.8)
            child_r = max(params.radius_min, radius * 0.78)
            stack.append((pos, angle + spread, depth + 1, child_r))
            stack.append((pos, angle - spread, depth + 1, child_r))
        else:
            stack.append((pos, angle, depth + 1,
                          max(params.radius_min, radius * 0.9)))


def _place_roots(rng: np.random.Generator, params: VesselParams) -> list:
    h, w = params.height, params.width
    margin = params.radius_root + 3.0
    min_sep = min(h, w) / (params.n_trees + 1)
    roots: list[np.ndarray] = []
    for _ in range(params.n_trees):
        best = None
        for _ in range(200):
            cand = np.array([rng.uniform(margin, h - margin),
                             rng.uniform(margin, w - margin)])
            if all(np.hypot(*(cand - r)) >= min_sep for r in roots):
                best = cand
                break
        roots.append(best if best is not None else cand)
    return roots


def _insert_loops(mask: np.ndarray, n_loops: int, rng: np.random.Generator,
                  params: VesselParams) -> np.ndarray | None:
    """Bridge same-tree branch pairs until exactly n_loops loops exist."""
    cur = mask.copy()
    summary = betti_numbers(cur)
    max_span = 0.35 * min(cur.shape)
    for _ in range(n_loops):
        labels = label_components(cur, 8).labels
        fg = np.argwhere(cur)
        done = False
        for _ in range(100):
            p = fg[rng.integers(len(fg))]
            d = np.hypot(fg[:, 0] - p[0], fg[:, 1] - p[1])
            same = labels[fg[:, 0], fg[:, 1]] == labels[p[0], p[1]]
            picks = np.nonzero((d >= 8) & (d <= max_span) & same)[0]
            if len(picks) == 0:
                continue
            q = fg[picks[rng.integers(len(picks))]]
            cand = cur.copy()
            _stamp_tube(cand, p, q, params.radius_min, params.radius_min)
            b = betti_numbers(cand)
            if b.beta0 == summary.beta0 and b.beta1 == summary.beta1 + 1:
                cur, summary, done = cand, b, True
                break
        if not done:
            return None
    return cur


def _render_image(mask: np.ndarray, sigma: float,
                  rng: np.random.Generator) -> GrayImage:
    img = np.full(mask.shape, 0.15, dtype=np.float64)
    img[mask] = 0.85
    if sigma > 0:
        img += rng.normal(0.0, sigma, mask.shape)
    return np.clip(img, 0.0, 1.0)


def generate_vessel(params: VesselParams) -> tuple[GrayImage, BinaryMask, TopologySummary]:
    """Generate one scene with exactly the requested topology.

    Returns the grayscale image (bright vessels on a noisy dark background),
    the ground-truth mask, and its verified topology summary. The summary is
    recomputed from the final mask, so beta0 == n_trees and beta1 == n_loops
    always hold for a returned scene. Attempts whose topology or foreground
    fraction comes out wrong are discarded and regenerated from a fresh
    sub-seed; after 100 failed attempts the parameters are deemed
    unsatisfiable.
    """
    params.validate()
    root_ss = np.random.SeedSequence(params.seed)
    for scene_ss in root_ss.spawn(_MAX_SCENE_ATTEMPTS):
        # stream 0: root placement; 1..n_trees: one per tree (indices stay
        # stable when n_trees grows); then loop insertion, then background
        streams = scene_ss.spawn(params.n_trees + 3)
        mask = np.zeros((params.height, params.width), dtype=bool)
        roots = _place_roots(np.random.default_rng(streams[0]), params)
        for t in range(params.n_trees):
            tree_rng = np.random.default_rng(streams[1 + t])
            _grow_tree(mask, tree_rng, params, roots[t],
                       tree_rng.uniform(0.0, 2.0 * math.pi))
        summary = betti_numbers(mask)
        if summary.beta0 != params.n_trees or summary.beta1 != 0:
            continue
        if params.n_loops > 0:
            looped = _insert_loops(mask, params.n_loops,
                                   np.random.default_rng(streams[params.n_trees + 1]),
                                   params)
            if looped is None:
                continue
            mask = looped
        frac = float(mask.mean())
        if not 0.02 <= frac <= 0.4:
            continue
        image = _render_image(mask, params.background_noise_sigma,
                              np.random.default_rng(streams[params.n_trees + 2]))
        return image, mask, betti_numbers(mask)
    raise InvalidParams(
        f"could not realize beta0={params.n_trees}, beta1={params.n_loops} "
        f"within {_MAX_SCENE_ATTEMPTS} attempts; adjust params"
    )


def _neighbor_count(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1).astype(np.int8)
    out = np.zeros(mask.shape, dtype=np.int8)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            out += padded[1 + dy:mask.shape[0] + 1 + dy,
                          1 + dx:mask.shape[1] + 1 + dx]
    return out


def _local_halfwidth(mask: np.ndarray, y: int, x: int, cap: int = 6) -> int:
    """Largest r <= cap such that the disk of radius r at (y, x) fits in mask."""
    probe = np.zeros_like(mask)
    best = 0
    for r in range(1, cap + 1):
        probe[:] = False
        _stamp_disk(probe, float(y), float(x), float(r))
        if not (probe & ~mask).any():
            best = r
        else:
            break
    return best


def _skeleton_tangent(skel: np.ndarray, y: int, x: int,
                      rng: np.random.Generator) -> tuple[float, float]:
    neigh = [(dy, dx)
             for dy in (-1, 0, 1) for dx in (-1, 0, 1)
             if (dy or dx)
             and 0 <= y + dy < skel.shape[0] and 0 <= x + dx < skel.shape[1]
             and skel[y + dy, x + dx]]
    if len(neigh) >= 2:
        (ay, ax), (by, bx) = neigh[0], neigh[-1]
        ty, tx = by - ay, bx - ax
        norm = math.hypot(ty, tx)
        if norm > 0:
            return ty / norm, tx / norm
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return math.sin(angle), math.cos(angle)


def perturb_disconnect(mask: BinaryMask, k: int,
                       seed: int) -> tuple[BinaryMask, PerturbationLog]:
    """Erase k short full-width gaps, each verified to add one component.

    Gaps are 2-5 px long, centered on interior skeleton points, mutually
    non-adjacent. Every cut is accepted only if recomputed Betti numbers
    show beta0 + 1 and unchanged beta1; otherwise another site is tried.
    """
    m = as_mask(mask).copy()
    if k == 0:
        return m, PerturbationLog("disconnect", (), 0, 0)
    rng = np.random.default_rng(seed)
    cur = m
    cur_b = betti_numbers(cur)
    sites: list[tuple[int, int]] = []
    radii: list[float] = []
    attempts = 0
    for _ in range(k):
        skel = skeletonize(cur)
        interior = np.argwhere(skel & (_neighbor_count(skel) >= 2))
        order = rng.permutation(len(interior))
        placed = False
        # second round relaxes the site-separation pre-filter down to plain
        # non-adjacency; the Betti verification below still guards every cut
        for relaxed in (False, True):
            for oi in order:
                if attempts >= _MAX_SITE_ATTEMPTS:
                    break
                y, x = map(int, interior[oi])
                if not cur[y, x]:
                    continue
                base_rw = _local_halfwidth(m, y, x) + 1.0
                if any(math.hypot(y - sy, x - sx)
                       < (3.0 if relaxed else base_rw + pr + 2.0)
                       for (sy, sx), pr in zip(sites, radii)):
                    continue
                attempts += 1
                length = int(rng.integers(2, 6))
                ty, tx = _skeleton_tangent(skel, y, x, rng)
                half = length / 2.0
                for rw in (base_rw, base_rw + 1.0):
                    erase = np.zeros_like(cur)
                    _stamp_tube(erase, (y - ty * half, x - tx * half),
                                (y + ty * half, x + tx * half), rw, rw)
                    cand = cur & ~erase
                    b = betti_numbers(cand)
                    if b.beta0 == cur_b.beta0 + 1 and b.beta1 == cur_b.beta1:
                        cur, cur_b = cand, b
                        sites.append((y, x))
                        radii.append(rw)
                        placed = True
                        break
                if placed:
                    break
            if placed:
                break
        if not placed:
            raise InsufficientStructure(
                f"could not place cut {len(sites) + 1} of {k} "
                f"after {attempts} attempts"
            )
    return cur, PerturbationLog("disconnect", tuple(sites), k, 0)


def perturb_merge(mask: BinaryMask, k: int,
                  seed: int) -> tuple[BinaryMask, PerturbationLog]:
    """Draw k short bridges between nearby branches.

    Each bridge must either fuse two components (beta0 - 1) or close a loop
    (beta1 + 1); the actual verified deltas are recorded in the log.
    """
    m = as_mask(mask).copy()
    if k == 0:
        return m, PerturbationLog("merge", (), 0, 0)
    rng = np.random.default_rng(seed)
    cur = m
    cur_b = betti_numbers(cur)
    sites: list[tuple[int, int]] = []
    d_beta0 = 0
    d_beta1 = 0
    attempts = 0
    for _ in range(k):
        placed = False
        while attempts < _MAX_SITE_ATTEMPTS:
            attempts += 1
            fg = np.argwhere(cur)
            p = fg[rng.integers(len(fg))]
            d = np.maximum(np.abs(fg[:, 0] - p[0]), np.abs(fg[:, 1] - p[1]))
            picks = np.nonzero((d >= 3) & (d <= 6))[0]
            if len(picks) == 0:
                continue
            q = fg[picks[rng.integers(len(picks))]]
            cand = cur.copy()
            _stamp_tube(cand, p.astype(float), q.astype(float), 1.2, 1.2)
            b = betti_numbers(cand)
            db0 = b.beta0 - cur_b.beta0
            db1 = b.beta1 - cur_b.beta1
            if (db0, db1) in ((-1, 0), (0, 1)):
                cur, cur_b = cand, b
                d_beta0 += db0
                d_beta1 += db1
                sites.append((int(p[0]), int(p[1])))
                sites.append((int(q[0]), int(q[1])))
                placed = True
                break
        if not placed:
            raise InsufficientStructure(
                f"could not place bridge {len(sites) // 2 + 1} of {k} "
                f"after {attempts} attempts"
            )
    return cur, PerturbationLog("merge", tuple(sites), d_beta0, d_beta1)


def perturb_holes(mask: BinaryMask, k: int,
                  seed: int) -> tuple[BinaryMask, PerturbationLog]:
    """Punch k single-pixel holes in thick regions, each adding one loop."""
    m = as_mask(mask).copy()
    if k == 0:
        return m, PerturbationLog("hole", (), 0, 0)
    rng = np.random.default_rng(seed)
    interior = np.argwhere(m & (_neighbor_count(m) == 8))
    if len(interior) == 0:
        raise InsufficientStructure("mask has no interior pixels to puncture")
    order = rng.permutation(len(interior))
    cur = m
    cur_b = betti_numbers(cur)
    sites: list[tuple[int, int]] = []
    attempts = 0
    for _ in range(k):
        placed = False
        for oi in order:
            if attempts >= _MAX_SITE_ATTEMPTS:
                break
            y, x = map(int, interior[oi])
            if (y, x) in sites or not cur[y, x]:
                continue
            attempts += 1
            cand = cur.copy()
            cand[y, x] = False
            b = betti_numbers(cand)
            if b.beta0 == cur_b.beta0 and b.beta1 == cur_b.beta1 + 1:
                cur, cur_b = cand, b
                sites.append((y, x))
                placed = True
                break
        if not placed:
            raise InsufficientStructure(
                f"could not punch hole {len(sites) + 1} of {k} "
                f"after {attempts} attempts"
            )
    return cur, PerturbationLog("hole", tuple(sites), 0, k)


def perturb_dilate_noise(mask: BinaryMask, seed: int,
                         grow_prob: float = 0.35) -> tuple[BinaryMask, PerturbationLog]:
    """Thicken a random subset of the boundary without changing topology.

    Produces a mask that differs from the input but has verified identical
    Betti numbers; used for topology-equivalent 'good' candidates. Falls
    back to smaller subsets when a grown pixel would fuse or close anything.
    """
    m = as_mask(mask).copy()
    rng = np.random.default_rng(seed)
    base = betti_numbers(m)
    padded = np.pad(m, 1)
    rim = np.zeros_like(padded)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            rim |= np.roll(np.roll(padded, dy, 0), dx, 1)
    rim = rim[1:-1, 1:-1] & ~m
    candidates = np.argwhere(rim)
    if len(candidates) == 0:
        return m, PerturbationLog("dilate-noise", (), 0, 0)
    chosen = candidates[rng.random(len(candidates)) < grow_prob]
    cur = m
    sites: list[tuple[int, int]] = []
    for y, x in chosen:
        cand = cur.copy()
        cand[y, x] = True
        if betti_numbers(cand) == base:
            cur = cand
            sites.append((int(y), int(x)))
    return cur, PerturbationLog("dilate-noise", tuple(sites), 0, 0)


_PERTURB_FAMILIES = {
    "disconnect": perturb_disconnect,
    "merge": perturb_merge,
    "hole": perturb_holes,
}


def emit_samples(out_dir, params: VesselParams, count: int,
                 n_bad: int = 1, max_k: int = 3) -> str:
    """Write `count` scenes plus perturbed variants and a JSONL manifest.

    Per sample id: ``<id>_img.pgm``, ``<id>_gt.pgm`` and ``<id>_bad<j>.pgm``
    files, with one manifest record per sample carrying the perturbation
    logs. Paths in the manifest are relative to the output directory.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    sample_seeds = np.random.SeedSequence(params.seed).spawn(count)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for i, sample_ss in enumerate(sample_seeds):
            sid = f"{i:05d}"
            seeds = sample_ss.generate_state(2 + n_bad)
            scene_params = VesselParams(**{**asdict(params),
                                           "seed": int(seeds[0])})
            image, gt, summary = generate_vessel(scene_params)
            save_image(image, os.path.join(out_dir, f"{sid}_img.pgm"))
            save_mask(gt, os.path.join(out_dir, f"{sid}_gt.pgm"))
            rng = np.random.default_rng(seeds[1])
            bad_entries = []
            for j in range(n_bad):
                family_order = list(rng.permutation(sorted(_PERTURB_FAMILIES)))
                k = int(rng.integers(1, max_k + 1))
                bad = None
                for family in family_order:
                    try:
                        bad, log = _PERTURB_FAMILIES[family](gt, k, int(seeds[2 + j]))
                        break
                    except InsufficientStructure:
                        continue
                if bad is None:
                    raise InsufficientStructure(
                        f"sample {sid}: no perturbation family applicable"
                    )
                bad_path = f"{sid}_bad{j}.pgm"
                save_mask(bad, os.path.join(out_dir, bad_path))
                bad_entries.append({
                    "path": bad_path,
                    "kind": log.kind,
                    "sites": [list(s) for s in log.sites],
                    "beta0_delta": log.expected_beta0_delta,
                    "beta1_delta": log.expected_beta1_delta,
                })
            record = {
                "id": sid,
                "image": f"{sid}_img.pgm",
                "gt": f"{sid}_gt.pgm",
                "betti": {"beta0": summary.beta0, "beta1": summary.beta1},
                "bad": bad_entries,
                "params": asdict(scene_params),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest_path
