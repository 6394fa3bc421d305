import json
from collections import Counter

import numpy as np
import pytest

from vesseltopo.errors import DegenerateInput, DimensionMismatch, RejectedTie
from vesseltopo.synth import VesselParams, generate_vessel, perturb_disconnect
from vesseltopo.taskgen import (
    TASK_KINDS,
    TEMPLATES,
    DatasetConfig,
    build_dataset,
    gen_choice,
    gen_counting,
    gen_judgement,
    gen_quality,
    gen_refinement,
    prompt_is_well_formed,
    topology_choice_score,
    verify_answers,
)


def gray_for(mask):
    img = np.full(mask.shape, 0.15)
    img[mask] = 0.85
    return img


@pytest.fixture(scope="module")
def scene():
    img, gt, s = generate_vessel(VesselParams(width=64, height=64,
                                              radius_root=2.0, seed=77))
    return img, gt, s


# ------------------------------ judgement -------------------------------- #

def test_judgement_tree_has_no_loop(tree_mask):
    rec = gen_judgement(gray_for(tree_mask), tree_mask, "loop", seed=0)
    assert rec.answer == "no"
    assert rec.task_kind == "structure_judgement"
    pool, idx = rec.provenance["template"]
    assert prompt_is_well_formed(pool, rec.prompt, idx)


def test_judgement_two_trees(tree_mask):
    two = np.zeros((9, 20), dtype=bool)
    two[:, :9] = tree_mask
    two[:, 11:] = tree_mask
    rec = gen_judgement(gray_for(two), two, "component>1", seed=1)
    assert rec.answer == "yes"


def test_judgement_ring_has_loop(ring_mask):
    rec = gen_judgement(gray_for(ring_mask), ring_mask, "loop", seed=2)
    assert rec.answer == "yes"


def test_judgement_single_component_says_no(ring_mask):
    rec = gen_judgement(gray_for(ring_mask), ring_mask, "component>1", seed=3)
    assert rec.answer == "no"


def test_judgement_shape_and_structure_checks(ring_mask):
    with pytest.raises(DimensionMismatch):
        gen_judgement(np.zeros((3, 3)), ring_mask, "loop", seed=0)
    with pytest.raises(ValueError):
        gen_judgement(gray_for(ring_mask), ring_mask, "spiral", seed=0)


# ------------------------------ counting --------------------------------- #

def test_counting_three_trees():
    _, gt, s = generate_vessel(VesselParams(n_trees=3, seed=10))
    rec = gen_counting(gray_for(gt), gt, "components", seed=0)
    assert rec.answer == "3" == str(s.beta0)


def test_counting_empty_mask():
    empty = np.zeros((8, 8), dtype=bool)
    rec = gen_counting(gray_for(empty), empty, "components", seed=0)
    assert rec.answer == "0"


def test_counting_two_loops():
    _, gt, s = generate_vessel(VesselParams(n_loops=2, seed=12))
    rec = gen_counting(gray_for(gt), gt, "loops", seed=0)
    assert rec.answer == "2" == str(s.beta1)


# ------------------------------- quality --------------------------------- #

def test_quality_identical_is_good(scene):
    img, gt, _ = scene
    rec = gen_quality(img, gt, gt, seed=0)
    assert rec.answer == "good"


def test_quality_disconnected_is_poor(scene):
    img, gt, _ = scene
    bad, _ = perturb_disconnect(gt, 2, seed=1)
    rec = gen_quality(img, gt, bad, seed=0)
    assert rec.answer == "poor"


def test_quality_translation_with_same_topology_is_good(scene):
    img, gt, _ = scene
    shifted = np.roll(gt, 1, axis=1)
    shifted[:, 0] = False
    from vesseltopo.topology import betti_numbers
    if betti_numbers(shifted) == betti_numbers(gt):
        rec = gen_quality(img, gt, shifted, seed=0)
        assert rec.answer == "good"  # dice < 1 is irrelevant to the criterion


def test_quality_prompt_embeds_criterion_and_counts(scene):
    img, gt, s = scene
    rec = gen_quality(img, gt, gt, seed=4)
    assert "otherwise it is poor" in rec.prompt
    assert f"{s.beta0} connected component" in rec.prompt


# ------------------------------- choice ---------------------------------- #

def test_choice_gt_beats_perturbed(scene):
    img, gt, _ = scene
    bad, _ = perturb_disconnect(gt, 2, seed=2)
    rec = gen_choice(img, gt, bad, gt, seed=0)
    # the answer must point at the slot where gt was presented
    slot_of_gt = "A" if rec.provenance["order"] == "ab" else "B"
    assert rec.answer == slot_of_gt


def test_choice_fewer_cuts_win(scene):
    img, gt, _ = scene
    light, _ = perturb_disconnect(gt, 2, seed=3)
    heavy, _ = perturb_disconnect(gt, 5, seed=4)
    assert topology_choice_score(light, gt) < topology_choice_score(heavy, gt)
    rec = gen_choice(img, light, heavy, gt, seed=1)
    slot_of_light = "A" if rec.provenance["order"] == "ab" else "B"
    assert rec.answer == slot_of_light


def test_choice_tie_rejected(scene):
    img, gt, _ = scene
    with pytest.raises(RejectedTie):
        gen_choice(img, gt, gt, gt, seed=0)


# ----------------------------- refinement -------------------------------- #

def test_refinement_prompt_embeds_gt_counts(scene):
    img, gt, s = scene
    bad, _ = perturb_disconnect(gt, 1, seed=5)
    rec = gen_refinement(img, bad, gt, seed=0,
                         gt_path="ref_gt.pgm")
    assert "1 connected component" in rec.prompt
    assert "0 loops" in rec.prompt
    assert rec.target == "ref_gt.pgm" == rec.answer
    assert rec.image_paths == ("image.pgm", "imperfect.pgm")


def test_refinement_two_components_plural():
    img, gt, s = generate_vessel(VesselParams(n_trees=2, seed=30))
    bad, _ = perturb_disconnect(gt, 1, seed=6)
    rec = gen_refinement(img, bad, gt, seed=1)
    assert "2 connected components" in rec.prompt


def test_refinement_degenerate(scene):
    img, gt, _ = scene
    with pytest.raises(DegenerateInput):
        gen_refinement(img, gt, gt, seed=0)


# ---------------------------- templates ---------------------------------- #

def test_template_pools_have_paraphrases():
    for pool, templates in TEMPLATES.items():
        assert len(templates) >= 3, pool


def test_prompt_hygiene_rejects_unfilled_template():
    raw = TEMPLATES["judgement_loop"][0]  # placeholders not substituted
    assert not prompt_is_well_formed("judgement_loop", raw, 0)


# --------------------------- dataset builder ------------------------------ #

@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    cfg = DatasetConfig(out_dir=str(out), per_kind={k: 4 for k in TASK_KINDS},
                        seed=5)
    return build_dataset(cfg), out


def test_build_dataset_counts_and_verification(small_dataset):
    manifest, _ = small_dataset
    records = [json.loads(line) for line in open(manifest)]
    assert len(records) == 20
    report = verify_answers(manifest)
    assert report.total == 20
    assert report.mismatch_count == 0
    assert report.per_kind == {k: 4 for k in TASK_KINDS}


def test_build_dataset_is_reproducible(small_dataset, tmp_path):
    manifest, _ = small_dataset
    cfg = DatasetConfig(out_dir=str(tmp_path / "again"),
                        per_kind={k: 4 for k in TASK_KINDS}, seed=5)
    again = build_dataset(cfg)
    assert open(manifest).read() == open(again).read()


def test_build_dataset_balance_and_prompts(small_dataset):
    manifest, _ = small_dataset
    records = [json.loads(line) for line in open(manifest)]
    for kind, classes in (("structure_judgement", ("yes", "no")),
                          ("quality_judgement", ("good", "poor")),
                          ("better_choice", ("A", "B"))):
        answers = Counter(r["answer"] for r in records if r["task_kind"] == kind)
        assert answers[classes[0]] == answers[classes[1]] == 2
    for r in records:
        pool, idx = r["provenance"]["template"]
        assert prompt_is_well_formed(pool, r["prompt"], idx)
        assert r["provenance"]["split"] in ("train", "test")


def test_build_dataset_split_uses_disjoint_params(small_dataset):
    manifest, _ = small_dataset
    records = [json.loads(line) for line in open(manifest)]
    train_depths = {r["provenance"]["scene"]["branch_depth"]
                    for r in records if r["provenance"]["split"] == "train"}
    test_depths = {r["provenance"]["scene"]["branch_depth"]
                   for r in records if r["provenance"]["split"] == "test"}
    assert train_depths and test_depths
    assert not (train_depths & test_depths)


def test_verify_catches_flipped_answer(small_dataset, tmp_path):
    manifest, src = small_dataset
    records = [json.loads(line) for line in open(manifest)]
    flip = next(i for i, r in enumerate(records)
                if r["task_kind"] == "structure_judgement")
    records[flip]["answer"] = "yes" if records[flip]["answer"] == "no" else "no"
    bad_dir = tmp_path / "flipped"
    bad_dir.mkdir()
    for f in src.iterdir():
        if f.suffix == ".pgm":
            (bad_dir / f.name).write_bytes(f.read_bytes())
    bad_manifest = bad_dir / "manifest.jsonl"
    bad_manifest.write_text("\n".join(json.dumps(r, sort_keys=True)
                                      for r in records) + "\n")
    report = verify_answers(bad_manifest)
    assert report.mismatch_count == 1
    assert report.mismatch_records == (flip,)


def test_verify_missing_image_names_record(small_dataset, tmp_path):
    manifest, src = small_dataset
    records = [json.loads(line) for line in open(manifest)]
    broken = tmp_path / "broken"
    broken.mkdir()
    skip = records[0]["images"][0]
    for f in src.iterdir():
        if f.suffix == ".pgm" and f.name != skip:
            (broken / f.name).write_bytes(f.read_bytes())
    bad_manifest = broken / "manifest.jsonl"
    bad_manifest.write_text("\n".join(json.dumps(r, sort_keys=True)
                                      for r in records) + "\n")
    with pytest.raises(OSError, match="record 0"):
        verify_answers(bad_manifest)
