import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def write_frame(path, h, w, box, seed):
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 120, (h, w, 3), dtype=np.uint8)
    x, y, bw, bh = (int(round(v)) for v in box)
    img[max(0, y):y + bh, max(0, x):x + bw] = rng.integers(160, 255, 3, dtype=np.uint8)
    Image.fromarray(img).save(path)


def build_image_dataset(root: Path, n_images=4, frame_hw=(96, 128)):
    root.mkdir(parents=True, exist_ok=True)
    h, w = frame_hw
    images, annotations = [], []
    categories = [{"id": 1, "name": "cat"}, {"id": 2, "name": "dog"}]
    ann_id = 1
    for i in range(n_images):
        name = f"img{i:03d}.png"
        boxes = [(12 + 8 * i, 10 + 6 * i, 26, 18), (72 - 5 * i, 52, 20, 24)]
        write_frame(root / name, h, w, boxes[0], seed=300 + i)
        images.append({"id": i + 1, "file_name": name, "width": w, "height": h})
        for j, b in enumerate(boxes):
            annotations.append({"id": ann_id, "image_id": i + 1,
                                "bbox": list(map(float, b)), "category_id": 1 + (i + j) % 2})
            ann_id += 1
    ann_path = root / "annotations.json"
    ann_path.write_text(json.dumps(
        {"images": images, "annotations": annotations, "categories": categories}))
    return ann_path


def build_sequence_dataset(root: Path, specs=(("seq_a", "cat", 7), ("seq_b", "cat", 5),
                                              ("seq_c", "dog", 6)), frame_hw=(96, 128)):
    root.mkdir(parents=True, exist_ok=True)
    h, w = frame_hw
    for s, (name, category, n_frames) in enumerate(specs):
        seq = root / name
        seq.mkdir(exist_ok=True)
        lines = []
        for f in range(n_frames):
            box = (8.0 + 7 * f + 2 * s, 18.0 + 5 * f, 24.0, 17.0)
            write_frame(seq / f"{f:04d}.png", h, w, box, seed=5000 * s + f)
            lines.append(",".join(str(v) for v in box))
        (seq / "groundtruth.txt").write_text("\n".join(lines) + "\n")
        (seq / "meta.txt").write_text(f"category: {category}\n")
    return root


CONFIG_TEMPLATE = """\
seed: {seed}
samples_per_epoch: 64
epochs: 2
max_frame_gap: 4
datasets:
  - id: {dataset_id}
    type: {dataset_type}
    path: {dataset_path}
policy:
  search_out_size: 64
  template_out_size: 32
  jitter: {{shift: 3.0, scale: 0.25}}
  tfmix:
    patch_size: 16
    epoch_period: 2
    epoch_offset: 1
"""


@pytest.fixture(scope="session")
def image_config(tmp_path_factory):
    ann = build_image_dataset(tmp_path_factory.mktemp("coco"))
    cfg = tmp_path_factory.mktemp("cfg") / "image.yaml"
    cfg.write_text(CONFIG_TEMPLATE.format(
        seed=41, dataset_id="fiximg", dataset_type="image", dataset_path=ann))
    return cfg


@pytest.fixture(scope="session")
def sequence_config(tmp_path_factory):
    root = build_sequence_dataset(tmp_path_factory.mktemp("seqs"))
    cfg = tmp_path_factory.mktemp("cfg") / "sequence.yaml"
    cfg.write_text(CONFIG_TEMPLATE.format(
        seed=42, dataset_id="fixseq", dataset_type="sequence", dataset_path=root))
    return cfg
