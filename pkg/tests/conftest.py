import json
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))


def write_frame(path, h, w, box, seed):
    """Synthetic frame: textured background with a bright block at the box."""
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 120, (h, w, 3), dtype=np.uint8)
    x, y, bw, bh = (int(round(v)) for v in box)
    img[max(0, y):y + bh, max(0, x):x + bw] = rng.integers(160, 255, 3, dtype=np.uint8)
    Image.fromarray(img).save(path)


def build_image_dataset(root: Path, n_images=3, frame_hw=(96, 128)):
    """COCO-style fixture: n images, two annotated objects each."""
    root.mkdir(parents=True, exist_ok=True)
    h, w = frame_hw
    images, annotations, categories = [], [], [
        {"id": 1, "name": "cat"},
        {"id": 2, "name": "dog"},
    ]
    ann_id = 1
    for i in range(n_images):
        name = f"img{i:03d}.png"
        boxes = [(14 + 9 * i, 12 + 5 * i, 24, 18), (70 - 4 * i, 50, 20, 26)]
        write_frame(root / name, h, w, boxes[0], seed=100 + i)
        images.append({"id": i + 1, "file_name": name, "width": w, "height": h})
        for j, b in enumerate(boxes):
            annotations.append({
                "id": ann_id,
                "image_id": i + 1,
                "bbox": list(map(float, b)),
                "category_id": 1 + (j + i) % 2,
            })
            ann_id += 1
    ann_path = root / "annotations.json"
    ann_path.write_text(json.dumps(
        {"images": images, "annotations": annotations, "categories": categories}))
    return ann_path


def build_sequence_dataset(root: Path, specs=(("seq_a", "cat", 6), ("seq_b", "dog", 5)),
                           frame_hw=(96, 128)):
    """Sequence fixture: per-sequence frames + groundtruth.txt + meta.txt."""
    root.mkdir(parents=True, exist_ok=True)
    h, w = frame_hw
    for s, (name, category, n_frames) in enumerate(specs):
        seq = root / name
        seq.mkdir(exist_ok=True)
        lines = []
        for f in range(n_frames):
            box = (10.0 + 6 * f + 3 * s, 20.0 + 4 * f, 22.0, 16.0)
            write_frame(seq / f"{f:04d}.png", h, w, box, seed=1000 * s + f)
            lines.append(",".join(str(v) for v in box))
        (seq / "groundtruth.txt").write_text("\n".join(lines) + "\n")
        (seq / "meta.txt").write_text(f"category: {category}\n")
    return root


@pytest.fixture(scope="session")
def image_dataset_path(tmp_path_factory):
    return build_image_dataset(tmp_path_factory.mktemp("coco"))


@pytest.fixture(scope="session")
def sequence_dataset_path(tmp_path_factory):
    return build_sequence_dataset(tmp_path_factory.mktemp("seqs"))


CONFIG_TEMPLATE = """\
seed: {seed}
samples_per_epoch: {samples_per_epoch}
epochs: {epochs}
max_frame_gap: 4
datasets:
  - id: fiximg
    type: image
    path: {image_path}
  - id: fixseq
    type: sequence
    path: {sequence_path}
policy:
  gamma_min: 2.0
  gamma_max: 6.0
  p_boundary: 0.05
  search_out_size: 64
  template_out_size: 32
  jitter: {{shift: 3.0, scale: 0.25}}
  gda:
    p_gray: 0.3
    p_flip: {p_flip}
    p_brightness: 0.3
    p_blur: 0.1
    p_rotate: {p_rotate}
  tfmix:
    patch_size: 16
    epoch_period: 2
    epoch_offset: 1
"""


def write_config(path, image_path, sequence_path, seed=77, samples_per_epoch=8,
                 epochs=2, p_flip=0.5, p_rotate=0.1):
    path.write_text(CONFIG_TEMPLATE.format(
        seed=seed, samples_per_epoch=samples_per_epoch, epochs=epochs,
        image_path=image_path, sequence_path=sequence_path,
        p_flip=p_flip, p_rotate=p_rotate,
    ))
    return path


@pytest.fixture(scope="session")
def config_path(tmp_path_factory, image_dataset_path, sequence_dataset_path):
    return write_config(tmp_path_factory.mktemp("cfg") / "pipeline.yaml",
                        image_dataset_path, sequence_dataset_path)


@pytest.fixture(scope="session")
def geometric_free_config_path(tmp_path_factory, image_dataset_path, sequence_dataset_path):
    """Flip/rotation disabled so patch boxes re-project onto the originals."""
    return write_config(tmp_path_factory.mktemp("cfg") / "pipeline.yaml",
                        image_dataset_path, sequence_dataset_path,
                        p_flip=0.0, p_rotate=0.0)
