"""Render a plan against real images and emit manifest fragment rows.

Entries are independent, so rendering can fan out over a thread pool; the
emitted fragment always follows plan order regardless of completion order.
Re-running the same plan against the same sources reproduces every output
byte and every fragment row.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from .imageio import Image, ImageIOError, read_image, write_image
from .ops import apply_aug_op
from .plan import AugPlan, PlanEntry


class DirectoryLoader:
    """Resolves source ids as paths relative to a root directory."""

    def __init__(self, root):
        self.root = Path(root)

    def __call__(self, source_id: str) -> Image:
        return read_image(self.root / source_id)


class DirectorySink:
    """Stores outputs under a root directory, one file per plan entry."""

    def __init__(self, root, image_format: str = "png"):
        if image_format not in ("png", "ppm"):
            raise ValueError("image_format must be png or ppm")
        self.root = Path(root)
        self.image_format = image_format

    def store(self, entry: PlanEntry, img: Image) -> str:
        rel = Path(entry.source_id)
        name = f"{rel.stem}__{entry.op_index:02d}_{entry.op.slug()}.{self.image_format}"
        out_path = self.root / rel.parent / name
        write_image(img, out_path)
        return str(out_path.relative_to(self.root))


def execute_plan(
    plan: AugPlan,
    loader: Callable[[str], Image],
    sink,
    source_info: Callable[[str], tuple[str, str]] | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Apply every plan entry and return its manifest fragment rows.

    ``loader`` maps a source id to an Image; ``sink.store(entry, image)``
    persists one output and returns its path. ``source_info`` optionally
    maps a source id to (source_dataset, class_name) for the emitted rows.
    """
    images: dict[str, Image] = {}
    for sid in dict.fromkeys(e.source_id for e in plan.entries):
        try:
            images[sid] = loader(sid)
        except ImageIOError:
            raise
        except (KeyError, FileNotFoundError, OSError) as exc:
            raise ImageIOError(f"cannot resolve source {sid!r}: {exc}") from exc

    def render(entry: PlanEntry) -> dict:
        out_img = apply_aug_op(images[entry.source_id], entry.op, entry.stream_seed)
        path = sink.store(entry, out_img)
        dataset, cls = ("local", "")
        if source_info is not None:
            dataset, cls = source_info(entry.source_id)
        row = {
            "id": entry.output_id(),
            "source_dataset": dataset,
            "original_class": cls,
            "final_class": cls,
            "split": "unassigned",
            "path": path,
        }
        if entry.op.kind != "identity":
            row["lineage"] = {
                "parent": entry.source_id,
                "op": entry.op.describe(),
                "seed": entry.stream_seed,
            }
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(render, plan.entries))
    else:
        rows = [render(entry) for entry in plan.entries]
    return rows


def append_fragment(rows: list[dict], path) -> None:
    """Append fragment rows to a JSON Lines manifest file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
