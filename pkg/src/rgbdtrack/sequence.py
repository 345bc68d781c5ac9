"""On-disk sequences and box files.

A sequence directory holds ``rgb/%08d.png`` (8-bit, 3 channels),
``depth/%08d.png`` (16-bit, millimeters, 0 = invalid) and ``groundtruth.txt``
with one ``frame,x,y,w,h`` line per frame (``NaN`` coordinates when the target
is fully occluded).  Tracker results use the same line grammar.
"""
from __future__ import annotations

import math
import os
import re
import tempfile
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .core import BoundingBox, Frame, MaybeBox

_NAME = re.compile(r"^(\d{8})\.png$")


class SequenceFormatError(ValueError):
    pass


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def format_box_line(index: int, box: MaybeBox, precision=3) -> str:
    if box is None:
        return f"{index},NaN,NaN,NaN,NaN"
    return f"{index}," + ",".join(f"{v:.{precision}f}" for v in box.as_tuple())


def parse_boxes(text: str, source="<boxes>") -> list[MaybeBox]:
    """Parse box lines; frame numbers must run 0, 1, 2, ... without gaps."""
    boxes: list[MaybeBox] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise SequenceFormatError(f"{source}:{lineno}: expected 'frame,x,y,w,h', got {line!r}")
        try:
            index = int(parts[0])
            vals = [float(p) for p in parts[1:]]
        except ValueError:
            raise SequenceFormatError(f"{source}:{lineno}: unparseable number in {line!r}") from None
        if index != len(boxes):
            raise SequenceFormatError(f"{source}:{lineno}: frame {index} out of order (expected {len(boxes)})")
        nan = [math.isnan(v) for v in vals]
        if all(nan):
            boxes.append(None)
        elif any(nan):
            raise SequenceFormatError(f"{source}:{lineno}: partially missing box {line!r}")
        else:
            try:
                boxes.append(BoundingBox(*vals))
            except ValueError as e:
                raise SequenceFormatError(f"{source}:{lineno}: {e}") from None
    return boxes


def read_boxes(path) -> list[MaybeBox]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"box file not found: {path}")
    return parse_boxes(path.read_text(), str(path))


def write_boxes(path, boxes: Sequence[MaybeBox], precision=3):
    atomic_write_text(path, "".join(format_box_line(i, b, precision) + "\n" for i, b in enumerate(boxes)))


def _indexed_pngs(folder: Path) -> list[Path]:
    if not folder.is_dir():
        raise SequenceFormatError(f"missing directory {folder}")
    files = sorted(p for p in folder.iterdir() if p.suffix == ".png")
    for i, p in enumerate(files):
        m = _NAME.match(p.name)
        if not m or int(m.group(1)) != i:
            raise SequenceFormatError(f"{p}: expected file name {i:08d}.png (indices must be contiguous from 0)")
    return files


def read_rgb(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise SequenceFormatError(f"{path}: cannot decode image")
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise SequenceFormatError(f"{path}: expected 8-bit 3-channel image, got {img.dtype} {img.shape}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def read_depth(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise SequenceFormatError(f"{path}: cannot decode image")
    if img.dtype != np.uint16 or img.ndim != 2:
        raise SequenceFormatError(f"{path}: expected 16-bit single-channel depth, got {img.dtype} {img.shape}")
    return img


def encode_png(img: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", img)
    if not ok:
        raise OSError("PNG encoding failed")
    return buf.tobytes()


def write_frame(root, frame: Frame):
    root = Path(root)
    atomic_write_bytes(root / "rgb" / f"{frame.index:08d}.png",
                       encode_png(cv2.cvtColor(np.ascontiguousarray(frame.rgb), cv2.COLOR_RGB2BGR)))
    atomic_write_bytes(root / "depth" / f"{frame.index:08d}.png", encode_png(np.ascontiguousarray(frame.depth)))


def write_sequence(root, frames: Sequence[Frame], gt: Sequence[MaybeBox]):
    if len(frames) != len(gt):
        raise ValueError("frame and ground-truth counts differ")
    for f in frames:
        write_frame(root, f)
    write_boxes(Path(root) / "groundtruth.txt", gt, precision=2)


def load_groundtruth(root) -> list[MaybeBox]:
    return read_boxes(Path(root) / "groundtruth.txt")


def load_sequence(root) -> tuple[list[Frame], list[MaybeBox]]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {root}")
    rgb_files = _indexed_pngs(root / "rgb")
    depth_files = _indexed_pngs(root / "depth")
    if len(rgb_files) != len(depth_files):
        raise SequenceFormatError(f"{root}: rgb/ has {len(rgb_files)} frames but depth/ has {len(depth_files)}")
    gt = load_groundtruth(root)
    if len(gt) != len(rgb_files):
        raise SequenceFormatError(f"{root / 'groundtruth.txt'}: {len(gt)} lines for {len(rgb_files)} frames")
    frames = []
    for i, (rp, dp) in enumerate(zip(rgb_files, depth_files)):
        rgb, depth = read_rgb(rp), read_depth(dp)
        if rgb.shape[:2] != depth.shape:
            raise SequenceFormatError(f"{dp}: depth size {depth.shape} differs from rgb {rgb.shape[:2]}")
        frames.append(Frame(rgb, depth, i))
    return frames, gt
