import shutil
from pathlib import Path

import cv2
import numpy as np
import pytest

from rgbdtrack.core import BoundingBox, Frame
from rgbdtrack.sequence import (SequenceFormatError, load_sequence, parse_boxes, read_boxes, write_boxes,
                                write_sequence)

MINI = Path(__file__).parent / "fixtures" / "mini"


def test_fixture_round_trip():
    frames, gt = load_sequence(MINI)
    assert len(frames) == len(gt) == 3
    assert gt == [BoundingBox(8 + 2 * i, 8, 16, 16) for i in range(3)]
    for i, f in enumerate(frames):
        assert f.index == i and f.shape == (40, 48)
        assert f.rgb.dtype == np.uint8 and f.depth.dtype == np.uint16


def test_write_then_load_is_lossless(tmp_path):
    frames, gt = load_sequence(MINI)
    write_sequence(tmp_path, frames, gt)
    again, gt2 = load_sequence(tmp_path)
    assert gt2 == gt
    for a, b in zip(frames, again):
        assert np.array_equal(a.rgb, b.rgb) and np.array_equal(a.depth, b.depth)


def test_nan_row_is_absent():
    boxes = parse_boxes("0,1,2,3,4\n1,NaN,NaN,NaN,NaN\n2,1,1,2,2\n")
    assert boxes[1] is None and boxes[2] == BoundingBox(1, 1, 2, 2)


@pytest.mark.parametrize("text,where", [
    ("0,1,2,3\n", ":1:"),
    ("0,1,2,3,4\n1,a,2,3,4\n", ":2:"),
    ("0,1,2,3,4\n2,1,2,3,4\n", ":2:"),
    ("0,1,NaN,3,4\n", ":1:"),
    ("0,1,2,0,4\n", ":1:"),
])
def test_malformed_lines_name_the_line(text, where):
    with pytest.raises(SequenceFormatError, match=where):
        parse_boxes(text, "gt.txt")


def test_boxes_file_round_trip(tmp_path):
    boxes = [BoundingBox(1.25, 2, 3, 4), None, BoundingBox(0, 0, 1, 1)]
    p = tmp_path / "r.txt"
    write_boxes(p, boxes)
    assert read_boxes(p) == boxes
    with pytest.raises(FileNotFoundError):
        read_boxes(tmp_path / "missing.txt")


@pytest.fixture
def mini_copy(tmp_path):
    dst = tmp_path / "seq"
    shutil.copytree(MINI, dst)
    return dst


def test_count_mismatch(mini_copy):
    (mini_copy / "depth" / "00000002.png").unlink()
    with pytest.raises(SequenceFormatError, match="rgb/ has 3 frames but depth/ has 2"):
        load_sequence(mini_copy)


def test_gt_length_mismatch(mini_copy):
    (mini_copy / "groundtruth.txt").write_text("0,8,8,16,16\n")
    with pytest.raises(SequenceFormatError, match="groundtruth.txt"):
        load_sequence(mini_copy)


def test_wrong_depth_bit_depth(mini_copy):
    p = mini_copy / "depth" / "00000001.png"
    cv2.imwrite(str(p), np.zeros((40, 48), np.uint8))
    with pytest.raises(SequenceFormatError, match="00000001.png.*16-bit"):
        load_sequence(mini_copy)


def test_gap_in_frame_names(mini_copy):
    for sub in ("rgb", "depth"):
        (mini_copy / sub / "00000001.png").rename(mini_copy / sub / "00000005.png")
    with pytest.raises(SequenceFormatError, match="contiguous"):
        load_sequence(mini_copy)


def test_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_sequence(tmp_path / "nope")


def test_write_sequence_count_check(tmp_path):
    f = Frame(np.zeros((4, 4, 3), np.uint8), np.zeros((4, 4), np.uint16), 0)
    with pytest.raises(ValueError):
        write_sequence(tmp_path, [f], [None, None])
