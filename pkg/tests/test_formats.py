import json

import numpy as np
import pytest

from frg.formats import (
    FormatError,
    LabelOverflowError,
    decode_frgr,
    encode_frgr,
    load_annotations,
    load_frgr,
    load_guide_png,
    load_image,
    load_label_png,
    save_annotations,
    save_frgr,
    save_guide_png,
    save_label_png,
    save_rgb_png,
)
from frg.raster import AnnotationSet, Contour, Instance


def test_empty_annotations(tmp_path):
    p = tmp_path / "a.json"
    save_annotations(p, AnnotationSet(12, 34, []))
    assert json.loads(p.read_text()) == {"height": 12, "width": 34, "instances": []}
    a = load_annotations(p)
    assert (a.height, a.width, a.instances) == (12, 34, [])


def test_annotations_round_trip(tmp_path, rng):
    insts = []
    for k in (3, 1, 8):
        pts = rng.uniform(0, 20, (int(rng.integers(3, 9)), 2))
        insts.append(Instance(k, Contour(pts)))
    a = AnnotationSet(20, 20, insts)
    p = tmp_path / "a.json"
    save_annotations(p, a)
    b = load_annotations(p)
    assert b.ids == [3, 1, 8]
    for x, y in zip(a.instances, b.instances):
        assert x.contour.vertices.tobytes() == y.contour.vertices.tobytes()


def test_malformed_annotations(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"height": 3, "width": ')
    with pytest.raises(FormatError) as exc:
        load_annotations(p)
    assert exc.value.offset is not None
    p.write_text('{"height": 3}')
    with pytest.raises(FormatError):
        load_annotations(p)


def test_label_png_round_trip(tmp_path, rng):
    lm = rng.integers(0, 51, (40, 30))
    lm[0, 0], lm[0, 1] = 50, 0
    p = tmp_path / "l.png"
    save_label_png(p, lm)
    np.testing.assert_array_equal(load_label_png(p), lm)
    big = np.array([[0, 65535], [1, 300]])
    save_label_png(p, big)
    np.testing.assert_array_equal(load_label_png(p), big)


def test_label_overflow(tmp_path):
    with pytest.raises(LabelOverflowError):
        save_label_png(tmp_path / "x.png", np.array([[65536]]))


def test_guide_png_quantization(tmp_path, rng):
    g = rng.random((9, 11))
    p = tmp_path / "g.png"
    save_guide_png(p, g)
    back = load_guide_png(p)
    np.testing.assert_array_equal(back, np.round(g * 65535) / 65535)
    assert np.abs(back - g).max() <= 0.5 / 65535 + 1e-15


def test_frgr_round_trip(tmp_path, rng):
    r = rng.normal(size=(13, 7)).astype(np.float32).astype(np.float64)
    p = tmp_path / "r.frgr"
    save_frgr(p, r)
    back = load_frgr(p)
    assert back.tobytes() == r.tobytes()
    raw = p.read_bytes()
    assert raw[:4] == b"FRGR" and len(raw) == 12 + 4 * 13 * 7
    assert int.from_bytes(raw[4:8], "little") == 13 and int.from_bytes(raw[8:12], "little") == 7
    assert encode_frgr(back) == raw


def test_frgr_errors():
    good = encode_frgr(np.ones((2, 3)))
    with pytest.raises(FormatError) as exc:
        decode_frgr(b"XXXX" + good[4:])
    assert exc.value.offset == 0
    with pytest.raises(FormatError) as exc:
        decode_frgr(good[:10])
    assert exc.value.offset == 10
    with pytest.raises(FormatError) as exc:
        decode_frgr(good[:-1])
    assert "byte offset" in str(exc.value)
    with pytest.raises(FormatError):
        decode_frgr(b"FRGR" + (0).to_bytes(4, "little") + (3).to_bytes(4, "little"))


def test_rgb_png_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (6, 5, 3)) / 255.0
    p = tmp_path / "i.png"
    save_rgb_png(p, img)
    np.testing.assert_array_equal(load_image(p), img)
