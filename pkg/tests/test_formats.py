import json
import struct

import numpy as np
import pytest
from PIL import Image

from salvol import (
    MAGIC,
    FormatError,
    ParseError,
    SaliencyVolume,
    ValidationError,
    decode_volume,
    dumps_distributions,
    dumps_report,
    dumps_scanpaths,
    encode_volume,
    evaluate_sets,
    export_heatmaps,
    extract_saliency_map,
    extract_weighted_map,
    fit_count_distribution,
    fit_duration_distribution,
    loads_distributions,
    loads_scanpaths,
    read_volume,
    to_grayscale,
    write_volume,
)

from tests.conftest import make_dataset, make_scanpath, random_scanpath


@pytest.fixture
def volume():
    values = np.random.default_rng(0).random((3, 4, 5))
    return SaliencyVolume(values / values.sum(axis=(1, 2), keepdims=True), dt_s=2.5)


def test_volume_header_layout(volume):
    data = encode_volume(volume)
    assert data[:8] == MAGIC == b'SALVOL1\x00'
    assert struct.unpack('<IIId', data[8:28]) == (3, 4, 5, 2.5)
    assert len(data) == 28 + 4 * 3 * 4 * 5
    assert np.array_equal(np.frombuffer(data[28:], '<f4'), volume.values.astype(np.float32).ravel())


def test_volume_round_trip(volume, tmp_path):
    path = write_volume(tmp_path / 'v.salvol', volume)
    decoded = read_volume(path)
    assert decoded.shape == volume.shape
    assert decoded.dt_s == volume.dt_s
    assert np.array_equal(decoded.values, volume.values.astype(np.float32).astype(np.float64))
    assert encode_volume(decoded) == path.read_bytes()


@pytest.mark.parametrize('corrupt', [
    lambda data: data[:20],
    lambda data: b'SALVOL2\x00' + data[8:],
    lambda data: data[:-4],
    lambda data: data + b'\x00\x00\x00\x00',
    lambda data: data[:28] + np.full(60, np.nan, '<f4').tobytes(),
], ids=[
    'truncated header',
    'wrong magic',
    'truncated values',
    'trailing bytes',
    'nan values',
])
def test_corrupt_volume(volume, corrupt):
    with pytest.raises(FormatError):
        decode_volume(corrupt(encode_volume(volume)))


def test_grayscale_scaling():
    image = to_grayscale(np.array([[0.0, 0.25], [0.5, 1.0]]))
    assert image.mode == 'L'
    assert np.asarray(image).tolist() == [[0, 64], [128, 255]]
    assert not np.asarray(to_grayscale(np.zeros((2, 2)))).any()


def test_export_slices(volume, tmp_path):
    paths = export_heatmaps(volume, 'slices', tmp_path)
    assert [p.name for p in paths] == ['slice_00.png', 'slice_01.png', 'slice_02.png']
    for path in paths:
        with Image.open(path) as image:
            assert image.mode == 'L'
            assert image.size == (5, 4)
            assert np.asarray(image).max() == 255


def test_export_map_matches_weighted(volume, tmp_path):
    (map_path,) = export_heatmaps(volume, 'map', tmp_path)
    (weighted_path,) = export_heatmaps(volume, 'weighted', tmp_path, weights=[1, 1, 1])
    assert map_path.name == 'map.png' and weighted_path.name == 'weighted.png'
    with Image.open(map_path) as a, Image.open(weighted_path) as b:
        assert np.array_equal(np.asarray(a), np.asarray(b))
    assert np.array_equal(extract_saliency_map(volume).values, extract_weighted_map(volume, [1, 1, 1]).values)


def test_export_errors(volume, tmp_path):
    with pytest.raises(ValidationError):
        export_heatmaps(volume, 'weighted', tmp_path)
    with pytest.raises(ValidationError):
        export_heatmaps(volume, 'gif', tmp_path)


def test_scanpaths_json_round_trip():
    rng = np.random.default_rng(1)
    scanpaths = [random_scanpath(rng, (200, 100), n, observer_id=f'o{n}') for n in (1, 4, 9)]
    assert loads_scanpaths(dumps_scanpaths(scanpaths)) == scanpaths


def test_single_scanpath_object():
    sp = make_scanpath([(1, 2), (3, 4)])
    data = json.loads(dumps_scanpaths([sp]))[0]
    assert loads_scanpaths(json.dumps(data)) == [sp]


@pytest.mark.parametrize(['text', 'error'], [
    ('[{"image_id": "img", "observer_id": "o"}]', ParseError),
    ('[{"image_id": "img", "observer_id": "o", "fixations": [{"x_px": 1}]}]', ParseError),
    ('[{"image_id": "img", "observer_id": "o", "fixations": []}]', ValidationError),
    ('"scanpaths"', ParseError),
    ('[', ParseError),
], ids=[
    'missing fixations',
    'missing fixation keys',
    'empty scanpath',
    'not an array',
    'invalid json',
])
def test_invalid_scanpaths_json(text, error):
    with pytest.raises(error):
        loads_scanpaths(text)


def test_distributions_json_round_trip():
    ds = make_dataset([make_scanpath([(1, 1)] * n, observer_id=str(n)) for n in (2, 3, 3)])
    count_dist, dur_dist = fit_count_distribution(ds), fit_duration_distribution(ds)
    assert loads_distributions(dumps_distributions(count_dist, dur_dist)) == (count_dist, dur_dist)
    with pytest.raises(ParseError):
        loads_distributions('{"count": {}}')


def test_report():
    a = make_scanpath([(10, 50), (20, 50)], observer_id='a')
    b = make_scanpath([(150, 50), (160, 50)], observer_id='b')
    result = evaluate_sets([b, a], [a, b], (200, 100))
    report = json.loads(dumps_report(result))
    assert report['matrix_shape'] == [2, 2]
    assert [pair[:2] for pair in report['pairs']] == [[0, 1], [1, 0]]
    assert report['mean_cost'] == pytest.approx(0.0, abs=1e-9)
