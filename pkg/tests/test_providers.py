import numpy as np
import pytest

from salvol import (
    CenterBiasProvider,
    ConfigError,
    FileProvider,
    GroundTruthProvider,
    GaussianBandwidths,
    SaliencyMapProvider,
    SaliencyVolume,
    UniformProvider,
    ValidationError,
    VolumeProvider,
    VolumeSettings,
    add_provider_type,
    build_saliency_volume,
    create_provider,
    extract_saliency_map,
    write_volume,
)

from tests.conftest import make_dataset, make_scanpath

SETTINGS = VolumeSettings(4, 10, 20, bandwidths=GaussianBandwidths(1.0, 2.0, 2.0))


@pytest.fixture
def dataset():
    return make_dataset([
        make_scanpath([(20, 50), (60, 40), (100, 50)], observer_id='a', duration_s=2.0),
        make_scanpath([(150, 50), (30, 60)], observer_id='b', duration_s=3.0),
    ])


@pytest.mark.parametrize(['params', 'typ'], [
    ({}, GroundTruthProvider),
    ({'class': 'SaliencyMapProvider'}, SaliencyMapProvider),
    ({'class': 'UniformProvider', 'settings': SETTINGS}, UniformProvider),
    ({'class': 'CenterBiasProvider', 'sigma_w_frac': 0.5}, CenterBiasProvider),
    ({'class': 'FileProvider', 'directory': '/tmp'}, FileProvider),
], ids=[
    'default',
    'map',
    'uniform',
    'center bias',
    'file',
])
def test_create_provider(params, typ):
    assert type(create_provider(params)) is typ


@pytest.mark.parametrize('params', [
    {'class': 'LearnedProvider'},
    {'class': 'UniformProvider', 'sigma': 1},
], ids=['unknown class', 'unknown parameter'])
def test_create_provider_errors(params):
    with pytest.raises(ConfigError):
        create_provider(params)


def test_custom_provider():
    @add_provider_type
    class ConstantProvider(VolumeProvider):
        def volume_for(self, image_id, dataset=None, /):
            return SaliencyVolume(np.ones((1, 1, 1)))

    provider = create_provider({'class': 'ConstantProvider'})
    assert provider.volume_for('img').values.tolist() == [[[1.0]]]
    assert str(provider) == '<ConstantProvider>'


def test_ground_truth_provider(dataset):
    provider = GroundTruthProvider(SETTINGS)
    volume = provider.volume_for('img', dataset)
    expected = build_saliency_volume(
        dataset.images['img'].scanpaths, (4, 10, 20), bw=GaussianBandwidths(1.0, 2.0, 2.0), image_dims=(200, 100)
    )
    assert volume == expected
    assert provider.volume_for('img') is volume


def test_ground_truth_provider_errors(dataset):
    with pytest.raises(ValidationError):
        GroundTruthProvider(SETTINGS).volume_for('img')
    with pytest.raises(ValidationError):
        GroundTruthProvider(SETTINGS).volume_for('missing', dataset)


def test_saliency_map_provider(dataset):
    volume = SaliencyMapProvider(SETTINGS).volume_for('img', dataset)
    saliency_map = extract_saliency_map(GroundTruthProvider(SETTINGS).volume_for('img', dataset)).values
    assert volume.shape == (4, 10, 20)
    for t in range(volume.t_bins):
        assert np.array_equal(volume.values[t], saliency_map)


def test_uniform_provider():
    volume = UniformProvider(SETTINGS).volume_for('any')
    assert volume.shape == (4, 10, 20)
    assert np.all(volume.values == 1 / 200)


def test_center_bias_provider():
    volume = CenterBiasProvider(SETTINGS).volume_for('any')
    assert np.abs(volume.slice_sums() - 1).max() <= 1e-9
    peak = np.unravel_index(volume.values[0].argmax(), (10, 20))
    assert peak in {(4, 9), (4, 10), (5, 9), (5, 10)}
    assert np.array_equal(volume.values[0], volume.values[-1])
    with pytest.raises(ConfigError):
        CenterBiasProvider(SETTINGS, sigma_h_frac=0.0)


def test_file_provider(tmp_path):
    values = np.zeros((2, 3, 4))
    values[:, 1, 2] = 1.0
    write_volume(tmp_path / 'img.salvol', SaliencyVolume(values, dt_s=1.5))
    volume = FileProvider(tmp_path).volume_for('img')
    assert volume == SaliencyVolume(values, dt_s=1.5)
    with pytest.raises(OSError):
        FileProvider(tmp_path).volume_for('missing')
