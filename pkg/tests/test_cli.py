import json

import numpy as np
import pytest

from salvol import (
    VolumeSettings,
    build_saliency_volume,
    configure_logging,
    loads_distributions,
    loads_scanpaths,
    parse_fixations,
    read_volume,
    resolve_config,
    serialize_fixations,
)
from salvol.cli import main

from tests.conftest import make_dataset, random_scanpath


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    configure_logging()


@pytest.fixture
def fixations_csv(tmp_path):
    rng = np.random.default_rng(0)
    scanpaths = [
        random_scanpath(rng, (6000, 3000), rng.integers(3, 9), observer_id=f'obs-{k}', image_id='img')
        for k in range(6)
    ]
    path = tmp_path / 'fixations.csv'
    path.write_bytes(serialize_fixations(make_dataset(scanpaths, (6000, 3000))))
    return path


@pytest.fixture
def volume_file(tmp_path, fixations_csv):
    path = tmp_path / 'img.salvol'
    args = ['build-volume', str(fixations_csv), '--image-id', 'img', '--out', str(path)]
    assert main([*args, '--dims', '12,30,60', '--bandwidths', '2,2,2']) == 0
    return path


def test_build_volume_defaults(tmp_path, fixations_csv, capsys):
    outputs = []
    for name in ('a.salvol', 'b.salvol'):
        assert main(['build-volume', str(fixations_csv), '--image-id', 'img', '--out', str(tmp_path / name)]) == 0
        outputs.append((tmp_path / name).read_bytes())
    out, err = capsys.readouterr()
    assert 'T=12 H=300 W=600' in out
    assert 'normalized=True' in out
    assert 'build-volume config' in err
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) == 28 + 4 * 12 * 300 * 600
    assert read_volume(tmp_path / 'a.salvol').shape == (12, 300, 600)


def test_build_volume_derived_time_axis(tmp_path, fixations_csv, capsys):
    out_path = tmp_path / 'v.salvol'
    args = ['build-volume', str(fixations_csv), '--image-id', 'img', '--out', str(out_path), '--dims', '0,10,20']
    assert main([*args, '--dt', '0.5']) == 0
    dataset = parse_fixations(fixations_csv.read_bytes())
    last = max(f.start_s for sp in dataset.scanpaths() for f in sp)
    assert read_volume(out_path).t_bins == int(last // 0.5) + 1


def test_sample(tmp_path, fixations_csv, volume_file, capsys):
    capsys.readouterr()
    args = ['sample', str(volume_file), '--fixations', str(fixations_csv), '--strategy', 'inhibition-of-return']
    assert main([*args, '--seed', '7']) == 0
    first = capsys.readouterr().out
    assert main([*args, '--seed', '7']) == 0
    assert capsys.readouterr().out == first
    scanpaths = loads_scanpaths(first)
    assert len(scanpaths) == 40
    assert {sp.image_id for sp in scanpaths} == {'img'}
    assert all(0 <= f.x_px < 6000 and 0 <= f.y_px < 3000 for sp in scanpaths for f in sp)
    assert main([*args, '--seed', '8']) == 0
    assert capsys.readouterr().out != first


def test_sample_with_distribution_file(tmp_path, fixations_csv, volume_file, capsys):
    dists = tmp_path / 'dists.json'
    assert main(['fit-dists', str(fixations_csv), '--bin-width', '0.05', '--out', str(dists)]) == 0
    count_dist, dur_dist = loads_distributions(dists.read_text())
    assert dur_dist.bin_width_s == 0.05
    out = tmp_path / 'generated.json'
    assert main(['sample', str(volume_file), '--dists', str(dists), '--n', '5', '--out', str(out)]) == 0
    scanpaths = loads_scanpaths(out.read_text())
    assert len(scanpaths) == 5
    assert all(len(sp) in count_dist.values for sp in scanpaths)
    assert all(f.duration_s in dur_dist.values for sp in scanpaths for f in sp)


def test_sample_needs_laws(volume_file, capsys):
    assert main(['sample', str(volume_file)]) == 1
    assert '--fixations or --dists' in capsys.readouterr().err


def test_evaluate(tmp_path, fixations_csv, volume_file, capsys):
    generated = tmp_path / 'generated.json'
    assert main(['sample', str(volume_file), '--fixations', str(fixations_csv), '--out', str(generated)]) == 0
    report_path = tmp_path / 'self.json'
    assert main(['evaluate', str(generated), '--truth', str(generated), '--out', str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report['mean_cost'] <= 1e-9
    assert report['matrix_shape'] == [40, 40]
    assert len(report['pairs']) == 40
    capsys.readouterr()
    assert main(['evaluate', str(generated), '--truth', str(fixations_csv)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['matrix_shape'] == [40, 6]
    assert len(report['pairs']) == 6
    assert 0 < report['mean_cost'] <= np.pi


def test_export(tmp_path, volume_file, capsys):
    assert main(['export', str(volume_file), '--mode', 'slices', '--out-dir', str(tmp_path / 'slices')]) == 0
    assert len(list((tmp_path / 'slices').glob('slice_*.png'))) == 12
    assert main(['export', str(volume_file), '--out-dir', str(tmp_path / 'map')]) == 0
    assert [p.name for p in (tmp_path / 'map').iterdir()] == ['map.png']
    weights = ','.join(['1'] * 12)
    assert main(['export', str(volume_file), '--mode', 'weighted', '--weights', weights, '--out-dir', str(tmp_path)]) == 0
    assert (tmp_path / 'weighted.png').exists()
    assert main(['export', str(volume_file), '--mode', 'weighted', '--out-dir', str(tmp_path)]) == 1
    assert main(['export', str(volume_file), '--mode', 'weighted', '--weights', '1,2', '--out-dir', str(tmp_path)]) == 1


def test_fit_dists(fixations_csv, capsys):
    assert main(['fit-dists', str(fixations_csv)]) == 0
    count_dist, dur_dist = loads_distributions(capsys.readouterr().out)
    assert count_dist.kind == 'discrete-count'
    assert dur_dist.bin_width_s == 0.1


def test_synth(tmp_path, capsys):
    path = tmp_path / 'synth.csv'
    assert main(['synth', '--out', str(path), '--images', '2', '--observers', '4']) == 0
    dataset = parse_fixations(path.read_bytes(), image_dims={'synth-00': (1200, 600), 'synth-01': (1200, 600)})
    assert dataset.image_ids == ['synth-00', 'synth-01']
    assert dataset.num_scanpaths == 8


def test_compare(tmp_path, capsys):
    path = tmp_path / 'synth.csv'
    assert main(['synth', '--out', str(path), '--images', '1', '--observers', '5']) == 0
    capsys.readouterr()
    args = ['compare', str(path), '--image-dims', '1200,600', '--dims', '6,30,60', '--bandwidths', '2,1,1']
    assert main([*args, '--n', '5', '--seeds', '1,2', '--rows', 'random,naive,gt-scanpaths']) == 0
    scores = json.loads(capsys.readouterr().out)
    assert list(scores) == ['random', 'naive', 'gt-scanpaths']
    assert scores['gt-scanpaths'] <= 1e-9
    assert scores['random'] > 0


def test_config_file(tmp_path, volume_file, fixations_csv, capsys):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'sampling': {'num_scanpaths': 3, 'strategy': 'distance-limited'}}))
    assert main(['--config', str(config), 'sample', str(volume_file), '--fixations', str(fixations_csv)]) == 0
    scanpaths = loads_scanpaths(capsys.readouterr().out)
    assert [sp.observer_id for sp in scanpaths] == ['distance-limited-000', 'distance-limited-001', 'distance-limited-002']


@pytest.mark.parametrize('argv', [
    ['sample', 'v.salvol', '--strategy', 'saccadic'],
    ['build-volume', 'f.csv', '--image-id', 'img', '--out', 'v.salvol', '--dims', '1,2'],
    ['export', 'v.salvol', '--mode', 'gif', '--out-dir', '.'],
    ['evaluate', 'g.json'],
    [],
], ids=[
    'unknown strategy',
    'two dims',
    'unknown export mode',
    'missing truth',
    'no command',
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_runtime_errors(tmp_path, capsys):
    assert main(['fit-dists', str(tmp_path / 'missing.csv')]) == 1
    bad = tmp_path / 'bad.csv'
    bad.write_text('image_id,observer_id,x_px,y_px,start_s,duration_s\nimg,obs,1,2,zero,0.5\n')
    assert main(['fit-dists', str(bad)]) == 1
    assert 'line 2' in capsys.readouterr().err
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'sampling': {'num_scanpaths': 0}}))
    assert main(['--config', str(config), 'fit-dists', str(bad)]) == 1


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(['--version'])
    assert exc.value.code == 0
    assert 'salvol' in capsys.readouterr().out


def _json_records(err):
    return [json.loads(line) for line in err.splitlines() if line.startswith('{')]


def test_reloaded_volume_matches_built(tmp_path, fixations_csv, volume_file):
    record = parse_fixations(fixations_csv.read_bytes()).image('img')
    settings = VolumeSettings.from_config(resolve_config({'volume': {'dims': [12, 30, 60], 'bandwidths': [2, 2, 2]}}))
    built = build_saliency_volume(
        record.scanpaths, (12, 30, 60), settings.dt_s, settings.bandwidths, settings.wrap_width, record.dims
    )
    reloaded = read_volume(volume_file)
    assert reloaded == built
    assert np.array_equal(reloaded.values, built.values)


def test_error_fields_in_json_logs(tmp_path, capsys):
    bad = tmp_path / 'bad.csv'
    bad.write_text('image_id,observer_id,x_px,y_px,start_s,duration_s\nimg,obs,1,2,0.0,0.5\nimg,obs,x,2,1.0,0.5\n')
    assert main(['--log-format', 'json', 'fit-dists', str(bad)]) == 1
    errors = [record for record in _json_records(capsys.readouterr().err) if 'exc_info' in record]
    assert len(errors) == 1
    assert errors[0]['exc_info']['type'] == 'ParseError'
    assert errors[0]['exc_info']['data']['line'] == 3
    assert 'x_px' in errors[0]['exc_info']['data']['reason']


def test_config_echo_has_run_arguments(tmp_path, capsys):
    path = tmp_path / 'synth.csv'
    assert main(['--log-format', 'json', 'synth', '--out', str(path), '--seed', '5', '--images', '1', '--observers', '2']) == 0
    messages = [record['message'] for record in _json_records(capsys.readouterr().err)]
    echo = json.loads(next(m for m in messages if m.startswith('synth config ')).split(' config ', 1)[1])
    assert echo['args']['out'] == str(path)
    assert (echo['args']['seed'], echo['args']['images'], echo['args']['observers']) == (5, 1, 2)
    assert echo['config']['sampling']['strategy'] == 'naive'


def test_config_echo_has_compare_selection(tmp_path, capsys):
    path = tmp_path / 'synth.csv'
    assert main(['synth', '--out', str(path), '--images', '1', '--observers', '3']) == 0
    capsys.readouterr()
    args = ['--log-format', 'json', 'compare', str(path), '--image-dims', '1200,600', '--dims', '4,15,30']
    assert main([*args, '--n', '3', '--seeds', '1,2', '--rows', 'random,gt-scanpaths']) == 0
    messages = [record['message'] for record in _json_records(capsys.readouterr().err)]
    echo = json.loads(next(m for m in messages if m.startswith('compare config ')).split(' config ', 1)[1])
    assert echo['args']['seeds'] == [1, 2]
    assert echo['args']['rows'] == ['random', 'gt-scanpaths']
    assert echo['args']['fixations'] == str(path)
    assert echo['config']['volume']['dims'] == [4, 15, 30]
