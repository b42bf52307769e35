import json

import numpy as np
import pytest

from pds import main as cli
from pds.core.exceptions import DivergenceError
from pds.core.pipeline import SampleBatch, SamplingPipeline
from pds.services.storage import load_mask, load_tensor
from pds.services.verification import CheckResult


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'exp.json'
    path.write_text(json.dumps({
        'target': {'shape': [1, 4, 4], 'covariance': 'frequency', 'condition_number': 10},
        'schedule': {'T': 10, 'sigma_min': 0.01, 'sigma_max': 5.0},
    }), encoding='utf-8')
    return path


def test_fit_alpha_reference(capsys):
    assert cli.main(['fit-alpha', '--reference', 'celeba64', '--variant', 'both_masks', '--predict-T', '200', '5000']) == 0
    out = capsys.readouterr().out
    assert 'both_masks' in out
    assert 'extrapolated' in out


def test_fit_alpha_from_file(tmp_path, capsys):
    path = tmp_path / 'obs.txt'
    path.write_text("100 5\n200 12\n400 25\n", encoding='utf-8')
    assert cli.main(['fit-alpha', str(path)]) == 0
    assert 'r_squared' in capsys.readouterr().out


def test_fit_alpha_bad_file_is_usage_error(tmp_path):
    path = tmp_path / 'obs.txt'
    path.write_text("100\n", encoding='utf-8')
    assert cli.main(['fit-alpha', str(path)]) == 2


def test_build_masks_synthetic(tmp_path, capsys):
    out = tmp_path / 'masks'
    code = cli.main([
        'build-masks', '--synthetic', '--shape', '1', '8', '8', '--subsample', '10', '--alpha', '4', '--out', str(out),
    ])
    assert code == 0
    assert load_mask(out / 'frequency.pdsm').alpha == 4.0
    assert load_mask(out / 'pixel.pdsm').shape == (1, 8, 8)
    assert 'entropy' in capsys.readouterr().out


def test_build_masks_alpha_from_fit(tmp_path):
    obs = tmp_path / 'obs.txt'
    obs.write_text("1000 50\n400 25\n200 12\n100 5\n50 1.8\n", encoding='utf-8')
    out = tmp_path / 'masks'
    code = cli.main([
        'build-masks', '--synthetic', '--shape', '1', '4', '4', '--subsample', '5', '--alpha-fit', str(obs),
        '--T', '200', '--variant', 'freq_only', '--kind', 'frequency', '--out', str(out),
    ])
    assert code == 0
    assert load_mask(out / 'frequency.pdsm').alpha > 1.0
    assert not (out / 'pixel.pdsm').exists()


def test_build_masks_needs_a_source(tmp_path):
    assert cli.main(['build-masks', '--out', str(tmp_path)]) == 2
    assert cli.main(['build-masks', '--dataset', str(tmp_path / 'missing'), '--out', str(tmp_path)]) == 2


def test_sample_writes_outputs(tmp_path, small_config):
    out = tmp_path / 'run'
    code = cli.main(['sample', '--config', str(small_config), '--chains', '3', '--out', str(out), '--pgm', '--seed', '5'])
    assert code == 0
    assert load_tensor(out / 'sample_00002.pdst').shape == (1, 4, 4)
    assert (out / 'sample_00000_c0.pgm').exists()
    report = json.loads((out / 'report.json').read_text(encoding='utf-8'))
    assert report['divergences'] == []
    assert report['moments']['n_samples'] == 3
    assert 'energy_to_exact' in report['distances']
    assert 'v_coo=' in (out / 'report.txt').read_text(encoding='utf-8')


def test_sample_is_reproducible(tmp_path, small_config):
    for name in ('a', 'b'):
        cli.main(['sample', '--config', str(small_config), '--chains', '2', '--out', str(tmp_path / name)])
    np.testing.assert_array_equal(
        load_tensor(tmp_path / 'a' / 'sample_00001.pdst'), load_tensor(tmp_path / 'b' / 'sample_00001.pdst')
    )


def test_sample_divergence_exit_code(tmp_path, small_config, mocker):
    batch = SampleBatch(np.full((2, 1, 4, 4), np.nan), [DivergenceError(3, 0, 'corrector'), DivergenceError(3, 1, 'corrector')])
    mocker.patch.object(SamplingPipeline, 'run', return_value=batch)
    out = tmp_path / 'run'
    assert cli.main(['sample', '--config', str(small_config), '--chains', '2', '--out', str(out)]) == 3
    report = json.loads((out / 'report.json').read_text(encoding='utf-8'))
    assert len(report['divergences']) == 2
    assert not list(out.glob('*.pdst'))


def test_sample_invalid_flags():
    assert cli.main(['sample', '--gradient-order', 'sideways']) == 2
    assert cli.main(['sample', '--T', '-3']) == 2


def test_verify_passes_fast_suite(capsys):
    assert cli.main(['verify', '--suite', 'adjoint']) == 0
    assert 'PASS adjoint.inner_product_identity' in capsys.readouterr().out


def test_verify_failure_exit_code(mocker):
    mocker.patch.object(cli, 'run_suite', return_value=[CheckResult('skew', 'shift(1,1)', 1.0, 1e-10, False)])
    assert cli.main(['verify', '--suite', 'skew']) == 4


def test_bench(capsys):
    assert cli.main(['bench', '--shape', '1', '8', '8', '--iterations', '2', '--latency', '0']) == 0
    out = capsys.readouterr().out
    assert 'preconditioned' in out


def test_unknown_command_is_usage_error():
    assert cli.main(['launch']) == 2
