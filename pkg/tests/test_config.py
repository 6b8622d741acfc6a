import logging
from logging.handlers import RotatingFileHandler

import pytest

from mmp_config import RunConfig, normalize_key, parse_float_list, parse_int_list, setup_logging
from mmp_errors import UsageError

DEFAULTS = {'max_core': 50, 'ks': [1, 10], 'threads': 1, 'seed': 0}
CONVERTERS = {'max_core': int, 'ks': parse_int_list, 'threads': int, 'seed': int}


def resolve(flags=None, config_file=None):
    return RunConfig.resolve('eval', flags or {}, DEFAULTS, CONVERTERS, config_file)


def test_normalize_key():
    assert normalize_key('--max-core') == 'max_core'
    assert normalize_key(' max_core ') == 'max_core'


def test_defaults_and_flags():
    config = resolve({'max_core': 30, 'ks': None})
    assert config['max_core'] == 30
    assert config['ks'] == [1, 10]
    assert config.sources['max_core'] == 'flag'
    assert config.sources['ks'] == 'default'


def test_config_file_layer(tmp_path):
    path = tmp_path / 'run.conf'
    path.write_text('# bounds\nmax-core=40\nks=1,5\n', encoding='utf-8')
    config = resolve(config_file=str(path))
    assert (config['max_core'], config['ks']) == (40, [1, 5])
    assert config.sources['ks'] == 'file'
    assert resolve({'max_core': 20}, str(path))['max_core'] == 20


def test_environment_layer():
    config = resolve()
    assert config.sources['threads'] == 'env'
    assert config.sources['seed'] == 'env'


@pytest.mark.parametrize('text', ['bogus=1\n', 'max_core=many\n'])
def test_bad_config_files(tmp_path, text):
    path = tmp_path / 'run.conf'
    path.write_text(text, encoding='utf-8')
    with pytest.raises(UsageError):
        resolve(config_file=str(path))


def test_missing_config_file(tmp_path):
    with pytest.raises(UsageError):
        resolve(config_file=str(tmp_path / 'missing.conf'))


def test_provenance_lines_leave_out_runtime_keys():
    lines = resolve({'threads': 8, 'max_core': 30}).provenance_lines()
    assert lines[0] == '# command=eval'
    assert '# ks=1,10' in lines
    assert '# max_core=30' in lines
    assert not any(line.startswith('# threads') for line in lines)
    assert lines[1:] == sorted(lines[1:])


def test_list_parsers():
    assert parse_int_list('1,10, 20') == [1, 10, 20]
    assert parse_float_list('0.8,0.1,0.1') == [0.8, 0.1, 0.1]
    with pytest.raises(ValueError):
        parse_int_list('1,x')
    with pytest.raises(ValueError):
        parse_float_list('')


def test_setup_logging_with_file(tmp_path):
    log_file = tmp_path / 'logs' / 'mol2trans.log'
    try:
        setup_logging('DEBUG', str(log_file))
        handlers = [h for h in logging.getLogger().handlers if isinstance(h, RotatingFileHandler)]
        assert len(handlers) == 1
        assert handlers[0].maxBytes == 10240000 and handlers[0].backupCount == 10
        logging.getLogger('mol2trans').debug('written to file')
        handlers[0].flush()
        assert 'DEBUG: written to file' in log_file.read_text(encoding='utf-8')
    finally:
        setup_logging('INFO')
    assert not any(isinstance(h, RotatingFileHandler) for h in logging.getLogger().handlers)


def test_unknown_log_level():
    with pytest.raises(UsageError):
        setup_logging('CHATTY')
