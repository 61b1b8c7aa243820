import logging
import os
import sys
import textwrap

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.inference import InferenceOptions
from utils.config import ConfigManager, load_yaml


def test_defaults_when_no_file(tmp_path):
    """
    Tests that ConfigManager returns all default values when the config
    file does not exist.
    """
    config_dir = tmp_path / "non_existent_config"
    manager = ConfigManager(config_dir=str(config_dir))

    inference = manager.inference
    assert inference['max_outer_iterations'] == 500
    assert inference['objective_tolerance'] == 1e-8
    assert inference['kkt_tolerance'] == 1e-7
    assert inference['thresholds'] == [0.01, 0.05, 0.1]
    assert inference['solver'] == 'block'

    experiment = manager.experiment
    assert experiment['vertex_counts'] == [10, 30, 50]
    assert experiment['trials'] == 20
    assert experiment['samples'] == 50000
    assert experiment['d_range'] == [0.2, 1.0]

    assert manager.logging['level'] == 'INFO'
    assert manager.runtime['threads'] is None


def test_defaults_build_valid_inference_options(tmp_path):
    manager = ConfigManager(config_dir=str(tmp_path))

    opts = InferenceOptions.from_mapping(manager.inference)

    assert opts == InferenceOptions()


def test_shipped_config_matches_defaults():
    manager = ConfigManager(config_dir=os.path.join(project_root, 'config'))

    assert manager.inference == ConfigManager.INFERENCE_DEFAULTS
    assert manager.experiment['k_margin'] == 1.5


def test_loading_full_config(tmp_path):
    """
    Tests that ConfigManager correctly loads all specified values from a
    valid config.ini file.
    """
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    config_file = config_dir / "config.ini"
    config_content = """
[inference]
max_outer_iterations = 50
objective_tolerance = 1e-6
thresholds = 0.2, 0.02
solver = joint

[experiment]
vertex_counts = 8, 12
fill_fractions = 0.5
trials = 3
d_low = 0.1
d_high = 0.4

[logging]
level = debug
file_logging = false

[runtime]
threads = 4
"""
    config_file.write_text(config_content)

    manager = ConfigManager(config_dir=str(config_dir))

    assert manager.inference['max_outer_iterations'] == 50
    assert manager.inference['objective_tolerance'] == 1e-6
    assert manager.inference['thresholds'] == [0.2, 0.02]
    assert manager.inference['solver'] == 'joint'
    assert manager.experiment['vertex_counts'] == [8, 12]
    assert manager.experiment['fill_fractions'] == [0.5]
    assert manager.experiment['trials'] == 3
    assert manager.experiment['d_range'] == [0.1, 0.4]
    assert manager.logging['level'] == 'DEBUG'
    assert manager.logging['file_logging'] is False
    assert manager.runtime['threads'] == 4


def test_partial_config_with_defaults(tmp_path):
    """
    Tests that ConfigManager uses defaults for missing keys in a section.
    """
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    (config_dir / "config.ini").write_text("""
[inference]
kkt_tolerance = 1e-9
# other keys are missing
""")

    manager = ConfigManager(config_dir=str(config_dir))

    assert manager.inference['kkt_tolerance'] == 1e-9
    assert manager.inference['max_outer_iterations'] == 500  # Default
    assert manager.experiment['samples'] == 50000  # Default


def test_invalid_values_fallback(tmp_path, caplog):
    """
    Tests that ConfigManager falls back to the default value and logs a
    warning when a key has an invalid value.
    """
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    (config_dir / "config.ini").write_text("""
[inference]
max_outer_iterations = not-a-number
thresholds = 0.1, lots
""")

    with caplog.at_level(logging.WARNING):
        manager = ConfigManager(config_dir=str(config_dir))
        inference = manager.inference

        assert inference['max_outer_iterations'] == 500
        assert inference['thresholds'] == [0.01, 0.05, 0.1]

        assert len(caplog.records) == 2
        assert "Invalid value for 'max_outer_iterations'" in caplog.text
        assert "Using default value: 500" in caplog.text
        assert "Invalid value for 'thresholds'" in caplog.text


def test_section_names_are_case_insensitive(tmp_path):
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    (config_dir / "config.ini").write_text(textwrap.dedent("""
        [Inference]
        init_scale = 0.01

        [EXPERIMENT]
        edge_probability = 0.25
    """))

    manager = ConfigManager(config_dir=str(config_dir))

    assert manager.inference['init_scale'] == 0.01
    assert manager.experiment['edge_probability'] == 0.25
    assert manager.get('inference', 'init_scale') == '0.01'


def test_load_config_drops_cached_sections(tmp_path):
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    config_file = config_dir / "config.ini"
    config_file.write_text("[inference]\nsolver = block\n")
    manager = ConfigManager(config_dir=str(config_dir))
    assert manager.inference['solver'] == 'block'

    config_file.write_text("[inference]\nsolver = joint\n")
    assert manager.inference['solver'] == 'block'
    manager.load_config()

    assert manager.inference['solver'] == 'joint'


def test_load_yaml_empty_file_returns_empty_dict(tmp_path, caplog):
    empty_yaml = tmp_path / "empty.yaml"
    empty_yaml.write_text("", encoding='utf-8')

    with caplog.at_level(logging.INFO):
        data = load_yaml(str(empty_yaml))

    assert data == {}
    assert any("empty" in record.message for record in caplog.records)


def test_load_yaml_reads_json_experiment_configs(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text('{"base_seed": 7, "vertex_counts": [10, 30]}',
                    encoding='utf-8')

    assert load_yaml(str(path)) == {'base_seed': 7, 'vertex_counts': [10, 30]}

