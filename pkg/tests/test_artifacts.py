import json
import os
import sys

import numpy as np
import pytest

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.errors import ArtifactFormatError
from core.sgm_model import SampleMatrix, SgmParams
from core.simplicial_complex import build_complex
from utils.artifacts import (TOOL_VERSION, load_complex, load_params,
                             load_result, load_samples_csv, read_json,
                             read_rows_csv, save_complex, save_params,
                             save_samples_csv, write_json)


@pytest.fixture
def complex_():
    return build_complex(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)],
                         [(0, 1, 2), (0, 2, 3)])


def test_complex_file_carries_flags_and_provenance(tmp_path, complex_):
    path = str(tmp_path / "c.json")

    save_complex(path, complex_, [True, False], {'seed': 7})

    with open(path, encoding='utf-8') as f:
        document = json.load(f)
    assert document['n_vertices'] == 4
    assert document['triangles'] == [[0, 1, 2], [0, 2, 3]]
    assert document['triangle_flags'] == [True, False]
    assert document['provenance'] == {
        'tool': 'sgm-toolkit',
        'version': TOOL_VERSION,
        'config': {'seed': 7},
    }

    loaded, flags = load_complex(path)
    assert loaded == complex_
    assert flags.tolist() == [True, False]


def test_flags_follow_triangles_listed_out_of_order(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({
        'n_vertices': 4,
        'edges': [[0, 1], [1, 2], [2, 3], [0, 3], [0, 2]],
        'triangles': [[3, 2, 0], [0, 1, 2]],
        'triangle_flags': [True, False],
    }))

    loaded, flags = load_complex(str(path))

    assert loaded.triangles == ((0, 1, 2), (0, 2, 3))
    assert flags.tolist() == [False, True]


def test_complex_without_flags(tmp_path, complex_):
    path = str(tmp_path / "c.json")
    save_complex(path, complex_)

    _, flags = load_complex(path)

    assert flags is None


@pytest.mark.parametrize(
    "payload",
    [
        {'edges': [[0, 1]]},
        {'n_vertices': 2, 'edges': [[0, 5]]},
        {'n_vertices': 3, 'edges': [[0, 1]], 'triangles': [[0, 1, 2]]},
        {'n_vertices': 3, 'edges': [[0, 1], [0, 2], [1, 2]],
         'triangles': [[0, 1, 2]], 'triangle_flags': [True, False]},
    ],
)
def test_malformed_complex_files(tmp_path, payload):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(payload))

    with pytest.raises(ArtifactFormatError):
        load_complex(str(path))


def test_invalid_json_is_reported(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")

    with pytest.raises(ArtifactFormatError) as info:
        read_json(str(path))
    assert info.value.path == str(path)


def test_params_file(tmp_path):
    params = SgmParams([0.5, 0.25], [0.0], 3.0)
    path = str(tmp_path / "p.json")

    save_params(path, params)

    document = read_json(path)
    assert document['k'] == 3.0
    assert document['d_V'] == [0.5, 0.25]
    assert document['d_T'] == [0.0]
    restored = load_params(path)
    np.testing.assert_array_equal(restored.d_v, params.d_v)


def test_params_file_missing_key(tmp_path):
    path = str(tmp_path / "p.json")
    write_json(path, {'k': 1.0, 'd_V': [1.0]})

    with pytest.raises(ArtifactFormatError):
        load_params(path)


def test_result_file_requires_estimates(tmp_path):
    path = str(tmp_path / "r.json")
    write_json(path, {'k_hat': 1.0, 'd_V_hat': [0.1]})

    with pytest.raises(ArtifactFormatError):
        load_result(path)


def test_samples_csv_preserves_values(tmp_path):
    values = np.array([[0.1, -2.5e-7, 1.0 / 3.0], [4.0, 5.5, -6.25]])
    samples = SampleMatrix(values, ('e0', 'e1', 'e2'))
    path = str(tmp_path / "s.csv")

    save_samples_csv(path, samples, {'seed': 1})

    with open(path, encoding='utf-8') as f:
        first_line = f.readline()
    assert first_line.startswith('# ')
    assert json.loads(first_line[2:])['config'] == {'seed': 1}
    header, rows = read_rows_csv(path)
    assert header == ['e0', 'e1', 'e2']
    assert len(rows) == 2
    loaded = load_samples_csv(path)
    assert loaded.labels == ('e0', 'e1', 'e2')
    np.testing.assert_array_equal(loaded.values, values)


def test_ragged_samples_csv(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("e0,e1\n1.0,2.0\n3.0\n")

    with pytest.raises(ArtifactFormatError):
        load_samples_csv(str(path))
