"""
utils/artifacts.py

Readers and writers for the files exchanged between CLI stages:

* complex JSON  {"n_vertices", "edges", "triangles", "triangle_flags"?}
* params JSON   {"k", "d_V", "d_T"}
* result JSON   see InferenceResult.to_dict
* samples CSV   header of v*/e*/t* labels, then one row per draw

JSON files carry a ``provenance`` block (tool, version, resolved
configuration). CSV files carry the same block on a leading ``#`` comment
line, which the readers skip.
"""

import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ArtifactFormatError, InvalidComplexError
from core.sgm_model import SampleMatrix, SgmParams
from core.simplicial_complex import SimplicialComplex, build_complex

logger = logging.getLogger(__name__)

TOOL_NAME = 'sgm-toolkit'
TOOL_VERSION = '0.1.0'


def provenance(config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {
        'tool': TOOL_NAME,
        'version': TOOL_VERSION,
        'config': dict(config or {}),
    }


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)


def write_json(path: str,
               payload: Dict[str, Any],
               config: Optional[Dict[str, Any]] = None) -> None:
    """Write ``payload`` plus a provenance block as sorted, indented JSON."""
    _ensure_parent(path)
    document = dict(payload)
    document['provenance'] = provenance(config)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.debug("Wrote %s.", path)


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ArtifactFormatError(path, str(exc)) from exc
    if not isinstance(data, dict):
        raise ArtifactFormatError(path, "top-level value is not an object")
    return data


def save_complex(path: str,
                 complex_: SimplicialComplex,
                 flags: Optional[Sequence[bool]] = None,
                 config: Optional[Dict[str, Any]] = None) -> None:
    payload: Dict[str, Any] = {
        'n_vertices': complex_.n_vertices,
        'edges': [list(e) for e in complex_.edges],
        'triangles': [list(t) for t in complex_.triangles],
    }
    if flags is not None:
        payload['triangle_flags'] = [bool(f) for f in flags]
    write_json(path, payload, config)


def load_complex(path: str) -> Tuple[SimplicialComplex, Optional[np.ndarray]]:
    """
    Read a complex file.

    Returns:
        (complex, flags) where flags is None when the file has none.
    """
    data = read_json(path)
    try:
        complex_ = build_complex(data['n_vertices'], data.get('edges', []),
                                 data.get('triangles', []))
    except KeyError as exc:
        raise ArtifactFormatError(path, "missing key %s" % exc) from exc
    except InvalidComplexError as exc:
        raise ArtifactFormatError(path, str(exc)) from exc
    flags = data.get('triangle_flags')
    if flags is None:
        return complex_, None
    if len(flags) != complex_.n_triangles:
        raise ArtifactFormatError(
            path, "triangle_flags has %d entries for %d triangles" %
            (len(flags), complex_.n_triangles))
    if list(map(tuple, data.get('triangles', []))) != list(complex_.triangles):
        # flags refer to the file order; keep them aligned after sorting
        order = {tuple(sorted(t)): i
                 for i, t in enumerate(data.get('triangles', []))}
        flags = [flags[order[t]] for t in complex_.triangles]
    return complex_, np.asarray(flags, dtype=bool)


def save_params(path: str,
                params: SgmParams,
                config: Optional[Dict[str, Any]] = None) -> None:
    write_json(path, params.to_dict(), config)


def load_params(path: str) -> SgmParams:
    data = read_json(path)
    try:
        return SgmParams.from_dict(data)
    except KeyError as exc:
        raise ArtifactFormatError(path, "missing key %s" % exc) from exc


def load_result(path: str) -> Dict[str, Any]:
    data = read_json(path)
    for key in ('k_hat', 'd_V_hat', 'd_T_hat'):
        if key not in data:
            raise ArtifactFormatError(path, "missing key '%s'" % key)
    return data


def _provenance_comment(config: Optional[Dict[str, Any]]) -> str:
    return '# ' + json.dumps(provenance(config), sort_keys=True)


def write_rows_csv(path: str,
                   header: Sequence[str],
                   rows: Iterable[Sequence[Any]],
                   config: Optional[Dict[str, Any]] = None) -> None:
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(_provenance_comment(config) + '\n')
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.debug("Wrote %s.", path)


def read_rows_csv(path: str) -> Tuple[List[str], List[List[str]]]:
    """Return (header, rows) skipping ``#`` comment lines."""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration as exc:
        raise ArtifactFormatError(path, "file has no header") from exc
    return header, [row for row in reader if row]


def save_samples_csv(path: str,
                     samples: SampleMatrix,
                     config: Optional[Dict[str, Any]] = None) -> None:
    """Write samples with full float precision (repr round-trips)."""
    rows = ([repr(float(v)) for v in row] for row in samples.values)
    write_rows_csv(path, samples.labels, rows, config)


def load_samples_csv(path: str) -> SampleMatrix:
    header, rows = read_rows_csv(path)
    try:
        values = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise ArtifactFormatError(path, "non-numeric or ragged rows") from exc
    return SampleMatrix(values, tuple(header))
