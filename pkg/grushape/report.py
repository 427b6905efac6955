"""Report writing: JSON documents, metadata side files and CSV tables.

Report bodies are deterministic for a given config, run timestamps
go to <name>.meta.json.
"""

import csv
import io
import json
import os.path
import time
import traceback
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from grushape.fileutil import ensure_dir, write_atomic
from grushape.installer_config import package_version

__all__ = (
    'to_jsonable', 'dump_json', 'write_report', 'write_csv', 'write_error',
    'format_csv',
)


def to_jsonable(obj: Any) -> Any:
    """Convert numpy values and containers into plain Python."""
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if hasattr(obj, 'as_dict'):
        return to_jsonable(obj.as_dict())
    return obj


def dump_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + '\n'


def write_report(out_dir: str, name: str, body: Mapping[str, Any], config_hash: str,
                 equation: str, meta: Optional[Mapping[str, Any]] = None) -> str:
    """Write <name>.json and <name>.meta.json, return report path."""
    ensure_dir(out_dir)
    doc = dict(body)
    doc['config_hash'] = config_hash
    doc['equation'] = equation
    fn = os.path.join(out_dir, name + '.json')
    write_atomic(fn, dump_json(doc), mode='t')

    info = {
        'created': time.strftime('%Y-%m-%dT%H:%M:%S%z'),
        'grushape_version': package_version,
        'report': name + '.json',
    }
    if meta:
        info.update(meta)
    write_atomic(os.path.join(out_dir, name + '.meta.json'), dump_json(info), mode='t')
    return fn


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return '%.17g' % v
    return str(v)


def format_csv(rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(out_dir: str, name: str, rows: Sequence[Sequence[Any]]) -> str:
    """Write rows as <name>.csv, floats with 17 significant digits."""
    ensure_dir(out_dir)
    fn = os.path.join(out_dir, name + '.csv')
    write_atomic(fn, format_csv(rows), mode='t')
    return fn


def write_error(out_dir: str, command: str, exc: BaseException, config_hash: str = '') -> str:
    """JSON record of a failed command."""
    ensure_dir(out_dir)
    doc = {
        'command': command,
        'error': exc.__class__.__name__,
        'message': str(exc),
        'config_hash': config_hash,
        'traceback': traceback.format_exception(type(exc), exc, exc.__traceback__),
    }
    fn = os.path.join(out_dir, 'error.json')
    write_atomic(fn, dump_json(doc), mode='t')
    return fn
