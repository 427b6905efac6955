"""File utilities
"""

import os
from typing import Union

__all__ = ['write_atomic', 'ensure_dir']


def write_atomic(fn: str, data: Union[bytes, str], mode: str = 'b') -> None:
    """Write file with rename.

    Readers never see a half-written report.
    """

    if mode not in ['b', 't']:
        raise ValueError("unsupported fopen mode")

    fn2 = fn + '.new'
    if mode == 'b':
        if not isinstance(data, bytes):
            data = data.encode('utf8')
        with open(fn2, 'wb') as f:
            f.write(data)
    else:
        if isinstance(data, bytes):
            data = data.decode('utf8')
        with open(fn2, 'w', encoding="utf8", newline='') as f:
            f.write(data)

    # os.replace is atomic on posix and works on win32 too
    os.replace(fn2, fn)


def ensure_dir(path: str) -> str:
    """Create output directory if missing, return it."""
    path = os.path.expanduser(path)
    os.makedirs(path, exist_ok=True)
    return path
