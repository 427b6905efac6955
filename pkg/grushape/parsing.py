"""Parsers for the text formats used in config files.
"""

import math
import re
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

__all__ = (
    "parse_number", "parse_number_list", "parse_shape", "ShapeSpec",
    "parse_setting", "dedent",
)

# 1.5, -2e-3, pi, 2*pi, -pi/2, 3pi/4
_rc_number = re.compile(r"""
    ^ \s* ([-+]?) \s*
    (?: (?P<num> (?: \d+\.?\d* | \.\d+ ) (?: [eE][-+]?\d+ )? ) )?
    \s* (?P<pi> \*? \s* pi )?
    \s* (?: / \s* (?P<div> \d+\.?\d* ) )?
    \s* $
""", re.X | re.I)

_rc_shape = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$", re.S)


def parse_number(tok: str) -> float:
    """Parse float that may use 'pi' as unit.

    >>> parse_number('2*pi/4') == math.pi / 2
    True
    >>> parse_number('-0.25')
    -0.25
    """
    m = _rc_number.match(tok)
    if not m or (m.group('num') is None and m.group('pi') is None):
        raise ValueError("cannot parse number: %r" % tok)
    val = float(m.group('num')) if m.group('num') is not None else 1.0
    if m.group('pi'):
        val *= math.pi
    if m.group('div'):
        div = float(m.group('div'))
        if div == 0:
            raise ValueError("division by zero in %r" % tok)
        val /= div
    if m.group(1) == '-':
        val = -val
    return val


def parse_number_list(s: str, sep: Optional[str] = ',') -> List[float]:
    """Parse list of numbers separated by sep, None means whitespace."""
    s = s.strip()
    if not s:
        return []
    return [parse_number(t) for t in s.split(sep)]


class ShapeSpec(NamedTuple):
    """Parsed domain description."""
    kind: str
    args: Tuple[float, ...]
    pieces: Tuple[Tuple[str, Tuple[float, ...]], ...]


_piece_arity = {
    'line': (4,),
    'arc': (5,),
    'ellipse': (6,),
}

_shape_arity = {
    'rectangle': (3, 4),
    'square': (2,),
    'disk': (3,),
    'ellipse': (4,),
}


def parse_shape(spec: str) -> ShapeSpec:
    """Parse domain description.

    Supported forms::

        rectangle(a, b, L)              [a,b] x [0,L]
        rectangle(a, b, c, d)           [a,b] x [c,d]
        square(a, b)                    [a,b] x [a,b]
        disk(cx, cy, r)
        ellipse(cx, cy, rx, ry)
        polygon(x y; x y; ...)          counter-clockwise vertices
        curves(line x0 y0 x1 y1; arc cx cy r th0 th1; ellipse cx cy rx ry th0 th1)
    """
    m = _rc_shape.match(spec)
    if not m:
        raise ValueError("bad domain spec: %r" % spec)
    kind = m.group(1).lower()
    body = m.group(2).strip()

    if kind == 'polygon':
        verts = []
        for part in body.split(';'):
            if not part.strip():
                continue
            xy = parse_number_list(part, None)
            if len(xy) != 2:
                raise ValueError("polygon vertex needs 2 coordinates: %r" % part)
            verts.append(tuple(xy))
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        pieces = []
        for i, p0 in enumerate(verts):
            p1 = verts[(i + 1) % len(verts)]
            pieces.append(('line', (p0[0], p0[1], p1[0], p1[1])))
        return ShapeSpec('curves', (), tuple(pieces))

    if kind == 'curves':
        pieces = []
        for part in body.split(';'):
            words = part.split(None, 1)
            if not words:
                continue
            name = words[0].lower()
            if name not in _piece_arity:
                raise ValueError("unknown curve piece: %r" % name)
            vals = tuple(parse_number_list(words[1] if len(words) > 1 else '', None))
            if len(vals) not in _piece_arity[name]:
                raise ValueError("curve piece %r got %d values" % (name, len(vals)))
            pieces.append((name, vals))
        if not pieces:
            raise ValueError("curves() needs at least one piece")
        return ShapeSpec('curves', (), tuple(pieces))

    if kind not in _shape_arity:
        raise ValueError("unknown shape family: %r" % kind)
    args = tuple(parse_number_list(body))
    if len(args) not in _shape_arity[kind]:
        raise ValueError("%s() got %d values" % (kind, len(args)))
    return ShapeSpec(kind, args, ())


def parse_setting(items: Sequence[str]) -> Dict[str, str]:
    """Parse list of 'KEY=VALUE' strings."""
    res: Dict[str, str] = {}
    for a in items:
        if '=' not in a:
            raise ValueError("expected KEY=VALUE, got %r" % a)
        k, v = a.split('=', 1)
        res[k.strip()] = v.strip()
    return res


def dedent(doc: str) -> str:
    r"""Relaxed dedent.

    - takes whitespace to be removed from first indented line.
    - allows empty or non-indented lines at the start
    - allows first line to be unindented
    - skips empty lines at the start
    - ignores indent of empty lines
    - if line does not match common indent, is stays unchanged
    """
    pfx: Optional[str] = None
    res: List[str] = []
    for ln in doc.splitlines():
        ln = ln.rstrip()
        if not pfx and len(res) < 2:
            if not ln:
                continue
            wslen = len(ln) - len(ln.lstrip())
            pfx = ln[: wslen]
        if pfx:
            if ln.startswith(pfx):
                ln = ln[len(pfx):]
        res.append(ln)
    res.append('')
    return '\n'.join(res)
