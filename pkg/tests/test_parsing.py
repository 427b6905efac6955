
import math

import pytest

from grushape.parsing import dedent, parse_number, parse_number_list, parse_setting, parse_shape


def test_parse_number() -> None:
    assert parse_number('1.5') == 1.5
    assert parse_number('-2e-3') == -2e-3
    assert parse_number('.5') == 0.5
    assert parse_number('pi') == math.pi
    assert parse_number('2*pi') == 2 * math.pi
    assert parse_number('-pi/2') == -math.pi / 2
    assert parse_number('3pi/4') == 3 * math.pi / 4
    assert parse_number(' 2 * pi / 4 ') == math.pi / 2

    for bad in ['', 'x', '1.2.3', 'pi pi', '1/0', '2**pi']:
        with pytest.raises(ValueError):
            parse_number(bad)


def test_parse_number_list() -> None:
    assert parse_number_list('') == []
    assert parse_number_list('0, pi') == [0.0, math.pi]
    assert parse_number_list('1 2  3', None) == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        parse_number_list('1,,2')


def test_parse_shape_families() -> None:
    sp = parse_shape('rectangle(0.2, 1.2, 1)')
    assert sp.kind == 'rectangle'
    assert sp.args == (0.2, 1.2, 1.0)

    sp = parse_shape('Rectangle(-1, 1, 0, 2)')
    assert sp.kind == 'rectangle'
    assert sp.args == (-1.0, 1.0, 0.0, 2.0)

    assert parse_shape('square(0, pi)').args == (0.0, math.pi)
    assert parse_shape('disk(0, 0, 1)').kind == 'disk'
    assert parse_shape('ellipse(0, 0, 2, 1)').args == (0.0, 0.0, 2.0, 1.0)


def test_parse_shape_polygon() -> None:
    sp = parse_shape('polygon(0 0; 1 0; 0 1)')
    assert sp.kind == 'curves'
    assert sp.pieces == (
        ('line', (0.0, 0.0, 1.0, 0.0)),
        ('line', (1.0, 0.0, 0.0, 1.0)),
        ('line', (0.0, 1.0, 0.0, 0.0)),
    )


def test_parse_shape_curves() -> None:
    sp = parse_shape('curves(line -1 0 1 0; arc 0 0 1 0 pi)')
    assert sp.kind == 'curves'
    assert sp.pieces[0] == ('line', (-1.0, 0.0, 1.0, 0.0))
    assert sp.pieces[1] == ('arc', (0.0, 0.0, 1.0, 0.0, math.pi))


@pytest.mark.parametrize('spec', [
    'rectangle',
    'rectangle(1, 2)',
    'blob(1, 2)',
    'polygon(0 0; 1 0)',
    'polygon(0 0 1; 1 0; 0 1)',
    'curves(spline 0 0 1 1)',
    'curves(line 0 0 1)',
    'curves()',
])
def test_parse_shape_errors(spec: str) -> None:
    with pytest.raises(ValueError):
        parse_shape(spec)


def test_parse_setting() -> None:
    assert parse_setting(['a=1', ' b = x=y ']) == {'a': '1', 'b': 'x=y'}
    with pytest.raises(ValueError):
        parse_setting(['novalue'])


def test_dedent() -> None:
    assert dedent('  Line1:\n    Line 2\n') == 'Line1:\n  Line 2\n'

    res = dedent('  \nLine1:\n  Line 2\n Line 3\n    Line 4')
    assert res == 'Line1:\nLine 2\n Line 3\n  Line 4\n'
