
import json
import pathlib
from typing import Any, Dict, List

import pytest

from grushape import acceptance
from grushape.cli import EQ_MESH, EQ_SOLVE, GrushapeScript, main

RUN_INI = """\
[grushape]
domain = rectangle(0.2, 1.2, 1)
s = 1
n = 6
m = 3
field = bump
fields = dilation, bump
eps_list = 2e-3, 1e-3

[field.bump]
kind = boundaryBump
support = 0.9, 1.5, 0.2, 0.8
direction = 1, 0
amplitude = 0.5
"""

SQUARE_INI = """\
[grushape]
domain = square(0, pi)
s = 0
n = 8
m = 4
field = stretch
cluster = 2, 3
eps_list = 1e-3, 5e-4
"""


@pytest.fixture
def conf(tmp_path: pathlib.Path) -> str:
    fn = tmp_path / 'run.ini'
    fn.write_text(RUN_INI)
    return str(fn)


def _run(conf: str, out: pathlib.Path, *args: str) -> None:
    main(['--config', conf, '--out', str(out)] + list(args))


def _load(out: pathlib.Path, name: str) -> Dict[str, Any]:
    return json.loads((out / name).read_text())


def _exit_code(argv: List[str]) -> int:
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return int(exc.value.code or 0)


def test_ini(capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit):
        GrushapeScript('grushape', ['--ini', '--threads', '4'])
    out = capsys.readouterr().out
    assert out.startswith('[grushape]')
    assert 'domain = rectangle(0.2, 1.2, 1)' in out
    assert '#threads = 1' in out
    assert 'threads = 4' in out
    assert '#logfile' in out


def test_usage_errors(conf: str, tmp_path: pathlib.Path) -> None:
    out = str(tmp_path / 'out')
    assert _exit_code(['solve']) == 2
    assert _exit_code(['--config', conf]) == 2
    assert _exit_code(['--config', conf, '--out', out, 'frobnicate']) == 2
    assert _exit_code(['--config', conf, '--out', out, 'solve', 'extra']) == 2
    assert _exit_code(['--config', conf, '--out', out, '--set', 'm=0', 'solve']) == 2
    assert _exit_code(['--config', conf, '--out', out, '--field', 'vortex', 'deriv']) == 2
    assert _exit_code(['--config', conf, '--out', out, '--field', 'split', 'deriv']) == 2
    assert _exit_code(['--config', conf, '--out', out, '--tau', '2', 'deriv']) == 2
    assert _exit_code(['--config', str(tmp_path / 'missing.ini'), 'solve']) == 2
    assert not (tmp_path / 'out' / 'error.json').exists()


def test_runtime_error(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    code = _exit_code(['--config', conf, '--out', str(out), '--set', 'domain=blob(1)', 'mesh'])
    assert code == 1
    err = _load(out, 'error.json')
    assert err['command'] == 'mesh'
    assert err['error'] == 'GeometryError'
    assert len(err['config_hash']) == 64
    assert err['traceback']


def test_mesh(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, 'mesh')
    doc = _load(out, 'mesh.json')
    assert doc['equation'] == EQ_MESH
    assert doc['nodes'] == 49
    assert doc['triangles'] == 72
    assert doc['volume'] == pytest.approx(1.0)
    assert doc['perimeter'] == pytest.approx(4.0)
    assert doc['corners'] == [0, 1, 2, 3]
    assert doc['o_spec'] is None
    meta = _load(out, 'mesh.meta.json')
    assert meta['command'] == 'mesh'
    assert meta['report'] == 'mesh.json'
    assert (out / 'nodes.csv').read_text().startswith('node,x,y,interior\n')
    assert (out / 'triangles.csv').exists()
    assert (out / 'boundary.csv').exists()


def test_solve(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, '--set', 'dump_vectors=1', 'solve')
    doc = _load(out, 'solve.json')
    assert doc['equation'] == EQ_SOLVE
    assert len(doc['eigenvalues']) == 3
    assert doc['clusters'] == [[1], [2], [3]]
    assert doc['ambiguous_clusters'] is False
    assert doc['ndof'] == 25
    lines = (out / 'eigenvectors.csv').read_text().splitlines()
    assert lines[0] == 'node,x,y,v1,v2,v3'
    assert len(lines) == 50
    assert (out / 'stiffness.coo').read_text().startswith('25 25 ')
    assert (out / 'mass.coo').exists()


def test_solve_deterministic(conf: str, tmp_path: pathlib.Path) -> None:
    _run(conf, tmp_path / 'a', 'solve')
    _run(conf, tmp_path / 'b', 'solve')
    assert (tmp_path / 'a' / 'solve.json').read_bytes() == (tmp_path / 'b' / 'solve.json').read_bytes()


def test_oracle(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, 'oracle')
    doc = _load(out, 'oracle.json')
    assert len(doc['eigenvalues']) == 3
    assert doc['modes'][0] == [1, 1]
    assert (out / 'oracle.csv').read_text().startswith('lambda,n,k,error\n')

    code = _exit_code(['--config', conf, '--out', str(out), '--set', 'domain=disk(0, 0, 1)', 'oracle'])
    assert code == 2


def test_deriv(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, 'deriv')
    doc = _load(out, 'deriv.json')
    assert doc['cluster'] == [1]
    assert doc['field']['kind'] == 'boundaryBump'
    assert doc['admissibility']['passed'] is True
    assert doc['boundary_refused'] is None
    assert doc['fd']['richardson'] == pytest.approx(doc['volume_form'], rel=1e-4)
    rows = (out / 'fd_sweep.csv').read_text().splitlines()
    assert rows[0] == 'eps,lambda_plus,lambda_minus,central'
    assert len(rows) == 3


def test_deriv_dilation_override(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, '--field', 'dilation', 'deriv')
    doc = _load(out, 'deriv.json')
    assert doc['field']['kind'] == 'dilationGenerator'
    assert doc['volume_form'] == pytest.approx(-2.0 * doc['eigenvalues'][0], rel=1e-8)


def test_branches(tmp_path: pathlib.Path) -> None:
    conf = tmp_path / 'square.ini'
    conf.write_text(SQUARE_INI)
    out = tmp_path / 'out'
    _run(str(conf), out, 'branches')
    doc = _load(out, 'branches.json')
    assert doc['cluster'] == [2, 3]
    assert doc['mode'] == 'boundaryForm'
    assert len(doc['formula']) == 2
    assert doc['formula'][0] < doc['formula'][1] < 0
    rows = (out / 'branches.csv').read_text().splitlines()
    assert rows[0] == 'branch,formula,fd'


def test_branches_fallback(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, '--set', 'domain=rectangle(-1, 1, 1)', '--field', 'dilation', 'branches')
    doc = _load(out, 'branches.json')
    assert doc['mode'] == 'volumeForm'
    assert doc['formula'][0] == pytest.approx(doc['fd'][0], rel=1e-3)


def test_pohozaev(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, 'pohozaev')
    doc = _load(out, 'pohozaev.json')
    assert doc['index'] == 1
    assert doc['equation'] == 'rellich-pohozaev'
    assert abs(doc['matching_defect']) < 1e-10 * doc['lambda']


def test_scaling(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, '--t', '0.5', 'scaling')
    doc = _load(out, 'scaling.json')
    assert doc['t'] == 0.5
    assert doc['max_deviation'] < 1e-9


def test_critical(conf: str, tmp_path: pathlib.Path) -> None:
    out = tmp_path / 'out'
    _run(conf, out, 'critical')
    doc = _load(out, 'critical.json')
    assert doc['cluster'] == [1]
    assert doc['volume']['applicable'] is True
    assert doc['perimeter']['applicable'] is False
    assert doc['lagrange']['fields'] == ['dilation', 'bump']
    assert doc['volume_differential'] > 0
    assert doc['perimeter_differential'] == 0.0
    assert (out / 'profile_volume.csv').exists()
    assert (out / 'profile_perimeter.csv').exists()


def test_suite(conf: str, tmp_path: pathlib.Path, monkeypatch: pytest.MonkeyPatch) -> None:
    def fake(st: Any) -> Any:
        return st.threads == 2, {'threads': st.threads}

    monkeypatch.setattr(acceptance, 'CRITERIA', [(1, 'fake', fake)])
    out = tmp_path / 'out'
    # failing criteria still exit 0, the summary carries the verdict
    _run(conf, out, '--threads', '3', 'suite')
    doc = _load(out, 'suite.json')
    assert doc['passed'] is False
    assert doc['failed'] == [1]
    assert doc['criteria'][0]['values'] == {'threads': 3}

    _run(conf, out, '--threads', '2', '--set', 'criteria=1', 'suite')
    doc = _load(out, 'suite.json')
    assert doc['passed'] is True
    assert [c['number'] for c in doc['criteria']] == [1]
