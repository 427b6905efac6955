
import grushape


def test_version() -> None:
    ver = getattr(grushape, "__version__")
    parts = [int(p) for p in ver.split('.')]
    assert parts >= [1, 0]


def test_exports() -> None:
    for name in ('build_domain', 'triangulate', 'assemble', 'solve_lowest', 'cluster',
                 'make_field', 'check_admissible', 'd_lambda', 'fd_derivative',
                 'pohozaev_residual', 'scaling_check', 'rectangle_spectrum', 'Config'):
        assert callable(getattr(grushape, name))


def test_import_cli() -> None:
    import grushape.cli
    assert callable(grushape.cli.main)
    assert grushape.RunConfig(domain='square(0, 1)').field_name == 'dilation'
