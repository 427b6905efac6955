"""Command line front end.

    grushape --config run.ini [--out DIR] [--threads K] COMMAND

Commands: mesh, solve, oracle, deriv, branches, pohozaev, scaling,
critical, suite.  Exit code 0 on success, 1 on runtime errors (an
error.json record is written), 2 on config or usage errors.
"""

import argparse
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from grushape import acceptance, report
from grushape.adminscript import CommandScript
from grushape.assembly import matrix_to_coo_text
from grushape.config import RunConfig, config_hash, load_run_config
from grushape.eigensolver import EigenSystem, SolveSettings, cluster, solve_mesh, solve_report
from grushape.fileutil import ensure_dir, write_atomic
from grushape.geometry import Domain, Mesh, build_domain, measure, mesh_tables, triangulate
from grushape.identities import (
    PERIMETER, VOLUME, constraint_differential, criticality_residual,
    lagrange_multipliers, pohozaev_residual, scaling_check,
)
from grushape.oracle1d import rectangle_spectrum
from grushape.perturbation import (
    AXIS_STRETCH, BOUNDARY_BUMP, DILATION, FIELD_KINDS, RADIAL, SHEAR, SPLIT_POLYNOMIAL, ZERO,
    PerturbationField, check_admissible, field_from_params, make_field,
)
from grushape.scripting import UsageError
from grushape.shapederiv import (
    BOUNDARY_FORM, VOLUME_FORM, RegularityError, SymmetricFunctionSpec,
    branch_slopes, derivative_report,
)
from grushape.shapelog import set_run_info

__all__ = ['GrushapeScript', 'main']

# identifiers of the identity each report checks
EQ_MESH = 'mesh-measures'
EQ_SOLVE = 'weak-eigenproblem'
EQ_ORACLE = 'separated-sturm-liouville'
EQ_DERIV = 'symmetric-function-shape-derivative'
EQ_BRANCHES = 'eigenvalue-branch-matrix'
EQ_POHOZAEV = 'rellich-pohozaev'
EQ_SCALING = 'dilation-scaling-law'
EQ_CRITICAL = 'overdetermined-criticality'
EQ_SUITE = 'acceptance-battery'

_FIELD_ALIASES = {
    'dilation': DILATION,
    'stretch': AXIS_STRETCH,
    'bump': BOUNDARY_BUMP,
    'split': SPLIT_POLYNOMIAL,
}


class GrushapeScript(CommandScript):
    """Grushin eigenvalue shape sensitivity runs.

    Config template::

        ## Parameters for grushape ##

        # rectangle(a, b, L), square(a, b), disk(cx, cy, r),
        # ellipse(cx, cy, rx, ry), polygon(x y; ...), curves(...)
        domain = rectangle(0.2, 1.2, 1)

        # weight exponent, |x|^(2s)
        s = 1

        # half width of the neighbourhood of x=0, default 10%% of x-extent
        #o_margin = 0.1

        # mesh: subdivisions per side for rectangles, or target size h
        n = 32
        #h = 0.05

        # eigenpairs and solver
        m = 5
        #solver_tol = 1e-10
        #cluster_tol = 1e-6
        #seed = 0

        # perturbation: builtin kind or name of a [field.NAME] section
        field = dilation
        #fields = dilation, bump

        # 1-based eigen index, or explicit cluster
        eigen_index = 1
        #cluster = 2, 3
        tau = 1

        eps_list = 1e-3, 5e-4
        t = 2.0

        out_dir = ./out
        #dump_vectors = 0
        #threads = 1
        #samples = 400

        #[field.bump]
        #kind = boundaryBump
        #support = 0.9, 1.5, 0.2, 0.8
        #direction = 1, 0
        #amplitude = 1
    """

    rc: RunConfig

    def init_argparse(self, parser: Optional[argparse.ArgumentParser] = None) -> argparse.ArgumentParser:
        p = super().init_argparse(parser)
        p.usage = "%(prog)s [options] --config PATH COMMAND"
        g = p.add_argument_group('run overrides')
        g.add_argument("--out", metavar="DIR", help="output directory")
        g.add_argument("--threads", type=int, metavar="K", help="worker threads for sweeps")
        g.add_argument("--t", type=float, help="dilation factor for scaling")
        g.add_argument("--field", help="perturbation field name")
        g.add_argument("--tau", type=int, help="order of the symmetric function")
        g.add_argument("--cluster-tol", type=float, dest="cluster_tol",
                       help="relative tolerance for eigenvalue clusters")
        return p

    def option_overrides(self) -> Dict[str, str]:
        res = {}
        opts = self.options
        for key, val in (('out_dir', opts.out), ('threads', opts.threads), ('t', opts.t),
                         ('field', opts.field), ('tau', opts.tau),
                         ('cluster_tol', opts.cluster_tol)):
            if val is not None:
                res[key] = str(val)
        return res

    def reload(self) -> None:
        super().reload()
        command = self.args[0] if self.args else '-'
        set_run_info(self.job_name, command, config_hash(self.cf))

    #
    # helpers
    #

    def run_config(self) -> RunConfig:
        if not getattr(self, 'rc', None):
            self.rc = load_run_config(self.cf)
        return self.rc

    @property
    def out_dir(self) -> str:
        return self.cf.getfile('out_dir', '.')

    def settings(self) -> SolveSettings:
        rc = self.run_config()
        return SolveSettings(rc.m, rc.solver_tol, rc.seed, rc.cluster_tol, rc.threads, rc.samples)

    def setup(self) -> Tuple[Domain, Mesh]:
        rc = self.run_config()
        dom = build_domain(rc.domain, rc.s, o_margin=rc.o_margin)
        mesh = triangulate(dom, h_target=rc.h, n=rc.n)
        self.stat_put('nodes', mesh.n_nodes)
        return dom, mesh

    def solve(self, mesh: Mesh) -> EigenSystem:
        rc = self.run_config()
        esys = solve_mesh(mesh, rc.s, self.settings())
        self.stat_put('lambda_1', float(esys.values[0]))
        return esys

    def make_named_field(self, name: str, dom: Domain) -> PerturbationField:
        """Field from a [field.NAME] section or a builtin kind."""
        rc = self.run_config()
        if name in rc.field_specs:
            return field_from_params(rc.field_specs[name], dom)
        kind = _FIELD_ALIASES.get(name, name)
        if kind in (ZERO, DILATION, RADIAL, SHEAR, AXIS_STRETCH):
            return make_field(kind, {}, dom)
        if kind in FIELD_KINDS:
            raise UsageError("field kind %r needs a [field.%s] section with parameters" % (kind, name))
        raise UsageError("unknown field %r" % name)

    def target_indices(self, esys: EigenSystem) -> List[int]:
        """0-based cluster from config, or the cluster of eigen_index."""
        rc = self.run_config()
        if rc.cluster:
            return [i - 1 for i in rc.cluster]
        return list(cluster(esys, rc.cluster_tol).find(rc.eigen_index - 1).indices)

    def write(self, name: str, body: Dict[str, Any], equation: str) -> None:
        fn = report.write_report(self.out_dir, name, body, config_hash(self.cf), equation,
                                 {'command': self.command, 'config_file': self.cf.filename})
        self.log.info("wrote %s", fn)

    #
    # commands
    #

    def cmd_mesh(self) -> None:
        """Triangulate and export node and element tables."""
        dom, mesh = self.setup()
        vol, per = measure(mesh)
        for name, rows in mesh_tables(mesh).items():
            report.write_csv(self.out_dir, name, rows)
        self.write('mesh', {
            'domain': dom.name,
            'nodes': mesh.n_nodes,
            'triangles': mesh.n_triangles,
            'boundary_edges': int(len(mesh.boundary_edges)),
            'volume': vol,
            'perimeter': per,
            'o_spec': None if dom.o_spec is None else list(dom.o_spec),
            'corners': dom.corners(),
        }, EQ_MESH)

    def cmd_solve(self) -> None:
        """Lowest eigenpairs and their clusters."""
        rc = self.run_config()
        dom, mesh = self.setup()
        esys = self.solve(mesh)
        cl = cluster(esys, rc.cluster_tol)
        body = solve_report(esys)
        body['clusters'] = [[i + 1 for i in c.indices] for c in cl.clusters]
        body['ambiguous_clusters'] = cl.ambiguous
        body['domain'] = dom.name
        self.write('solve', body, EQ_SOLVE)
        if rc.dump_vectors:
            nodal = esys.forms.expand(esys.vectors)
            rows: List[List[object]] = [['node', 'x', 'y'] + ['v%d' % (j + 1) for j in range(esys.m)]]
            for i, (xy, vals) in enumerate(zip(mesh.nodes.tolist(), nodal.tolist())):
                rows.append([i, xy[0], xy[1]] + vals)
            report.write_csv(self.out_dir, 'eigenvectors', rows)
            ensure_dir(self.out_dir)
            write_atomic(self.out_dir + '/stiffness.coo', matrix_to_coo_text(esys.forms.stiffness), mode='t')
            write_atomic(self.out_dir + '/mass.coo', matrix_to_coo_text(esys.forms.mass), mode='t')

    def cmd_oracle(self) -> None:
        """Separated spectrum of a rectangle."""
        rc = self.run_config()
        dom = build_domain(rc.domain, rc.s, o_margin=rc.o_margin)
        if dom.rect is None:
            raise UsageError("oracle needs a rectangle domain, got %s" % dom.name)
        a, b, c, d = dom.rect
        spec = rectangle_spectrum(a, b, d - c, rc.s, rc.m)
        report.write_csv(self.out_dir, 'oracle', spec.rows())
        self.write('oracle', spec.as_dict(), EQ_ORACLE)

    def cmd_deriv(self) -> None:
        """Volume form, boundary form and finite differences of Lambda."""
        rc = self.run_config()
        dom, mesh = self.setup()
        esys = self.solve(mesh)
        idx = self.target_indices(esys)
        if rc.tau > len(idx):
            raise UsageError("tau=%d larger than cluster %r" % (rc.tau, [i + 1 for i in idx]))
        spec = SymmetricFunctionSpec(tuple(idx), rc.tau)
        psi = self.make_named_field(rc.field_name, dom)
        adm = check_admissible(psi, dom, rc.samples, param=max(rc.eps_list), seed=rc.seed)
        rep = derivative_report(esys, spec, psi, mesh, dom, rc.eps_list, self.settings())
        body = rep.as_dict()
        body['field'] = psi.describe()
        body['admissibility'] = adm.as_dict()
        self.write('deriv', body, EQ_DERIV)
        if rep.fd is not None:
            report.write_csv(self.out_dir, 'fd_sweep',
                             [['eps', 'lambda_plus', 'lambda_minus', 'central']] + rep.fd.rows())

    def cmd_branches(self) -> None:
        """Branch matrix slopes against one-sided differences."""
        rc = self.run_config()
        dom, mesh = self.setup()
        esys = self.solve(mesh)
        idx = self.target_indices(esys)
        psi = self.make_named_field(rc.field_name, dom)
        eps = max(rc.eps_list)
        try:
            br = branch_slopes(dom, mesh, esys, idx, psi, eps, self.settings(), BOUNDARY_FORM)
        except RegularityError as ex:
            self.log.warning("boundary form refused (%s), using volume form", ex)
            br = branch_slopes(dom, mesh, esys, idx, psi, eps, self.settings(), VOLUME_FORM)
        rows: List[List[object]] = [['branch', 'formula', 'fd']]
        for i, (f, d) in enumerate(zip(br.formula, br.fd), 1):
            rows.append([i, f, d])
        report.write_csv(self.out_dir, 'branches', rows)
        body = br.as_dict()
        body['cluster'] = [i + 1 for i in idx]
        body['field'] = psi.describe()
        self.write('branches', body, EQ_BRANCHES)

    def cmd_pohozaev(self) -> None:
        """Boundary integral identity for one eigenvalue."""
        rc = self.run_config()
        dom, mesh = self.setup()
        esys = self.solve(mesh)
        res = pohozaev_residual(esys, rc.eigen_index - 1, mesh, dom)
        self.stat_put('residual', res.residual)
        self.write('pohozaev', res.as_dict(), EQ_POHOZAEV)

    def cmd_scaling(self) -> None:
        """Eigenvalues on the dilated mesh."""
        rc = self.run_config()
        dom, mesh = self.setup()
        res = scaling_check(dom, mesh, rc.t, rc.m, self.settings())
        self.stat_put('max_deviation', res.max_deviation)
        self.write('scaling', res.as_dict(), EQ_SCALING)

    def cmd_critical(self) -> None:
        """Criticality residuals for volume and perimeter constraints."""
        rc = self.run_config()
        dom, mesh = self.setup()
        esys = self.solve(mesh)
        idx = self.target_indices(esys)
        body: Dict[str, Any] = {'cluster': [i + 1 for i in idx]}
        for which in (VOLUME, PERIMETER):
            res = criticality_residual(esys, idx, mesh, dom, which, rc.cluster_tol)
            body[which] = res.as_dict()
            report.write_csv(self.out_dir, 'profile_%s' % which, res.profile_rows())
        if len(rc.fields) >= 2:
            spec = SymmetricFunctionSpec(tuple(idx), rc.tau)
            named = [(name, self.make_named_field(name, dom)) for name in rc.fields]
            body['lagrange'] = lagrange_multipliers(esys, spec, named, mesh, dom).as_dict()
        psi = self.make_named_field(rc.field_name, dom)
        body['volume_differential'] = constraint_differential(mesh, dom, psi, VOLUME)
        body['perimeter_differential'] = constraint_differential(mesh, dom, psi, PERIMETER)
        self.write('critical', body, EQ_CRITICAL)

    def cmd_suite(self) -> None:
        """Acceptance battery, pass/fail summary."""
        threads = self.cf.getint('threads', 1)
        only = self.cf.getintlist('criteria', [])
        res = acceptance.run_suite(SolveSettings(threads=threads), only or None)
        for c in res.criteria:
            self.log.info("criterion %d %s: %s", c.number, c.title, 'pass' if c.passed else 'FAIL')
        self.write('suite', res.as_dict(), EQ_SUITE)
        if not res.passed:
            self.log.warning("suite criteria failed: %s",
                             [c.number for c in res.criteria if not c.passed])

    def exception_hook(self, det: Exception, emsg: str) -> None:
        super().exception_hook(det, emsg)
        try:
            report.write_error(self.out_dir, self.command, det, config_hash(self.cf))
        except Exception as ex:  # pylint: disable=broad-except
            self.log.error("could not write error record: %s", ex)


def main(argv: Optional[Sequence[str]] = None) -> None:
    script = GrushapeScript('grushape', sys.argv[1:] if argv is None else argv)
    script.start()


if __name__ == '__main__':
    main()
