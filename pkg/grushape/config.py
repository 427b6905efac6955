"""Config file access and run configuration.
"""

import hashlib
import os
import os.path
from configparser import ConfigParser
from configparser import Error as ConfigError
from configparser import ExtendedInterpolation, Interpolation, NoOptionError, NoSectionError, RawConfigParser
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

__all__ = (
    'Config', 'ConfigError', 'NoOptionError', 'NoSectionError',
    'ExtendedConfigParser', 'RunConfig', 'load_run_config', 'config_hash',
    'FIELD_SECTION_PREFIX',
)

#: sections named "field.<name>" describe perturbation fields
FIELD_SECTION_PREFIX = 'field.'

# defaults that depend on file location, kept out of the config hash
_LOCATION_KEYS = ('job_name', 'config_dir', 'config_file', 'out_dir')


def read_versioned_config(filenames: Sequence[str], main_section: str) -> ConfigParser:
    """Pick syntax based on "config_format" value.
    """
    rcf = RawConfigParser()
    rcf.read(filenames)

    # avoid has_option here, so value can live in DEFAULT section
    ver = rcf.get(main_section, "config_format", fallback="1")
    if ver == "1":
        cf = ConfigParser()
    elif ver == "2":
        cf = ExtendedConfigParser()
    else:
        raise ConfigError('Unsupported config format %r in %r' % (ver, filenames))
    cf.read(filenames)
    return cf


class ExtendedConfigParser(ConfigParser):
    """ConfigParser that uses ${var} and ${section:var} interpolation.
    """
    _DEFAULT_INTERPOLATION: Interpolation = ExtendedInterpolation()


class Config:
    """ConfigParser bound to one section.

    Additional features:
     - Remembers section.
     - Accepts defaults in get() functions.
     - List value support.
     - Overrides from command line.
    """
    main_section: str               # main section
    filename: Optional[str]         # file name that was loaded
    override: Mapping[str, str]     # override values in config file
    defs: Mapping[str, str]         # defaults visible in all sections
    cf: ConfigParser                # actual ConfigParser instance

    def __init__(self, main_section: str,
                 filename: Optional[str],
                 user_defs: Optional[Mapping[str, str]] = None,
                 override: Optional[Mapping[str, str]] = None,
                 ignore_defs: bool = False,
                 parser: Optional[ConfigParser] = None) -> None:
        """Initialize Config and read from file.
        """
        # use config file name as default job_name
        if filename:
            job_name = os.path.splitext(os.path.basename(filename))[0]
        else:
            job_name = main_section

        if ignore_defs:
            self.defs = {}
        else:
            self.defs = {'job_name': job_name}
            if filename:
                self.defs['config_dir'] = os.path.dirname(filename)
                self.defs['config_file'] = filename
            if user_defs:
                self.defs.update(user_defs)

        self.main_section = main_section
        self.filename = filename
        self.override = override or {}

        if parser is not None:
            self.cf = parser
        elif filename is None:
            self.cf = ConfigParser()
            self.cf.add_section(main_section)
        elif not os.path.isfile(filename):
            raise ConfigError('Config file not found: ' + filename)
        else:
            self.cf = read_versioned_config([filename], main_section)

        self.reload()

    def reload(self) -> None:
        """Re-reads config file."""
        if self.filename and not os.path.isfile(self.filename):
            raise ConfigError('Config file not found: ' + self.filename)
        if self.filename:
            self.cf.read(self.filename)
        if not self.cf.has_section(self.main_section):
            raise NoSectionError(self.main_section)

        # apply default if key not set
        for k, v in self.defs.items():
            if not self.cf.has_option(self.main_section, k):
                self.cf.set(self.main_section, k, v)

        # apply overrides
        for k, v in self.override.items():
            self.cf.set(self.main_section, k, v)

    def get(self, key: str, default: Optional[str] = None) -> str:
        """Reads string value, if not set then default."""

        if not self.cf.has_option(self.main_section, key):
            if default is None:
                raise NoOptionError(key, self.main_section)
            return default

        return str(self.cf.get(self.main_section, key))

    def getint(self, key: str, default: Optional[int] = None) -> int:
        """Reads int value, if not set then default."""

        if not self.cf.has_option(self.main_section, key):
            if default is None:
                raise NoOptionError(key, self.main_section)
            return default

        return self.cf.getint(self.main_section, key)

    def getboolean(self, key: str, default: Optional[bool] = None) -> bool:
        """Reads boolean value, if not set then default."""

        if not self.cf.has_option(self.main_section, key):
            if default is None:
                raise NoOptionError(key, self.main_section)
            return default

        return self.cf.getboolean(self.main_section, key)

    def getfloat(self, key: str, default: Optional[float] = None) -> float:
        """Reads float value, if not set then default."""

        if not self.cf.has_option(self.main_section, key):
            if default is None:
                raise NoOptionError(key, self.main_section)
            return default

        return self.cf.getfloat(self.main_section, key)

    def getlist(self, key: str, default: Optional[List[str]] = None) -> List[str]:
        """Reads comma-separated list from key."""

        if not self.cf.has_option(self.main_section, key):
            if default is None:
                raise NoOptionError(key, self.main_section)
            return default

        s = self.get(key).strip()
        res: List[str] = []
        if not s:
            return res
        for v in s.split(","):
            res.append(v.strip())
        return res

    def getfloatlist(self, key: str, default: Optional[List[float]] = None) -> List[float]:
        """Reads comma-separated list of floats."""
        if not self.cf.has_option(self.main_section, key):
            if default is None:
                raise NoOptionError(key, self.main_section)
            return default
        try:
            return [float(v) for v in self.getlist(key)]
        except ValueError:
            raise ConfigError('Bad float list in %r: %r' % (key, self.get(key))) from None

    def getintlist(self, key: str, default: Optional[List[int]] = None) -> List[int]:
        """Reads comma-separated list of ints."""
        if not self.cf.has_option(self.main_section, key):
            if default is None:
                raise NoOptionError(key, self.main_section)
            return default
        try:
            return [int(v) for v in self.getlist(key)]
        except ValueError:
            raise ConfigError('Bad int list in %r: %r' % (key, self.get(key))) from None

    def getfile(self, key: str, default: Optional[str] = None) -> str:
        """Reads filename from config.

        In addition to reading string value, expands ~ to user directory.
        """
        fn = self.get(key, default)
        if fn == "" or fn == "-":
            return fn
        return os.path.expanduser(fn)

    def sections(self) -> Sequence[str]:
        """Returns list of sections in config file, excluding DEFAULT."""
        return self.cf.sections()

    def subsection(self, section: str) -> "Config":
        """Return Config bound to another section of the same parser."""
        if not self.cf.has_section(section):
            raise NoSectionError(section)
        return Config(section, None, ignore_defs=True, parser=self.cf)

    def has_option(self, opt: str) -> bool:
        """Checks if option exists in main section."""
        return self.cf.has_option(self.main_section, opt)

    def items(self) -> Sequence[Tuple[str, str]]:
        """Returns list of (name, value) for each option in main section."""
        return self.cf.items(self.main_section)

    # define some aliases
    getbool = getboolean


def config_hash(cf: Config) -> str:
    """Stable sha256 over main section and field sections.

    Location-dependent defaults are left out, so the same config
    copied elsewhere hashes the same.
    """
    parts: List[str] = []
    sections = [cf.main_section] + sorted(
        s for s in cf.sections() if s.startswith(FIELD_SECTION_PREFIX))
    for sect in sections:
        for k, v in sorted(cf.cf.items(sect)):
            if k in _LOCATION_KEYS:
                continue
            parts.append('%s.%s=%s' % (sect, k, v.strip()))
    return hashlib.sha256('\n'.join(parts).encode('utf8')).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one run."""
    domain: str
    s: int = 1
    o_margin: Optional[float] = None
    n: Optional[int] = None
    h: Optional[float] = None
    m: int = 5
    solver_tol: float = 1e-10
    cluster_tol: float = 1e-6
    field_name: str = 'dilation'
    fields: Tuple[str, ...] = ()
    eigen_index: int = 1
    cluster: Tuple[int, ...] = ()
    tau: int = 1
    eps_list: Tuple[float, ...] = (1e-3, 5e-4)
    t: float = 2.0
    out_dir: str = '.'
    dump_vectors: bool = False
    threads: int = 1
    seed: int = 0
    samples: int = 400
    field_specs: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    config_hash: str = ''


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def load_run_config(cf: Config) -> RunConfig:
    """Build RunConfig from Config, checking ranges."""
    try:
        o_margin = cf.getfloat('o_margin') if cf.has_option('o_margin') else None
        n = cf.getint('n') if cf.has_option('n') else None
        h = cf.getfloat('h') if cf.has_option('h') else None
        rc = RunConfig(
            domain=cf.get('domain'),
            s=cf.getint('s', 1),
            o_margin=o_margin,
            n=n,
            h=h,
            m=cf.getint('m', 5),
            solver_tol=cf.getfloat('solver_tol', 1e-10),
            cluster_tol=cf.getfloat('cluster_tol', 1e-6),
            field_name=cf.get('field', 'dilation'),
            fields=tuple(cf.getlist('fields', [])),
            eigen_index=cf.getint('eigen_index', 1),
            cluster=tuple(cf.getintlist('cluster', [])),
            tau=cf.getint('tau', 1),
            eps_list=tuple(cf.getfloatlist('eps_list', [1e-3, 5e-4])),
            t=cf.getfloat('t', 2.0),
            out_dir=cf.getfile('out_dir', '.'),
            dump_vectors=cf.getboolean('dump_vectors', False),
            threads=cf.getint('threads', 1),
            seed=cf.getint('seed', 0),
            samples=cf.getint('samples', 400),
            field_specs={
                sect[len(FIELD_SECTION_PREFIX):]: dict(cf.subsection(sect).items())
                for sect in cf.sections() if sect.startswith(FIELD_SECTION_PREFIX)
            },
            config_hash=config_hash(cf),
        )
    except ValueError as ex:
        raise ConfigError('Bad value in config: %s' % ex) from None

    _check(rc.s >= 0, 's must be >= 0')
    _check(rc.o_margin is None or rc.o_margin > 0, 'o_margin must be positive')
    _check(rc.n is None or rc.n >= 2, 'n must be >= 2')
    _check(rc.h is None or rc.h > 0, 'h must be positive')
    _check(rc.n is not None or rc.h is not None, 'need mesh resolution: n or h')
    _check(rc.m >= 1, 'm must be >= 1')
    _check(0 < rc.solver_tol <= 1e-4, 'solver_tol must be in (0, 1e-4]')
    _check(rc.cluster_tol > 0, 'cluster_tol must be positive')
    _check(1 <= rc.eigen_index <= rc.m, 'eigen_index must be in [1, m]')
    _check(all(1 <= i <= rc.m for i in rc.cluster), 'cluster indices must be in [1, m]')
    _check(rc.tau >= 1, 'tau must be >= 1')
    _check(len(set(rc.eps_list)) >= 2 and all(e > 0 for e in rc.eps_list),
           'eps_list needs >= 2 distinct positive values')
    _check(rc.t > 0, 't must be positive')
    _check(rc.threads >= 1, 'threads must be >= 1')
    _check(rc.samples >= 100, 'samples must be >= 100')
    return rc
