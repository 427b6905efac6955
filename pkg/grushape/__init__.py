"""Shape sensitivity of Grushin Dirichlet eigenvalues."""

# pylint:disable=unused-wildcard-import,wildcard-import

from grushape.adminscript import *
from grushape.assembly import *
from grushape.config import *
from grushape.eigensolver import *
from grushape.fileutil import *
from grushape.geometry import *
from grushape.identities import *
from grushape.installer_config import package_version as __version__
from grushape.oracle1d import *
from grushape.parsing import *
from grushape.perturbation import *
from grushape.report import *
from grushape.scripting import *
from grushape.shapederiv import *
from grushape.shapelog import *
