"""Command scripting.
"""

import inspect
import sys
from typing import Optional, Sequence

from grushape.scripting import EXIT_CONFIG, BaseScript

__all__ = ['CommandScript']


class CommandScript(BaseScript):
    """Runs one named command per invocation.

    First positional argument is taken as command name.  If class
    method 'cmd_' + arg exists, it is called with the remaining
    arguments, otherwise error is given.
    """
    command: str = ''

    def __init__(self, service_name: str, args: Sequence[str]) -> None:
        """CommandScript init."""
        super().__init__(service_name, args)

        if len(self.args) < 1:
            self.log.error("need command")
            sys.exit(EXIT_CONFIG)
        self.command = self.args[0]

    def work(self) -> Optional[int]:
        """Calls command function."""

        cmd = self.args[0]
        cmdargs = self.args[1:]

        # find function
        fname = "cmd_" + cmd.replace('-', '_')
        if not hasattr(self, fname):
            self.log.error('bad subcommand %r, see --help for usage', cmd)
            sys.exit(EXIT_CONFIG)
        fn = getattr(self, fname)

        # check if correct number of arguments
        spec = inspect.getfullargspec(fn)
        n_args = len(spec.args) - 1  # drop 'self'
        if spec.varargs is None and n_args != len(cmdargs):
            helpstr = ""
            if n_args:
                helpstr = ": " + " ".join(spec.args[1:])
            self.log.error("command '%s' got %d args, but expects %d%s",
                           cmd, len(cmdargs), n_args, helpstr)
            sys.exit(EXIT_CONFIG)

        # run command
        fn(*cmdargs)

        return None
