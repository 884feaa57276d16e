import sys

from ._core import run_cli

sys.exit(run_cli(sys.argv[1:]))
