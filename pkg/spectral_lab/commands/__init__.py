"""CLI subcommands, one module per command."""

from .noncross import noncross as noncross_command
from .perturb import perturb as perturb_command
from .plotdata import plotdata as plotdata_command
from .sphere import sphere as sphere_command
from .torus import torus as torus_command

commands = [torus_command, sphere_command, perturb_command, noncross_command, plotdata_command]
