# laryngen/__main__.py
from .cli import cli

cli(prog_name="laryngen")
