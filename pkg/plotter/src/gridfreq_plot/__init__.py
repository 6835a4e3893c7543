"""Static figure rendering for gridfreq CSV outputs."""

from .csvio import CsvFormatError, read_columns
from .render import KINDS, PlotSpec, build_figure, render

__version__ = "0.1.0"
