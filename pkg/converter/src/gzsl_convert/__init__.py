"""One-shot converter from MAT benchmark containers to GZB directories."""

__version__ = "0.1.0"

from .convert import ConversionError, FormatError, convert, summarize_gzb_dir
from .reader import MatBundle, load_mat_bundle

__all__ = ["ConversionError", "FormatError", "MatBundle", "convert",
           "load_mat_bundle", "summarize_gzb_dir"]
