"""Small shared helpers: atomic file writes and canonical float text.

All numeric values that cross a file boundary are rendered with ``%.9g``
(9 significant digits). ``canonical9`` pushes freshly computed arrays
through that representation once, so a value read back from a file is
bit-identical to the value used in memory.
"""

import os
import tempfile

import numpy as np


def fmt9(x: float) -> str:
    """Render one float with 9 significant digits."""
    return "%.9g" % x


def fmt9_array(values: np.ndarray) -> np.ndarray:
    """Vectorized %.9g rendering; returns an array of strings."""
    return np.char.mod("%.9g", np.asarray(values, dtype=np.float64))


def canonical9(values: np.ndarray) -> np.ndarray:
    """Round an array to its 9-significant-digit text representation.

    fmt9_array(canonical9(v)) == fmt9_array(v) element-wise, and parsing
    the rendered text recovers canonical9(v) exactly.
    """
    return fmt9_array(values).astype(np.float64)


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a temp file and rename (UTF-8, LF)."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
