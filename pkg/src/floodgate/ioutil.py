"""Small I/O helpers."""

import os
import tempfile
from contextlib import contextmanager


@contextmanager
def atomic_write(path, mode="w", **kwargs):
    """Open a temp file next to `path`; rename over `path` only on success.

    Guarantees no partial output file is left behind if the body raises.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
