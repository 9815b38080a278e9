"""Module entrypoint to enable `python -m blowzoom`."""
from __future__ import annotations

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
