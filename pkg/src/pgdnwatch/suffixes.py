"""Bundled public-suffix snapshot.

Parsing must be reproducible across machines and time, so the package ships
a static suffix list instead of fetching the live one.  Callers can always
pass their own set to :func:`pgdnwatch.types.parse_domain`.
"""

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def load_default_suffixes() -> frozenset[str]:
    """Return the bundled suffix snapshot as a lowercase frozenset."""
    text = (
        resources.files("pgdnwatch")
        .joinpath("data/public_suffixes.txt")
        .read_text(encoding="utf-8")
    )
    out = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            out.add(line)
    return frozenset(out)
