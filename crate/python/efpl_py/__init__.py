"""Python bindings for the efpl library.

The compiled extension is built from ``crates/efpl-py``; run
``python/build_native.sh`` (or the equivalent cargo build + copy) before
installing this package.
"""

try:
    from ._native import (
        MetaCheckReport,
        Structure,
        gen_sat,
        gen_vocab,
        prenex,
    )
except ImportError as e:  # pragma: no cover
    raise ImportError(
        "the efpl_py native extension is missing; build it with "
        "`cargo build --release -p efpl-py` and copy "
        "`target/release/libefpl_py.so` to `python/efpl_py/_native.so` "
        "(see python/build_native.sh)"
    ) from e

__all__ = ["MetaCheckReport", "Structure", "gen_sat", "gen_vocab", "prenex"]
