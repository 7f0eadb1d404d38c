"""Hot-loop kernels: the compiled extension when built, pure Python otherwise.

Set ``SKILLCORPUS_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels as python

if os.environ.get("SKILLCORPUS_PURE_PYTHON"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

merge_word = _impl.merge_word
count_pairs = _impl.count_pairs
bpe_word = _impl.bpe_word
ngram_counts = _impl.ngram_counts
clipped_matches = _impl.clipped_matches
