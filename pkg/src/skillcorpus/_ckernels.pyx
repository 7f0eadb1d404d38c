# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled versions of the hot loops in ``_pykernels``."""

from cpython.list cimport PyList_GET_SIZE


def merge_word(list word, long a, long b, long new):
    cdef Py_ssize_t i = 0, n = PyList_GET_SIZE(word)
    cdef list out = []
    cdef long x
    while i < n:
        x = word[i]
        if i + 1 < n and x == a and <long>word[i + 1] == b:
            out.append(new)
            i += 2
        else:
            out.append(x)
            i += 1
    return out


def count_pairs(list words, list freqs):
    cdef dict counts = {}
    cdef Py_ssize_t w, i, n
    cdef list word
    cdef long f
    cdef tuple key
    for w in range(PyList_GET_SIZE(words)):
        word = <list>words[w]
        f = freqs[w]
        n = PyList_GET_SIZE(word)
        for i in range(n - 1):
            key = (word[i], word[i + 1])
            counts[key] = counts.get(key, 0) + f
    return counts


def bpe_word(list symbols, dict ranks):
    cdef list word = list(symbols)
    cdef Py_ssize_t i, n
    cdef long best_rank, rank
    cdef long a = 0, b = 0, new = 0
    cdef object r
    cdef bint found
    while PyList_GET_SIZE(word) > 1:
        n = PyList_GET_SIZE(word)
        found = False
        best_rank = 0
        for i in range(n - 1):
            r = ranks.get((word[i], word[i + 1]))
            if r is not None:
                rank = (<tuple>r)[0]
                if not found or rank < best_rank:
                    found = True
                    best_rank = rank
                    a = word[i]
                    b = word[i + 1]
                    new = (<tuple>r)[1]
        if not found:
            break
        word = merge_word(word, a, b, new)
    return word


def ngram_counts(seq, Py_ssize_t n):
    cdef dict counts = {}
    cdef list s = list(seq)
    cdef Py_ssize_t i, m = PyList_GET_SIZE(s)
    cdef tuple key
    for i in range(m - n + 1):
        key = tuple(s[i:i + n])
        counts[key] = counts.get(key, 0) + 1
    return counts


def clipped_matches(cand, ref, Py_ssize_t n):
    cdef Py_ssize_t total = len(cand) - n + 1
    cdef Py_ssize_t matched = 0
    cdef dict rc, cc
    cdef object r
    cdef Py_ssize_t c, ri
    if total <= 0:
        return 0, 0
    rc = ngram_counts(ref, n)
    cc = ngram_counts(cand, n)
    for key, cv in cc.items():
        r = rc.get(key)
        if r is not None:
            c = cv
            ri = r
            matched += c if c < ri else ri
    return matched, total
