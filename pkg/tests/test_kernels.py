import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ctab import _kernels

compiled = pytest.mark.skipif(not _kernels.NUMBA_ENABLED, reason="numba path disabled")


def plain(fn):
    return getattr(fn, "py_func", fn)


@compiled
@pytest.mark.parametrize("seed", range(10))
def test_concordance_paths_agree(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(12)).reshape(3, 4)
    for name in ("concordance", "concordance_grad"):
        fast = getattr(_kernels, name)(p)
        slow = plain(getattr(_kernels, name))(p)
        for a, b in zip(fast, slow):
            assert np.allclose(a, b, atol=1e-15)


@compiled
def test_inversion_paths_agree():
    rng = np.random.default_rng(0)
    cdf = np.cumsum(rng.dirichlet(np.ones(9)))
    cdf[-1] = 1.0
    u = rng.random(5000)
    assert np.array_equal(_kernels.inversion_counts(cdf, u), plain(_kernels.inversion_counts)(cdf, u))


def test_concordance_gradient_by_differences():
    rng = np.random.default_rng(3)
    p = rng.dirichlet(np.ones(6)).reshape(2, 3)
    gc, gq = _kernels.concordance_grad(p)
    h = 1e-7
    for idx in np.ndindex(p.shape):
        e = np.zeros_like(p)
        e[idx] = h
        c1, q1 = _kernels.concordance(p + e)
        c0, q0 = _kernels.concordance(p - e)
        assert gc[idx] == pytest.approx((c1 - c0) / (2 * h), abs=1e-7)
        assert gq[idx] == pytest.approx((q1 - q0) / (2 * h), abs=1e-7)


SCRIPT = """
import json, numpy as np
from ctab import polytope, maxent, simulate
from ctab.table import ContingencyTable
t = ContingencyTable.from_json(json.load(open({path!r})))
fit = maxent.max_entropy(polytope.parametrize_table(t.cells, exact=False))
ow = [(0.1, 0.3, 0.6), (0.2, 0.4, 0.4), (0.3, 0.3, 0.4)]
p = simulate.pearson_construct(ow, {{(1, 2): 0.5, (1, 3): 0.5, (2, 3): 0.5}}, "mean")
s = simulate.inversion_sample(p, 1000, seed=5)
print(json.dumps({{"fit": fit.fitted.ravel().tolist(), "p": p.ravel().tolist(), "s": s.flat.tolist()}}))
"""


def test_fallback_path_gives_same_results():
    from conftest import DATA
    script = SCRIPT.format(path=str(DATA / "berkeley.json"))
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, CTAB_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
        out[flag] = json.loads(res.stdout)
    assert np.allclose(out["0"]["fit"], out["1"]["fit"], atol=1e-12)
    assert np.allclose(out["0"]["p"], out["1"]["p"], atol=1e-12)
    assert out["0"]["s"] == out["1"]["s"]
