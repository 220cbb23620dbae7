"""The FMLAB_NUMBA env flag selects the pure-numpy path; results must agree."""

import json
import os
import subprocess
import sys

import numpy as np

ROOT = os.path.dirname(os.path.dirname(__file__))

SNIPPET = """
import json
import numpy as np
from fmlab import kernels as K

rng = np.random.default_rng(99)
a = rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24))
h = ((a + a.conj().T) / 2).astype(np.complex128)
d, e, q = K.tridiag_reduce(h.copy())
K.tql2(d, e, q)
lu = (h - 0.3j * np.eye(24)).astype(np.complex128)
piv, ok = K.lu_factor(lu)
x = K.lu_solve(lu, piv, np.eye(24, 2, dtype=np.complex128))
print(json.dumps({
    "backend": K.backend(),
    "eigs": sorted(float(v) for v in d),
    "x00": [x[0, 0].real, x[0, 0].imag],
}))
"""


def _run_with(flag):
    env = dict(os.environ, PYTHONPATH="src", FMLAB_NUMBA=flag)
    proc = subprocess.run(
        [sys.executable, "-c", SNIPPET], capture_output=True, text=True, env=env, cwd=ROOT
    )
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


def test_env_flag_switches_backend_and_results_agree():
    on = _run_with("1")
    off = _run_with("0")
    assert off["backend"] == "numpy"
    # numba may be unavailable in minimal environments; then both runs match exactly
    assert on["backend"] in ("numba", "numpy")
    eig_gap = np.max(np.abs(np.array(on["eigs"]) - np.array(off["eigs"])))
    assert eig_gap <= 1e-12
    assert abs(complex(*on["x00"]) - complex(*off["x00"])) <= 1e-12
