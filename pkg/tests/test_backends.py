"""The jit-compiled adjoint kernel and its pure-python fallback must agree
bitwise, since manifests hash artifact bytes."""
import os
import subprocess
import sys

import numpy as np

PROBE = """
import sys
import numpy as np
from rtinverse import _adjoint_direct
from rtinverse.geometry import DiscDomain, boundary_grid
from rtinverse.fields import make_sigma
from rtinverse.measurement import BoundarySinogram, apply_I_sigma_star
from rtinverse.transport import TransportConfig

# report which backend is live: njit wrappers expose py_func
sys.stderr.write("jit=%d\\n" % int(hasattr(_adjoint_direct._run, "py_func")))
dom = DiscDomain()
grid = boundary_grid(dom, n_beta=32, n_alpha=16, on="omega1")
sigma = make_sigma(dom, kind="constant", params={"value": 0.5}, nx=33, n_theta=16)
vals = np.sin(3.0 * grid.beta) * np.cos(2.0 * grid.alpha) + 0.5
adj = apply_I_sigma_star(sigma, BoundarySinogram(grid, vals), grid,
                         TransportConfig(ray_step=1.0 / 64), method="direct")
np.save(sys.argv[1], adj.values)
"""


def _run_probe(tmp_path, name, disable_numba):
    out = tmp_path / name
    env = dict(os.environ)
    env.pop("RTINVERSE_DISABLE_NUMBA", None)
    if disable_numba:
        env["RTINVERSE_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", PROBE, str(out)],
                          env=env, capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    jit_flag = [ln for ln in proc.stderr.splitlines() if ln.startswith("jit=")]
    return np.load(out), jit_flag[-1]


def test_fallback_matches_jit_bitwise(tmp_path):
    a, jit_a = _run_probe(tmp_path, "jit.npy", disable_numba=False)
    b, jit_b = _run_probe(tmp_path, "pure.npy", disable_numba=True)
    assert jit_a == "jit=1"
    assert jit_b == "jit=0"
    assert np.array_equal(a.view(np.uint64), b.view(np.uint64))
    assert float(np.abs(a).max()) > 0.1  # probe actually produced signal
