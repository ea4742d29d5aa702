import importlib.util
from pathlib import Path

import numpy as np
import pytest

from demcrack import _accel
from demcrack.fracture import estimate, initialize_crack
from demcrack.material import from_young_poisson
from demcrack.mesh import CRACKED
from demcrack.reconstruction import ReconstructionPlan
from demcrack.system import DirichletBC, LoadSpec, NeumannBC, StiffnessAssembly
from oracles import jittered_square, random_splits

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def load_bench():
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not importable")
@pytest.mark.parametrize("name", ["cell_consistency", "facet_penalty", "estimate_scan"])
def test_kernels_agree(name):
    bench = load_bench()
    _, inputs = bench.setup(600)
    f_np, f_nb = bench.KERNELS[name]
    args = bench.prepare(name, inputs[name])
    for x, y in zip(f_np(*args), f_nb(*args)):
        assert np.array_equal(np.isfinite(x), np.isfinite(y))
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_benchmark_runs(capsys):
    load_bench().main(["--cells", "400", "--repeat", "1"])
    out = capsys.readouterr().out
    assert out.count("x\n") == 3


@pytest.mark.parametrize("value,expect", [("numpy", "numpy"), ("NumPy ", "numpy"), ("", None),
                                          ("auto", None)])
def test_backend_variable(monkeypatch, value, expect):
    monkeypatch.setenv("DEMCRACK_BACKEND", value)
    default = "numba" if _accel.HAVE_NUMBA else "numpy"
    assert _accel.requested_backend() == (expect or default)


def test_unknown_backend_rejected(monkeypatch):
    monkeypatch.setenv("DEMCRACK_BACKEND", "cuda")
    with pytest.raises(ValueError, match="DEMCRACK_BACKEND"):
        _accel.requested_backend()


def assemble_and_estimate():
    mesh = jittered_square(6, seed=7)
    mat = from_young_poisson(1.0, 0.3, 1.0)
    zero = lambda x, t, n: 0.0 * x
    loads = LoadSpec(dirichlet=[DirichletBC("bottom", zero)],
                     neumann=[NeumannBC(t) for t in ("left", "right", "top")])
    plan = ReconstructionPlan(mesh, 2, loads.apply_to_mesh(mesh, 2))
    asm = StiffnessAssembly(mesh, plan, mat, 2.0)
    rng = np.random.default_rng(5)
    for f in random_splits(mesh, rng, 3):
        mesh.split_facet(f)
        asm.update_after_crack(f, plan.rebuild_after_crack(f))
    state = initialize_crack(mesh, None)
    state.crack_vertices = list(np.unique(mesh.facet_vertices[mesh.status == CRACKED]))
    stress = rng.normal(size=(mesh.n_cells, 2, 2))
    u = rng.normal(size=(mesh.n_cells, 2))
    return asm.A.toarray(), estimate(mesh, state, stress, u)


def test_pipeline_identical_across_backends(monkeypatch):
    monkeypatch.setenv("DEMCRACK_BACKEND", "numpy")
    A0, G0 = assemble_and_estimate()
    monkeypatch.setenv("DEMCRACK_BACKEND", "numba")
    A1, G1 = assemble_and_estimate()
    assert np.allclose(A0, A1, rtol=0, atol=1e-12 * np.abs(A0).max())
    assert G0.keys() == G1.keys()
    assert np.allclose(list(G0.values()), list(G1.values()), rtol=1e-12)
