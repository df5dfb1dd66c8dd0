import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from force_rl import _backend

py = _backend.python_kernels
cy = _backend.compiled_kernels

needs_compiled = pytest.mark.skipif(cy is None, reason="compiled extension not built")

rows = st.lists(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=1, max_size=50)


class TestBackendSelection:
    def test_backend_label(self):
        assert _backend.BACKEND in ("compiled", "python")

    def test_active_matches_label(self):
        want = cy if _backend.BACKEND == "compiled" else py
        assert _backend.kernels is want


@needs_compiled
class TestBackendsAgree:
    """The compiled kernels and the numpy fallback give the same numbers."""

    def test_psi(self):
        y = np.linspace(-1e4, 1e4, 2001)
        np.testing.assert_allclose(cy.psi(y), py.psi(y), rtol=1e-15, atol=0)

    def test_weighted_influence(self):
        rng = np.random.default_rng(0)
        x, w = rng.standard_normal(300), rng.random(300)
        assert cy.weighted_influence(x, w, 0.7, 0.1) == pytest.approx(py.weighted_influence(x, w, 0.7, 0.1),
                                                                      rel=1e-12)

    @settings(max_examples=200)
    @given(rows, st.floats(min_value=1e-3, max_value=10.0))
    def test_root_sorted(self, x, alpha):
        xs = np.sort(np.asarray(x))
        rc, ic = cy.root_sorted(xs, alpha, 1e-10, 200)
        rp, ip = py.root_sorted(xs, alpha, 1e-10, 200)
        assert (ic < 0) == (ip < 0)
        assert rc == pytest.approx(rp, abs=2e-10)

    def test_roots_sorted(self):
        rng = np.random.default_rng(1)
        xs = np.ascontiguousarray(np.sort(rng.standard_t(2.5, (40, 80)), axis=1))
        a = 10 ** rng.uniform(-2, 1, 40)
        rc, ic = cy.roots_sorted(xs, a, 1e-10, 200)
        rp, ip = py.roots_sorted(xs, a, 1e-10, 200)
        np.testing.assert_allclose(rc, rp, rtol=0, atol=2e-10)
        assert np.all(np.asarray(ic) >= 0) and np.all(np.asarray(ip) >= 0)

    def test_iteration_cap_both(self):
        xs = np.array([0.0, 1.0, 1000.0])
        assert cy.root_sorted(xs, 1.0, 1e-10, 3)[1] < 0
        assert py.root_sorted(xs, 1.0, 1e-10, 3)[1] < 0

    def test_read_only_input(self):
        x = np.array([0.0, 1.0, 5.0])
        x.setflags(write=False)
        assert cy.root_sorted(x, 1.0, 1e-10, 200)[0] == pytest.approx(py.root_sorted(x, 1.0, 1e-10, 200)[0],
                                                                      abs=2e-10)
