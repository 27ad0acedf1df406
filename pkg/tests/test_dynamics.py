import numpy as np
import pytest

from gapscope.dynamics import (
    BoxSet,
    ControlPath,
    FiniteSet,
    Polynomial,
    SystemSpec,
    Term,
    adjoint,
    integrate,
    pseudo_distance,
    sd_jump_diagnostic,
    transport_to_final,
    variational_flow,
)
from gapscope.errors import (
    ConsistencyError,
    DimensionMismatchError,
    DivergenceError,
    GridError,
    InputError,
)


def poly(n, *terms):
    return Polynomial([Term(*t) for t in terms], n)


def sussmann_system():
    # scalar dy/ds = w, controls in [0, 5]
    return SystemSpec(
        n=1, m=1, horizon=1.0,
        drift=[Polynomial.zero(1)],
        channels=[[Polynomial.constant(1.0, 1)]],
        control_set=BoxSet([0.0], [5.0]),
        c_bound=0.0,
    )


def linear_system():
    # scalar dy/ds = y + w
    return SystemSpec(
        n=1, m=1, horizon=1.0,
        drift=[poly(1, (1.0, 0, (1,)))],
        channels=[[Polynomial.constant(1.0, 1)]],
        control_set=BoxSet([-10.0], [10.0]),
        c_bound=1.0,
    )


def jump_system():
    # dy/ds = w for s < 0.5, 2w for s >= 0.5
    chan = Polynomial(
        [Term(1.0, 0, (0,), (None, 0.5)), Term(2.0, 0, (0,), (0.5, None))], 1
    )
    return SystemSpec(
        n=1, m=1, horizon=1.0,
        drift=[Polynomial.zero(1)],
        channels=[[chan]],
        jump_times=[0.5],
        control_set=BoxSet([0.0], [5.0]),
    )


def random_poly_system(rng, n=2, scale=0.3):
    def rand_poly():
        terms = [Term(scale * rng.randn())]
        for i in range(n):
            terms.append(Term(scale * rng.randn(), 0, tuple(np.eye(n, dtype=int)[i])))
        i, j = rng.randint(n), rng.randint(n)
        pows = np.zeros(n, dtype=int)
        pows[i] += 1
        pows[j] += 1
        terms.append(Term(scale * rng.randn(), 0, tuple(pows)))
        return Polynomial(terms, n)

    return SystemSpec(
        n=n, m=1, horizon=1.0,
        drift=[rand_poly() for _ in range(n)],
        channels=[[Polynomial.constant(1.0, n) for _ in range(n)]],
        control_set=BoxSet([-2.0], [2.0]),
    )


class TestPolynomial:
    def test_eval_and_derivatives(self):
        p = poly(2, (3.0, 1, (2, 0)), (1.0, 0, (0, 1)))  # 3 s y1^2 + y2
        assert p(2.0, [1.0, 4.0]) == pytest.approx(10.0)
        assert p.d_dy(0)(2.0, [1.0, 4.0]) == pytest.approx(12.0)
        assert p.d_dy(1)(2.0, [1.0, 4.0]) == pytest.approx(1.0)
        assert p.d_ds()(2.0, [1.0, 4.0]) == pytest.approx(3.0)

    def test_degree_cap(self):
        with pytest.raises(InputError):
            poly(1, (1.0, 3, (2,)))

    def test_batch_matches_scalar(self):
        p = poly(2, (0.5, 2, (1, 1)), (1.0, 0, (0, 2), (0.3, None)))
        s = np.array([0.1, 0.5, 0.9])
        y = np.array([[1.0, 2.0], [0.5, -1.0], [2.0, 0.3]])
        batch = p.eval_batch(s, y)
        for k in range(3):
            assert batch[k] == pytest.approx(p(s[k], y[k]))

    def test_fd_jacobian_agreement(self):
        rng = np.random.RandomState(2)
        sys = random_poly_system(rng, n=3)
        for _ in range(10):
            s = rng.rand()
            y = rng.randn(3) * 0.5
            w = rng.randn(1)
            jac = sys.jac_y(s, y, w)
            eps = 1e-6
            for j in range(3):
                e = np.zeros(3)
                e[j] = eps
                fd = (sys.f(s, y + e, w) - sys.f(s, y - e, w)) / (2 * eps)
                assert np.allclose(jac[:, j], fd, rtol=1e-6, atol=1e-8)


class TestControlPath:
    def test_uniform_and_lookup(self):
        c = ControlPath.uniform(1.0, 4, [0.0, 1.0, 2.0, 3.0])
        assert c.value_at(0.3)[0] == 1.0
        assert c.value_at(1.0)[0] == 3.0  # closed last cell
        assert c.value_before(0.25)[0] == 0.0
        assert c.value_at(0.25)[0] == 1.0

    def test_strictly_increasing_required(self):
        with pytest.raises(GridError):
            ControlPath([0.0, 0.5, 0.5, 1.0], [[0.0], [0.0], [0.0]])

    def test_integral(self):
        c = ControlPath([0.0, 0.25, 1.0], [[2.0], [4.0]])
        assert c.integral()[0] == pytest.approx(0.5 + 3.0)

    def test_replace_window_needs_nodes(self):
        c = ControlPath.uniform(1.0, 10, 0.0)
        with pytest.raises(GridError):
            c.replace_window(0.05, 0.2, 1.0)
        d = c.replace_window(0.4, 0.5, 5.0)
        assert d.value_at(0.45)[0] == 5.0
        assert d.value_at(0.55)[0] == 0.0


class TestIntegrate:
    def test_sussmann_reference(self):
        sys = sussmann_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 100, 1.0), [0.0])
        assert proc.endpoint[0] == pytest.approx(1.0, abs=1e-12)

    def test_zero_field_constant(self):
        sys = sussmann_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 16, 0.0), [0.7])
        assert np.all(proc.states == 0.7)

    def test_exponential(self):
        sys = linear_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 1000, 0.0), [1.0])
        assert proc.endpoint[0] == pytest.approx(np.e, abs=1e-8)

    def test_control_outside_value_set(self):
        sys = sussmann_system()
        with pytest.raises(InputError):
            integrate(sys, ControlPath.uniform(1.0, 4, -1.0), [0.0])

    def test_divergence_reports_step(self):
        sys = SystemSpec(
            n=1, m=1, horizon=1.0,
            drift=[poly(1, (1.0, 0, (2,)))],  # dy/ds = y^2
            channels=[[Polynomial.zero(1)]],
        )
        with pytest.raises(DivergenceError) as err:
            integrate(sys, ControlPath.uniform(1.0, 64, 0.0), [4.0])
        assert err.value.step >= 0

    def test_grid_refinement_order(self):
        sys = linear_system()
        errs = []
        for cells in (25, 50):
            proc = integrate(sys, ControlPath.uniform(1.0, cells, 0.0), [1.0])
            errs.append(abs(proc.endpoint[0] - np.e))
        assert errs[0] / errs[1] >= 8.0

    def test_dimension_checks(self):
        sys = sussmann_system()
        with pytest.raises(DimensionMismatchError):
            integrate(sys, ControlPath.uniform(1.0, 4, 1.0), [0.0, 0.0])


class TestVariationalFlow:
    def test_identity_for_state_independent_field(self):
        sys = sussmann_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 50, 1.0), [0.0])
        mp = variational_flow(sys, proc, 0.0)
        assert np.allclose(mp.matrices, np.eye(1))

    def test_exponential_flow(self):
        sys = linear_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 1000, 0.0), [1.0])
        mp = variational_flow(sys, proc, 0.5)
        assert mp.final[0, 0] == pytest.approx(np.exp(0.5), abs=1e-8)

    def test_cocycle(self):
        rng = np.random.RandomState(4)
        sys = random_poly_system(rng)
        ctrl = ControlPath.uniform(1.0, 200, rng.rand(200) - 0.5)
        proc = integrate(sys, ctrl, [0.1, -0.2])
        m_s1 = variational_flow(sys, proc, 0.25)
        m_s2 = variational_flow(sys, proc, 0.5)
        lhs = m_s2.final @ m_s1.at_node(0.5)
        assert np.linalg.norm(lhs - m_s1.final) <= 1e-7

    def test_fd_sensitivity(self):
        rng = np.random.RandomState(6)
        sys = random_poly_system(rng)
        ctrl = ControlPath.uniform(1.0, 500, 0.3)
        y0 = np.array([0.1, 0.2])
        proc = integrate(sys, ctrl, y0)
        m = variational_flow(sys, proc, 0.0).final
        eps = 1e-5
        for i in range(2):
            e = np.zeros(2)
            e[i] = eps
            bumped = integrate(sys, ctrl, y0 + e)
            col = (bumped.endpoint - proc.endpoint) / eps
            denom = max(np.linalg.norm(m[:, i]), 1e-12)
            assert np.linalg.norm(col - m[:, i]) / denom <= 1e-4

    def test_transport_matches_flow(self):
        rng = np.random.RandomState(8)
        sys = random_poly_system(rng)
        proc = integrate(sys, ControlPath.uniform(1.0, 100, 0.2), [0.1, 0.0])
        full = variational_flow(sys, proc, 0.0)
        transport = transport_to_final(sys, proc)
        assert np.allclose(transport.matrices[0], full.final, atol=1e-9)
        assert np.allclose(transport.matrices[-1], np.eye(2))


class TestAdjoint:
    def test_zero_terminal(self):
        sys = sussmann_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 20, 1.0), [0.0])
        path = adjoint(sys, proc, [0.0])
        assert np.all(path.covectors == 0.0)

    def test_sussmann_constant(self):
        sys = sussmann_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 20, 1.0), [0.0])
        path = adjoint(sys, proc, [1.0])
        assert np.allclose(path.covectors, 1.0)

    def test_exponential_adjoint(self):
        sys = linear_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 1000, 0.0), [1.0])
        path = adjoint(sys, proc, [1.0])
        k = path.times.searchsorted(0.25)
        assert path.covectors[k, 0] == pytest.approx(np.exp(0.75), abs=1e-8)

    def test_transport_identity(self):
        rng = np.random.RandomState(9)
        sys = random_poly_system(rng)
        proc = integrate(sys, ControlPath.uniform(1.0, 400, -0.1), [0.2, 0.1])
        xi = np.array([0.3, -1.2])
        path = adjoint(sys, proc, xi)
        transport = transport_to_final(sys, proc)
        rel = np.linalg.norm(
            path.covectors - xi @ transport.matrices, axis=1
        ) / max(np.linalg.norm(xi), 1e-12)
        assert np.max(rel) <= 1e-6

    def test_duality_invariant(self):
        rng = np.random.RandomState(10)
        sys = random_poly_system(rng)
        proc = integrate(sys, ControlPath.uniform(1.0, 300, 0.4), [0.0, 0.2])
        xi = np.array([1.0, 0.5])
        lam = adjoint(sys, proc, xi)
        flow = variational_flow(sys, proc, 0.0)
        prods = np.einsum("ki,kij->kj", lam.covectors, flow.matrices)
        spread = np.max(np.linalg.norm(prods - prods[0], axis=1))
        assert spread / np.linalg.norm(prods[0]) <= 1e-7

    def test_gronwall_floor_raises_on_bad_bound(self):
        sys = SystemSpec(
            n=1, m=1, horizon=1.0,
            drift=[poly(1, (-1.0, 0, (1,)))],  # dy/ds = -y, lambda grows backward-in-s
            channels=[[Polynomial.zero(1)]],
            control_set=BoxSet([-1.0], [1.0]),
            c_bound=0.0,  # wrong: |df/dy| = 1
        )
        proc = integrate(sys, ControlPath.uniform(1.0, 50, 0.0), [1.0])
        with pytest.raises(ConsistencyError):
            adjoint(sys, proc, [1.0])


class TestPseudoDistance:
    def test_identical_controls(self):
        sys = sussmann_system()
        w = ControlPath.uniform(1.0, 10, 1.0)
        assert pseudo_distance(sys, w, w, [0.0]) == 0.0

    def test_sussmann_hand_value(self):
        sys = sussmann_system()
        w1 = ControlPath.uniform(1.0, 50, 1.0)
        w2 = ControlPath.uniform(1.0, 50, 0.0)
        assert pseudo_distance(sys, w1, w2, [0.0]) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.RandomState(12)
        sys = sussmann_system()
        for _ in range(5):
            w1 = ControlPath.uniform(1.0, 20, rng.rand(20) * 5)
            w2 = ControlPath.uniform(1.0, 20, rng.rand(20) * 5)
            assert pseudo_distance(sys, w1, w2, [0.0]) == pseudo_distance(
                sys, w2, w1, [0.0]
            )

    def test_merged_grids(self):
        sys = sussmann_system()
        w1 = ControlPath.uniform(1.0, 8, 1.0)
        w2 = ControlPath([0.0, 0.3, 1.0], [[1.0], [1.0]])
        assert pseudo_distance(sys, w1, w2, [0.0]) <= 1e-12


class TestSdJumpDiagnostic:
    def test_smooth_spec_empty(self):
        sys = linear_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 64, 0.5), [0.0])
        assert sd_jump_diagnostic(sys, proc, 1e-4) == []

    def test_declared_jump_flagged(self):
        sys = jump_system()
        proc = integrate(sys, ControlPath.uniform(1.0, 64, 1.0), [0.0])
        flagged = sd_jump_diagnostic(sys, proc, 1e-4)
        assert flagged == [pytest.approx(0.5)]

    def test_refinement_invariance(self):
        sys = jump_system()
        sets = []
        for cells in (64, 128):
            proc = integrate(sys, ControlPath.uniform(1.0, cells, 1.0), [0.0])
            sets.append(sd_jump_diagnostic(sys, proc, 1e-4))
        assert sets[0] == sets[1] == [pytest.approx(0.5)]


def test_table_driven_system():
    table = [
        ([0.0], [Polynomial.constant(0.0, 1)]),
        ([1.0], [Polynomial.constant(2.0, 1)]),
    ]
    sys = SystemSpec(n=1, m=1, horizon=1.0, table=table,
                     control_set=FiniteSet([[0.0], [1.0]]))
    proc = integrate(sys, ControlPath.uniform(1.0, 10, 1.0), [0.0])
    assert proc.endpoint[0] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(InputError):
        sys.f(0.0, [0.0], [0.5])


def test_system_json_round_trip():
    sys = jump_system()
    again = SystemSpec.from_json(sys.to_json())
    for s in (0.1, 0.5, 0.9):
        assert again.f(s, [0.3], [2.0])[0] == pytest.approx(sys.f(s, [0.3], [2.0])[0])
