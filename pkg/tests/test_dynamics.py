import numpy as np
import pytest

from dqrc import linalg
from dqrc.dynamics import (
    CDParams,
    FnApproxParams,
    FnParams,
    SMINUS,
    SX,
    SY,
    SZ,
    SpinNetworkParams,
    build_driven_hamiltonian,
    build_ising_hamiltonian,
    build_liouvillian,
    cd_substep_count,
    density_matrix_checks,
    drive_operator,
    encoding_rotation_angle,
    encoding_state,
    first_qubit_loss_dissipator,
    fn_approx_step,
    fn_step,
    gkls_rhs,
    ground_state_density,
    hs_distance,
    inject_first_qubit,
    lowering_operators,
    propagate_cd,
    random_density_matrix,
    site_operator,
)


def make_params(n, h, gamma, dt, seed=0):
    base = SpinNetworkParams.random(n, field_h=h, seed=seed)
    return CDParams(base=base, gamma=gamma, dt_step=dt)


def cd_oracle_step(p, s, rho):
    """Independent reference: exponentiate the vectorised generator."""
    L = build_liouvillian(p, s)
    return linalg.devectorize(linalg.expm(L.matrix * p.dt_step) @ linalg.vectorize(rho))


class TestHamiltonians:
    def test_single_site_field(self):
        p = SpinNetworkParams(n_qubits=1, couplings=np.zeros((1, 1)), field_h=1.0)
        assert np.allclose(build_ising_hamiltonian(p), SZ)

    def test_single_coupling_spectrum(self):
        J = np.array([[0.0, 0.5], [0.5, 0.0]])
        p = SpinNetworkParams(n_qubits=2, couplings=J, field_h=0.0)
        H = build_ising_hamiltonian(p)
        assert np.allclose(H, 0.5 * np.kron(SX, SX))
        assert np.allclose(sorted(np.linalg.eigvalsh(H)), [-0.5, -0.5, 0.5, 0.5])

    def test_matches_hand_assembled(self):
        # independent 4x4 assembly of X(x)X + Z(x)I + I(x)Z
        J = np.array([[0.0, 1.0], [1.0, 0.0]])
        p = SpinNetworkParams(n_qubits=2, couplings=J, field_h=1.0)
        byhand = np.kron(SX, SX) + np.kron(SZ, np.eye(2)) + np.kron(np.eye(2), SZ)
        H = build_ising_hamiltonian(p)
        assert np.allclose(H, byhand)
        assert np.allclose(
            np.sort(np.linalg.eigvalsh(H)), np.sort(np.linalg.eigvalsh(byhand))
        )

    def test_drive_amplitude_rule(self):
        p = make_params(2, h=0.7, gamma=0.1, dt=1.0)
        H = build_ising_hamiltonian(p.base)
        X = drive_operator(2)
        assert np.allclose(build_driven_hamiltonian(p, 0.0) - H, 0.7 * X)
        assert np.allclose(build_driven_hamiltonian(p, 1.0) - H, 1.4 * X)

    def test_driven_single_qubit_spectrum(self):
        p = CDParams(
            base=SpinNetworkParams(n_qubits=1, couplings=np.zeros((1, 1)), field_h=1.0),
            gamma=0.1,
            dt_step=1.0,
        )
        H = build_driven_hamiltonian(p, 0.5)  # sz + 1.5 sx
        expected = np.sqrt(1.0 + 1.5**2)
        assert np.allclose(sorted(np.linalg.eigvalsh(H)), [-expected, expected])

    def test_input_out_of_range(self):
        p = make_params(2, h=1.0, gamma=0.1, dt=1.0)
        with pytest.raises(ValueError):
            build_driven_hamiltonian(p, 1.5)


class TestGkls:
    def test_fixed_point_has_zero_rhs(self):
        # all-|1> product state is stationary for pure uniform loss
        n = 2
        rho = np.zeros((4, 4), dtype=complex)
        rho[3, 3] = 1.0
        rhs = gkls_rhs(rho, np.zeros((4, 4)), [1.0, 1.0], lowering_operators(n))
        assert np.linalg.norm(rhs) < 1e-10

    def test_single_qubit_decay_by_hand(self):
        rho = np.array([[1, 0], [0, 0]], dtype=complex)
        rhs = gkls_rhs(rho, np.zeros((2, 2)), [1.0], [SMINUS])
        assert np.allclose(rhs, np.diag([-1.0, 1.0]))

    def test_traceless_on_random_inputs(self):
        rng = np.random.default_rng(0)
        n = 3
        p = make_params(n, h=0.5, gamma=0.7, dt=1.0)
        H = build_driven_hamiltonian(p, 0.3)
        jumps = lowering_operators(n)
        for _ in range(100):
            rho = random_density_matrix(8, rng)
            rhs = gkls_rhs(rho, H, [0.7] * n, jumps)
            assert abs(np.trace(rhs)) < 1e-13
            assert np.max(np.abs(rhs - rhs.conj().T)) < 1e-13

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            gkls_rhs(np.eye(2, dtype=complex) / 2, np.zeros((2, 2)), [-1.0], [SMINUS])


class TestPropagateCd:
    def test_zero_generator(self):
        p = CDParams(
            base=SpinNetworkParams(n_qubits=2, couplings=np.zeros((2, 2)), field_h=0.0),
            gamma=0.0,
            dt_step=1.0,
        )
        rng = np.random.default_rng(1)
        rho = random_density_matrix(4, rng)
        (out,) = propagate_cd(rho, p, 0.7)
        assert np.max(np.abs(out - rho)) < 1e-12

    def test_single_qubit_amplitude_damping(self):
        # analytic: <sz>(t) = -1 + 2 e^{-gamma t} from |0><0|
        p = CDParams(
            base=SpinNetworkParams(n_qubits=1, couplings=np.zeros((1, 1)), field_h=0.0),
            gamma=1.0,
            dt_step=0.8,
        )
        rho = ground_state_density(1)
        states = propagate_cd(rho, p, 0.0, record_times=[0.2, 0.5, 0.8])
        for t, st in zip([0.2, 0.5, 0.8], states):
            sz = np.trace(SZ @ st).real
            assert abs(sz - (-1.0 + 2.0 * np.exp(-t))) < 1e-10

    def test_matches_superoperator_oracle(self):
        rng = np.random.default_rng(2)
        for trial in range(5):
            n = 2
            p = make_params(n, h=rng.uniform(0.05, 0.8), gamma=rng.uniform(0.05, 1.0), dt=rng.uniform(0.1, 0.5), seed=trial)
            s = rng.uniform()
            rho = random_density_matrix(2**n, rng)
            (got,) = propagate_cd(rho, p, s)
            want = cd_oracle_step(p, s, rho)
            assert hs_distance(got, want) < 1e-8

    def test_purity_preserved_without_loss(self):
        p = CDParams(
            base=SpinNetworkParams.random(3, field_h=0.5, seed=3),
            gamma=0.0,
            dt_step=0.5,
        )
        rho = ground_state_density(3)
        for _ in range(20):
            (rho,) = propagate_cd(rho, p, 0.4)
        purity = np.trace(rho @ rho).real
        assert abs(purity - 1.0) < 20 * 1e-8

    def test_record_times_validated(self):
        p = make_params(2, h=0.1, gamma=0.1, dt=1.0)
        rho = ground_state_density(2)
        with pytest.raises(ValueError):
            propagate_cd(rho, p, 0.5, record_times=[0.5])
        with pytest.raises(ValueError):
            propagate_cd(rho, p, 0.5, record_times=[0.7, 0.2, 1.0])

    def test_substep_rule(self):
        p = make_params(5, h=10.0, gamma=10.0, dt=10.0)
        assert cd_substep_count(p) == int(np.ceil(20 * (10 + 40 + 5) * 10))
        assert cd_substep_count(make_params(2, h=0.01, gamma=0.01, dt=0.01)) == 200


class TestFnStep:
    def test_injection_marginal_s0(self):
        rng = np.random.default_rng(4)
        rho = random_density_matrix(8, rng)
        out = inject_first_qubit(rho, 0.0)
        sz1 = np.trace(site_operator(SZ, 0, 3) @ out).real
        assert abs(sz1 - 1.0) < 1e-12

    def test_injection_expectations_s_half(self):
        rng = np.random.default_rng(5)
        rho = random_density_matrix(4, rng)
        out = inject_first_qubit(rho, 0.5)
        assert abs(np.trace(site_operator(SZ, 0, 2) @ out).real) < 1e-12
        assert abs(np.trace(site_operator(SX, 0, 2) @ out).real - 1.0) < 1e-12

    def test_encoding_expectations(self):
        # <sz> = 1 - 2s, <sx> = 2 sqrt(s(1-s)) on the encoded qubit
        psi = encoding_state(0.25)
        rho = np.outer(psi, psi.conj())
        assert abs(np.trace(SZ @ rho).real - 0.5) < 1e-14
        assert abs(np.trace(SX @ rho).real - 2 * np.sqrt(0.25 * 0.75)) < 1e-14

    def test_zero_dt_returns_injected_product(self):
        rng = np.random.default_rng(6)
        rho = random_density_matrix(4, rng)
        p = FnParams(base=SpinNetworkParams.random(2, field_h=1.0, seed=0), dt_step=1.0)
        (out,) = fn_step(rho, p, 0.3, u_cached=np.eye(4, dtype=complex))
        assert np.allclose(out, inject_first_qubit(rho, 0.3))

    def test_injection_idempotent(self):
        rng = np.random.default_rng(7)
        rho = random_density_matrix(8, rng)
        once = inject_first_qubit(rho, 0.6)
        twice = inject_first_qubit(once, 0.6)
        assert np.max(np.abs(once - twice)) < 1e-14

    def test_cached_unitary_matches_recomputed(self):
        p = FnParams(base=SpinNetworkParams.random(2, field_h=0.7, seed=1), dt_step=0.9)
        U = linalg.expm(-1j * build_ising_hamiltonian(p.base) * p.dt_step)
        rng = np.random.default_rng(8)
        rho = random_density_matrix(4, rng)
        (a,) = fn_step(rho, p, 0.4, u_cached=U)
        (b,) = fn_step(rho, p, 0.4)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_multi_record_consistency(self):
        p = FnParams(base=SpinNetworkParams.random(2, field_h=0.7, seed=2), dt_step=1.2)
        rng = np.random.default_rng(9)
        rho = random_density_matrix(4, rng)
        states = fn_step(rho, p, 0.8, record_times=[0.4, 0.8, 1.2])
        (final,) = fn_step(rho, p, 0.8)
        assert np.max(np.abs(states[-1] - final)) < 1e-12


class TestFnApprox:
    def test_rotation_angle_trivials(self):
        assert encoding_rotation_angle(0.0) == 0.0
        assert abs(encoding_rotation_angle(1.0) - np.pi / 2) < 1e-15

    def test_damping_channel_matches_superoperator(self):
        # closed-form channel vs exponentiated dissipator on qubit 1
        rng = np.random.default_rng(10)
        n = 2
        gamma_t = 0.9
        M = linalg.expm(first_qubit_loss_dissipator(n, 1.0).toarray() * gamma_t)
        p = FnApproxParams(
            base=SpinNetworkParams(n_qubits=n, couplings=np.zeros((n, n)), field_h=0.0),
            gamma_first=1.0,
            dt_dissipate=gamma_t,
        )
        from dqrc.dynamics import _amplitude_damp_first

        for _ in range(10):
            rho = random_density_matrix(4, rng)
            want = linalg.devectorize(M @ linalg.vectorize(rho))
            got = _amplitude_damp_first(rho, gamma_t)
            assert hs_distance(got, want) < 1e-12

    def test_strong_loss_limit_matches_injection(self):
        rng = np.random.default_rng(11)
        n = 3
        p = FnApproxParams(
            base=SpinNetworkParams(n_qubits=n, couplings=np.zeros((n, n)), field_h=0.0),
            gamma_first=1.0,
            dt_dissipate=80.0,
        )
        for s in (0.0, 0.3, 1.0):
            rho = random_density_matrix(8, rng)
            assert hs_distance(fn_approx_step(rho, p, s), inject_first_qubit(rho, s)) < 1e-12

    def test_distance_decreases_with_dissipation(self):
        rng = np.random.default_rng(12)
        n = 2
        pairs = [(random_density_matrix(4, rng), rng.uniform()) for _ in range(20)]
        means = []
        for gdt in (0.5, 2.0, 8.0):
            p = FnApproxParams(
                base=SpinNetworkParams(n_qubits=n, couplings=np.zeros((n, n)), field_h=0.0),
                gamma_first=1.0,
                dt_dissipate=gdt,
            )
            means.append(
                np.mean([hs_distance(fn_approx_step(r, p, s), inject_first_qubit(r, s)) for r, s in pairs])
            )
        assert means[0] > means[1] > means[2]


class TestLiouvillian:
    def test_single_qubit_spectrum(self):
        p = CDParams(
            base=SpinNetworkParams(n_qubits=1, couplings=np.zeros((1, 1)), field_h=0.0),
            gamma=1.0,
            dt_step=1.0,
        )
        L = build_liouvillian(p, 0.0)
        w = np.sort(np.linalg.eigvals(L.matrix).real)
        assert np.allclose(w, [-1.0, -0.5, -0.5, 0.0], atol=1e-12)

    def test_annihilates_stationary_state(self):
        p = make_params(2, h=0.4, gamma=0.8, dt=1.0)
        L = build_liouvillian(p, 0.6)
        w, V = np.linalg.eig(L.matrix)
        i0 = np.argmax(w.real)
        v = V[:, i0]
        rho = linalg.devectorize(v)
        rho = (rho + rho.conj().T) / 2
        rho /= np.trace(rho)
        assert np.linalg.norm(L.matrix @ linalg.vectorize(rho)) < 1e-10

    def test_matches_gkls_rhs(self):
        rng = np.random.default_rng(13)
        n = 2
        p = make_params(n, h=0.9, gamma=0.3, dt=1.0, seed=5)
        jumps = lowering_operators(n)
        for _ in range(50):
            s = rng.uniform()
            rho = random_density_matrix(4, rng)
            L = build_liouvillian(p, s)
            via_matrix = linalg.devectorize(L.matrix @ linalg.vectorize(rho))
            via_rhs = gkls_rhs(rho, build_driven_hamiltonian(p, s), [p.gamma] * n, jumps)
            assert np.max(np.abs(via_matrix - via_rhs)) < 1e-12

    def test_trace_preservation_rows(self):
        p = make_params(3, h=1.0, gamma=0.5, dt=1.0)
        L = build_liouvillian(p, 0.2)
        tr_vec = linalg.vectorize(np.eye(2**3, dtype=complex))
        assert np.max(np.abs(tr_vec @ L.matrix)) < 1e-10

    def test_unique_zero_mode(self):
        for seed in range(3):
            p = make_params(2, h=0.5, gamma=0.7, dt=1.0, seed=seed)
            L = build_liouvillian(p, 0.1)
            w = np.linalg.eigvals(L.matrix)
            assert np.sum(np.abs(w.real) < 1e-10) == 1

    def test_size_guard(self):
        with pytest.raises(MemoryError):
            build_liouvillian(make_params(7, h=0.1, gamma=0.1, dt=1.0), 0.0)

    @pytest.mark.slow
    def test_unique_zero_mode_across_grid_n4(self):
        # one zero eigenvalue for every (h, gamma) grid cell at N=4
        grid = (0.01, 0.1, 1.0, 10.0)
        for h in grid:
            for gamma in grid:
                p = make_params(4, h=h, gamma=gamma, dt=1.0, seed=9)
                w = np.linalg.eigvals(build_liouvillian(p, 0.3).matrix)
                scale = max(1.0, np.max(np.abs(w)))
                assert np.sum(np.abs(w.real) < 1e-10 * scale) == 1, (h, gamma)


class TestStateUtilities:
    def test_hs_distance_trivials(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        sig = np.diag([0.0, 1.0]).astype(complex)
        assert hs_distance(rho, rho) == 0.0
        assert abs(hs_distance(rho, sig) - np.sqrt(2)) < 1e-14

    def test_hs_distance_metric_properties(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            a, b, c = (random_density_matrix(4, rng) for _ in range(3))
            assert abs(hs_distance(a, b) - hs_distance(b, a)) < 1e-14
            assert hs_distance(a, c) <= hs_distance(a, b) + hs_distance(b, c) + 1e-14

    def test_density_checks_on_valid_state(self):
        rng = np.random.default_rng(15)
        checks = density_matrix_checks(random_density_matrix(8, rng))
        assert checks["hermiticity"] < 1e-14
        assert checks["trace_dev"] < 1e-12
        assert checks["min_eigenvalue"] > -1e-12

    def test_coupling_draw_is_symmetric_bounded(self):
        p = SpinNetworkParams.random(5, field_h=1.0, seed=42)
        J = p.couplings
        assert np.allclose(J, J.T)
        assert np.all(np.abs(J) <= 1.0)
        assert np.all(np.diag(J) == 0.0)
        # deterministic per seed
        assert np.array_equal(J, SpinNetworkParams.random(5, field_h=1.0, seed=42).couplings)


class TestCptpInvariants:
    def test_short_run_preserves_state_structure(self):
        # quick version of the long-run invariant (full length in acceptance)
        p = make_params(3, h=1.0, gamma=1.0, dt=1.0, seed=6)
        rng = np.random.default_rng(16)
        rho = ground_state_density(3)
        for k in range(50):
            (rho,) = propagate_cd(rho, p, rng.uniform())
        checks = density_matrix_checks(rho)
        assert checks["trace_dev"] < 50 * 1e-10
        assert checks["hermiticity"] < 1e-12
        assert checks["min_eigenvalue"] > -1e-9
