import numpy as np
import pytest

from telesim import qstate as qs
from telesim import tomography as tm
from telesim.errors import ValidationError
from telesim.qstate import MeasurementBasis


def counts_from_state(rho, n_per_basis, rng=None):
    """Expected or multinomially sampled counts in the three bases."""
    counts = {}
    for basis in MeasurementBasis:
        plus, _ = basis.states
        k = plus.ket()
        p = float(np.real(k.conj() @ rho.entries @ k))
        if rng is None:
            n_plus = int(round(n_per_basis * p))
        else:
            n_plus = int(rng.binomial(n_per_basis, p))
        counts[basis] = (n_plus, n_per_basis - n_plus)
    return tm.TomographyCounts(counts)


def random_channel(rng, n_kraus=3):
    ks = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
          for _ in range(n_kraus)]
    s = sum(k.conj().T @ k for k in ks)
    w, v = np.linalg.eigh(s)
    s_inv_half = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    return [k @ s_inv_half for k in ks]


def apply_kraus(ks, rho):
    return sum(k @ rho @ k.conj().T for k in ks)


class TestMleState:
    def test_pole_state(self):
        counts = tm.TomographyCounts({MeasurementBasis.HV: (1000, 0),
                                      MeasurementBasis.PM: (500, 500),
                                      MeasurementBasis.RL: (500, 500)})
        res = tm.mle_state(counts)
        assert res.converged
        assert tm.trace_distance(res.rho, qs.H.density()) < 1e-3

    def test_maximally_mixed(self):
        counts = tm.TomographyCounts({b: (500, 500) for b in MeasurementBasis})
        res = tm.mle_state(counts)
        assert tm.trace_distance(res.rho, qs.DensityMatrix.maximally_mixed()) < 1e-3

    def test_equatorial_state(self):
        counts = tm.TomographyCounts({MeasurementBasis.HV: (500, 500),
                                      MeasurementBasis.PM: (1000, 0),
                                      MeasurementBasis.RL: (500, 500)})
        res = tm.mle_state(counts)
        assert tm.trace_distance(res.rho, qs.P.density()) < 1e-3

    def test_matches_linear_inversion_on_interior_states(self, rng):
        for _ in range(20):
            r = rng.normal(size=3)
            r *= 0.7 * rng.random() / np.linalg.norm(r)
            rho = qs.DensityMatrix.from_bloch(r)
            counts = counts_from_state(rho, 200_000)
            res = tm.mle_state(counts)
            li = tm.linear_inversion(counts)
            assert tm.trace_distance(res.rho, li) < 5e-3

    def test_always_physical_on_fuzzed_counts(self, rng):
        for _ in range(50):
            counts = tm.TomographyCounts({
                b: (int(rng.integers(0, 2000)), int(rng.integers(0, 2000)))
                for b in MeasurementBasis})
            res = tm.mle_state(counts)  # DensityMatrix validates on build
            assert qs.purity(res.rho) <= 1.0 + 1e-9

    def test_consistency_100_random_states(self, rng):
        n = 10_000
        for _ in range(100):
            psi = qs.random_pure_state(rng)
            # mix toward the center to cover the whole ball
            lam = rng.random()
            rho = qs.DensityMatrix(lam * psi.density().entries
                                   + (1 - lam) * np.eye(2) / 2)
            counts = counts_from_state(rho, n, rng)
            res = tm.mle_state(counts)
            assert tm.trace_distance(res.rho, rho) < 0.05

    def test_zero_counts_rejected(self):
        with pytest.raises(ValidationError):
            tm.TomographyCounts({b: (0, 0) for b in MeasurementBasis})

    def test_missing_basis_rejected(self):
        with pytest.raises(ValidationError):
            tm.TomographyCounts({MeasurementBasis.HV: (10, 10)})


class TestCountsCsv:
    def test_round_trip(self, tmp_path):
        counts = tm.TomographyCounts({MeasurementBasis.HV: (123, 45),
                                      MeasurementBasis.PM: (67, 89),
                                      MeasurementBasis.RL: (10, 11)})
        path = tmp_path / "counts.csv"
        tm.write_counts_csv(path, counts, "# test header")
        back = tm.read_counts_csv(path)
        assert back.counts == counts.counts


class TestProcessFromPairs:
    def _outputs(self, transform):
        return [qs.DensityMatrix(transform(s.density().entries))
                for s in tm.PROBE_STATES]

    def test_identity_channel(self):
        rec = tm.process_from_pairs(tm.PROBE_STATES, self._outputs(lambda m: m))
        assert abs(rec.chi_raw[0, 0] - 1.0) < 1e-10
        assert np.abs(rec.chi_raw - tm.CHI_IDEAL).max() < 1e-10

    def test_bit_flip_channel(self):
        x = qs.PauliOperator.X.matrix
        rec = tm.process_from_pairs(tm.PROBE_STATES,
                                    self._outputs(lambda m: x @ m @ x))
        assert rec.chi.chi[1, 1].real == pytest.approx(1.0, abs=1e-10)

    def test_dephasing_channel(self):
        z = qs.PauliOperator.Z.matrix
        rec = tm.process_from_pairs(
            tm.PROBE_STATES, self._outputs(lambda m: 0.5 * m + 0.5 * z @ m @ z))
        assert np.allclose(np.diag(rec.chi.chi), [0.5, 0, 0, 0.5], atol=1e-10)
        assert np.abs(rec.chi.chi - np.diag(np.diag(rec.chi.chi))).max() < 1e-10

    def test_recovers_random_channels_exactly(self, rng):
        for _ in range(20):
            ks = random_channel(rng)
            rec = tm.process_from_pairs(
                tm.PROBE_STATES, self._outputs(lambda m: apply_kraus(ks, m)))
            # reconstructed chi must reproduce the channel on arbitrary states
            probe = qs.random_pure_state(rng).density().entries
            direct = apply_kraus(ks, probe)
            via_chi = tm.apply_chi(rec.chi_raw, probe)
            assert np.abs(direct - via_chi).max() < 1e-8
            # and the physical projection stays essentially unchanged
            assert np.abs(rec.chi.chi - rec.chi_raw).max() < 1e-8

    def test_recovery_from_finite_count_tomography(self, rng):
        for _ in range(5):
            ks = random_channel(rng, 2)
            outs = []
            for s in tm.PROBE_STATES:
                rho = qs.DensityMatrix(apply_kraus(ks, s.density().entries))
                outs.append(tm.mle_state(counts_from_state(rho, 10_000, rng)).rho)
            rec = tm.process_from_pairs(tm.PROBE_STATES, outs)
            exact = tm.process_from_pairs(
                tm.PROBE_STATES,
                [qs.DensityMatrix(apply_kraus(ks, s.density().entries))
                 for s in tm.PROBE_STATES])
            assert np.linalg.norm(rec.chi.chi - exact.chi.chi) < 0.05

    def test_wrong_probe_set_rejected(self):
        probes = (qs.H, qs.V, qs.P, qs.L)
        with pytest.raises(ValidationError):
            tm.process_from_pairs(probes, [s.density() for s in probes])


class TestProcessFidelity:
    def test_identity_with_itself(self):
        ident = tm.ProcessMatrix.identity()
        assert tm.process_fidelity(ident, ident) == pytest.approx(1.0)

    def test_dephasing_against_identity(self):
        chi = tm.ProcessMatrix(np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex))
        assert tm.process_fidelity(chi, tm.ProcessMatrix.identity()) == \
            pytest.approx(0.5)

    def test_bounds_and_self_consistency(self, rng):
        for _ in range(30):
            ks = random_channel(rng)
            rec = tm.process_from_pairs(
                tm.PROBE_STATES,
                [qs.DensityMatrix(apply_kraus(ks, s.density().entries))
                 for s in tm.PROBE_STATES])
            f = tm.process_fidelity(rec.chi, tm.ProcessMatrix.identity())
            assert -1e-9 <= f <= 1.0 + 1e-9
            self_f = tm.process_fidelity(rec.chi, rec.chi)
            assert self_f == pytest.approx(
                float(np.trace(rec.chi.chi @ rec.chi.chi).real), abs=1e-12)


class TestBlochMap:
    def test_identity(self):
        bm = tm.bloch_map(tm.ProcessMatrix.identity())
        assert np.allclose(bm.m, np.eye(3), atol=1e-12)
        assert np.allclose(bm.c, 0, atol=1e-12)

    def test_dephasing_collapses_equator(self):
        chi = tm.ProcessMatrix(np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex))
        bm = tm.bloch_map(chi)
        assert np.allclose(bm.m, np.diag([0, 0, 1]), atol=1e-12)
        assert np.allclose(bm.c, 0, atol=1e-12)

    def test_fully_depolarizing(self):
        chi = tm.ProcessMatrix(np.diag([0.25, 0.25, 0.25, 0.25]).astype(complex))
        bm = tm.bloch_map(chi)
        assert np.allclose(bm.m, 0, atol=1e-12)
        assert np.allclose(bm.c, 0, atol=1e-12)

    def test_bit_flip_is_pi_rotation_about_x(self):
        chi = np.zeros((4, 4), dtype=complex)
        chi[1, 1] = 1.0
        bm = tm.bloch_map(tm.ProcessMatrix(chi))
        assert np.allclose(bm.m, np.diag([1, -1, -1]), atol=1e-12)

    def test_unit_ball_maps_into_unit_ball(self, rng):
        for _ in range(10):
            ks = random_channel(rng)
            rec = tm.process_from_pairs(
                tm.PROBE_STATES,
                [qs.DensityMatrix(apply_kraus(ks, s.density().entries))
                 for s in tm.PROBE_STATES])
            pts = tm.bloch_map(rec.chi).deformed_sphere(1000)
            assert np.linalg.norm(pts, axis=1).max() <= 1.0 + 1e-6
