import numpy as np
import pytest

from micropred.dataio import volume_fraction
from micropred.preprocess import extract_sections
from micropred.spatialstats import two_point
from micropred.synth import (
    PLANTED_E0,
    PLANTED_E1,
    PLANTED_WEIGHTS,
    gen_ensemble,
    gen_volume,
    planted_property,
    surface_density,
)


class TestGenVolume:
    def test_deterministic(self):
        v1 = gen_volume((12, 12, 12), 0.4, 2.0, seed=5)
        v2 = gen_volume((12, 12, 12), 0.4, 2.0, seed=5)
        assert (v1.voxels == v2.voxels).all()
        v3 = gen_volume((12, 12, 12), 0.4, 2.0, seed=6)
        assert (v1.voxels != v3.voxels).any()

    def test_volume_fraction_hit_within_one_voxel(self, rng):
        for _ in range(25):
            dims = tuple(int(d) for d in rng.integers(8, 20, size=3))
            vf = float(rng.uniform(0.15, 0.85))
            vol = gen_volume(dims, vf, float(rng.uniform(0.5, 3.0)),
                             seed=int(rng.integers(0, 1 << 31)))
            n = np.prod(dims)
            assert abs(volume_fraction(vol) - vf) <= 1.0 / n + 1e-12

    def test_labels_binary(self):
        vol = gen_volume((10, 10, 10), 0.5, 1.5, seed=0)
        assert set(np.unique(vol.voxels)) <= {0, 1}

    def test_correlation_length_controls_clustering(self):
        # smoother fields keep neighbors equal more often, so the
        # one-voxel-shift autocorrelation rises with corr_len
        def neighbor_corr(corr_len):
            vol = gen_volume((24, 24, 24), 0.5, corr_len, seed=11)
            sec = extract_sections(vol)[2]
            corr = two_point(sec, "auto", "periodic")
            cy, cx = corr.center
            return corr.values[cy, cx + 1]

        rough = neighbor_corr(0.0)
        mid = neighbor_corr(1.5)
        smooth = neighbor_corr(4.0)
        assert rough < mid < smooth

    def test_anisotropic_corr_len(self):
        # strong smoothing along x only: x-neighbor agreement outpaces z
        vol = gen_volume((24, 24, 24), 0.5, (4.0, 0.5, 0.5), seed=3)
        sx, sy, sz = surface_density(vol)
        assert sx < sy and sx < sz

    def test_vf_range_validated(self):
        with pytest.raises(ValueError):
            gen_volume((8, 8, 8), 0.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            gen_volume((8, 8, 8), 1.0, 1.0, seed=0)


class TestSurfaceDensity:
    def test_checkerboard_all_interfaces(self):
        vox = (np.indices((6, 6, 6)).sum(axis=0) % 2).astype(np.uint8)
        from micropred.dataio import Volume3D
        sd = surface_density(Volume3D((6, 6, 6), vox))
        assert sd == (1.0, 1.0, 1.0)

    def test_uniform_no_interfaces(self):
        from micropred.dataio import Volume3D
        vol = Volume3D((5, 5, 5), np.ones((5, 5, 5), np.uint8))
        assert surface_density(vol) == (0.0, 0.0, 0.0)

    def test_slab_along_one_axis(self):
        # two slabs split on x: interfaces only on the x axis (periodic:
        # two boundary planes out of nx=8)
        from micropred.dataio import Volume3D
        vox = np.zeros((8, 4, 4), np.uint8)
        vox[:4] = 1
        sd = surface_density(Volume3D((8, 4, 4), vox))
        assert sd == (2.0 / 8.0, 0.0, 0.0)


class TestPlantedProperty:
    def test_closed_form_oracle(self):
        vol = gen_volume((14, 14, 14), 0.45, 1.5, seed=21)
        v = vol.voxels.astype(float)
        vf = v.mean()
        s = [float(np.mean(v != np.roll(v, 1, axis=a))) for a in range(3)]
        w = PLANTED_WEIGHTS
        expected = PLANTED_E0 + (PLANTED_E1 - PLANTED_E0) * vf * (
            1 - w[0] * s[0] - w[1] * s[1] - w[2] * s[2])
        assert planted_property(vol) == pytest.approx(expected, abs=1e-12)

    def test_value_in_physical_band(self, rng):
        for _ in range(10):
            vol = gen_volume((12, 12, 12), float(rng.uniform(0.2, 0.8)),
                             float(rng.uniform(0.5, 3)), seed=int(rng.integers(1 << 31)))
            e = planted_property(vol)
            assert PLANTED_E0 < e < PLANTED_E1

    def test_direction_weights_outside_section_mixture_span(self):
        # mean-pooled center sections can only sense the mixtures
        # (2,1,0)/3 and (0,1,2)/3 of the per-axis statistics (rows of the
        # three maps sample axes y,x,x; columns sample z,z,y), so the
        # planted weights must not satisfy w_y = (w_x + w_z) / 2
        wx, wy, wz = PLANTED_WEIGHTS
        assert abs(wy - (wx + wz) / 2.0) > 0.05


class TestEnsemble:
    def test_deterministic_and_unique_ids(self):
        e1 = gen_ensemble(6, (10, 10, 10), seed=4)
        e2 = gen_ensemble(6, (10, 10, 10), seed=4)
        assert [sid for sid, _, _ in e1] == [f"s{i:05d}" for i in range(6)]
        for (_, v1, t1), (_, v2, t2) in zip(e1, e2):
            assert (v1.voxels == v2.voxels).all()
            assert t1 == t2

    def test_targets_match_planted_property(self):
        for sid, vol, target in gen_ensemble(4, (8, 8, 8), seed=9):
            assert target == planted_property(vol)

    def test_vf_spread(self):
        ens = gen_ensemble(12, (12, 12, 12), vf_range=(0.2, 0.8), seed=1)
        vfs = [volume_fraction(v) for _, v, _ in ens]
        assert max(vfs) - min(vfs) > 0.2
