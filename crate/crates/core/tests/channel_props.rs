mod common;

use common::{channel, noise, pv, rng};
use mcpa::channel::{draw_channels, sinr, RadioConstants, RobotGeometry};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn large_scale_gain_at_one_metre() {
    let g = RadioConstants::default().large_scale_gain(1.0);
    let oracle = 1e-3 * 1e-2 * 1.0f64.powf(-3.0);
    assert!((g - oracle).abs() <= 1e-18, "{g}");
}

#[test]
fn single_robot_matrix_is_its_gain() {
    for n in [1, 7, 256] {
        let s = draw_channels(&common::radio(n), &RobotGeometry::new(vec![80.0], 20.0), 4).unwrap();
        assert_eq!(s.num_robots(), 1);
        assert_eq!(s.interference(0, 0), s.gain(0));
    }
}

#[test]
fn draws_are_bit_identical_per_seed() {
    let a = channel(6, 64, 77);
    let b = channel(6, 64, 77);
    assert_eq!(a, b);
    assert_ne!(a, channel(6, 64, 78));
}

#[test]
fn bad_geometry_and_antennas_rejected() {
    assert!(draw_channels(&common::radio(0), &RobotGeometry::new(vec![50.0], 20.0), 0).is_err());
    assert!(draw_channels(&common::radio(4), &RobotGeometry::new(vec![50.0, 0.0], 20.0), 0).is_err());
    assert!(draw_channels(&common::radio(4), &RobotGeometry::new(vec![-3.0], 20.0), 0).is_err());
}

#[test]
fn cross_gain_ratio_median_shrinks_with_antennas() {
    let medians: Vec<f64> = [16usize, 256, 4096]
        .iter()
        .map(|&n| {
            let mut ratios = Vec::new();
            for seed in 0..1000u64 {
                let s = channel(4, n, seed);
                for k in 0..4 {
                    for j in 0..4 {
                        if k != j {
                            ratios.push(s.interference(k, j) / s.gain(j));
                        }
                    }
                }
            }
            ratios.sort_by(f64::total_cmp);
            ratios[ratios.len() / 2]
        })
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn sinr_matches_formula() {
    let mut r = rng(5);
    for seed in 0..200 {
        let k = 2 + seed as usize % 9;
        let s = channel(k, 32, seed);
        let p = common::sparse_point(&mut r, k, 0.2);
        let v = pv(&p, 0.2);
        for i in 0..k {
            let mut interference = 0.0;
            for j in 0..k {
                if j != i {
                    interference += s.interference(i, j) * p[j];
                }
            }
            let oracle = s.gain(i) * p[i] / (interference + noise());
            let got = sinr(&s, &v, noise(), i).unwrap();
            assert!((got - oracle).abs() <= 1e-12 * oracle.abs(), "{got} vs {oracle}");
            if p[i] == 0.0 {
                assert_eq!(got, 0.0);
            }
        }
    }
}

#[test]
fn sinr_is_one_on_matched_orthogonal_link() {
    let nz = noise();
    let s = mcpa::channel::ChannelState::orthogonal(vec![1e-9, 2e-9]).unwrap();
    let p = pv(&[nz / 1e-9, 0.1], 1.0);
    assert!((sinr(&s, &p, nz, 0).unwrap() - 1.0).abs() < 1e-15);
    assert!(sinr(&s, &p, nz, 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn drawn_states_satisfy_invariants(seed in any::<u64>(), k in 1usize..12, n in 1usize..80) {
        let s = channel(k, n, seed);
        for i in 0..k {
            prop_assert!(s.gain(i) >= 0.0);
            prop_assert_eq!(s.interference(i, i), s.gain(i));
            for j in 0..k {
                prop_assert!(s.interference(i, j) >= 0.0);
                prop_assert!(s.interference(i, j) <= s.gain(j));
            }
        }
    }

    #[test]
    fn sinr_monotone_in_own_and_other_power(seed in any::<u64>(), k in 2usize..8, scale in 1.0f64..4.0) {
        let s = channel(k, 16, seed);
        let mut r = rng(seed);
        let p = common::feasible_point(&mut r, k, 0.1, 0.0);
        let i = r.random_range(0..k);
        let j = (i + 1 + r.random_range(0..k - 1)) % k;
        let base = sinr(&s, &pv(&p, 1.0), noise(), i).unwrap();

        let mut own = p.clone();
        own[i] *= scale;
        prop_assert!(sinr(&s, &pv(&own, 1.0), noise(), i).unwrap() >= base);

        let mut other = p.clone();
        other[j] *= scale;
        prop_assert!(sinr(&s, &pv(&other, 1.0), noise(), i).unwrap() <= base);
    }
}
