mod common;

use std::f64::consts::PI;

use common::{model, random};
use ld_lattice::energy::energy;
use ld_lattice::lattice::StackKind;
use proptest::prelude::*;

fn kind(biperiodic: bool) -> StackKind {
    if biperiodic {
        StackKind::Biperiodic
    } else {
        StackKind::FiniteLayer
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flat_vector_round_trips(n in 1usize..5, bi in any::<bool>(), seed in 0u64..1000) {
        let n = if bi { n } else { n + 1 };
        let m = model(n, 0.3, kind(bi), 0.01, 16, 4);
        let cfg = random(&m, seed);
        let back = cfg.from_vec_like(&cfg.to_vec());
        prop_assert_eq!(back.to_vec(), cfg.to_vec());
    }

    #[test]
    fn energy_is_nonnegative(n in 1usize..5, bi in any::<bool>(), seed in 0u64..1000, r in 0.0..0.1f64) {
        let n = if bi { n } else { n + 1 };
        let m = model(n, 0.3, kind(bi), r, 16, 4);
        let e = energy(&m, &random(&m, seed));
        prop_assert!(e.condensation >= 0.0 && e.josephson >= 0.0 && e.magnetic >= 0.0);
        prop_assert!((e.condensation + e.josephson + e.magnetic - e.total).abs() <= 1e-12 * e.total.max(1.0));
    }

    #[test]
    fn energy_is_invariant_under_global_phase(n in 1usize..5, bi in any::<bool>(), seed in 0u64..1000, c in -7.0..7.0f64) {
        let n = if bi { n } else { n + 1 };
        let m = model(n, 0.3, kind(bi), 0.02, 16, 4);
        let cfg = random(&m, seed);
        let mut shifted = cfg.clone();
        shifted.alpha.iter_mut().for_each(|a| *a += c);
        let (a, b) = (energy(&m, &cfg).total, energy(&m, &shifted).total);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn energy_is_periodic_in_each_plane_phase(n in 2usize..5, bi in any::<bool>(), seed in 0u64..1000, w in -3i32..4) {
        let m = model(n, 0.3, kind(bi), 0.02, 16, 4);
        let cfg = random(&m, seed);
        let mut shifted = cfg.clone();
        shifted.alpha[0] += 2.0 * PI * w as f64;
        if bi {
            shifted.d -= 2.0 * PI * w as f64;
        }
        let (a, b) = (energy(&m, &cfg).total, energy(&m, &shifted).total);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{} vs {}", a, b);
    }
}
