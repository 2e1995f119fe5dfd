use minlift::families::random_family;
use minlift::imaging::{decode_pgm, encode_pgm, DiscreteGradient, ImageGray, PgmFormat};
use minlift::operators::prox_iso;
use minlift::splitting::{mt_apply, IterState};
use minlift::{HVector, LiftedPoint, LinearMap, SplitProblem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

proptest! {
    #[test]
    fn iso_prox_meets_optimality(
        (m, v) in (1usize..8).prop_flat_map(|m| (Just(m), vec_of(2 * m))),
        lambda2 in 0.01..3.0f64,
        lambda3 in 0.0..2.0f64,
    ) {
        let p = prox_iso(&HVector::new(v.clone()).unwrap(), lambda2, lambda3).unwrap();
        let p = p.as_slice();
        for i in 0..m {
            let (a, b) = (p[i], p[m + i]);
            let norm = a.hypot(b);
            if norm == 0.0 {
                // v ∈ λ₂·(unit ball)
                prop_assert!(v[i].hypot(v[m + i]) <= lambda2 + 1e-12);
            } else {
                // v − (1 + λ₃)p = λ₂ p/‖p‖
                let ra = v[i] - (1.0 + lambda3) * a - lambda2 * a / norm;
                let rb = v[m + i] - (1.0 + lambda3) * b - lambda2 * b / norm;
                prop_assert!(ra.hypot(rb) <= 1e-10);
            }
        }
    }

    #[test]
    fn mt_step_is_nonexpansive(seed in any::<u64>(), n in 2usize..6, d in 1usize..6, gamma in 0.05..0.95f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops = random_family(&mut rng, n, d).unwrap().into_iter().map(|o| o.with_mu(0.0)).collect();
        let problem = SplitProblem::new(ops, gamma).unwrap();
        let draw = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ k);
            let blocks = (0..n - 1)
                .map(|_| HVector::new((0..d).map(|_| rand::Rng::gen_range(&mut r, -4.0..4.0)).collect()).unwrap())
                .collect();
            LiftedPoint::new(blocks).unwrap()
        };
        let (z, zbar) = (draw(1), draw(2));
        let (tz, _) = mt_apply(&problem, &z).unwrap();
        let (tzbar, _) = mt_apply(&problem, &zbar).unwrap();
        prop_assert!(tz.distance(&tzbar) <= z.distance(&zbar) * (1.0 + 1e-12));
    }

    #[test]
    fn gradient_adjoint_identity((side, u, y) in (1usize..12).prop_flat_map(|s| (Just(s), vec_of(s * s), vec_of(2 * s * s)))) {
        let d = DiscreteGradient::new(side).unwrap();
        let lhs: f64 = d.apply(&u).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(d.adjoint(&y)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn pgm_raster_round_trips((side, raster) in (1usize..10).prop_flat_map(|s| (Just(s), prop::collection::vec(any::<u8>(), s * s))), ascii in any::<bool>()) {
        let format = if ascii { PgmFormat::Ascii } else { PgmFormat::Binary };
        let pixels = raster.iter().map(|&b| f64::from(b) / 255.0).collect();
        let img = ImageGray::new(side, pixels).unwrap();
        let bytes = encode_pgm(&img, format);
        let back = decode_pgm(&bytes).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(encode_pgm(&back, format), bytes);
    }
}
