use gfast_sim::canceler::{gdfe_snr, mfb_snr, mmse_snr, zf_snr};
use gfast_sim::channel::{diag_dominance, random_dd_channel, Direction};
use gfast_sim::linalg::{c, CVector};
use gfast_sim::precoder::{modulo_2a, zf_precoder, Scaling, Thp};
use gfast_sim::profile::{make_profile, ProfileId};
use gfast_sim::rate::bits_per_tone;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn modulo_lands_in_region(re in -1e3f64..1e3, im in -1e3f64..1e3, a in 0.01f64..10.0) {
        let z = modulo_2a(c(re, im), a);
        prop_assert!(z.re >= -a && z.re < a + 1e-12);
        prop_assert!(z.im >= -a && z.im < a + 1e-12);
        // folding is by whole multiples of 2A
        let k = (re - z.re) / (2.0 * a);
        prop_assert!((k - k.round()).abs() < 1e-6);
    }

    #[test]
    fn bits_monotone_and_capped(s1 in 0.0f64..1e9, s2 in 0.0f64..1e9, gap in 0.0f64..15.0, cap in 1u32..16) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let (b_lo, b_hi) = (bits_per_tone(lo, gap, cap), bits_per_tone(hi, gap, cap));
        prop_assert!(b_lo <= b_hi);
        prop_assert!(b_hi <= cap as f64);
        prop_assert!(b_lo >= 0.0);
    }

    #[test]
    fn canceler_snr_ordering(seed in any::<u64>(), n in 2usize..7, beta in 0.0f64..1.4, snr_db in 0.0f64..60.0) {
        let h = random_dd_channel(n, beta, &mut ChaCha8Rng::seed_from_u64(seed));
        let px = 10f64.powf(snr_db / 10.0);
        let zf = zf_snr(&h, px, 1.0).unwrap();
        let mmse = mmse_snr(&h, px, 1.0).unwrap();
        let order: Vec<usize> = (0..n).collect();
        let gdfe = gdfe_snr(&h, &order, px, 1.0).unwrap();
        for i in 0..n {
            let mfb = mfb_snr(&h, i, px, 1.0, Direction::Upstream);
            prop_assert!(zf[i] <= mmse[i] * (1.0 + 1e-9));
            prop_assert!(mmse[i] <= mfb * (1.0 + 1e-9));
            prop_assert!(gdfe[i] <= mfb * (1.0 + 1e-9));
        }
    }

    #[test]
    fn dominance_measure_is_exact(seed in any::<u64>(), n in 2usize..9, beta in 0.01f64..2.0) {
        let h = random_dd_channel(n, beta, &mut ChaCha8Rng::seed_from_u64(seed));
        let d = diag_dominance(&h).unwrap();
        prop_assert!((d.beta - beta).abs() < 1e-12 * beta.max(1.0));
        prop_assert!(d.beta >= d.row && d.beta >= d.col);
    }

    #[test]
    fn precoder_respects_row_budget(seed in any::<u64>(), n in 2usize..9, beta in 0.0f64..1.5) {
        let h = random_dd_channel(n, beta, &mut ChaCha8Rng::seed_from_u64(seed));
        for scaling in [Scaling::RowNorm, Scaling::Global] {
            let p = zf_precoder(&h, scaling).unwrap();
            for row in p.f.row_iter() {
                prop_assert!(row.norm() <= 1.0 + 1e-12);
            }
            // crosstalk-free: H·P is diagonal
            let hp = &h * &p.f;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        prop_assert!(hp[(i, j)].norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn thp_noiseless_round_trip(seed in any::<u64>(), n in 2usize..7, rot in 0usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_dd_channel(n, 1.2, &mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.rotate_left(rot % n);
        let thp = Thp::new(&h, &order).unwrap();
        let a = 2.0;
        let x = CVector::from_fn(n, |i, _| c(1.5 - 0.5 * i as f64 / n as f64, -0.5));
        let y = &h * thp.precode(&x, a).unwrap();
        let xhat = thp.receive_all(&y, a).unwrap();
        prop_assert!((xhat - x).norm() < 1e-9);
    }

    #[test]
    fn tone_powers_respect_mask(k in 0usize..4096) {
        let p = make_profile("gfast212").unwrap();
        let powers = p.tone_powers();
        let t = p.tone_frequency(k).unwrap();
        if t.active {
            prop_assert!(powers[k] <= p.mask_tone_power(k).unwrap() * (1.0 + 1e-12));
        } else {
            prop_assert_eq!(powers[k], 0.0);
        }
        prop_assert_eq!(p.id, ProfileId::Gfast212);
    }
}
