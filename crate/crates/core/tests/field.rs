use proptest::prelude::*;
use spectra_core::grd;
use spectra_core::{block_average_downsample, nearest_upsample, GridField};

fn grid(h: usize, w: usize, values: Vec<f64>) -> GridField {
    GridField::new(values, h, w, 1.5, vec!["a".into()]).unwrap()
}

proptest! {
    #[test]
    fn downsampling_a_constant_is_constant(c in -1e6..1e6f64, f in 1usize..5, bh in 2usize..5, bw in 2usize..5) {
        let (h, w) = (f * bh, f * bw);
        let out = block_average_downsample(&grid(h, w, vec![c; h * w]), f).unwrap();
        prop_assert!(out.values().iter().all(|&v| v == c));
        prop_assert_eq!(out.dx(), 1.5 * f as f64);
    }

    #[test]
    fn downsampling_preserves_the_mean(
        (f, bh, bw, v) in (1usize..5, 2usize..5, 2usize..5)
            .prop_flat_map(|(f, bh, bw)| (Just(f), Just(bh), Just(bw), prop::collection::vec(-100.0..100.0f64, f * f * bh * bw)))
    ) {
        let fine = grid(f * bh, f * bw, v.clone());
        let coarse = block_average_downsample(&fine, f).unwrap();
        let m0 = v.iter().sum::<f64>() / v.len() as f64;
        let m1 = coarse.values().iter().sum::<f64>() / coarse.values().len() as f64;
        prop_assert!((m0 - m1).abs() <= 1e-12 * (1.0 + m0.abs()) * 100.0);
    }

    #[test]
    fn upsample_then_downsample_is_identity(
        (f, h, w, v) in (1usize..4, 2usize..6, 2usize..6)
            .prop_flat_map(|(f, h, w)| (Just(f), Just(h), Just(w), prop::collection::vec(-10.0..10.0f64, h * w)))
    ) {
        let g = grid(h, w, v);
        let back = block_average_downsample(&nearest_upsample(&g, f).unwrap(), f).unwrap();
        for (a, b) in back.values().iter().zip(g.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn constructor_and_accessors_round_trip(
        (h, w, v) in (2usize..6, 2usize..6).prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 2 * h * w)))
    ) {
        let f = GridField::new(v.clone(), h, w, 2.0, vec!["x".into(), "y".into()]).unwrap();
        prop_assert_eq!(f.values(), &v[..]);
        for c in 0..2 {
            for r in 0..h {
                for col in 0..w {
                    prop_assert_eq!(f.get(c, r, col).to_bits(), v[c * h * w + r * w + col].to_bits());
                }
            }
        }
        let bytes = grd::encode(&f);
        prop_assert_eq!(grd::decode(&bytes, std::path::Path::new("mem")).unwrap(), f);
    }
}
