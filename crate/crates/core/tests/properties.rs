mod common;

use adaptrack::adaptation::AdapterBank;
use adaptrack::bench::metrics::{auc, precision_curve, success_curve};
use adaptrack::kcf::{kernel_correlation, peak_offset, KcfModel, KcfParams, KernelType};
use adaptrack::ops::conv2d;
use adaptrack::tracker::{cell_offset, fuse_responses, CachedTap, FeatureCache, Rect, WindowGeometry};
use adaptrack::Tensor;
use common::*;
use proptest::prelude::*;

fn lin(a: &Tensor, sa: f32, b: &Tensor, sb: f32) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| sa * x + sb * y).collect();
    Tensor::from_vec(a.height(), a.width(), a.channels(), data).unwrap()
}

fn window() -> impl Strategy<Value = WindowGeometry> {
    (-50.0f64..250.0, -50.0f64..250.0, 1.0f64..120.0, 1.0f64..120.0)
        .prop_map(|(x, y, w, h)| WindowGeometry::new(x, y, w, h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear(seed in any::<u64>(), a in -2.0f32..2.0, b in -2.0f32..2.0) {
        let mut r = rng(seed);
        let x = random_tensor(&mut r, 7, 6, 3);
        let y = random_tensor(&mut r, 7, 6, 3);
        let k = random_kernel(&mut r, 4, 3, 3, 3, false);
        let lhs = conv2d(&lin(&x, a, &y, b), &k, 1, 1).unwrap();
        let rhs = lin(&conv2d(&x, &k, 1, 1).unwrap(), a, &conv2d(&y, &k, 1, 1).unwrap(), b);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-4);
    }

    #[test]
    fn learned_adapter_is_linear(seed in any::<u64>(), a in -2.0f32..2.0, b in -2.0f32..2.0) {
        let mut r = rng(seed);
        let bank = AdapterBank::learned_random("t", 16, &[3, 5], seed).unwrap();
        let x = random_tensor(&mut r, 6, 6, 16);
        let y = random_tensor(&mut r, 6, 6, 16);
        let lhs = bank.apply(&lin(&x, a, &y, b)).unwrap();
        let rhs = lin(&bank.apply(&x).unwrap(), a, &bank.apply(&y).unwrap(), b);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-4);
    }

    #[test]
    fn random_mode_reduces_eightfold(k8 in 1usize..64, seed in any::<u64>()) {
        let bank = AdapterBank::random("t", k8 * 8, seed).unwrap();
        let x = random_tensor(&mut rng(seed), 3, 4, k8 * 8);
        let out = bank.apply(&x).unwrap();
        prop_assert_eq!(out.shape(), (3, 4, k8));
        prop_assert_eq!(&out, &AdapterBank::random("t", k8 * 8, seed).unwrap().apply(&x).unwrap());
    }

    #[test]
    fn kernel_flip_symmetry(seed in any::<u64>(), linear in any::<bool>()) {
        let p = KcfParams {
            kernel_type: if linear { KernelType::Linear } else { KernelType::Gaussian },
            kernel_sigma: 2.0,
            ..Default::default()
        };
        let mut r = rng(seed);
        let x = random_tensor(&mut r, 6, 7, 2);
        let z = random_tensor(&mut r, 6, 7, 2);
        let kxz = kernel_correlation(&x, &z, &p).unwrap();
        let kzx = kernel_correlation(&z, &x, &p).unwrap();
        for ty in 0..6 {
            for tx in 0..7 {
                let flipped = kzx.at(0, (6 - ty) % 6, (7 - tx) % 7);
                prop_assert!((kxz.at(0, ty, tx) - flipped).abs() < 1e-5);
            }
        }
        if !linear {
            prop_assert!(kxz.data().iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn detection_is_shift_equivariant(seed in any::<u64>(), dy in -5isize..5, dx in -5isize..5) {
        let mut r = rng(seed);
        let x = random_tensor(&mut r, 16, 16, 3);
        let z = random_tensor(&mut r, 16, 16, 3);
        let model = KcfModel::train(&x, &KcfParams::default()).unwrap();
        let base = model.detect(&z).unwrap();
        let (shifted, residue) = model.detect_with_residue(&z.roll(dy, dx)).unwrap();
        prop_assert!(max_abs_diff(&shifted, &base.roll(dy, dx)) < 1e-4);
        prop_assert!(residue < 1e-5);
    }

    #[test]
    fn fusion_argmax_ignores_weight_scale(seed in any::<u64>(), s in 0.01f32..100.0) {
        let mut r = rng(seed);
        let maps: Vec<Tensor> = (0..3).map(|_| random_tensor(&mut r, 9, 9, 1)).collect();
        let w = [0.02f32, 0.5, 1.0];
        let ws: Vec<f32> = w.iter().map(|v| v * s).collect();
        let a = fuse_responses(&maps, &w).unwrap();
        let b = fuse_responses(&maps, &ws).unwrap();
        prop_assert_eq!(peak_offset(&a), peak_offset(&b));
    }

    #[test]
    fn curves_are_monotone(
        boxes in prop::collection::vec((0.0f64..60.0, 0.0f64..60.0, 1.0f64..30.0, 1.0f64..30.0), 2..30),
        jitter in prop::collection::vec((-40.0f64..40.0, -40.0f64..40.0, 0.5f64..2.0), 30),
    ) {
        let gt: Vec<Rect> = boxes.iter().map(|&(x, y, w, h)| Rect::new(x, y, w, h)).collect();
        let res: Vec<Rect> = gt.iter().zip(&jitter).map(|(g, &(dx, dy, s))| Rect::new(g.x + dx, g.y + dy, g.w * s, g.h * s)).collect();
        let p = precision_curve(&res, &gt).unwrap();
        let s = success_curve(&res, &gt).unwrap();
        prop_assert_eq!(p.len(), 51);
        prop_assert_eq!(s.len(), 21);
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(p.iter().chain(&s).all(|v| (0.0..=1.0).contains(v)));
        let a = auc(&s);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}

/// Four explicit edge comparisons, written out independently of the library.
fn edges_inside(outer: &WindowGeometry, inner: &WindowGeometry) -> bool {
    let (ol, or) = (outer.center_x - outer.side_w / 2.0, outer.center_x + outer.side_w / 2.0);
    let (ot, ob) = (outer.center_y - outer.side_h / 2.0, outer.center_y + outer.side_h / 2.0);
    let (il, ir) = (inner.center_x - inner.side_w / 2.0, inner.center_x + inner.side_w / 2.0);
    let (it, ib) = (inner.center_y - inner.side_h / 2.0, inner.center_y + inner.side_h / 2.0);
    ol <= il && ir <= or && ot <= it && ib <= ob
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cache_hit_is_edge_containment(outer in window(), inner in window(), valid in any::<bool>()) {
        let mut cache = FeatureCache::default();
        cache.store(outer, Vec::new());
        if !valid {
            cache.invalidate();
        }
        prop_assert_eq!(cache.covers(&inner), valid && edges_inside(&outer, &inner));
        prop_assert!(cache.covers(&outer) == valid);
    }

    #[test]
    fn crop_offsets_follow_rounding_rule(
        outer in window(),
        dx in -60.0f64..60.0,
        dy in -60.0f64..60.0,
        map in 4usize..64,
    ) {
        let tap = CachedTap::spanning(Tensor::zeros(map, map, 1), &outer);
        let needed = outer.recentered(outer.center_x + dx, outer.center_y + dy);
        let sx = outer.side_w / map as f64;
        let sy = outer.side_h / map as f64;
        let expect = |d: f64, s: f64| -> isize {
            let q = d / s;
            let r = q.abs().floor() + if q.abs().fract() >= 0.5 { 1.0 } else { 0.0 };
            (r * q.signum()) as isize
        };
        prop_assert_eq!(cell_offset(dx, sx), expect(dx, sx));
        let rows = map / 2;
        let (top, left) = tap.crop_origin(&needed, rows, rows);
        let clamp = |v: isize| v.clamp(0, (map - rows) as isize) as usize;
        prop_assert_eq!(left, clamp(expect(needed.left() - outer.left(), sx)));
        prop_assert_eq!(top, clamp(expect(needed.top() - outer.top(), sy)));
    }
}
