use proptest::prelude::*;

use sigmahom::algebra::{
    circle_dist, dirac_point, group_mul, spectral_derivative, spectral_divergence, spectral_gradient,
    spectrum_convolve, AlgebraSpec, TorusField, TorusPoint,
};
use sigmahom::numerics::{fft_convolve, Axis, ConvMode, Grid};
use sigmahom::sigma::{double_convolution, micro_translate_limit, MacroGrid, TwoScaleField};

const TAU: f64 = std::f64::consts::TAU;

/// Band-limited field from `(kx, ky, cos, sin)` modes.
fn trig_field(spec: &AlgebraSpec, dims: &[usize], modes: &[(i32, i32, f64, f64)]) -> TorusField {
    TorusField::from_fn(spec, dims, |s| {
        modes
            .iter()
            .map(|&(kx, ky, a, b)| {
                let arg = TAU * (kx as f64 * s[0] + if s.len() > 1 { ky as f64 * s[1] } else { 0.0 });
                a * arg.cos() + b * arg.sin()
            })
            .sum()
    })
    .unwrap()
}

fn modes(max_k: i32) -> impl Strategy<Value = Vec<(i32, i32, f64, f64)>> {
    prop::collection::vec((-max_k..=max_k, -max_k..=max_k, -1.0..1.0f64, -1.0..1.0f64), 1..6)
}

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

fn p1() -> AlgebraSpec {
    AlgebraSpec::periodic(1).unwrap()
}

fn p2() -> AlgebraSpec {
    AlgebraSpec::periodic(2).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_is_translation_invariant(m in modes(7), a in (0.0..1.0f64, 0.0..1.0f64)) {
        let u = trig_field(&p2(), &[16, 16], &m);
        let t = u.translate(&TorusPoint::new(vec![a.0, a.1])).unwrap();
        prop_assert!((t.mean() - u.mean()).abs() < 1e-12);
    }

    #[test]
    fn dirac_map_is_a_homomorphism_on_dyadic_points(x in -(1i64 << 30)..(1i64 << 30), y in -(1i64 << 30)..(1i64 << 30)) {
        let spec = p1();
        let (x, y) = (x as f64 / 1024.0, y as f64 / 1024.0);
        let lhs = dirac_point(&[x + y], &spec).unwrap();
        let rhs = group_mul(&dirac_point(&[x], &spec).unwrap(), &dirac_point(&[y], &spec).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn dirac_map_is_a_homomorphism_up_to_rounding(x in -1e3..1e3f64, y in -1e3..1e3f64) {
        let spec = AlgebraSpec::quasi_periodic(vec![vec![1.0], vec![2f64.sqrt()]]).unwrap();
        let lhs = dirac_point(&[x + y], &spec).unwrap();
        let rhs = group_mul(&dirac_point(&[x], &spec).unwrap(), &dirac_point(&[y], &spec).unwrap()).unwrap();
        for (a, b) in lhs.coords().iter().zip(rhs.coords()) {
            prop_assert!(circle_dist(*a, *b) < 1e-11);
        }
    }

    #[test]
    fn spectrum_convolution_satisfies_young(u in samples(64), v in samples(64), which in 0usize..3) {
        let (p, q) = [(1.0, 1.0), (2.0, 1.0), (1.5, 1.2)][which];
        let m = 1.0 / (1.0 / p + 1.0 / q - 1.0);
        let u = TorusField::new(&p1(), &[64], u).unwrap();
        let v = TorusField::new(&p1(), &[64], v).unwrap();
        let w = spectrum_convolve(&u, &v).unwrap();
        prop_assert!(w.norm(m) <= u.norm(p) * v.norm(q) * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn integration_by_parts(mu in modes(5), mv in modes(5)) {
        let spec = AlgebraSpec::quasi_periodic(vec![vec![1.0, 0.5], vec![-0.25, 1.0]]).unwrap();
        let u0 = trig_field(&spec, &[16, 16], &mu);
        let u1 = trig_field(&spec, &[16, 16], &mv);
        let v = trig_field(&spec, &[16, 16], &mv.iter().map(|&(a, b, c, d)| (b, a, d, c)).collect::<Vec<_>>());
        let div = spectral_divergence(&[u0.clone(), u1.clone()]).unwrap();
        let grad = spectral_gradient(&v).unwrap();
        let lhs: f64 = div.values().iter().zip(v.values()).map(|(a, b)| a * b).sum::<f64>() / 256.0;
        let rhs: f64 = [u0, u1]
            .iter()
            .zip(&grad)
            .map(|(u, g)| u.values().iter().zip(g.values()).map(|(a, b)| a * b).sum::<f64>() / 256.0)
            .sum();
        prop_assert!((lhs + rhs).abs() < 1e-10, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn product_rule_with_dealiasing(mu in modes(7), mv in modes(7)) {
        let u = trig_field(&p1(), &[32], &mu);
        let v = trig_field(&p1(), &[32], &mv);
        let lhs = spectral_derivative(&u.dealiased_product(&v).unwrap(), 0).unwrap();
        let du = spectral_derivative(&u, 0).unwrap();
        let dv = spectral_derivative(&v, 0).unwrap();
        let rhs: Vec<f64> = (0..32)
            .map(|i| du.values()[i] * v.values()[i] + u.values()[i] * dv.values()[i])
            .collect();
        let scale = rhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!(max_diff(lhs.values(), &rhs) < 1e-11 * scale);
    }

    #[test]
    fn convolution_commutes_with_translation(u in samples(32), v in samples(32), r in 0usize..32) {
        let u = TorusField::new(&p1(), &[32], u).unwrap();
        let v = TorusField::new(&p1(), &[32], v).unwrap();
        let shift = TorusPoint::new(vec![r as f64 / 32.0]);
        let lhs = spectrum_convolve(&u, &v).unwrap().translate(&shift).unwrap();
        let rhs = spectrum_convolve(&u.translate(&shift).unwrap(), &v).unwrap();
        prop_assert!(max_diff(lhs.values(), rhs.values()) < 1e-12);
    }

    #[test]
    fn parseval(u in samples(64)) {
        let f = TorusField::new(&p2(), &[8, 8], u).unwrap();
        let spectral: f64 = f.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>() / (64.0 * 64.0);
        prop_assert!((f.norm(2.0) - spectral.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn circular_convolution_is_bilinear_and_commutative(
        u in samples(32), v in samples(32), w in samples(32), a in -2.0..2.0f64, b in -2.0..2.0f64,
    ) {
        let grid = Grid::torus(&[32]).unwrap();
        let conv = |x: &[f64], y: &[f64]| fft_convolve(x, y, &grid, ConvMode::Circular).unwrap();
        let combo: Vec<f64> = u.iter().zip(&w).map(|(x, z)| a * x + b * z).collect();
        let lhs = conv(&combo, &v);
        let (uv, wv) = (conv(&u, &v), conv(&w, &v));
        let rhs: Vec<f64> = uv.iter().zip(&wv).map(|(x, z)| a * x + b * z).collect();
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
        prop_assert!(max_diff(&uv, &conv(&v, &u)) < 1e-13);
    }

    #[test]
    fn micro_translations_compose(m in modes(3), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let grid = MacroGrid::interval(0.0, 1.0, 5).unwrap();
        let f = trig_field(&p1(), &[16], &m);
        let u0 = TwoScaleField::from_fn(grid, &p1(), &[16], |x, s| (1.0 + x[0]) * f.values()[((s[0] * 16.0).round() as usize) % 16]).unwrap();
        let step = micro_translate_limit(&micro_translate_limit(&u0, &[a]).unwrap(), &[b]).unwrap();
        let once = micro_translate_limit(&u0, &[a + b]).unwrap();
        prop_assert!(max_diff(step.values(), once.values()) < 1e-11);
    }

    #[test]
    fn double_convolution_satisfies_young(mu in modes(3), mv in modes(3), which in 0usize..2) {
        let (p, q, m) = [(1.0, 1.0, 1.0), (2.0, 1.0, 2.0)][which];
        let grid = MacroGrid::new(vec![Axis::new(-1.0, 1.0 / 32.0, 64)], 1).unwrap();
        let envelope = |x: f64| if x.abs() < 0.5 { (1.0 - 4.0 * x * x).powi(4) } else { 0.0 };
        let fu = trig_field(&p1(), &[16], &mu);
        let fv = trig_field(&p1(), &[16], &mv);
        let at = |f: &TorusField, s: f64| f.values()[((s * 16.0).round() as usize) % 16];
        let u = TwoScaleField::from_fn(grid.clone(), &p1(), &[16], |x, s| envelope(x[0]) * at(&fu, s[0])).unwrap();
        let v = TwoScaleField::from_fn(grid, &p1(), &[16], |x, s| envelope(x[0] * 1.5) * at(&fv, s[0])).unwrap();
        let w = double_convolution(&u, &v).unwrap();
        prop_assert!(w.lp_norm(m) <= u.lp_norm(p) * v.lp_norm(q) * (1.0 + 1e-9) + 1e-14);
    }
}
