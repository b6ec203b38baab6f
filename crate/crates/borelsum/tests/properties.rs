//! Property tests: the text parsers are total on arbitrary input, and the
//! convolution algebra behaves like one on random data.

use borelsum::checkpoint::parse_checkpoint;
use borelsum::config::RunConfig;
use borelsum::potentials::Potential;
use borelsum::summation::{convolve, BorelFunction};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn config_parser_never_panics(text in "\\PC{0,400}") {
        let _ = RunConfig::from_text(&text);
    }

    #[test]
    fn config_parser_never_panics_structured(
        section in "[a-z]{1,12}",
        key in "[a-z_]{1,12}",
        value in "[ -~]{0,24}",
    ) {
        let text = format!("[{section}]\n{key} = {value}\n");
        let _ = RunConfig::from_text(&text);
    }

    #[test]
    fn checkpoint_parser_never_panics(text in "\\PC{0,400}") {
        let _ = parse_checkpoint(&text);
    }

    #[test]
    fn checkpoint_parser_never_panics_near_valid(
        n_xi in 1usize..40, n_eta in 1usize..40, n_rho in 1usize..40,
        samples in 0usize..64,
    ) {
        let mut text = format!(
            "borelsum-checkpoint v1\nbranch = plus\nxi_halfspan = {}\nn_xi = {n_xi}\nt_max = {}\nn_eta = {n_eta}\nn_rho = {n_rho}\nquad_order = 8\ninterp = order-6\nnu = {}\niteration = 1\npotential_hash = 00000000000000aa\nsamples = {samples}\n",
            format!("{:016x}", 0.85f64.to_bits()),
            format!("{:016x}", 3.0f64.to_bits()),
            format!("{:016x}", 7.9f64.to_bits()),
        );
        for i in 0..samples {
            text.push_str(&format!(
                "{:016x},{:016x}\n",
                (i as f64).to_bits(),
                (i as f64 * 0.5).to_bits()
            ));
        }
        let _ = parse_checkpoint(&text);
    }

    #[test]
    fn convolution_commutes_on_random_cubics(
        a0 in -2.0..2.0f64, a1 in -2.0..2.0f64, a2 in -2.0..2.0f64, a3 in -2.0..2.0f64,
        b0 in -2.0..2.0f64, b1 in -2.0..2.0f64, b2 in -2.0..2.0f64,
    ) {
        let n = 129;
        let f = BorelFunction::from_fn(
            |t| Complex64::new(a0 + a1 * t + a2 * t * t, a3 * t),
            1.5,
            n,
        );
        let g = BorelFunction::from_fn(
            |t| Complex64::new(b0 + b1 * t, b2 * t * t),
            1.5,
            n,
        );
        let fg = convolve(&f, &g).unwrap();
        let gf = convolve(&g, &f).unwrap();
        let scale = 1.0 + fg.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in fg.values.iter().zip(&gf.values) {
            prop_assert!((x - y).norm() <= 1e-11 * scale);
        }
    }

    #[test]
    fn rational_potentials_reflect_across_the_axis(
        c0 in -3.0..3.0f64, c1 in -3.0..3.0f64,
        re in -0.8..0.8f64, im in 0.01..2.0f64,
    ) {
        // real-coefficient rationals with poles kept off the strip
        let p = Potential::rational(vec![c0, c1], vec![5.0, 0.0, 1.0]);
        let z = Complex64::new(re, im);
        let a = p.eval(z, 0.0).unwrap();
        let b = p.eval(z.conj(), 0.0).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
    }
}
