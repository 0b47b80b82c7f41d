use gdntt::cli::{format_coefficients, parse_coefficients};
use gdntt::transform::bit_reverse_permute;
use gdntt::{simulate_polymul, simulate_transform, Direction, Ntt, NttParams, Polynomial, SimConfig};
use proptest::prelude::*;

const Q: u64 = 12289;

fn ntt(log_n: u32) -> Ntt {
    Ntt::new(NttParams::derive(1 << log_n, Q, 14).unwrap())
}

fn poly(t: &Ntt, c: Vec<u64>) -> Polynomial {
    Polynomial::new(c, t.params()).unwrap()
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0..Q, n)
}

fn sized(max_log: u32) -> impl Strategy<Value = (u32, Vec<u64>, Vec<u64>)> {
    (1..=max_log).prop_flat_map(|k| (Just(k), coeffs(1 << k), coeffs(1 << k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip((k, a, _) in sized(10)) {
        let t = ntt(k);
        let p = poly(&t, a);
        prop_assert_eq!(t.intt_gs(&t.ntt_ct(&p).unwrap()).unwrap(), p);
    }

    #[test]
    fn linearity((k, a, b) in sized(8), c in 0..Q) {
        let t = ntt(k);
        let (pa, pb) = (poly(&t, a.clone()), poly(&t, b.clone()));
        let sum: Vec<u64> = a.iter().zip(&b).map(|(&x, &y)| (x + y) % Q).collect();
        let scaled: Vec<u64> = a.iter().map(|&x| x * c % Q).collect();
        let fa = t.ntt_ct(&pa).unwrap();
        let fb = t.ntt_ct(&pb).unwrap();
        let fsum: Vec<u64> = fa.coeffs().iter().zip(fb.coeffs()).map(|(&x, &y)| (x + y) % Q).collect();
        prop_assert_eq!(t.ntt_ct(&poly(&t, sum)).unwrap().into_coeffs(), fsum);
        let fscaled: Vec<u64> = fa.coeffs().iter().map(|&x| x * c % Q).collect();
        prop_assert_eq!(t.ntt_ct(&poly(&t, scaled)).unwrap().into_coeffs(), fscaled);
    }

    #[test]
    fn convolution((k, a, b) in sized(8)) {
        let t = ntt(k);
        let (pa, pb) = (poly(&t, a), poly(&t, b));
        prop_assert_eq!(t.polymul_cyclic(&pa, &pb).unwrap(), t.schoolbook_cyclic(&pa, &pb).unwrap());
    }

    #[test]
    fn bit_reversal_is_an_involution(k in 0u32..12) {
        let v: Vec<usize> = (0..1usize << k).collect();
        let once = bit_reverse_permute(&v).unwrap();
        prop_assert_eq!(bit_reverse_permute(&once).unwrap(), v);
    }

    #[test]
    fn coefficient_text_round_trip((k, a, _) in sized(10)) {
        let t = ntt(k);
        let p = poly(&t, a);
        let text = format_coefficients(&p);
        prop_assert_eq!(parse_coefficients(&text, t.params(), "mem").unwrap(), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulator_matches_library((k, a, b) in sized(6)) {
        let t = ntt(k);
        let cfg = SimConfig::new(100.0);
        let (pa, pb) = (poly(&t, a), poly(&t, b));
        let f = simulate_transform(&t, &pa, Direction::Forward, &cfg).unwrap();
        prop_assert_eq!(&f.output, &t.ntt_ct(&pa).unwrap());
        let i = simulate_transform(&t, &pa, Direction::Inverse, &cfg).unwrap();
        prop_assert_eq!(&i.output, &t.intt_gs(&pa).unwrap());
        let m = simulate_polymul(&t, &pa, &pb, &cfg).unwrap();
        prop_assert_eq!(&m.output, &t.polymul_cyclic(&pa, &pb).unwrap());
        prop_assert_eq!(m.stats.stage3_cycles.len(), 3 * k as usize);
    }

    #[test]
    fn identical_runs_are_identical((k, a, _) in sized(5)) {
        let t = ntt(k);
        let cfg = SimConfig { trace: true, ..SimConfig::new(100.0) };
        let p = poly(&t, a);
        let x = simulate_transform(&t, &p, Direction::Forward, &cfg).unwrap();
        let y = simulate_transform(&t, &p, Direction::Forward, &cfg).unwrap();
        prop_assert_eq!(x.report.to_json(), y.report.to_json());
        prop_assert_eq!(&x.trace, &y.trace);
        gdntt::scheduler::validate_trace(x.trace.as_deref().unwrap()).unwrap();
    }
}
