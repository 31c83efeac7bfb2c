use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ultradiff::cantor::{build_prefractal, make_params, IfsParams};
use ultradiff::ultrametric::*;
use ultradiff::Error;

const LOG3_2: f64 = 0.630_929_753_571_457_4;

/// Cantor function of `p / base^n` for the two-map set with ratio `1/base`,
/// from the base-`base` digits: digit 0 is the left branch, `base - 1` the
/// right branch, anything else a gap.
fn digit_oracle(p: u64, base: u64, n: u32) -> f64 {
    let mut digits = Vec::with_capacity(n as usize);
    let mut rest = p;
    for _ in 0..n {
        digits.push(rest % base);
        rest /= base;
    }
    digits.reverse();
    if rest == 1 {
        return 1.0;
    }
    let mut value = 0.0;
    let mut weight = 1.0;
    for d in digits {
        weight *= 0.5;
        if d == base - 1 {
            value += weight;
        } else if d != 0 {
            return value + weight;
        }
    }
    value
}

#[test]
fn cantor_function_matches_ternary_digits() {
    let p = IfsParams::middle_third();
    let n = 9;
    let denom = 3u64.pow(n);
    for k in 0..=denom {
        let x = k as f64 / denom as f64;
        let got = cantor_function(&p, x, DEFAULT_CANTOR_DEPTH).unwrap();
        let want = digit_oracle(k, 3, n);
        // A rounding of x by one ulp moves the value by at most ulp^s.
        assert!((got - want).abs() < 1e-9, "x = {k}/3^{n}: {got} vs {want}");
    }
}

#[test]
fn cantor_function_exact_in_base_four() {
    let p = make_params(1.0, 0.25).unwrap();
    let n = 8;
    let denom = 4u64.pow(n);
    for k in 0..=denom {
        let x = k as f64 / denom as f64;
        assert_eq!(
            cantor_function(&p, x, 48).unwrap(),
            digit_oracle(k, 4, n),
            "x = {k}/4^{n}"
        );
    }
}

#[test]
fn cantor_function_shape() {
    for (eps0, beta) in [(1.0, 1.0 / 3.0), (2.0, 0.25), (0.5, 0.4)] {
        let p = make_params(eps0, beta).unwrap();
        assert_eq!(cantor_function(&p, 0.0, 48).unwrap(), 0.0);
        assert_eq!(cantor_function(&p, eps0, 48).unwrap(), 1.0);
        let n = 100_000;
        let mut prev = 0.0;
        for k in 0..=n {
            let x = eps0 * k as f64 / n as f64;
            let v = cantor_function(&p, x.min(eps0), 48).unwrap();
            assert!(v >= prev, "beta={beta} x={x}");
            prev = v;
        }
        // Constant across each gap, and equal to the neighbouring endpoints.
        let pf = build_prefractal(p, 6).unwrap();
        for g in pf.gaps() {
            let at = |x: f64| cantor_function(&p, x, 48).unwrap();
            let mid = at(0.5 * (g.left + g.right));
            for f in [0.1, 0.3, 0.9] {
                assert_eq!(at(g.left + f * (g.right - g.left)), mid);
            }
            assert!((at(g.left) - mid).abs() < 1e-9 && (at(g.right) - mid).abs() < 1e-9);
        }
    }
    let p = IfsParams::middle_third();
    assert!(cantor_function(&p, 1.5, 48).is_err());
    assert!(cantor_function(&p, 0.5, 0).is_err());
    assert!(cantor_function(&p, 0.5, MAX_CANTOR_DEPTH + 1).is_err());
}

#[test]
fn gap_values_are_dyadic() {
    for m in 1..=20u32 {
        for i in 1..(1u64 << m) {
            let want = i as f64 / (1u64 << m) as f64;
            assert_eq!(gap_valuation(m, i, LOG3_2).unwrap(), want, "m={m} i={i}");
        }
    }
}

#[test]
fn gap_values_agree_with_cantor_function() {
    let p = IfsParams::middle_third();
    let pf = build_prefractal(p, 8).unwrap();
    for m in 1..=8u32 {
        // Every gap created up to level m, left to right, carries the
        // values i / 2^m for odd i.
        let mut gaps: Vec<_> = pf.gaps().iter().filter(|g| g.level <= m).collect();
        gaps.sort_by(|a, b| a.left.total_cmp(&b.left));
        for (j, g) in gaps.iter().enumerate() {
            let i = j as u64 + 1;
            let v = cantor_function(&p, 0.5 * (g.left + g.right), 48).unwrap();
            assert_eq!(v, gap_valuation(m, i, LOG3_2).unwrap());
        }
    }
}

#[test]
fn valuation_nonincreasing_on_grid() {
    for k in [3, 6, 9, 12] {
        let ctx = ScaleContext::new(10f64.powi(-k)).unwrap();
        let mut prev = f64::INFINITY;
        for j in 1..=2000 {
            let t = ctx.epsilon() * j as f64 / 2001.0;
            let v = valuation(&ctx, Infinitesimal::numeric(&ctx, t).unwrap()).unwrap();
            assert!(v <= prev && v >= 0.0);
            prev = v;
        }
    }
}

#[test]
fn triangle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut prev_bound = f64::INFINITY;
    for k in 3..=12 {
        let ctx = ScaleContext::new(10f64.powi(-k)).unwrap();
        assert!(ctx.triangle_slack() < prev_bound);
        prev_bound = ctx.triangle_slack();
        for _ in 0..20_000 {
            // Log-uniform magnitudes exercise widely separated valuations.
            let draw =
                |rng: &mut ChaCha8Rng| 0.5 * ctx.epsilon() * (1e-12f64).powf(rng.random::<f64>());
            let (a, b) = (draw(&mut rng), draw(&mut rng));
            let r = strong_triangle_check(&ctx, a, b).unwrap();
            assert!(r.holds, "eps=1e-{k} a={a} b={b}: {r:?}");
            assert!(r.v_sum <= r.v_a.min(r.v_b) + 1e-12);
            assert!(r.slack_used <= r.slack_bound + 1e-12);
        }
    }
}

#[test]
fn equal_summands_use_the_full_slack() {
    for k in [3, 6, 9] {
        let ctx = ScaleContext::new(10f64.powi(-k)).unwrap();
        let t = 1e-3 * ctx.epsilon();
        let r = strong_triangle_check(&ctx, t, t).unwrap();
        assert!((r.slack_used - r.slack_bound).abs() < 1e-12);
        assert!(r.holds);
    }
}

#[test]
fn exponent_form_min_rule() {
    let ctx = ScaleContext::new(1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_separated = 0.0f64;
    for _ in 0..10_000 {
        // Both exponents above log 2 / log(1/eps) keep the sum below eps.
        let da = 0.05 + 1.95 * rng.random::<f64>();
        let db = 0.05 + 1.95 * rng.random::<f64>();
        let (a, b) = (
            Infinitesimal::exponent(da).unwrap(),
            Infinitesimal::exponent(db).unwrap(),
        );
        let limit = valuation(&ctx, add_exponent_form(a, b).unwrap()).unwrap();
        assert_eq!(limit, da.min(db));
        let finite = valuation(
            &ctx,
            Infinitesimal::numeric(&ctx, a.realize(&ctx) + b.realize(&ctx)).unwrap(),
        )
        .unwrap();
        // Finite-scale offset is log(1 + eps^|da - db|) / log(1/eps).
        let gap = (da - db).abs();
        let predicted = (1.0 + ctx.epsilon().powf(gap)).ln() / ctx.log_inv();
        assert!((limit - finite - predicted).abs() < 1e-9, "da={da} db={db}");
        assert!(limit - finite <= ctx.triangle_slack() + 1e-12);
        if gap >= 0.05 {
            worst_separated = worst_separated.max(limit - finite);
        }
    }
    assert!(worst_separated < 0.01);
}

#[test]
fn inversion_partner_is_infinitesimal() {
    let ctx = ScaleContext::new(1e-3).unwrap();
    for t in [2e-3, 0.5, 10.0] {
        let tt = inversion_partner(t, &ctx, 1.0).unwrap();
        assert!((tt * t - 1e-6).abs() < 1e-20);
        assert!(tt < ctx.epsilon());
    }
    assert!(matches!(
        inversion_partner(1e-3, &ctx, 1.0),
        Err(Error::Domain(_))
    ));
}

#[test]
fn valuation_ode_on_wide_range() {
    let xs: Vec<f64> = (0..200).map(|i| 3.0 * 1.1f64.powi(i)).collect();
    let r = valuation_ode_residual(0.7, 1.0, &xs).unwrap();
    assert!(r < 1e-7, "{r}");
    assert!(matches!(
        jump_increment(0.1, 0.0),
        Err(Error::Singularity(_))
    ));
    assert!((jump_increment(0.01, 0.5).unwrap() - 1.0001).abs() < 1e-15);
}

proptest! {
    #[test]
    fn triangle_holds(k in 2i32..=14, u in 0.0f64..1.0, w in 0.0f64..1.0) {
        let ctx = ScaleContext::new(10f64.powi(-k)).unwrap();
        let (a, b) = (0.5 * ctx.epsilon() * u, 0.5 * ctx.epsilon() * w);
        let r = strong_triangle_check(&ctx, a, b).unwrap();
        prop_assert!(r.holds);
    }

    #[test]
    fn deformed_variable_increasing(t in 0.001f64..0.999, v1 in 0.0f64..5.0, dv in 1e-6f64..1.0) {
        let a = deformed_variable(t, v1).unwrap();
        let b = deformed_variable(t, v1 + dv).unwrap();
        prop_assert!(b > a);
        prop_assert_eq!(deformed_variable(t, 0.0).unwrap(), t);
    }

    #[test]
    fn cantor_function_monotone_pairs(x in 0.0f64..1.0, y in 0.0f64..1.0, beta in 0.05f64..0.49) {
        let p = make_params(1.0, beta).unwrap();
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(cantor_function(&p, lo, 48).unwrap() <= cantor_function(&p, hi, 48).unwrap());
    }
}
