use proptest::prelude::*;
use ultradiff::cantor::*;
use ultradiff::Error;

/// Images of `[0, eps0]` under every composition of `n` maps, outermost map first.
fn composed_intervals(p: &IfsParams, n: u32) -> Vec<(Vec<u8>, f64, f64)> {
    let mut out = Vec::new();
    for word in 0..(1u64 << n) {
        let digits: Vec<u8> = (0..n).map(|k| ((word >> (n - 1 - k)) & 1) as u8).collect();
        let (mut l, mut r) = (0.0, p.eps0());
        for &d in digits.iter().rev() {
            let f = |t| if d == 0 { p.f1(t) } else { p.f2(t) };
            (l, r) = (f(l), f(r));
        }
        out.push((digits, l, r));
    }
    out
}

fn naive_box_count(pf: &Prefractal, scale: f64) -> u64 {
    let boxes = (pf.params().eps0() / scale).ceil() as u64 + 1;
    (0..boxes)
        .filter(|&k| {
            let (a, b) = (k as f64 * scale, (k + 1) as f64 * scale);
            pf.intervals()
                .iter()
                .any(|iv| iv.right.min(b) - iv.left.max(a) > 1e-9 * scale)
        })
        .count() as u64
}

fn sampled_sum_coverage(a: &Prefractal, b: &Prefractal, samples: usize) -> f64 {
    let total = 2.0 * a.params().eps0();
    let hit = (0..samples)
        .filter(|&i| {
            let y = (i as f64 + 0.5) / samples as f64 * total;
            a.intervals().iter().any(|x| {
                let (lo, hi) = (y - x.right, y - x.left);
                b.intervals().iter().any(|z| z.left <= hi && z.right >= lo)
            })
        })
        .count();
    hit as f64 / samples as f64
}

#[test]
fn intervals_match_map_compositions() {
    for (eps0, beta) in [(1.0, 1.0 / 3.0), (2.0, 0.25), (0.7, 0.45), (5.0, 0.1)] {
        let p = make_params(eps0, beta).unwrap();
        for n in 0..=9 {
            let pf = build_prefractal(p, n).unwrap();
            let oracle = composed_intervals(&p, n);
            assert_eq!(pf.intervals().len(), oracle.len());
            for (digits, l, r) in oracle {
                let addr = CantorAddress::new(digits).unwrap();
                let iv = pf.address_to_interval(&addr).unwrap();
                let tol = 1e-14 * eps0;
                assert!(
                    (iv.left - l).abs() < tol && (iv.right - r).abs() < tol,
                    "eps0={eps0} beta={beta} n={n} addr={:?}: {iv:?} vs [{l}, {r}]",
                    addr.digits()
                );
            }
        }
    }
}

#[test]
fn gap_widths_and_positions() {
    let p = make_params(2.0, 0.25).unwrap();
    let pf = build_prefractal(p, 6).unwrap();
    for level in 1..=6 {
        let gaps = pf.gaps_at(level);
        assert_eq!(gaps.len(), 1 << (level - 1));
        let want = p.alpha() * p.eps0() * p.beta().powi(level as i32 - 1);
        for g in gaps {
            assert_eq!(g.level, level);
            assert!((g.width() - want).abs() < 1e-14);
        }
        assert!(gaps.windows(2).all(|w| w[0].right < w[1].left));
    }
    // Gaps and intervals tile [0, eps0].
    let mut pieces: Vec<(f64, f64)> = pf.intervals().iter().map(|i| (i.left, i.right)).collect();
    pieces.extend(pf.gaps().iter().map(|g| (g.left, g.right)));
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(pieces[0].0, 0.0);
    assert_eq!(pieces.last().unwrap().1, 2.0);
    for w in pieces.windows(2) {
        assert!((w[0].1 - w[1].0).abs() < 1e-15);
    }
}

#[test]
fn measure_identity_to_level_twenty() {
    for (eps0, beta) in [(1.0, 1.0 / 3.0), (3.0, 0.2), (0.5, 0.49)] {
        let p = make_params(eps0, beta).unwrap();
        for n in 0..=20 {
            let pf = build_prefractal(p, n).unwrap();
            assert_eq!(pf.intervals().len() as u64, 1 << n);
            let total = pf.retained_measure() + removed_measure(&p, n);
            assert!((total - eps0).abs() <= 1e-12 * eps0, "n={n}: {total}");
        }
    }
    let third = IfsParams::middle_third();
    let want = 1.0 - (2.0f64 / 3.0).powi(20);
    assert!((removed_measure(&third, 20) - want).abs() < 1e-12);
}

#[test]
fn widths_are_exact_powers() {
    for (eps0, beta) in [(1.0, 1.0 / 3.0), (2.0, 0.25), (0.3, 0.4)] {
        let p = make_params(eps0, beta).unwrap();
        for n in [0, 5, 13, 20] {
            let want = eps0 * beta.powi(n as i32);
            let pf = build_prefractal(p, n).unwrap();
            for iv in pf.intervals() {
                assert!((iv.width() - want).abs() <= 1e-12 * want);
                // The endpoints agree with the width up to their own rounding.
                assert!((iv.right - iv.left - want).abs() <= 4.0 * f64::EPSILON * eps0);
            }
        }
    }
}

#[test]
fn nesting_is_exhaustive_to_level_twenty() {
    for beta in [1.0 / 3.0, 0.25, 0.45] {
        let p = make_params(1.0, beta).unwrap();
        let mut coarse = build_prefractal(p, 0).unwrap();
        for n in 1..=20 {
            let fine = build_prefractal(p, n).unwrap();
            for (i, iv) in fine.intervals().iter().enumerate() {
                assert!(
                    coarse.intervals()[i / 2].contains_interval(iv),
                    "beta={beta} n={n} i={i}"
                );
            }
            coarse = fine;
        }
    }
}

#[test]
fn box_counts_match_naive_scan() {
    for beta in [1.0 / 3.0, 0.25, 0.2] {
        let pf = build_prefractal(make_params(1.0, beta).unwrap(), 7).unwrap();
        for scale in [
            0.3,
            0.1,
            1.0 / 9.0,
            0.05,
            1.0 / 27.0,
            0.013,
            1.0 / 81.0,
            0.004,
        ] {
            if scale <= pf.interval_width() {
                continue;
            }
            assert_eq!(
                box_count(&pf, scale),
                naive_box_count(&pf, scale),
                "beta={beta} scale={scale}"
            );
        }
    }
}

#[test]
fn box_dimension_tracks_similarity_dimension() {
    for beta in [1.0 / 3.0, 0.25, 0.2] {
        let p = make_params(1.0, beta).unwrap();
        let pf = build_prefractal(p, 12).unwrap();
        let scales: Vec<f64> = (2..=8).map(|k| beta.powi(k)).collect();
        let d = box_counting_dimension(&pf, &scales).unwrap();
        let s = 2f64.ln() / (1.0 / beta).ln();
        assert!((d - s).abs() < 0.02, "beta={beta}: {d} vs {s}");
        assert_eq!(similarity_dimension(&p), s);
    }
    assert!(
        (similarity_dimension(&IfsParams::middle_third()) - 0.630_929_753_571_457_4).abs()
            <= f64::EPSILON
    );
}

#[test]
fn minkowski_coverage_matches_sampling() {
    for beta in [1.0 / 3.0, 0.3, 0.2] {
        let p = make_params(1.0, beta).unwrap();
        for (na, nb) in [(2, 3), (4, 4), (5, 3)] {
            let a = build_prefractal(p, na).unwrap();
            let b = build_prefractal(p, nb).unwrap();
            let got = minkowski_sum_coverage(&a, &b).unwrap();
            let oracle = sampled_sum_coverage(&a, &b, 40_000);
            assert!(
                (got - oracle).abs() < 2e-3,
                "beta={beta} ({na},{nb}): {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn middle_third_sums_fill_the_interval() {
    let p = IfsParams::middle_third();
    let mut prev = 0.0;
    for n in 4..=10 {
        let pf = build_prefractal(p, n).unwrap();
        let c = minkowski_sum_coverage(&pf, &pf).unwrap();
        assert!(c >= prev);
        prev = c;
    }
    assert!(prev >= 0.999);
}

#[test]
fn coverage_monotone_in_each_argument() {
    let p = IfsParams::middle_third();
    let pfs: Vec<Prefractal> = (0..=8).map(|n| build_prefractal(p, n).unwrap()).collect();
    for fixed in [0usize, 3, 8] {
        let mut prev = 0.0;
        for n in 0..=8 {
            let c = minkowski_sum_coverage(&pfs[fixed], &pfs[n]).unwrap();
            assert!(c + 1e-15 >= prev, "fixed={fixed} n={n}");
            prev = c;
        }
    }
}

#[test]
fn error_kinds() {
    assert!(matches!(make_params(1.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(make_params(0.0, 0.3), Err(Error::Domain(_))));
    let p = IfsParams::middle_third();
    assert!(matches!(build_prefractal(p, 25), Err(Error::Resource(_))));
    let a = build_prefractal(p, 12).unwrap();
    let b = build_prefractal(p, 13).unwrap();
    assert!(matches!(
        minkowski_sum_coverage(&a, &b),
        Err(Error::Resource(_))
    ));
    assert!(box_counting_dimension(&a, &[0.1, 0.01]).is_err());
    assert!(box_counting_dimension(&a, &[0.1, 0.01, 1e-9]).is_err());
}

#[test]
fn csv_schema() {
    let pf = build_prefractal(IfsParams::middle_third(), 2).unwrap();
    let mut buf = Vec::new();
    pf.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,index,left,right,kind"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().filter(|r| r[4] == "interval").count(), 4);
    assert_eq!(rows.iter().filter(|r| r[4] == "gap").count(), 3);
    for r in &rows {
        let left: f64 = r[2].parse().unwrap();
        let right: f64 = r[3].parse().unwrap();
        assert!(left < right);
    }
}

proptest! {
    #[test]
    fn measure_sum_holds(eps0 in 0.01f64..100.0, beta in 0.01f64..0.499, n in 0u32..=16) {
        let p = make_params(eps0, beta).unwrap();
        let pf = build_prefractal(p, n).unwrap();
        let total = pf.retained_measure() + removed_measure(&p, n);
        prop_assert!((total - eps0).abs() <= 1e-12 * eps0);
        prop_assert!((p.alpha() + 2.0 * p.beta() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn children_nest_in_parents(eps0 in 0.01f64..100.0, beta in 0.01f64..0.499, n in 1u32..=12) {
        let p = make_params(eps0, beta).unwrap();
        let coarse = build_prefractal(p, n - 1).unwrap();
        let fine = build_prefractal(p, n).unwrap();
        for (i, iv) in fine.intervals().iter().enumerate() {
            prop_assert!(coarse.intervals()[i / 2].contains_interval(iv));
        }
    }

    #[test]
    fn addresses_round_trip(n in 0u32..=20, frac in 0.0f64..1.0) {
        let index = ((1u64 << n) as f64 * frac) as u64;
        let addr = CantorAddress::from_index(n, index).unwrap();
        prop_assert_eq!(addr.len(), n as usize);
        prop_assert_eq!(addr.index(), index);
        let left = interval_left(&IfsParams::middle_third(), n, index);
        let pf = build_prefractal(IfsParams::middle_third(), n.min(14)).unwrap();
        if n <= 14 {
            prop_assert!((pf.address_to_interval(&addr).unwrap().left - left).abs() < 1e-15);
        }
    }
}
