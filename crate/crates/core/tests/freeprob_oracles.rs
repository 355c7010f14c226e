use std::sync::Arc;

use crossprob::coeffalgebra::{CoeffMatrix, CoeffSpace, ScalarMode, Shape};
use crossprob::crossedalg::{ActionSpec, CrossedElement, CrossedSpace};
use crossprob::freeprob::{
    alternating_centered_oracle, check_freeness, cumulant, cumulant_factorized,
    moments_from_cumulants, nested_cumulant, partitioned_moment, random_coeff, random_element,
    random_monomial, trace_cumulant, trace_partitioned, FreenessOptions, MonomialElement,
};
use crossprob::groupwords::{sample_word, GroupWord};
use crossprob::nclattice::{enumerate_nc, NcPartition};
use crossprob::rng::{self, Rng};
use crossprob::scenario::Scenario;
use crossprob::Error;
use proptest::prelude::*;

fn space(name: &str) -> Arc<CrossedSpace> {
    Arc::clone(&Scenario::load(name).unwrap().space)
}

fn all(s: &CrossedSpace) -> Vec<usize> {
    (0..s.group().factor_count()).collect()
}

/// Index of a block that is an interval of consecutive positions.
fn interval_block(blocks: &[Vec<usize>]) -> usize {
    blocks
        .iter()
        .position(|b| b.windows(2).all(|w| w[1] == w[0] + 1))
        .expect("every noncrossing partition has an interval block")
}

/// Removes an interval block `V`, evaluates it with `f`, and multiplies the
/// value into the neighbouring argument (onto the previous one from the right,
/// or onto the next one from the left when `V` starts the word). Positions are
/// then renumbered; this is the classical recursive definition of nested
/// functionals and shares no code with the forest evaluation.
fn nested_by_removal<F>(xs: &[CrossedElement], blocks: &[Vec<usize>], f: &F) -> CoeffMatrix
where
    F: Fn(&[CrossedElement]) -> CoeffMatrix,
{
    let s = xs[0].space();
    let v = interval_block(blocks);
    let block = &blocks[v];
    let (lo, hi) = (block[0], *block.last().unwrap());
    let value = f(&xs[lo - 1..hi]);
    if blocks.len() == 1 {
        return value;
    }
    let em = CrossedElement::embed_m(s, &value).unwrap();
    let mut rest: Vec<CrossedElement> = Vec::new();
    for (k, x) in xs.iter().enumerate() {
        let pos = k + 1;
        if (lo..=hi).contains(&pos) {
            continue;
        }
        if lo > 1 && pos == lo - 1 {
            rest.push(x.mul(&em).unwrap());
        } else if lo == 1 && pos == hi + 1 {
            rest.push(em.mul(x).unwrap());
        } else {
            rest.push(x.clone());
        }
    }
    let width = hi - lo + 1;
    let renumbered: Vec<Vec<usize>> = blocks
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != v)
        .map(|(_, b)| b.iter().map(|&p| if p > hi { p - width } else { p }).collect())
        .collect();
    nested_by_removal(&rest, &renumbered, f)
}

fn moment_oracle(xs: &[CrossedElement], pi: &NcPartition) -> CoeffMatrix {
    nested_by_removal(xs, pi.blocks(), &|args| CrossedElement::product(args).unwrap().cond_expect())
}

/// `k_n = E(x₁⋯x_n) − Σ_{π ≠ 1_n} k_π`, recursively.
fn cumulant_oracle(xs: &[CrossedElement]) -> CoeffMatrix {
    let n = xs.len();
    let mut k = CrossedElement::product(xs).unwrap().cond_expect();
    for pi in enumerate_nc(n).unwrap() {
        if pi.is_full() {
            continue;
        }
        let term = nested_by_removal(xs, pi.blocks(), &|args| cumulant_oracle(args));
        k = k.sub(&term).unwrap();
    }
    k
}

fn trace_of(ws: &[GroupWord]) -> i64 {
    let w = ws.iter().skip(1).fold(ws[0].clone(), |a, b| a.multiply(b).unwrap());
    i64::from(w.is_identity())
}

/// Scalar cumulants by the same recursion; blocks factor in the scalar case.
fn trace_cumulant_oracle(ws: &[GroupWord]) -> i64 {
    let n = ws.len();
    let mut k = trace_of(ws);
    for pi in enumerate_nc(n).unwrap() {
        if pi.is_full() {
            continue;
        }
        let prod: i64 = pi
            .blocks()
            .iter()
            .map(|b| trace_cumulant_oracle(&b.iter().map(|&p| ws[p - 1].clone()).collect::<Vec<_>>()))
            .product();
        k -= prod;
    }
    k
}

fn elements(s: &Arc<CrossedSpace>, n: usize, r: &mut Rng) -> Vec<CrossedElement> {
    (0..n).map(|_| random_element(s, &all(s), 2, 3, r).unwrap()).collect()
}

fn monomials(s: &Arc<CrossedSpace>, n: usize, r: &mut Rng) -> Vec<MonomialElement> {
    (0..n).map(|_| random_monomial(s, &all(s), 2, r)).collect()
}

fn to_elements(s: &Arc<CrossedSpace>, ms: &[MonomialElement]) -> Vec<CrossedElement> {
    ms.iter().map(|m| m.to_element(s).unwrap()).collect()
}

/// `m₁·α_{g₁}(m₂)·α_{g₁g₂}(m₃)⋯`, spelled out.
fn prefactor(s: &CrossedSpace, ms: &[MonomialElement]) -> CoeffMatrix {
    let mut acc = ms[0].coeff.clone();
    let mut g = ms[0].word.clone();
    for m in &ms[1..] {
        acc = acc.mul(&s.act(&g, &m.coeff).unwrap()).unwrap();
        g = g.multiply(&m.word).unwrap();
    }
    acc
}

#[test]
fn partitioned_moment_matches_removal_recursion() {
    for name in ["f2_diag2", "z2z3_diag6", "fn_split"] {
        let s = space(name);
        let mut r = rng::seeded(17);
        for n in 1..=5 {
            for pi in enumerate_nc(n).unwrap() {
                let xs = elements(&s, n, &mut r);
                assert_eq!(partitioned_moment(&xs, &pi).unwrap(), moment_oracle(&xs, &pi), "{name} {pi}");
            }
        }
    }
}

#[test]
fn cumulant_matches_recursive_definition() {
    for name in ["f2_diag2", "z2z3_diag6"] {
        let s = space(name);
        let mut r = rng::seeded(23);
        for n in 1..=4 {
            for _ in 0..6 {
                let xs = elements(&s, n, &mut r);
                assert_eq!(cumulant(&xs).unwrap(), cumulant_oracle(&xs), "{name} n={n}");
            }
        }
    }
}

#[test]
fn trace_cumulant_matches_recursion() {
    for name in ["f2_diag2", "z2z3_diag6", "fn_split"] {
        let s = space(name);
        let mut r = rng::seeded(29);
        for n in 1..=6 {
            for t in 0..30 {
                let mut ws: Vec<GroupWord> = (0..n).map(|_| sample_word(s.group(), 2, &mut r)).collect();
                if t % 2 == 0 {
                    let head = ws[..n - 1].iter().fold(s.group().identity(), |a, b| a.multiply(b).unwrap());
                    ws[n - 1] = head.inverse();
                }
                assert_eq!(trace_cumulant(&ws).unwrap(), trace_cumulant_oracle(&ws));
            }
        }
    }
}

#[test]
fn haar_unitary_cumulants() {
    // alternating u, u* cumulants of a Haar unitary are (−1)^{n−1} C_{n−1}
    let s = space("f2_diag2");
    let g = s.group().generator(0).unwrap();
    let expected = [1, -1, 2];
    for (half, &k) in (1..=3).zip(&expected) {
        let ws: Vec<GroupWord> = (0..2 * half)
            .map(|i| if i % 2 == 0 { g.clone() } else { g.inverse() })
            .collect();
        assert_eq!(trace_cumulant(&ws).unwrap(), k, "order {}", 2 * half);
    }
    // non-alternating patterns vanish
    assert_eq!(trace_cumulant(&[g.clone(), g.clone(), g.inverse(), g.inverse()]).unwrap(), 0);
}

#[test]
fn worked_cumulant_examples() {
    let s = space("f2_diag2");
    let u = |t: &str| CrossedElement::embed_u(&s, &s.group().parse_word(t).unwrap()).unwrap();
    assert_eq!(cumulant(&[u("g0"), u("g0^-1")]).unwrap(), s.one_m());
    assert!(cumulant(&[u("g0"), u("g1")]).unwrap().is_zero());
    let m1 = CoeffMatrix::diag_int(&[1, 2]).unwrap();
    let m2 = CoeffMatrix::diag_int(&[3, 5]).unwrap();
    let base = [
        CrossedElement::embed_m(&s, &m1).unwrap(),
        CrossedElement::embed_m(&s, &m2).unwrap(),
    ];
    assert!(cumulant(&base).unwrap().is_zero());
    let xs = [u("g0"), u("g1"), u("g1^-1"), u("g0^-1"), u("e")];
    let pi: NcPartition = "{(1,4),(2,3),(5)}".parse().unwrap();
    assert_eq!(partitioned_moment(&xs, &pi).unwrap(), s.one_m());
    assert!(matches!(partitioned_moment(&xs[..4], &pi), Err(Error::Domain(_))));
}

#[test]
fn factorization_on_exact_fixtures() {
    for name in ["f2_diag2", "z2z3_diag6", "fn_split"] {
        let s = space(name);
        let mut r = rng::seeded(31);
        for n in 1..=5 {
            for t in 0..20 {
                let mut ms = monomials(&s, n, &mut r);
                if t % 2 == 0 {
                    let head = ms[..n - 1].iter().fold(s.group().identity(), |a, m| a.multiply(&m.word).unwrap());
                    ms[n - 1].word = head.inverse();
                }
                let xs = to_elements(&s, &ms);
                let ws: Vec<GroupWord> = ms.iter().map(|m| m.word.clone()).collect();
                let pre = prefactor(&s, &ms);
                assert_eq!(cumulant(&xs).unwrap(), cumulant_factorized(&s, &ms).unwrap());
                assert_eq!(cumulant(&xs).unwrap(), pre.scale_int(trace_cumulant_oracle(&ws)));
                for pi in enumerate_nc(n).unwrap() {
                    let tr = trace_partitioned(&ws, &pi).unwrap();
                    assert_eq!(partitioned_moment(&xs, &pi).unwrap(), pre.scale_int(tr), "{name} {pi}");
                }
            }
        }
    }
}

#[test]
fn round_trip_and_nested_cumulants() {
    let s = space("z2z3_diag6");
    let mut r = rng::seeded(37);
    for n in 1..=4 {
        for _ in 0..5 {
            let xs = elements(&s, n, &mut r);
            assert_eq!(
                moments_from_cumulants(&xs).unwrap(),
                CrossedElement::product(&xs).unwrap().cond_expect()
            );
            for pi in enumerate_nc(n).unwrap() {
                let oracle = nested_by_removal(&xs, pi.blocks(), &|args| cumulant_oracle(args));
                assert_eq!(nested_cumulant(&xs, &pi).unwrap(), oracle);
            }
        }
    }
}

/// The same scenario over float scalars.
fn float_twin(s: &CrossedSpace) -> Arc<CrossedSpace> {
    let coeffs = CoeffSpace::new(s.coeffs().shape, s.coeffs().dim, ScalarMode::Float).unwrap();
    CrossedSpace::new(Arc::clone(s.group()), coeffs, s.action().clone(), 1e-9).unwrap()
}

fn to_float(t: &Arc<CrossedSpace>, x: &CrossedElement) -> CrossedElement {
    CrossedElement::from_terms(
        t,
        x.terms()
            .iter()
            .map(|(w, m)| (w.clone(), m.to_mode(ScalarMode::Float).unwrap())),
    )
    .unwrap()
}

#[test]
fn float_mode_agrees_with_exact_and_ignores_thread_count() {
    let s = space("f2_diag2");
    let t = float_twin(&s);
    let mut r = rng::seeded(41);
    for n in 1..=5 {
        let xs = elements(&s, n, &mut r);
        let fs: Vec<CrossedElement> = xs.iter().map(|x| to_float(&t, x)).collect();
        let exact = cumulant(&xs).unwrap().to_mode(ScalarMode::Float).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| cumulant(&fs).unwrap());
        let b = four.install(|| cumulant(&fs).unwrap());
        assert_eq!(a, b, "float results must not depend on scheduling");
        assert!(a.approx_eq(&exact, 1e-9).unwrap());
    }
}

#[test]
fn freeness_on_every_fixture() {
    for name in ["f2_diag2", "z2z3_diag6", "f2_full2_float", "fn_split"] {
        let sc = Scenario::load(name).unwrap();
        for split in sc.splits() {
            let opts = FreenessOptions {
                max_order: 3,
                trials: 30,
                seed: 5,
                tol: sc.tolerance,
                ..FreenessOptions::default()
            };
            let report = check_freeness(&sc.space, &split.a, &split.b, &opts).unwrap();
            assert!(report.verdict, "{name}: {:?}", report.violations);
            assert_eq!(report.verdict, report.violations.is_empty());
        }
    }
}

#[test]
fn freeness_rejects_overlap() {
    let s = space("fn_split");
    let err = check_freeness(&s, &[0, 1], &[1, 2], &FreenessOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn within_one_factor_cumulants_survive() {
    // the same machinery that reports freeness sees dependence inside a factor
    let s = space("fn_split");
    let g = s.group().generator(2).unwrap();
    let m = CoeffMatrix::diag_int(&[1, 2, 3]).unwrap();
    let a = CrossedElement::monomial(&s, &m, &g).unwrap();
    let b = CrossedElement::embed_u(&s, &g.inverse()).unwrap();
    assert_eq!(cumulant(&[a, b]).unwrap(), m);
}

#[test]
fn oracle_on_alternating_centered_tuples() {
    for name in ["f2_diag2", "z2z3_diag6", "f2_full2_float", "fn_split"] {
        let sc = Scenario::load(name).unwrap();
        let s = &sc.space;
        let mut r = rng::seeded(43);
        for split in sc.splits() {
            for n in 1..=4 {
                let xs: Vec<CrossedElement> = (0..n)
                    .map(|k| {
                        let fs = if k % 2 == 0 { &split.a } else { &split.b };
                        random_element(s, fs, 3, 3, &mut r).unwrap().centered()
                    })
                    .collect();
                let v = alternating_centered_oracle(&xs, &split.a, &split.b).unwrap();
                assert!(sc.vanishes(&v), "{name}");
            }
        }
    }
}

#[test]
fn centering_is_needed_for_the_oracle() {
    let s = space("f2_diag2");
    let x = CrossedElement::embed_u(&s, &s.group().parse_word("g0").unwrap())
        .unwrap()
        .add(&CrossedElement::one(&s))
        .unwrap();
    assert!(matches!(
        alternating_centered_oracle(&[x], &[0], &[1]),
        Err(Error::Domain(_))
    ));
}

#[test]
fn noncommutative_exact_coefficients() {
    // Full(2) exact with the swap action: coefficients do not commute
    let group = crossprob::groupwords::GroupSpec::free_group(2).unwrap();
    let coeffs = CoeffSpace::new(Shape::Full, 2, ScalarMode::Exact).unwrap();
    let s = CrossedSpace::new(group, coeffs, ActionSpec::permutations(vec![vec![1, 0], vec![0, 1]]), 0.0).unwrap();
    let mut r = rng::seeded(47);
    for n in 1..=4 {
        for _ in 0..5 {
            let ms = monomials(&s, n, &mut r);
            let xs = to_elements(&s, &ms);
            assert_eq!(cumulant(&xs).unwrap(), cumulant_factorized(&s, &ms).unwrap());
            assert_eq!(cumulant(&xs).unwrap(), cumulant_oracle(&xs));
            for pi in enumerate_nc(n).unwrap() {
                assert_eq!(partitioned_moment(&xs, &pi).unwrap(), moment_oracle(&xs, &pi));
            }
        }
    }
    let report = check_freeness(
        &s,
        &[0],
        &[1],
        &FreenessOptions {
            max_order: 3,
            trials: 30,
            ..FreenessOptions::default()
        },
    )
    .unwrap();
    assert!(report.verdict);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cumulants_are_multilinear(seed in any::<u64>(), n in 2..=4usize, slot in 0..4usize) {
        let s = space("f2_diag2");
        let mut r = rng::seeded(seed);
        let slot = slot % n;
        let xs = elements(&s, n, &mut r);
        let y = random_element(&s, &all(&s), 2, 3, &mut r).unwrap();
        let base = cumulant(&xs).unwrap();
        let mut with_sum = xs.clone();
        with_sum[slot] = xs[slot].add(&y).unwrap();
        let mut with_y = xs.clone();
        with_y[slot] = y;
        prop_assert_eq!(cumulant(&with_sum).unwrap(), base.add(&cumulant(&with_y).unwrap()).unwrap());

        let m = random_coeff(&s, &mut r);
        let em = CrossedElement::embed_m(&s, &m).unwrap();
        let mut left = xs.clone();
        left[0] = em.mul(&left[0]).unwrap();
        prop_assert_eq!(cumulant(&left).unwrap(), m.mul(&base).unwrap());
        let mut right = xs.clone();
        right[n - 1] = right[n - 1].mul(&em).unwrap();
        prop_assert_eq!(cumulant(&right).unwrap(), base.mul(&m).unwrap());
    }

    #[test]
    fn mixed_cumulants_vanish(seed in any::<u64>(), n in 2..=4usize) {
        let s = space("f2_diag2");
        let mut r = rng::seeded(seed);
        let mut fams: Vec<usize> = (0..n).map(|k| k % 2).collect();
        fams.rotate_left(seed as usize % n);
        let xs: Vec<CrossedElement> = fams
            .iter()
            .map(|&f| random_element(&s, &[f], 3, 3, &mut r).unwrap())
            .collect();
        prop_assert!(cumulant(&xs).unwrap().is_zero());
    }
}
