//! Partition-dependent moments and amalgamated cumulants over `(M ×_α G, E_M)`.
//!
//! `E_{M,π}` is evaluated on the nesting forest of `π`: the value of a block is
//! `E_M` of the product of its members, where the value of every inner block
//! (an element of M) is inserted right after the member preceding it. Values
//! of the outermost blocks are multiplied in the order of their minima. The
//! cumulant `k_n` is the Möbius transform `Σ_π E_{M,π}·μ(π, 1_n)`.
//!
//! Sums over NC(n) may run on the rayon pool; terms are collected in
//! enumeration order and added sequentially, so the result does not depend on
//! the number of threads.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::coeffalgebra::{CoeffMatrix, GaussRat, Scalar, ScalarMode, Shape};
use crate::crossedalg::{CrossedElement, CrossedSpace};
use crate::error::{domain, mismatch, Result};
use crate::groupwords::{sample_word_in, GroupWord};
use crate::nclattice::{nesting_forest, NcLattice, NcPartition};
use crate::rng::{self, Rng};

/// Largest order accepted by [`cumulant`] and friends.
pub const CUMULANT_CEILING: usize = 6;

/// A single term `m·u_g`; a zero coefficient makes the monomial zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialElement {
    pub coeff: CoeffMatrix,
    pub word: GroupWord,
}

impl MonomialElement {
    pub fn new(coeff: CoeffMatrix, word: GroupWord) -> Self {
        MonomialElement { coeff, word }
    }

    pub fn to_element(&self, space: &Arc<CrossedSpace>) -> Result<CrossedElement> {
        CrossedElement::monomial(space, &self.coeff, &self.word)
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > CUMULANT_CEILING {
        return Err(domain!(
            "order must be in 1..={CUMULANT_CEILING}, got {n}"
        ));
    }
    Ok(())
}

fn shared_space(xs: &[CrossedElement]) -> Result<&Arc<CrossedSpace>> {
    let first = xs.first().ok_or_else(|| domain!("empty argument list"))?;
    let space = first.space();
    for x in &xs[1..] {
        if !(Arc::ptr_eq(space, x.space()) || **space == **x.space()) {
            return Err(mismatch!("arguments from different crossed products"));
        }
    }
    Ok(space)
}

/// Evaluates a nested functional over the forest of `pi`. `block_value` maps
/// the argument list of one block (inner values already inserted) into M.
fn nested_eval<F>(xs: &[CrossedElement], pi: &NcPartition, block_value: &F) -> Result<CoeffMatrix>
where
    F: Fn(&[CrossedElement]) -> Result<CoeffMatrix>,
{
    if xs.len() != pi.n() {
        return Err(domain!(
            "{} arguments for a partition of {}",
            xs.len(),
            pi.n()
        ));
    }
    let space = shared_space(xs)?;
    let forest = nesting_forest(pi);

    fn visit<F>(
        node: usize,
        forest: &crate::nclattice::NestingForest,
        xs: &[CrossedElement],
        space: &Arc<CrossedSpace>,
        block_value: &F,
    ) -> Result<CoeffMatrix>
    where
        F: Fn(&[CrossedElement]) -> Result<CoeffMatrix>,
    {
        let block = &forest.nodes[node].block;
        let mut args = Vec::with_capacity(block.len());
        for &pos in block {
            let mut x = xs[pos - 1].clone();
            for child in forest.children_after(node, pos) {
                let inner = visit(child, forest, xs, space, block_value)?;
                x = x.mul(&CrossedElement::embed_m(space, &inner)?)?;
            }
            args.push(x);
        }
        block_value(&args)
    }

    let mut value = space.one_m();
    for &root in &forest.roots {
        value = value.mul(&visit(root, &forest, xs, space, block_value)?)?;
    }
    Ok(value)
}

/// `E_{M,π}(x₁,…,x_n)`.
pub fn partitioned_moment(xs: &[CrossedElement], pi: &NcPartition) -> Result<CoeffMatrix> {
    nested_eval(xs, pi, &|args: &[CrossedElement]| {
        Ok(CrossedElement::product(args)?.cond_expect())
    })
}

/// `tr_π(u_{g₁},…,u_{g_n})`: the product over blocks of the trace of the block's word.
///
/// The value is always 0 or 1.
pub fn trace_partitioned(ws: &[GroupWord], pi: &NcPartition) -> Result<i64> {
    if ws.len() != pi.n() {
        return Err(domain!(
            "{} words for a partition of {}",
            ws.len(),
            pi.n()
        ));
    }
    for block in pi.blocks() {
        let mut w = ws[block[0] - 1].clone();
        for &pos in &block[1..] {
            w = w.multiply(&ws[pos - 1])?;
        }
        if !w.is_identity() {
            return Ok(0);
        }
    }
    Ok(1)
}

/// Collects `f(π)·μ(π, 1_n)` over NC(n) in enumeration order and adds the terms in that order.
fn mobius_sum<F>(n: usize, zero: CoeffMatrix, f: F) -> Result<CoeffMatrix>
where
    F: Fn(&NcPartition) -> Result<CoeffMatrix> + Sync,
{
    check_order(n)?;
    let lattice = NcLattice::get(n)?;
    let mu = lattice.mobius_to_top();
    let terms: Vec<CoeffMatrix> = lattice
        .elements()
        .par_iter()
        .zip(mu.par_iter())
        .filter(|(_, &m)| m != 0)
        .map(|(pi, &m)| Ok(f(pi)?.scale_int(m)))
        .collect::<Result<_>>()?;
    terms.iter().try_fold(zero, |acc, t| acc.add(t))
}

/// Amalgamated cumulant `k_n(x₁,…,x_n) = Σ_π E_{M,π}(x₁,…,x_n)·μ(π, 1_n)`.
///
/// Arguments may be arbitrary finite sums; the cumulant is multilinear.
pub fn cumulant(xs: &[CrossedElement]) -> Result<CoeffMatrix> {
    check_order(xs.len())?;
    let space = shared_space(xs)?;
    mobius_sum(xs.len(), space.zero_m(), |pi| partitioned_moment(xs, pi))
}

/// Scalar cumulant `k_n^{tr}(u_{g₁},…,u_{g_n}) = Σ_π tr_π·μ(π, 1_n)` of the group algebra.
pub fn trace_cumulant(ws: &[GroupWord]) -> Result<i64> {
    check_order(ws.len())?;
    let lattice = NcLattice::get(ws.len())?;
    lattice
        .elements()
        .iter()
        .zip(lattice.mobius_to_top())
        .map(|(pi, &m)| Ok(trace_partitioned(ws, pi)? * m))
        .sum()
}

/// `m_{g₁}·m_{g₂}^{g₁}·m_{g₃}^{g₁g₂}⋯m_{g_n}^{g₁⋯g_{n−1}}`.
pub fn twisted_product(space: &CrossedSpace, ms: &[MonomialElement]) -> Result<CoeffMatrix> {
    let mut acc = space.one_m();
    let mut prefix = space.group().identity();
    for m in ms {
        acc = acc.mul(&space.act(&prefix, &m.coeff)?)?;
        prefix = prefix.multiply(&m.word)?;
    }
    Ok(acc)
}

/// Cumulant of monomials through the factorization
/// `k_n(m₁u_{g₁},…) = (twisted coefficient product)·k_n^{tr}(u_{g₁},…)`.
pub fn cumulant_factorized(space: &CrossedSpace, ms: &[MonomialElement]) -> Result<CoeffMatrix> {
    check_order(ms.len())?;
    let words: Vec<GroupWord> = ms.iter().map(|m| m.word.clone()).collect();
    let k = trace_cumulant(&words)?;
    Ok(twisted_product(space, ms)?.scale_int(k))
}

/// Nested cumulant `k_π`: each block contributes the cumulant of its members,
/// inner-block values inserted the same way as in [`partitioned_moment`].
pub fn nested_cumulant(xs: &[CrossedElement], pi: &NcPartition) -> Result<CoeffMatrix> {
    nested_eval(xs, pi, &|args: &[CrossedElement]| cumulant(args))
}

/// `Σ_π k_π(x₁,…,x_n)`, which must reproduce `E_M(x₁⋯x_n)`.
pub fn moments_from_cumulants(xs: &[CrossedElement]) -> Result<CoeffMatrix> {
    check_order(xs.len())?;
    let space = shared_space(xs)?;
    let lattice = NcLattice::get(xs.len())?;
    let terms: Vec<CoeffMatrix> = lattice
        .elements()
        .par_iter()
        .map(|pi| nested_cumulant(xs, pi))
        .collect::<Result<_>>()?;
    terms.iter().try_fold(space.zero_m(), |acc, t| acc.add(t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    A,
    B,
}

fn check_disjoint(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(domain!("both factor subsets must be nonempty"));
    }
    if let Some(f) = a.iter().find(|f| b.contains(f)) {
        return Err(domain!(
            "factor {f} lies in both subsets; the subalgebras are not distinct over M"
        ));
    }
    Ok(())
}

/// `E_M(x₁⋯x_n)` for centered arguments alternating between the subalgebras
/// generated by M and the factors `a`, resp. `b`. Under freeness over M the
/// result is zero; this does not go through the cumulant machinery.
pub fn alternating_centered_oracle(
    xs: &[CrossedElement],
    a: &[usize],
    b: &[usize],
) -> Result<CoeffMatrix> {
    check_disjoint(a, b)?;
    shared_space(xs)?;
    let mut previous: Option<Family> = None;
    for (k, x) in xs.iter().enumerate() {
        if !x.cond_expect().is_zero() {
            return Err(domain!("argument {k} is not centered"));
        }
        let family = if x.is_zero() {
            None
        } else if x.supported_in(a) {
            Some(Family::A)
        } else if x.supported_in(b) {
            Some(Family::B)
        } else {
            return Err(domain!("argument {k} lies in neither subalgebra"));
        };
        if family.is_some() && family == previous {
            return Err(domain!("arguments {} and {k} come from the same subalgebra", k - 1));
        }
        previous = family;
    }
    Ok(CrossedElement::product(xs)?.cond_expect())
}

/// Small exact values used for random coefficients.
const COEFF_VALUES: [(i64, i64, bool); 9] = [
    (0, 1, false),
    (1, 1, false),
    (-1, 1, false),
    (2, 1, false),
    (-2, 1, false),
    (1, 2, false),
    (-1, 2, false),
    (1, 1, true),
    (-1, 1, true),
];

/// Random element of M with entries from `{0, ±1, ±2, ±1/2, ±i}`.
pub fn random_coeff(space: &CrossedSpace, rng: &mut Rng) -> CoeffMatrix {
    let coeffs = space.coeffs();
    let count = match coeffs.shape {
        Shape::Diagonal => coeffs.dim,
        Shape::Full => coeffs.dim * coeffs.dim,
    };
    let values = (0..count)
        .map(|_| {
            let (p, q, imaginary) = COEFF_VALUES[rng.random_range(0..COEFF_VALUES.len())];
            let r = GaussRat::ratio(p, q);
            let exact = if imaginary {
                GaussRat::new(r.im.clone(), r.re)
            } else {
                r
            };
            Scalar::Exact(exact)
                .to_mode(coeffs.mode)
                .expect("exact values convert to either mode")
        })
        .collect();
    CoeffMatrix::from_scalars(coeffs, values).expect("entry count matches the space")
}

/// Random monomial `m·u_w` with `w` supported in `factors`, `|w| <= max_len`.
pub fn random_monomial(
    space: &Arc<CrossedSpace>,
    factors: &[usize],
    max_len: usize,
    rng: &mut Rng,
) -> MonomialElement {
    let coeff = random_coeff(space, rng);
    let word = sample_word_in(space.group(), factors, max_len, rng);
    MonomialElement::new(coeff, word)
}

/// Random element of `M ×_α G_S`: a sum of one to `max_terms` random monomials.
pub fn random_element(
    space: &Arc<CrossedSpace>,
    factors: &[usize],
    max_len: usize,
    max_terms: usize,
    rng: &mut Rng,
) -> Result<CrossedElement> {
    let count = rng.random_range(1..=max_terms.max(1));
    let terms: Vec<(GroupWord, CoeffMatrix)> = (0..count)
        .map(|_| {
            let m = random_monomial(space, factors, max_len, rng);
            (m.word, m.coeff)
        })
        .collect();
    CrossedElement::from_terms(space, terms)
}

#[derive(Clone, Debug)]
pub struct FreenessOptions {
    pub min_order: usize,
    pub max_order: usize,
    /// Mixed-cumulant instances sampled per order.
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_word_len: usize,
    pub max_terms: usize,
}

impl Default for FreenessOptions {
    fn default() -> Self {
        FreenessOptions {
            min_order: 2,
            max_order: 4,
            trials: 100,
            seed: 0,
            tol: crate::coeffalgebra::DEFAULT_TOLERANCE,
            max_word_len: 3,
            max_terms: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub order: usize,
    /// Which subalgebra each argument came from, e.g. `"ABBA"`.
    pub pattern: String,
    pub arguments: Vec<String>,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderSummary {
    pub order: usize,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreenessReport {
    pub family_a: Vec<usize>,
    pub family_b: Vec<usize>,
    pub min_order: usize,
    pub max_order: usize,
    pub trials: usize,
    pub seed: u64,
    pub orders: Vec<OrderSummary>,
    pub violations: Vec<Violation>,
    pub verdict: bool,
}

/// Samples mixed cumulants between `M ×_α G_a` and `M ×_α G_b` and records
/// every one that does not vanish (structurally in exact mode, beyond `tol`
/// in float mode).
///
/// Trial `t` of order `n` draws from its own stream `(seed, n, t)`. Each
/// argument is a random monomial or a short sum of monomials, with words of
/// length at most `max_word_len` in its family's factors and arbitrary
/// coefficients, so M itself is part of both families.
pub fn check_freeness(
    space: &Arc<CrossedSpace>,
    a: &[usize],
    b: &[usize],
    opts: &FreenessOptions,
) -> Result<FreenessReport> {
    check_disjoint(a, b)?;
    let factors = space.group().factor_count();
    if let Some(f) = a.iter().chain(b).find(|&&f| f >= factors) {
        return Err(domain!("factor {f} out of range for {factors} factors"));
    }
    if opts.min_order < 2 || opts.min_order > opts.max_order {
        return Err(domain!(
            "mixed cumulants need 2 <= min_order <= max_order, got {}..={}",
            opts.min_order,
            opts.max_order
        ));
    }
    check_order(opts.max_order)?;

    let jobs: Vec<(usize, usize)> = (opts.min_order..=opts.max_order)
        .flat_map(|n| (0..opts.trials).map(move |t| (n, t)))
        .collect();
    let outcomes: Vec<Option<Violation>> = jobs
        .par_iter()
        .map(|&(n, t)| {
            let mut r = rng::stream(opts.seed, n as u64, t as u64);
            let mut labels: Vec<Family> = Vec::with_capacity(n);
            while labels.is_empty() || labels.iter().all(|&l| l == labels[0]) {
                labels = (0..n)
                    .map(|_| if r.random_bool(0.5) { Family::A } else { Family::B })
                    .collect();
            }
            let xs = labels
                .iter()
                .map(|&l| {
                    let fs = if l == Family::A { a } else { b };
                    if r.random_bool(0.5) {
                        random_monomial(space, fs, opts.max_word_len, &mut r).to_element(space)
                    } else {
                        random_element(space, fs, opts.max_word_len, opts.max_terms, &mut r)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let k = cumulant(&xs)?;
            let vanishes = match space.mode() {
                ScalarMode::Exact => k.is_zero(),
                ScalarMode::Float => k.is_negligible(opts.tol),
            };
            Ok((!vanishes).then(|| Violation {
                order: n,
                pattern: labels
                    .iter()
                    .map(|l| if *l == Family::A { 'A' } else { 'B' })
                    .collect(),
                arguments: xs.iter().map(ToString::to_string).collect(),
                value: k.to_json(),
            }))
        })
        .collect::<Result<_>>()?;

    let violations: Vec<Violation> = outcomes.into_iter().flatten().collect();
    Ok(FreenessReport {
        family_a: a.to_vec(),
        family_b: b.to_vec(),
        min_order: opts.min_order,
        max_order: opts.max_order,
        trials: opts.trials,
        seed: opts.seed,
        orders: (opts.min_order..=opts.max_order)
            .map(|order| OrderSummary {
                order,
                checked: opts.trials,
            })
            .collect(),
        verdict: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffalgebra::CoeffSpace;
    use crate::crossedalg::ActionSpec;
    use crate::error::Error;
    use crate::groupwords::GroupSpec;

    fn f2_swap() -> Arc<CrossedSpace> {
        let group = GroupSpec::free_group(2).unwrap();
        let coeffs = CoeffSpace::new(Shape::Diagonal, 2, ScalarMode::Exact).unwrap();
        CrossedSpace::new(
            group,
            coeffs,
            ActionSpec::permutations(vec![vec![1, 0], vec![0, 1]]),
            0.0,
        )
        .unwrap()
    }

    fn u(space: &Arc<CrossedSpace>, text: &str) -> CrossedElement {
        CrossedElement::embed_u(space, &space.group().parse_word(text).unwrap()).unwrap()
    }

    fn p(s: &str) -> NcPartition {
        s.parse().unwrap()
    }

    #[test]
    fn full_partition_is_plain_expectation() {
        let s = f2_swap();
        let mut r = rng::seeded(1);
        let xs: Vec<CrossedElement> = (0..3)
            .map(|_| random_element(&s, &[0, 1], 2, 2, &mut r).unwrap())
            .collect();
        assert_eq!(
            partitioned_moment(&xs, &NcPartition::full(3)).unwrap(),
            CrossedElement::product(&xs).unwrap().cond_expect()
        );
    }

    #[test]
    fn nested_pair_matches_explicit_bracketing() {
        let s = f2_swap();
        let mut r = rng::seeded(5);
        let xs: Vec<CrossedElement> = (0..4)
            .map(|_| random_element(&s, &[0, 1], 2, 3, &mut r).unwrap())
            .collect();
        let inner = xs[1].mul(&xs[2]).unwrap().cond_expect();
        let expected = xs[0]
            .mul(&CrossedElement::embed_m(&s, &inner).unwrap())
            .unwrap()
            .mul(&xs[3])
            .unwrap()
            .cond_expect();
        assert_eq!(partitioned_moment(&xs, &p("{(1,4),(2,3)}")).unwrap(), expected);
    }

    #[test]
    fn unitary_example_partition() {
        let s = f2_swap();
        let xs = ["g0", "g1", "g1^-1", "g0^-1", "e"].map(|w| u(&s, w));
        assert_eq!(
            partitioned_moment(&xs, &p("{(1,4),(2,3),(5)}")).unwrap(),
            s.one_m()
        );
        let ws: Vec<GroupWord> = ["g0", "g1", "g1^-1", "g0^-1", "e"]
            .iter()
            .map(|w| s.group().parse_word(w).unwrap())
            .collect();
        assert_eq!(trace_partitioned(&ws, &p("{(1,4),(2,3),(5)}")).unwrap(), 1);
    }

    #[test]
    fn trace_partitioned_singletons() {
        let s = f2_swap();
        let e = s.group().identity();
        let g = s.group().generator(0).unwrap();
        let zero3 = NcPartition::singletons(3);
        assert_eq!(trace_partitioned(&[e.clone(), e.clone(), e.clone()], &zero3).unwrap(), 1);
        assert_eq!(trace_partitioned(&[e.clone(), g, e.clone()], &zero3).unwrap(), 0);
        assert!(trace_partitioned(&[e], &zero3).is_err());
    }

    #[test]
    fn cumulant_examples() {
        let s = f2_swap();
        let x = random_element(&s, &[0, 1], 2, 3, &mut rng::seeded(3)).unwrap();
        assert_eq!(cumulant(std::slice::from_ref(&x)).unwrap(), x.cond_expect());
        assert_eq!(cumulant(&[u(&s, "g0"), u(&s, "g0^-1")]).unwrap(), s.one_m());
        assert!(cumulant(&[u(&s, "g0"), u(&s, "g1")]).unwrap().is_zero());
        assert!(cumulant(&[]).is_err());
        let seven = vec![u(&s, "g0"); 7];
        assert!(matches!(cumulant(&seven), Err(Error::Domain(_))));
    }

    #[test]
    fn factorized_examples() {
        let s = f2_swap();
        let g0 = s.group().generator(0).unwrap();
        let ms = [
            MonomialElement::new(CoeffMatrix::diag_int(&[1, 2]).unwrap(), g0.clone()),
            MonomialElement::new(CoeffMatrix::diag_int(&[3, 4]).unwrap(), g0.inverse()),
        ];
        let expected = CoeffMatrix::diag_int(&[4, 6]).unwrap();
        assert_eq!(cumulant_factorized(&s, &ms).unwrap(), expected);
        let xs: Vec<CrossedElement> = ms.iter().map(|m| m.to_element(&s).unwrap()).collect();
        assert_eq!(cumulant(&xs).unwrap(), expected);

        let ones: Vec<MonomialElement> = ["g0", "g1", "g1^-1 g0^-1"]
            .iter()
            .map(|w| MonomialElement::new(s.one_m(), s.group().parse_word(w).unwrap()))
            .collect();
        let words: Vec<GroupWord> = ones.iter().map(|m| m.word.clone()).collect();
        let k = trace_cumulant(&words).unwrap();
        assert_eq!(cumulant_factorized(&s, &ones).unwrap(), s.one_m().scale_int(k));
    }

    #[test]
    fn low_order_round_trip() {
        let s = f2_swap();
        let mut r = rng::seeded(11);
        for n in 1..=3 {
            let xs: Vec<CrossedElement> = (0..n)
                .map(|_| random_element(&s, &[0, 1], 2, 2, &mut r).unwrap())
                .collect();
            assert_eq!(
                moments_from_cumulants(&xs).unwrap(),
                CrossedElement::product(&xs).unwrap().cond_expect()
            );
        }
    }

    #[test]
    fn oracle_examples() {
        let s = f2_swap();
        let x = random_element(&s, &[0], 2, 3, &mut rng::seeded(2)).unwrap().centered();
        assert!(alternating_centered_oracle(&[x], &[0], &[1]).unwrap().is_zero());
        let pair = [u(&s, "g0"), u(&s, "g1")];
        assert!(alternating_centered_oracle(&pair, &[0], &[1]).unwrap().is_zero());
        let same = [u(&s, "g0"), u(&s, "g0^2")];
        assert!(matches!(
            alternating_centered_oracle(&same, &[0], &[1]),
            Err(Error::Domain(_))
        ));
        let uncentered = [CrossedElement::one(&s)];
        assert!(alternating_centered_oracle(&uncentered, &[0], &[1]).is_err());
    }

    #[test]
    fn freeness_preconditions() {
        let s = f2_swap();
        let opts = FreenessOptions::default();
        assert!(matches!(check_freeness(&s, &[0], &[0], &opts), Err(Error::Domain(_))));
        assert!(check_freeness(&s, &[0], &[2], &opts).is_err());
        let bad = FreenessOptions {
            max_order: 7,
            ..FreenessOptions::default()
        };
        assert!(check_freeness(&s, &[0], &[1], &bad).is_err());
    }

    #[test]
    fn freeness_small_run() {
        let s = f2_swap();
        let opts = FreenessOptions {
            max_order: 3,
            trials: 20,
            seed: 4,
            ..FreenessOptions::default()
        };
        let report = check_freeness(&s, &[0], &[1], &opts).unwrap();
        assert!(report.verdict, "{:?}", report.violations);
        assert_eq!(report.orders.len(), 2);
    }
}
