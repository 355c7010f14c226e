//! Replays the algebraic identities of the crossed-product model on seeded
//! random inputs in one scenario and collects pass/fail counts per section.
//!
//! Every section draws trial `t` from the stream `(seed, section, t)`, and
//! trials are collected in order, so reports do not depend on thread count.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::coeffalgebra::CoeffMatrix;
use crate::crossedalg::{CrossedElement, CrossedSpace};
use crate::error::{Error, Result};
use crate::freeprob::{
    self, check_freeness, cumulant, cumulant_factorized, moments_from_cumulants,
    partitioned_moment, random_coeff, random_element, trace_cumulant, trace_partitioned,
    twisted_product, FreenessOptions, MonomialElement,
};
use crate::groupwords::{sample_word, GroupWord};
use crate::nclattice::{enumerate_nc, NcLattice, NcPartition};
use crate::rng::{self, Rng};
use crate::scenario::{Scenario, Split};

/// Sections in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    Lattice,
    UnitaryRelations,
    MonomialProduct,
    Adjoint,
    Covariance,
    Embedding,
    Expectation,
    UnitaryMoments,
    MonomialMoments,
    Commutation,
    PartitionedMoments,
    NestedExample,
    CumulantFactorization,
    TraceCumulantExpansion,
    RoundTrip,
    Multilinearity,
    AlternatingOracle,
    FreeProductFreeness,
    FreeGroupSplitting,
}

impl Section {
    pub const ALL: [Section; 19] = [
        Section::Lattice,
        Section::UnitaryRelations,
        Section::MonomialProduct,
        Section::Adjoint,
        Section::Covariance,
        Section::Embedding,
        Section::Expectation,
        Section::UnitaryMoments,
        Section::MonomialMoments,
        Section::Commutation,
        Section::PartitionedMoments,
        Section::NestedExample,
        Section::CumulantFactorization,
        Section::TraceCumulantExpansion,
        Section::RoundTrip,
        Section::Multilinearity,
        Section::AlternatingOracle,
        Section::FreeProductFreeness,
        Section::FreeGroupSplitting,
    ];

    fn tag(self) -> u64 {
        Section::ALL.iter().position(|&s| s == self).expect("listed") as u64 + 1
    }
}

/// Sample sizes; the defaults are what `verify-paper` runs.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub relation_trials: usize,
    pub unitary_tuples: usize,
    pub unitary_max_n: usize,
    pub monomial_tuples: usize,
    pub monomial_max_n: usize,
    pub partition_max_n: usize,
    pub tuples_per_partition: usize,
    pub example_tuples: usize,
    pub cumulant_tuples_per_n: usize,
    pub cumulant_max_n: usize,
    pub round_trip_inputs: usize,
    pub round_trip_max_n: usize,
    pub oracle_tuples: usize,
    pub oracle_max_n: usize,
    pub lattice_intervals: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            relation_trials: 100,
            unitary_tuples: 500,
            unitary_max_n: 6,
            monomial_tuples: 500,
            monomial_max_n: 5,
            partition_max_n: 5,
            tuples_per_partition: 50,
            example_tuples: 50,
            cumulant_tuples_per_n: 200,
            cumulant_max_n: 5,
            round_trip_inputs: 200,
            round_trip_max_n: 4,
            oracle_tuples: 200,
            oracle_max_n: 4,
            lattice_intervals: 200,
        }
    }
}

const MAX_FAILED_CASES: usize = 5;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SectionReport {
    pub checks: usize,
    pub failures: usize,
    pub passed: bool,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_cases: Vec<Value>,
}

impl SectionReport {
    fn absorb(&mut self, outcomes: Vec<Outcome>) {
        for o in outcomes {
            self.checks += 1;
            if !o.ok {
                self.failures += 1;
                if self.failed_cases.len() < MAX_FAILED_CASES {
                    self.failed_cases.push(o.case.unwrap_or(Value::Null));
                }
            }
        }
    }

    fn check(&mut self, ok: bool, case: impl FnOnce() -> Value) {
        self.absorb(vec![Outcome::new(ok, false, case)]);
    }

    fn finish(mut self) -> Self {
        self.passed = self.failures == 0;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub scenario: String,
    pub seed: u64,
    pub sections: Vec<(Section, SectionReport)>,
    pub verdict: bool,
}

impl VerifyReport {
    pub fn section(&self, s: Section) -> Option<&SectionReport> {
        self.sections.iter().find(|(k, _)| *k == s).map(|(_, r)| r)
    }

    /// JSON report with sections keyed by `key`.
    pub fn to_json_with<F: Fn(Section) -> String>(&self, key: F) -> Value {
        let mut sections = Map::new();
        for (s, r) in &self.sections {
            sections.insert(key(*s), serde_json::to_value(r).expect("plain data"));
        }
        json!({
            "command": "verify-paper",
            "scenario": self.scenario,
            "seed": self.seed,
            "sections": sections,
            "verdict": self.verdict,
        })
    }
}

struct Outcome {
    ok: bool,
    hit: bool,
    case: Option<Value>,
}

impl Outcome {
    fn new(ok: bool, hit: bool, case: impl FnOnce() -> Value) -> Self {
        Outcome {
            ok,
            hit,
            case: (!ok).then(case),
        }
    }
}

fn run_trials<F>(seed: u64, section: Section, count: usize, f: F) -> Result<Vec<Outcome>>
where
    F: Fn(&mut Rng, usize) -> Result<Outcome> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|t| f(&mut rng::stream(seed, section.tag(), t as u64), t))
        .collect()
}

fn words_json(ws: &[GroupWord]) -> Value {
    Value::Array(ws.iter().map(|w| Value::String(w.to_string())).collect())
}

fn monomials_json(ms: &[MonomialElement]) -> Value {
    Value::Array(
        ms.iter()
            .map(|m| json!({"word": m.word.to_string(), "matrix": m.coeff.to_json()}))
            .collect(),
    )
}

fn elements_json(xs: &[CrossedElement]) -> Value {
    Value::Array(xs.iter().map(|x| Value::String(x.to_string())).collect())
}

fn product_word(ws: &[GroupWord], space: &CrossedSpace) -> Result<GroupWord> {
    ws.iter()
        .try_fold(space.group().identity(), |acc, w| acc.multiply(w))
}

/// `n` random words; with `force`, the last one cancels the product of the others.
fn random_words(space: &CrossedSpace, n: usize, max_len: usize, force: bool, r: &mut Rng) -> Result<Vec<GroupWord>> {
    let mut ws: Vec<GroupWord> = (0..n).map(|_| sample_word(space.group(), max_len, r)).collect();
    if force {
        ws[n - 1] = product_word(&ws[..n - 1], space)?.inverse();
    }
    Ok(ws)
}

/// Makes every block's word product trivial by adjusting its last member.
fn force_blocks(ws: &mut [GroupWord], pi: &NcPartition, space: &CrossedSpace) -> Result<()> {
    for block in pi.blocks() {
        let (last, rest) = block.split_last().expect("nonempty block");
        let others: Vec<GroupWord> = rest.iter().map(|&p| ws[p - 1].clone()).collect();
        ws[last - 1] = product_word(&others, space)?.inverse();
    }
    Ok(())
}

fn monomials(space: &CrossedSpace, ws: Vec<GroupWord>, r: &mut Rng) -> Vec<MonomialElement> {
    ws.into_iter()
        .map(|w| MonomialElement::new(random_coeff(space, r), w))
        .collect()
}

fn to_elements(space: &Arc<CrossedSpace>, ms: &[MonomialElement]) -> Result<Vec<CrossedElement>> {
    ms.iter().map(|m| m.to_element(space)).collect()
}

struct Ctx<'a> {
    sc: &'a Scenario,
    space: &'a Arc<CrossedSpace>,
    seed: u64,
    cfg: &'a VerifyConfig,
}

impl Ctx<'_> {
    fn same(&self, a: &CoeffMatrix, b: &CoeffMatrix) -> bool {
        self.sc.same(a, b)
    }

    fn same_x(&self, a: &CrossedElement, b: &CrossedElement) -> bool {
        a.approx_eq(b, self.sc.tolerance).unwrap_or(false)
    }

    fn all_factors(&self) -> Vec<usize> {
        (0..self.space.group().factor_count()).collect()
    }

    fn elem(&self, r: &mut Rng, max_len: usize, max_terms: usize) -> Result<CrossedElement> {
        random_element(self.space, &self.all_factors(), max_len, max_terms, r)
    }
}

/// Runs every section on `scenario` with the given seed.
pub fn verify_paper(scenario: &Scenario, seed: u64) -> Result<VerifyReport> {
    verify_with(scenario, seed, &VerifyConfig::default(), &Section::ALL)
}

/// Runs the chosen sections with custom sample sizes.
pub fn verify_with(
    scenario: &Scenario,
    seed: u64,
    cfg: &VerifyConfig,
    sections: &[Section],
) -> Result<VerifyReport> {
    let ctx = Ctx {
        sc: scenario,
        space: &scenario.space,
        seed,
        cfg,
    };
    let mut out = Vec::with_capacity(sections.len());
    for &s in sections {
        out.push((s, run_section(&ctx, s)?.finish()));
    }
    let verdict = out.iter().all(|(_, r)| r.passed);
    Ok(VerifyReport {
        scenario: scenario.name.clone(),
        seed,
        sections: out,
        verdict,
    })
}

fn run_section(ctx: &Ctx, s: Section) -> Result<SectionReport> {
    match s {
        Section::Lattice => lattice(ctx),
        Section::UnitaryRelations => unitary_relations(ctx),
        Section::MonomialProduct => monomial_product(ctx),
        Section::Adjoint => adjoint(ctx),
        Section::Covariance => covariance(ctx),
        Section::Embedding => embedding(ctx),
        Section::Expectation => expectation(ctx),
        Section::UnitaryMoments => unitary_moments(ctx),
        Section::MonomialMoments => monomial_moments(ctx),
        Section::Commutation => commutation(ctx),
        Section::PartitionedMoments => partitioned_moments(ctx),
        Section::NestedExample => nested_example(ctx),
        Section::CumulantFactorization => cumulant_factorization(ctx),
        Section::TraceCumulantExpansion => trace_cumulant_expansion(ctx),
        Section::RoundTrip => round_trip(ctx),
        Section::Multilinearity => multilinearity(ctx),
        Section::AlternatingOracle => alternating_oracle(ctx),
        Section::FreeProductFreeness => free_product_freeness(ctx),
        Section::FreeGroupSplitting => free_group_splitting(ctx),
    }
}

fn lattice(ctx: &Ctx) -> Result<SectionReport> {
    let mut rep = SectionReport::default();
    let mut catalan: i64 = 1;
    for n in 1..=6usize {
        // catalan = C_{n-1} here
        let c_n = catalan * 2 * (2 * n as i64 - 1) / (n as i64 + 1);
        let count = enumerate_nc(n)?.len() as i64;
        rep.check(count == c_n, || json!({"n": n, "count": count, "catalan": c_n}));
        let lat = NcLattice::get(n)?;
        let bottom = lat.index_of(&NcPartition::singletons(n))?;
        let mu = lat.mobius_to_top()[bottom];
        let expected = if n % 2 == 1 { catalan } else { -catalan };
        rep.check(mu == expected, || json!({"n": n, "mobius": mu, "expected": expected}));
        catalan = c_n;
    }
    let outcomes = run_trials(ctx.seed, Section::Lattice, ctx.cfg.lattice_intervals, |r, _| {
        let n = r.random_range(2..=5);
        let lat = NcLattice::get(n)?;
        let i = r.random_range(0..lat.len());
        let above: Vec<usize> = (0..lat.len()).filter(|&j| j != i && lat.leq_idx(i, j)).collect();
        let Some(&j) = above.get(r.random_range(0..above.len().max(1))) else {
            return Ok(Outcome::new(true, false, || Value::Null));
        };
        let row = lat.mobius_row(i);
        let sum: i64 = (0..lat.len())
            .filter(|&t| lat.leq_idx(i, t) && lat.leq_idx(t, j))
            .map(|t| row[t])
            .sum();
        Ok(Outcome::new(sum == 0, true, || {
            json!({"lower": lat.elements()[i].to_string(), "upper": lat.elements()[j].to_string(), "sum": sum})
        }))
    })?;
    rep.absorb(outcomes);
    rep.notes.push("NC(n) sizes and mobius(0_n, 1_n) for n <= 6; interval sums for n <= 5".into());
    Ok(rep)
}

fn unitary_relations(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::UnitaryRelations, ctx.cfg.relation_trials, |r, _| {
        let w1 = sample_word(space.group(), 3, r);
        let w2 = sample_word(space.group(), 3, r);
        let lhs = CrossedElement::embed_u(space, &w1)?.mul(&CrossedElement::embed_u(space, &w2)?)?;
        let rhs = CrossedElement::embed_u(space, &w1.multiply(&w2)?)?;
        let adj = CrossedElement::embed_u(space, &w1)?.adjoint()?;
        let inv = CrossedElement::embed_u(space, &w1.inverse())?;
        let ok = ctx.same_x(&lhs, &rhs) && ctx.same_x(&adj, &inv);
        Ok(Outcome::new(ok, false, || words_json(&[w1.clone(), w2.clone()])))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    Ok(rep)
}

fn monomial_product(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::MonomialProduct, ctx.cfg.relation_trials, |r, _| {
        let ws = random_words(space, 2, 3, false, r)?;
        let ms = monomials(space, ws, r);
        let xs = to_elements(space, &ms)?;
        let lhs = xs[0].mul(&xs[1])?;
        let coeff = ms[0].coeff.mul(&space.act(&ms[0].word, &ms[1].coeff)?)?;
        let rhs = CrossedElement::monomial(space, &coeff, &ms[0].word.multiply(&ms[1].word)?)?;
        Ok(Outcome::new(ctx.same_x(&lhs, &rhs), false, || monomials_json(&ms)))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    Ok(rep)
}

fn adjoint(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::Adjoint, ctx.cfg.relation_trials, |r, _| {
        let m = random_coeff(space, r);
        let w = sample_word(space.group(), 3, r);
        let lhs = CrossedElement::monomial(space, &m, &w)?.adjoint()?;
        let rhs = CrossedElement::monomial(space, &space.act(&w.inverse(), &m.adjoint())?, &w.inverse())?;
        let x = ctx.elem(r, 2, 3)?;
        let y = ctx.elem(r, 2, 3)?;
        let anti = ctx.same_x(&x.mul(&y)?.adjoint()?, &y.adjoint()?.mul(&x.adjoint()?)?);
        let invol = ctx.same_x(&x.adjoint()?.adjoint()?, &x);
        let ok = ctx.same_x(&lhs, &rhs) && anti && invol;
        Ok(Outcome::new(ok, false, || {
            json!({"monomial": format!("{m}·u[{w}]"), "x": x.to_string(), "y": y.to_string()})
        }))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push("termwise adjoint formula, involution and anti-multiplicativity".into());
    Ok(rep)
}

fn covariance(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::Covariance, ctx.cfg.relation_trials, |r, _| {
        let m = random_coeff(space, r);
        let w = sample_word(space.group(), 3, r);
        let u = CrossedElement::embed_u(space, &w)?;
        let lhs = u.mul(&CrossedElement::embed_m(space, &m)?)?;
        let rhs = CrossedElement::embed_m(space, &space.act(&w, &m)?)?.mul(&u)?;
        Ok(Outcome::new(ctx.same_x(&lhs, &rhs), false, || {
            json!({"word": w.to_string(), "matrix": m.to_json()})
        }))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    Ok(rep)
}

fn embedding(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::Embedding, ctx.cfg.relation_trials, |r, _| {
        let m1 = random_coeff(space, r);
        let m2 = random_coeff(space, r);
        let e1 = CrossedElement::embed_m(space, &m1)?;
        let e2 = CrossedElement::embed_m(space, &m2)?;
        let mult = ctx.same_x(&e1.mul(&e2)?, &CrossedElement::embed_m(space, &m1.mul(&m2)?)?);
        let star = ctx.same_x(&e1.adjoint()?, &CrossedElement::embed_m(space, &m1.adjoint())?);
        let unit = ctx.same_x(&CrossedElement::embed_m(space, &space.one_m())?, &CrossedElement::one(space));
        Ok(Outcome::new(mult && star && unit, false, || {
            json!({"m1": m1.to_json(), "m2": m2.to_json()})
        }))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    Ok(rep)
}

fn expectation(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::Expectation, ctx.cfg.relation_trials, |r, _| {
        let m = random_coeff(space, r);
        let m2 = random_coeff(space, r);
        let x = ctx.elem(r, 2, 3)?;
        let em = CrossedElement::embed_m(space, &m)?;
        let unit = ctx.same(&em.cond_expect(), &m);
        let sandwich = em.mul(&x)?.mul(&CrossedElement::embed_m(space, &m2)?)?.cond_expect();
        let bimodule = ctx.same(&sandwich, &m.mul(&x.cond_expect())?.mul(&m2)?);
        let star = ctx.same(&x.adjoint()?.cond_expect(), &x.cond_expect().adjoint());
        let w = sample_word(space.group(), 3, r);
        let off = CrossedElement::monomial(space, &m, &w)?.cond_expect();
        let coefficient = if w.is_identity() {
            ctx.same(&off, &m)
        } else {
            off.is_zero()
        };
        Ok(Outcome::new(unit && bimodule && star && coefficient, false, || {
            json!({"m": m.to_json(), "m2": m2.to_json(), "x": x.to_string(), "word": w.to_string()})
        }))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push("coefficient extraction, unit, bimodule law and *-compatibility".into());
    Ok(rep)
}

fn unitary_moments(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let max_n = ctx.cfg.unitary_max_n;
    let outcomes = run_trials(ctx.seed, Section::UnitaryMoments, ctx.cfg.unitary_tuples, |r, _| {
        let n = r.random_range(1..=max_n);
        let ws = random_words(space, n, 3, r.random_bool(0.5), r)?;
        let us = ws
            .iter()
            .map(|w| CrossedElement::embed_u(space, w))
            .collect::<Result<Vec<_>>>()?;
        let got = CrossedElement::product(&us)?.cond_expect();
        let word = product_word(&ws, space)?;
        let expected = space.one_m().scale(&space.word_trace(&word))?;
        Ok(Outcome::new(ctx.same(&got, &expected), word.is_identity(), || {
            json!({"words": words_json(&ws), "got": got.to_json(), "expected": expected.to_json()})
        }))
    })?;
    let hits = outcomes.iter().filter(|o| o.hit).count();
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push(format!(
        "{} word tuples with n <= {max_n}; {hits} multiply to the identity",
        ctx.cfg.unitary_tuples
    ));
    Ok(rep)
}

fn monomial_moments(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let max_n = ctx.cfg.monomial_max_n;
    let outcomes = run_trials(ctx.seed, Section::MonomialMoments, ctx.cfg.monomial_tuples, |r, _| {
        let n = r.random_range(1..=max_n);
        let ws = random_words(space, n, 2, r.random_bool(0.5), r)?;
        let ms = monomials(space, ws, r);
        let got = CrossedElement::product(&to_elements(space, &ms)?)?.cond_expect();
        let words: Vec<GroupWord> = ms.iter().map(|m| m.word.clone()).collect();
        let hit = product_word(&words, space)?.is_identity();
        let expected = if hit {
            twisted_product(space, &ms)?
        } else {
            space.zero_m()
        };
        Ok(Outcome::new(ctx.same(&got, &expected), hit, || {
            json!({"monomials": monomials_json(&ms), "got": got.to_json(), "expected": expected.to_json()})
        }))
    })?;
    let hits = outcomes.iter().filter(|o| o.hit).count();
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push(format!(
        "{} monomial tuples with n <= {max_n}; {hits} multiply to the identity",
        ctx.cfg.monomial_tuples
    ));
    Ok(rep)
}

fn commutation(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::Commutation, ctx.cfg.relation_trials, |r, t| {
        let m = random_coeff(space, r);
        let w = if t % 4 == 0 {
            space.group().identity()
        } else {
            sample_word(space.group(), 3, r)
        };
        let u = CrossedElement::embed_u(space, &w)?;
        let eu = u.cond_expect();
        let mid = u.mul(&CrossedElement::embed_m(space, &m)?)?.cond_expect();
        let left = space.act(&w, &m)?.mul(&eu)?;
        let right = eu.mul(&m)?;
        let literal = if w.is_identity() { m.clone() } else { space.zero_m() };
        let ok = ctx.same(&mid, &left) && ctx.same(&mid, &right) && ctx.same(&mid, &literal);
        Ok(Outcome::new(ok, w.is_identity(), || {
            json!({"word": w.to_string(), "matrix": m.to_json()})
        }))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    Ok(rep)
}

fn partitioned_moments(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let mut partitions = Vec::new();
    for n in 1..=ctx.cfg.partition_max_n {
        partitions.extend(enumerate_nc(n)?);
    }
    let per = ctx.cfg.tuples_per_partition;
    let outcomes = run_trials(
        ctx.seed,
        Section::PartitionedMoments,
        partitions.len() * per,
        |r, t| {
            let pi = &partitions[t / per];
            let mut ws = random_words(space, pi.n(), 2, false, r)?;
            if r.random_bool(0.5) {
                force_blocks(&mut ws, pi, space)?;
            }
            let ms = monomials(space, ws.clone(), r);
            let got = partitioned_moment(&to_elements(space, &ms)?, pi)?;
            let tr = trace_partitioned(&ws, pi)?;
            let expected = twisted_product(space, &ms)?.scale_int(tr);
            Ok(Outcome::new(ctx.same(&got, &expected), tr != 0, || {
                json!({"partition": pi.to_string(), "monomials": monomials_json(&ms), "got": got.to_json(), "expected": expected.to_json()})
            }))
        },
    )?;
    let hits = outcomes.iter().filter(|o| o.hit).count();
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push(format!(
        "{} partitions with n <= {}, {per} monomial tuples each; {hits} with nonzero trace",
        partitions.len(),
        ctx.cfg.partition_max_n
    ));
    Ok(rep)
}

fn nested_example(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let pi: NcPartition = "{(1,4),(2,3),(5)}".parse()?;
    let mut rep = SectionReport::default();

    let group = space.group();
    let g0 = group.generator(0)?;
    let g1 = group.generator(if group.factor_count() > 1 { 1 } else { 0 })?;
    let ws = vec![g0.clone(), g1.clone(), g1.inverse(), g0.inverse(), group.identity()];
    let us = ws
        .iter()
        .map(|w| CrossedElement::embed_u(space, w))
        .collect::<Result<Vec<_>>>()?;
    let got = partitioned_moment(&us, &pi)?;
    let tr = trace_partitioned(&ws, &pi)?;
    rep.check(ctx.same(&got, &space.one_m()) && tr == 1, || {
        json!({"words": words_json(&ws), "got": got.to_json(), "trace": tr})
    });

    let outcomes = run_trials(ctx.seed, Section::NestedExample, ctx.cfg.example_tuples, |r, _| {
        let mut ws = random_words(space, 5, 2, false, r)?;
        if r.random_bool(0.5) {
            force_blocks(&mut ws, &pi, space)?;
        }
        let ms = monomials(space, ws.clone(), r);
        let xs = to_elements(space, &ms)?;
        let got = partitioned_moment(&xs, &pi)?;
        let inner = CrossedElement::embed_m(space, &xs[1].mul(&xs[2])?.cond_expect())?;
        let outer = CrossedElement::product([&xs[0], &inner, &xs[3]])?.cond_expect();
        let explicit = outer.mul(&xs[4].cond_expect())?;
        let tr = trace_partitioned(&ws, &pi)?;
        let factored = twisted_product(space, &ms)?.scale_int(tr);
        let ok = ctx.same(&got, &explicit) && ctx.same(&got, &factored);
        Ok(Outcome::new(ok, tr != 0, || {
            json!({"monomials": monomials_json(&ms), "got": got.to_json(), "explicit": explicit.to_json(), "factored": factored.to_json()})
        }))
    })?;
    let hits = outcomes.iter().filter(|o| o.hit).count();
    rep.absorb(outcomes);
    rep.notes.push(format!(
        "partition {pi}: unitary instance plus {} monomial tuples ({hits} with nonzero trace) against explicit nesting",
        ctx.cfg.example_tuples
    ));
    Ok(rep)
}

fn cumulant_factorization(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let per = ctx.cfg.cumulant_tuples_per_n;
    let max_n = ctx.cfg.cumulant_max_n;
    let outcomes = run_trials(ctx.seed, Section::CumulantFactorization, per * max_n, |r, t| {
        let n = t / per + 1;
        let ws = random_words(space, n, 2, r.random_bool(0.5), r)?;
        let ms = monomials(space, ws, r);
        let got = cumulant(&to_elements(space, &ms)?)?;
        let expected = cumulant_factorized(space, &ms)?;
        Ok(Outcome::new(ctx.same(&got, &expected), !expected.is_zero(), || {
            json!({"monomials": monomials_json(&ms), "cumulant": got.to_json(), "factorized": expected.to_json()})
        }))
    })?;
    let hits = outcomes.iter().filter(|o| o.hit).count();
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push(format!(
        "{per} monomial tuples for each n <= {max_n}; {hits} with a nonzero cumulant"
    ));
    Ok(rep)
}

fn trace_cumulant_expansion(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::TraceCumulantExpansion, ctx.cfg.relation_trials, |r, t| {
        let mut ws = random_words(space, 3, 2, false, r)?;
        // cycle through forcing patterns so every term of the expansion gets exercised
        match t % 5 {
            1 => ws[2] = product_word(&ws[..2], space)?.inverse(),
            2 => ws[1] = ws[0].inverse(),
            3 => ws[2] = ws[1].inverse(),
            4 => ws[2] = ws[0].inverse(),
            _ => {}
        }
        let tr = |idx: &[usize]| -> Result<i64> {
            let w = product_word(&idx.iter().map(|&i| ws[i].clone()).collect::<Vec<_>>(), space)?;
            Ok(i64::from(w.is_identity()))
        };
        let four = tr(&[0, 1, 2])? - tr(&[0, 1])? * tr(&[2])? - tr(&[0])? * tr(&[1, 2])?
            + 2 * tr(&[0])? * tr(&[1])? * tr(&[2])?;
        let five = four - tr(&[0, 2])? * tr(&[1])?;
        let k = trace_cumulant(&ws)?;
        Ok(Outcome::new(k == five, k != four, || {
            json!({"words": words_json(&ws), "cumulant": k, "expansion": five})
        }))
    })?;
    let differs = outcomes.iter().filter(|o| o.hit).count();
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push("third scalar cumulant against the five-term NC(3) expansion".into());
    rep.notes.push(format!(
        "dropping the tr(u1 u3) tr(u2) term gives a different value on {differs} triples"
    ));
    Ok(rep)
}

fn round_trip(ctx: &Ctx) -> Result<SectionReport> {
    let max_n = ctx.cfg.round_trip_max_n;
    let outcomes = run_trials(ctx.seed, Section::RoundTrip, ctx.cfg.round_trip_inputs, |r, _| {
        let n = r.random_range(1..=max_n);
        let xs = (0..n).map(|_| ctx.elem(r, 2, 2)).collect::<Result<Vec<_>>>()?;
        let got = moments_from_cumulants(&xs)?;
        let expected = CrossedElement::product(&xs)?.cond_expect();
        Ok(Outcome::new(ctx.same(&got, &expected), false, || {
            json!({"elements": elements_json(&xs), "got": got.to_json(), "expected": expected.to_json()})
        }))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push(format!(
        "{} general inputs with n <= {max_n}",
        ctx.cfg.round_trip_inputs
    ));
    Ok(rep)
}

fn multilinearity(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let outcomes = run_trials(ctx.seed, Section::Multilinearity, ctx.cfg.relation_trials, |r, _| {
        let n = r.random_range(2..=4);
        let xs = (0..n).map(|_| ctx.elem(r, 2, 2)).collect::<Result<Vec<_>>>()?;
        let y = ctx.elem(r, 2, 2)?;
        let j = r.random_range(0..n);
        let base = cumulant(&xs)?;

        let mut sum_args = xs.clone();
        sum_args[j] = xs[j].add(&y)?;
        let mut y_args = xs.clone();
        y_args[j] = y.clone();
        let additive = ctx.same(&cumulant(&sum_args)?, &base.add(&cumulant(&y_args)?)?);

        let (m, m2) = (random_coeff(space, r), random_coeff(space, r));
        let mut outer = xs.clone();
        outer[0] = CrossedElement::embed_m(space, &m)?.mul(&outer[0])?;
        outer[n - 1] = outer[n - 1].mul(&CrossedElement::embed_m(space, &m2)?)?;
        let boundary = ctx.same(&cumulant(&outer)?, &m.mul(&base)?.mul(&m2)?);

        let k = r.random_range(0..n - 1);
        let em = CrossedElement::embed_m(space, &m)?;
        let mut left = xs.clone();
        left[k] = left[k].mul(&em)?;
        let mut right = xs.clone();
        right[k + 1] = em.mul(&right[k + 1])?;
        let inner = ctx.same(&cumulant(&left)?, &cumulant(&right)?);

        Ok(Outcome::new(additive && boundary && inner, false, || {
            json!({"elements": elements_json(&xs), "slot": j + 1, "y": y.to_string()})
        }))
    })?;
    let mut rep = SectionReport::default();
    rep.absorb(outcomes);
    rep.notes.push("additivity per slot, M-linearity at the ends, M-balance between slots".into());
    Ok(rep)
}

fn alternating_oracle(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let splits = ctx.sc.splits();
    let mut rep = SectionReport::default();
    if splits.is_empty() {
        rep.notes.push("not applicable: a single factor cannot be split".into());
        return Ok(rep);
    }
    let max_n = ctx.cfg.oracle_max_n;
    let outcomes = run_trials(ctx.seed, Section::AlternatingOracle, ctx.cfg.oracle_tuples, |r, t| {
        let split = &splits[t % splits.len()];
        let n = r.random_range(1..=max_n);
        let start = r.random_bool(0.5);
        let xs = (0..n)
            .map(|k| {
                let fs = if (k % 2 == 0) == start { &split.a } else { &split.b };
                Ok(random_element(space, fs, 3, 3, r)?.centered())
            })
            .collect::<Result<Vec<_>>>()?;
        let got = freeprob::alternating_centered_oracle(&xs, &split.a, &split.b)?;
        Ok(Outcome::new(ctx.sc.vanishes(&got), false, || {
            json!({"split": split, "elements": elements_json(&xs), "got": got.to_json()})
        }))
    })?;
    rep.absorb(outcomes);
    rep.notes.push(format!(
        "{} alternating centered tuples of length <= {max_n} over {} split(s)",
        ctx.cfg.oracle_tuples,
        splits.len()
    ));
    Ok(rep)
}

fn freeness_runs(ctx: &Ctx, rep: &mut SectionReport, splits: &[Split], tag: u64) -> Result<()> {
    let fp = &ctx.sc.freeness;
    for (k, split) in splits.iter().enumerate() {
        let mut runs = vec![FreenessOptions {
            min_order: 2,
            max_order: fp.max_order,
            trials: fp.trials,
            seed: ctx.seed ^ (tag << 32) ^ k as u64,
            tol: ctx.sc.tolerance,
            ..FreenessOptions::default()
        }];
        if let Some(o) = fp.spot_order.filter(|&o| o > fp.max_order) {
            runs.push(FreenessOptions {
                min_order: o,
                max_order: o,
                trials: fp.spot_trials,
                ..runs[0].clone()
            });
        }
        for opts in runs {
            let report = check_freeness(ctx.space, &split.a, &split.b, &opts)?;
            rep.checks += report.orders.iter().map(|o| o.checked).sum::<usize>();
            rep.failures += report.violations.len();
            for v in report.violations.iter().take(MAX_FAILED_CASES.saturating_sub(rep.failed_cases.len())) {
                rep.failed_cases.push(json!({"split": split, "violation": v}));
            }
            rep.notes.push(format!(
                "factors {:?} vs {:?}: orders {}..={}, {} instances per order, {} violations",
                split.a,
                split.b,
                opts.min_order,
                opts.max_order,
                opts.trials,
                report.violations.len()
            ));
        }
    }
    Ok(())
}

fn free_product_freeness(ctx: &Ctx) -> Result<SectionReport> {
    let space = ctx.space;
    let mut rep = SectionReport::default();
    let splits = ctx.sc.splits();
    if splits.is_empty() {
        rep.notes.push("not applicable: a single factor cannot be split".into());
    }
    freeness_runs(ctx, &mut rep, &splits, Section::FreeProductFreeness.tag())?;

    let g0 = space.group().generator(0)?;
    let control = cumulant(&[
        CrossedElement::embed_u(space, &g0)?,
        CrossedElement::embed_u(space, &g0.inverse())?,
    ])?;
    rep.check(ctx.same(&control, &space.one_m()) && !ctx.sc.vanishes(&control), || {
        json!({"control": "k2(u_g0, u_g0^-1)", "got": control.to_json()})
    });
    rep.notes.push("negative control k2(u_g0, u_g0^-1) = 1_M within one factor".into());
    let overlap = check_freeness(space, &[0], &[0], &FreenessOptions::default());
    rep.check(matches!(overlap, Err(Error::Domain(_))), || {
        json!({"control": "overlapping factor subsets", "accepted": overlap.is_ok()})
    });
    rep.notes.push("overlapping factor subsets rejected".into());
    Ok(rep)
}

fn free_group_splitting(ctx: &Ctx) -> Result<SectionReport> {
    let group = ctx.space.group();
    let mut rep = SectionReport::default();
    let n = group.factor_count();
    if !group.is_free() || n < 2 {
        rep.notes.push(format!(
            "not applicable: the group is not a free group of rank >= 2 ({n} factor(s))"
        ));
        return Ok(rep);
    }
    let mut splits: Vec<Split> = (1..n)
        .map(|k| Split {
            a: (0..k).collect(),
            b: (k..n).collect(),
        })
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            let s = Split { a: vec![i], b: vec![j] };
            if !splits.contains(&s) {
                splits.push(s);
            }
        }
    }
    freeness_runs(ctx, &mut rep, &splits, Section::FreeGroupSplitting.tag())?;
    rep.notes.push(format!(
        "rank {n}: {} prefix/suffix splittings and all generator pairs",
        n - 1
    ));
    Ok(rep)
}
