//! The crossed product `M ×_α G` on finitely supported sums `Σ m_g u_g`.
//!
//! Multiplication follows `(m₁u_{g₁})(m₂u_{g₂}) = (m₁·α_{g₁}(m₂)) u_{g₁g₂}`, the
//! adjoint `(m u_g)* = α_{g⁻¹}(m*) u_{g⁻¹}`. The conditional expectation onto M
//! reads off the coefficient at the identity word.
//!
//! Elements keep their terms in a `BTreeMap` keyed by reduced words, ordered by
//! length then letters, and never store a zero coefficient. Products visit
//! term pairs in that order, so float-mode sums are accumulated in a fixed
//! sequence.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero as _};
use serde_json::{json, Value};

use crate::coeffalgebra::{CoeffMatrix, CoeffSpace, Scalar, ScalarMode, Shape};
use crate::error::{domain, mismatch, Error, Result};
use crate::groupwords::{Factor, GroupSpec, GroupWord};

/// How one generator of G acts on M.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorAction {
    /// Coordinate relabelling `i ↦ images[i]` (0-based).
    Permutation(Vec<usize>),
    /// `m ↦ U m U⁻¹`.
    Conjugation { u: CoeffMatrix, u_inv: CoeffMatrix },
}

/// Per-generator data of an action `α : G → Aut M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpec {
    generators: Vec<GeneratorAction>,
}

impl ActionSpec {
    /// Permutation action from 0-based image lists, one per factor.
    pub fn permutations(perms: Vec<Vec<usize>>) -> Self {
        ActionSpec {
            generators: perms.into_iter().map(GeneratorAction::Permutation).collect(),
        }
    }

    /// Conjugation action, one matrix per factor.
    pub fn conjugations(us: Vec<CoeffMatrix>) -> Result<Self> {
        let generators = us
            .into_iter()
            .enumerate()
            .map(|(k, u)| {
                let u_inv = u
                    .inverse()
                    .ok_or_else(|| domain!("conjugating matrix of generator {k} is singular"))?;
                Ok(GeneratorAction::Conjugation { u, u_inv })
            })
            .collect::<Result<_>>()?;
        Ok(ActionSpec { generators })
    }

    /// Every generator acts as the identity.
    pub fn trivial(factors: usize, dim: usize) -> Self {
        Self::permutations(vec![(0..dim).collect(); factors])
    }

    pub fn generators(&self) -> &[GeneratorAction] {
        &self.generators
    }

    fn is_permutation(&self) -> bool {
        self.generators
            .iter()
            .all(|g| matches!(g, GeneratorAction::Permutation(_)))
    }
}

fn permutation_order(images: &[usize]) -> BigInt {
    let mut seen = vec![false; images.len()];
    let mut order = BigInt::from(1);
    for start in 0..images.len() {
        let mut len = 0u64;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = images[i];
            len += 1;
        }
        if len > 0 {
            order = order.lcm(&BigInt::from(len));
        }
    }
    order
}

fn matrix_power(base: &CoeffMatrix, exp: &BigUint) -> Result<CoeffMatrix> {
    let mut result = CoeffMatrix::identity(base.space());
    for bit in (0..exp.bits()).rev() {
        result = result.mul(&result)?;
        if exp.bit(bit) {
            result = result.mul(base)?;
        }
    }
    Ok(result)
}

impl GeneratorAction {
    /// `α_{g^exp}(m)` for this generator `g`.
    fn apply(&self, exp: &BigInt, m: &CoeffMatrix) -> Result<CoeffMatrix> {
        match self {
            GeneratorAction::Permutation(images) => {
                let r = exp
                    .mod_floor(&permutation_order(images))
                    .to_usize()
                    .expect("reduced exponent is below the permutation order");
                let mut power: Vec<usize> = (0..images.len()).collect();
                for _ in 0..r {
                    power = power.iter().map(|&i| images[i]).collect();
                }
                m.permute(&power)
            }
            GeneratorAction::Conjugation { u, u_inv } => {
                let (left, right) = if exp.is_negative() {
                    (u_inv, u)
                } else {
                    (u, u_inv)
                };
                let k = exp.abs().to_biguint().expect("absolute value");
                let l = matrix_power(left, &k)?;
                let r = matrix_power(right, &k)?;
                l.mul(m)?.mul(&r)
            }
        }
    }
}

/// The data `(G, M, α)` shared by all elements of one crossed product.
#[derive(Debug, PartialEq)]
pub struct CrossedSpace {
    group: Arc<GroupSpec>,
    coeffs: CoeffSpace,
    action: ActionSpec,
}

impl CrossedSpace {
    /// Validates the action against the group and coefficient algebra.
    ///
    /// Permutations must be bijections of `0..d`. Conjugating matrices must live
    /// in `Full(d)` and satisfy `U*U = c·1` for some `c > 0` (within `tol` in
    /// float mode), which makes `m ↦ UmU⁻¹` a *-automorphism. For a factor
    /// `Z_k` the generator applied `k` times must fix every matrix unit.
    pub fn new(
        group: Arc<GroupSpec>,
        coeffs: CoeffSpace,
        action: ActionSpec,
        tol: f64,
    ) -> Result<Arc<Self>> {
        if action.generators.len() != group.factor_count() {
            return Err(domain!(
                "action lists {} generators for {} factors",
                action.generators.len(),
                group.factor_count()
            ));
        }
        for (k, gen) in action.generators.iter().enumerate() {
            match gen {
                GeneratorAction::Permutation(images) => {
                    let mut seen = vec![false; coeffs.dim];
                    if images.len() != coeffs.dim
                        || !images.iter().all(|&i| i < coeffs.dim && !std::mem::replace(&mut seen[i], true))
                    {
                        return Err(domain!(
                            "generator {k}: {images:?} is not a permutation of {} points",
                            coeffs.dim
                        ));
                    }
                }
                GeneratorAction::Conjugation { u, .. } => {
                    if coeffs.shape != Shape::Full {
                        return Err(domain!(
                            "generator {k}: conjugation actions need full coefficient matrices"
                        ));
                    }
                    if u.space() != coeffs {
                        return Err(mismatch!(
                            "generator {k}: conjugating matrix is {:?}, expected {:?}",
                            u.space(),
                            coeffs
                        ));
                    }
                    let gram = u.adjoint().mul(u)?;
                    let positive = match gram.as_scalar_multiple(tol) {
                        Some(Scalar::Exact(q)) => q.im.is_zero() && q.re.is_positive(),
                        Some(Scalar::Float(c)) => c.im.abs() <= tol && c.re > tol,
                        None => false,
                    };
                    if !positive {
                        return Err(domain!(
                            "generator {k}: conjugating matrix is not a multiple of a unitary"
                        ));
                    }
                }
            }
            if let Factor::FiniteCyclic { order } = group.factors()[k] {
                let units: Vec<(usize, usize)> = match coeffs.shape {
                    Shape::Diagonal => (0..coeffs.dim).map(|i| (i, i)).collect(),
                    Shape::Full => (0..coeffs.dim * coeffs.dim)
                        .map(|t| (t / coeffs.dim, t % coeffs.dim))
                        .collect(),
                };
                let one = BigInt::from(1);
                for (i, j) in units {
                    let basis = CoeffMatrix::unit(coeffs, i, j);
                    let mut m = basis.clone();
                    for _ in 0..order {
                        m = gen.apply(&one, &m)?;
                    }
                    if !m.approx_eq(&basis, tol)? {
                        return Err(domain!(
                            "generator {k} applied {order} times is not the identity on M"
                        ));
                    }
                }
            }
        }
        Ok(Arc::new(CrossedSpace {
            group,
            coeffs,
            action,
        }))
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn coeffs(&self) -> CoeffSpace {
        self.coeffs
    }

    pub fn mode(&self) -> ScalarMode {
        self.coeffs.mode
    }

    pub fn action(&self) -> &ActionSpec {
        &self.action
    }

    pub fn is_permutation_action(&self) -> bool {
        self.action.is_permutation()
    }

    pub fn one_m(&self) -> CoeffMatrix {
        CoeffMatrix::identity(self.coeffs)
    }

    pub fn zero_m(&self) -> CoeffMatrix {
        CoeffMatrix::zero(self.coeffs)
    }

    fn check_word(&self, w: &GroupWord) -> Result<()> {
        if **w.spec() != *self.group {
            return Err(mismatch!("word over a different group"));
        }
        Ok(())
    }

    fn check_matrix(&self, m: &CoeffMatrix) -> Result<()> {
        if m.space() != self.coeffs {
            return Err(mismatch!("{:?} is not {:?}", m.space(), self.coeffs));
        }
        Ok(())
    }

    /// `m^w = α_w(m)`; letters act right to left so that `α_{w₁w₂} = α_{w₁}∘α_{w₂}`.
    pub fn act(&self, w: &GroupWord, m: &CoeffMatrix) -> Result<CoeffMatrix> {
        self.check_word(w)?;
        self.check_matrix(m)?;
        let mut out = m.clone();
        for letter in w.letters().iter().rev() {
            out = self.action.generators[letter.factor].apply(&letter.exp, &out)?;
        }
        Ok(out)
    }

    /// Canonical trace of a single group element: 1 at `e_G`, 0 elsewhere.
    pub fn word_trace(&self, w: &GroupWord) -> Scalar {
        Scalar::from_int(i64::from(w.is_identity()), self.coeffs.mode)
    }
}

/// A finitely supported element `Σ m_g u_g` of `M ×_α G`.
#[derive(Clone, Debug)]
pub struct CrossedElement {
    space: Arc<CrossedSpace>,
    terms: BTreeMap<GroupWord, CoeffMatrix>,
}

fn same_space(a: &Arc<CrossedSpace>, b: &Arc<CrossedSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl PartialEq for CrossedElement {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.terms == other.terms
    }
}

impl CrossedElement {
    pub fn zero(space: &Arc<CrossedSpace>) -> Self {
        CrossedElement {
            space: Arc::clone(space),
            terms: BTreeMap::new(),
        }
    }

    /// The unit `1_M u_{e_G}`.
    pub fn one(space: &Arc<CrossedSpace>) -> Self {
        Self::embed_m(space, &space.one_m()).expect("1_M lies in M")
    }

    /// `m ↦ m·u_{e_G}`.
    pub fn embed_m(space: &Arc<CrossedSpace>, m: &CoeffMatrix) -> Result<Self> {
        Self::monomial(space, m, &space.group.identity())
    }

    /// `w ↦ 1_M·u_w`.
    pub fn embed_u(space: &Arc<CrossedSpace>, w: &GroupWord) -> Result<Self> {
        Self::monomial(space, &space.one_m(), w)
    }

    /// The single term `m·u_w` (the zero element when `m = 0`).
    pub fn monomial(space: &Arc<CrossedSpace>, m: &CoeffMatrix, w: &GroupWord) -> Result<Self> {
        space.check_word(w)?;
        space.check_matrix(m)?;
        let mut terms = BTreeMap::new();
        if !m.is_zero() {
            terms.insert(w.clone(), m.clone());
        }
        Ok(CrossedElement {
            space: Arc::clone(space),
            terms,
        })
    }

    /// Sums the given terms, merging repeated words and dropping zeros.
    pub fn from_terms<I>(space: &Arc<CrossedSpace>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (GroupWord, CoeffMatrix)>,
    {
        let mut acc = BTreeMap::new();
        for (w, m) in terms {
            space.check_word(&w)?;
            space.check_matrix(&m)?;
            accumulate(&mut acc, w, m)?;
        }
        acc.retain(|_, m: &mut CoeffMatrix| !m.is_zero());
        Ok(CrossedElement {
            space: Arc::clone(space),
            terms: acc,
        })
    }

    pub fn space(&self) -> &Arc<CrossedSpace> {
        &self.space
    }

    pub fn terms(&self) -> &BTreeMap<GroupWord, CoeffMatrix> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_space(&self, other: &CrossedElement) -> Result<()> {
        if !same_space(&self.space, &other.space) {
            return Err(mismatch!("elements of different crossed products"));
        }
        Ok(())
    }

    pub fn add(&self, other: &CrossedElement) -> Result<CrossedElement> {
        self.check_space(other)?;
        let mut terms = self.terms.clone();
        for (w, m) in &other.terms {
            accumulate(&mut terms, w.clone(), m.clone())?;
        }
        terms.retain(|_, m| !m.is_zero());
        Ok(CrossedElement {
            space: Arc::clone(&self.space),
            terms,
        })
    }

    pub fn neg(&self) -> CrossedElement {
        CrossedElement {
            space: Arc::clone(&self.space),
            terms: self.terms.iter().map(|(w, m)| (w.clone(), m.neg())).collect(),
        }
    }

    pub fn sub(&self, other: &CrossedElement) -> Result<CrossedElement> {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Scalar) -> Result<CrossedElement> {
        let mut terms = BTreeMap::new();
        for (w, m) in &self.terms {
            let m = m.scale(s)?;
            if !m.is_zero() {
                terms.insert(w.clone(), m);
            }
        }
        Ok(CrossedElement {
            space: Arc::clone(&self.space),
            terms,
        })
    }

    /// Crossed-product multiplication, bilinear in the terms.
    pub fn mul(&self, other: &CrossedElement) -> Result<CrossedElement> {
        self.check_space(other)?;
        let mut terms = BTreeMap::new();
        for (g1, m1) in &self.terms {
            for (g2, m2) in &other.terms {
                let coeff = m1.mul(&self.space.act(g1, m2)?)?;
                if coeff.is_zero() {
                    continue;
                }
                accumulate(&mut terms, g1.multiply(g2)?, coeff)?;
            }
        }
        terms.retain(|_, m| !m.is_zero());
        Ok(CrossedElement {
            space: Arc::clone(&self.space),
            terms,
        })
    }

    /// Left-to-right product of a nonempty sequence.
    pub fn product<'a, I>(items: I) -> Result<CrossedElement>
    where
        I: IntoIterator<Item = &'a CrossedElement>,
    {
        let mut iter = items.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| domain!("product of an empty sequence"))?;
        iter.try_fold(first.clone(), |acc, x| acc.mul(x))
    }

    /// `(m u_g)* = α_{g⁻¹}(m*) u_{g⁻¹}`, extended antilinearly.
    pub fn adjoint(&self) -> Result<CrossedElement> {
        let mut terms = BTreeMap::new();
        for (g, m) in &self.terms {
            let inv = g.inverse();
            let coeff = self.space.act(&inv, &m.adjoint())?;
            accumulate(&mut terms, inv, coeff)?;
        }
        Ok(CrossedElement {
            space: Arc::clone(&self.space),
            terms,
        })
    }

    /// `E_M(Σ m_g u_g) = m_{e_G}`; zero when there is no identity term.
    pub fn cond_expect(&self) -> CoeffMatrix {
        self.terms
            .get(&self.space.group.identity())
            .cloned()
            .unwrap_or_else(|| self.space.zero_m())
    }

    /// Canonical trace on the group-algebra part: the scalar at `e_G`.
    ///
    /// Every coefficient must be a scalar multiple of `1_M`.
    pub fn group_trace(&self) -> Result<Scalar> {
        for (w, m) in &self.terms {
            if m.as_scalar_multiple(0.0).is_none() {
                return Err(domain!("coefficient of {w} is not a multiple of 1_M"));
            }
        }
        Ok(self
            .terms
            .get(&self.space.group.identity())
            .map(|m| m.get(0, 0))
            .unwrap_or_else(|| Scalar::zero(self.space.mode())))
    }

    /// `x - E_M(x)`, the centered part of `x`.
    pub fn centered(&self) -> CrossedElement {
        let mut terms = self.terms.clone();
        terms.remove(&self.space.group.identity());
        CrossedElement {
            space: Arc::clone(&self.space),
            terms,
        }
    }

    /// True when every word in the support uses only `factors`.
    pub fn supported_in(&self, factors: &[usize]) -> bool {
        self.terms.keys().all(|w| w.supported_in(factors))
    }

    /// Termwise comparison with `CoeffMatrix::approx_eq`; absent terms count as zero.
    pub fn approx_eq(&self, other: &CrossedElement, tol: f64) -> Result<bool> {
        self.check_space(other)?;
        let zero = self.space.zero_m();
        for w in self.terms.keys().chain(other.terms.keys()) {
            let a = self.terms.get(w).unwrap_or(&zero);
            let b = other.terms.get(w).unwrap_or(&zero);
            if !a.approx_eq(b, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `{"terms": [{"word", "matrix"}]}` in canonical term order.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(w, m)| json!({"word": w.to_json(), "matrix": m.to_json()}))
            .collect();
        json!({ "terms": terms })
    }

    /// Same as [`CrossedElement::to_json`] with the group and coefficient header.
    pub fn to_json_with_header(&self) -> Value {
        json!({
            "group": self.space.group.as_ref(),
            "coefficients": self.space.coeffs,
            "terms": self.to_json()["terms"],
        })
    }

    /// Reads `{"terms": [...]}` or a bare term array. Each term has a `word`
    /// (letter pairs or text) and either a `matrix` or a `scalar` (meaning `s·1_M`).
    pub fn from_json(space: &Arc<CrossedSpace>, value: &Value) -> Result<CrossedElement> {
        let terms = match value {
            Value::Array(a) => a,
            Value::Object(o) => o
                .get("terms")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("element needs a 'terms' array".into()))?,
            _ => return Err(Error::Parse(format!("bad element {value}"))),
        };
        let mut parsed = Vec::with_capacity(terms.len());
        for term in terms {
            let word = term
                .get("word")
                .map(|w| GroupWord::from_json(&space.group, w))
                .unwrap_or_else(|| Ok(space.group.identity()))?;
            let matrix = match (term.get("matrix"), term.get("scalar")) {
                (Some(m), None) => CoeffMatrix::from_json(m, space.coeffs)?,
                (None, Some(s)) => space.one_m().scale(&Scalar::from_json(s, space.mode())?)?,
                _ => {
                    return Err(Error::Parse(format!(
                        "term needs exactly one of 'matrix' or 'scalar': {term}"
                    )))
                }
            };
            parsed.push((word, matrix));
        }
        Self::from_terms(space, parsed)
    }
}

fn accumulate(
    terms: &mut BTreeMap<GroupWord, CoeffMatrix>,
    w: GroupWord,
    m: CoeffMatrix,
) -> Result<()> {
    match terms.get_mut(&w) {
        Some(existing) => *existing = existing.add(&m)?,
        None => {
            terms.insert(w, m);
        }
    }
    Ok(())
}

impl fmt::Display for CrossedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, m)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{m}·u[{w}]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffalgebra::GaussRat;

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

    fn diag(v: &[i64]) -> CoeffMatrix {
        CoeffMatrix::diag_int(v).unwrap()
    }

    #[test]
    fn action_examples() {
        let s = f2_swap();
        let g = s.group().clone();
        let m = diag(&[3, 4]);
        assert_eq!(s.act(&g.identity(), &m).unwrap(), m);
        assert_eq!(s.act(&g.parse_word("g0").unwrap(), &m).unwrap(), diag(&[4, 3]));
        assert_eq!(s.act(&g.parse_word("g0^2").unwrap(), &m).unwrap(), m);
        assert_eq!(s.act(&g.parse_word("g0^-1").unwrap(), &m).unwrap(), diag(&[4, 3]));
    }

    #[test]
    fn product_lands_on_identity() {
        let s = f2_swap();
        let g = s.group().clone();
        let x = CrossedElement::monomial(&s, &diag(&[1, 2]), &g.parse_word("g0").unwrap()).unwrap();
        let y =
            CrossedElement::monomial(&s, &diag(&[3, 4]), &g.parse_word("g0^-1").unwrap()).unwrap();
        let xy = x.mul(&y).unwrap();
        assert_eq!(xy, CrossedElement::embed_m(&s, &diag(&[4, 6])).unwrap());
        assert_eq!(xy.cond_expect(), diag(&[4, 6]));
    }

    #[test]
    fn unit_and_generators() {
        let s = f2_swap();
        let g = s.group().clone();
        let y = CrossedElement::monomial(&s, &diag(&[5, 7]), &g.parse_word("g1 g0").unwrap()).unwrap();
        assert_eq!(CrossedElement::one(&s).mul(&y).unwrap(), y);
        assert_eq!(y.mul(&CrossedElement::one(&s)).unwrap(), y);
        let u0 = CrossedElement::embed_u(&s, &g.generator(0).unwrap()).unwrap();
        let u1 = CrossedElement::embed_u(&s, &g.generator(1).unwrap()).unwrap();
        assert_eq!(
            u0.mul(&u1).unwrap(),
            CrossedElement::embed_u(&s, &g.parse_word("g0 g1").unwrap()).unwrap()
        );
        assert_eq!(CrossedElement::embed_u(&s, &g.identity()).unwrap(), CrossedElement::one(&s));
    }

    #[test]
    fn adjoint_examples() {
        let s = f2_swap();
        let g = s.group().clone();
        let g0 = g.generator(0).unwrap();
        let x = CrossedElement::monomial(&s, &diag(&[1, 2]), &g0).unwrap();
        let expected = CrossedElement::monomial(&s, &diag(&[2, 1]), &g0.inverse()).unwrap();
        assert_eq!(x.adjoint().unwrap(), expected);
        let u = CrossedElement::embed_u(&s, &g0).unwrap();
        assert_eq!(
            u.adjoint().unwrap(),
            CrossedElement::embed_u(&s, &g0.inverse()).unwrap()
        );
        assert_eq!(x.adjoint().unwrap().adjoint().unwrap(), x);
    }

    #[test]
    fn expectation_examples() {
        let s = f2_swap();
        let g = s.group().clone();
        let m = diag(&[2, -3]);
        assert_eq!(CrossedElement::embed_m(&s, &m).unwrap().cond_expect(), m);
        let u = CrossedElement::embed_u(&s, &g.generator(0).unwrap()).unwrap();
        assert!(u.cond_expect().is_zero());
        // u_g m = m^g u_g
        let lhs = u.mul(&CrossedElement::embed_m(&s, &m).unwrap()).unwrap();
        let rhs = CrossedElement::embed_m(&s, &diag(&[-3, 2]))
            .unwrap()
            .mul(&u)
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn traces() {
        let s = f2_swap();
        let g = s.group().clone();
        assert_eq!(s.word_trace(&g.identity()), Scalar::one(ScalarMode::Exact));
        assert!(s.word_trace(&g.parse_word("g0 g1").unwrap()).is_zero());
        let half = s.one_m().scale(&Scalar::Exact(GaussRat::ratio(1, 2))).unwrap();
        let x = CrossedElement::from_terms(
            &s,
            [
                (g.identity(), half),
                (g.generator(0).unwrap(), s.one_m().scale_int(3)),
            ],
        )
        .unwrap();
        assert_eq!(x.group_trace().unwrap(), Scalar::Exact(GaussRat::ratio(1, 2)));
        let y = CrossedElement::embed_m(&s, &diag(&[1, 2])).unwrap();
        assert!(matches!(y.group_trace(), Err(Error::Domain(_))));
    }

    #[test]
    fn normalization_merges_and_drops() {
        let s = f2_swap();
        let g = s.group().clone();
        let w = g.generator(1).unwrap();
        let x = CrossedElement::from_terms(
            &s,
            [(w.clone(), diag(&[1, 2])), (w.clone(), diag(&[-1, -2]))],
        )
        .unwrap();
        assert!(x.is_zero());
        let y = CrossedElement::monomial(&s, &diag(&[1, 0]), &w).unwrap();
        assert!(y.sub(&y).unwrap().is_zero());
    }

    #[test]
    fn action_validation() {
        let z2 = GroupSpec::new(vec![Factor::FiniteCyclic { order: 2 }]).unwrap();
        let d3 = CoeffSpace::new(Shape::Diagonal, 3, ScalarMode::Exact).unwrap();
        // A 3-cycle has order 3, which does not divide 2.
        assert!(CrossedSpace::new(z2.clone(), d3, ActionSpec::permutations(vec![vec![1, 2, 0]]), 0.0).is_err());
        assert!(CrossedSpace::new(z2.clone(), d3, ActionSpec::permutations(vec![vec![1, 0, 2]]), 0.0).is_ok());
        assert!(CrossedSpace::new(z2.clone(), d3, ActionSpec::permutations(vec![vec![0, 0, 2]]), 0.0).is_err());
        assert!(CrossedSpace::new(z2, d3, ActionSpec::permutations(vec![]), 0.0).is_err());
        // Conjugation needs full matrices and a unitary (up to scale).
        let f2 = GroupSpec::free_group(1).unwrap();
        let full = CoeffSpace::new(Shape::Full, 2, ScalarMode::Exact).unwrap();
        let nonunitary = CoeffMatrix::from_scalars(
            full,
            [1, 1, 0, 1].iter().map(|&v| Scalar::from_int(v, ScalarMode::Exact)).collect(),
        )
        .unwrap();
        let action = ActionSpec::conjugations(vec![nonunitary]).unwrap();
        assert!(CrossedSpace::new(f2.clone(), full, action, 0.0).is_err());
        let swap = CoeffMatrix::from_scalars(
            full,
            [0, 2, 2, 0].iter().map(|&v| Scalar::from_int(v, ScalarMode::Exact)).collect(),
        )
        .unwrap();
        let action = ActionSpec::conjugations(vec![swap]).unwrap();
        assert!(CrossedSpace::new(f2, full, action, 0.0).is_ok());
    }

    #[test]
    fn conjugation_matches_permutation() {
        let g = GroupSpec::free_group(1).unwrap();
        let full = CoeffSpace::new(Shape::Full, 2, ScalarMode::Exact).unwrap();
        let p = CoeffMatrix::from_scalars(
            full,
            [0, 1, 1, 0].iter().map(|&v| Scalar::from_int(v, ScalarMode::Exact)).collect(),
        )
        .unwrap();
        let by_conj =
            CrossedSpace::new(g.clone(), full, ActionSpec::conjugations(vec![p]).unwrap(), 0.0).unwrap();
        let by_perm =
            CrossedSpace::new(g.clone(), full, ActionSpec::permutations(vec![vec![1, 0]]), 0.0).unwrap();
        let m = CoeffMatrix::from_scalars(
            full,
            [1, 2, 3, 4].iter().map(|&v| Scalar::from_int(v, ScalarMode::Exact)).collect(),
        )
        .unwrap();
        for text in ["g0", "g0^-3", "g0^2"] {
            let w = g.parse_word(text).unwrap();
            assert_eq!(by_conj.act(&w, &m).unwrap(), by_perm.act(&w, &m).unwrap());
        }
    }

    #[test]
    fn json_round_trip() {
        let s = f2_swap();
        let g = s.group().clone();
        let x = CrossedElement::from_terms(
            &s,
            [
                (g.parse_word("g0 g1^-2").unwrap(), diag(&[1, -1])),
                (g.identity(), diag(&[0, 5])),
            ],
        )
        .unwrap();
        let back = CrossedElement::from_json(&s, &x.to_json()).unwrap();
        assert_eq!(back, x);
        let words: Vec<String> = x.terms().keys().map(ToString::to_string).collect();
        assert_eq!(words, vec!["e", "g0 g1^-2"]);
        let scalar_term = serde_json::json!([{"word": "g1", "scalar": "1/2"}]);
        let y = CrossedElement::from_json(&s, &scalar_term).unwrap();
        assert_eq!(y.terms().len(), 1);
    }
}
