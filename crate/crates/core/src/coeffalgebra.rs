//! The coefficient *-algebra M: `d×d` complex matrices, full or diagonal.
//!
//! Scalars are either exact Gaussian rationals or `f64` complex numbers; a
//! matrix carries one mode for all its entries and operations refuse to mix
//! modes, shapes or dimensions. A `Diagonal(d)` matrix behaves exactly like the
//! `Full(d)` matrix with the same diagonal and zeros elsewhere.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{mismatch, Error, Result};

/// Default absolute tolerance for float-mode comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarMode {
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Full,
    Diagonal,
}

/// Shape, dimension and scalar mode shared by every element of one M.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoeffSpace {
    pub shape: Shape,
    #[serde(rename = "dimension")]
    pub dim: usize,
    pub mode: ScalarMode,
}

impl CoeffSpace {
    pub fn new(shape: Shape, dim: usize, mode: ScalarMode) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("coefficient dimension must be >= 1".into()));
        }
        Ok(CoeffSpace { shape, dim, mode })
    }

    fn stored_len(&self) -> usize {
        match self.shape {
            Shape::Full => self.dim * self.dim,
            Shape::Diagonal => self.dim,
        }
    }
}

/// Exact complex number `re + im·i` with rational parts in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussRat { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        GaussRat {
            re,
            im: BigRational::zero(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::real(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        Self::real(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn i() -> Self {
        GaussRat {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for GaussRat {
    /// Canonical `p/q+r/s*i` form; integer parts drop the denominator.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.im.is_negative() { '-' } else { '+' };
        write!(
            f,
            "{}{}{}*i",
            fmt_rational(&self.re),
            sign,
            fmt_rational(&self.im.abs())
        )
    }
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("bad rational {s:?}"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p, q),
        None => (s, "1"),
    };
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

impl FromStr for GaussRat {
    type Err = Error;

    /// Accepts `p/q+r/s*i`, a plain rational `p/q`, or a pure imaginary `r/s*i`.
    /// A unit imaginary coefficient may be left out (`i`, `-i`, `1-i`).
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let Some(body) = s.strip_suffix("*i").or_else(|| s.strip_suffix('i')) else {
            return Ok(GaussRat::real(parse_rational(&s)?));
        };
        let parse_im = |t: &str| match t {
            "" | "+" => Ok(BigRational::one()),
            "-" => Ok(-BigRational::one()),
            _ => parse_rational(t.strip_prefix('+').unwrap_or(t)),
        };
        // The imaginary part starts at the last sign that is not leading.
        let split = body
            .char_indices()
            .filter(|&(k, c)| k > 0 && (c == '+' || c == '-'))
            .map(|(k, _)| k)
            .last();
        let (re, im) = match split {
            Some(k) => (parse_rational(&body[..k])?, parse_im(&body[k..])?),
            None => (BigRational::zero(), parse_im(body)?),
        };
        Ok(GaussRat { re, im })
    }
}

/// Arithmetic shared by the two scalar kinds.
pub(crate) trait Field: Clone + PartialEq + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    fn is_zero(&self) -> bool;
}

impl Field for GaussRat {
    fn zero() -> Self {
        GaussRat::default()
    }
    fn one() -> Self {
        GaussRat::from_int(1)
    }
    fn add(&self, o: &Self) -> Self {
        GaussRat::new(&self.re + &o.re, &self.im + &o.im)
    }
    fn sub(&self, o: &Self) -> Self {
        GaussRat::new(&self.re - &o.re, &self.im - &o.im)
    }
    fn mul(&self, o: &Self) -> Self {
        if self.im.is_zero() && o.im.is_zero() {
            return GaussRat::real(&self.re * &o.re);
        }
        GaussRat::new(
            &self.re * &o.re - &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }
    fn neg(&self) -> Self {
        GaussRat::new(-&self.re, -&self.im)
    }
    fn conj(&self) -> Self {
        GaussRat::new(self.re.clone(), -&self.im)
    }
    fn inv(&self) -> Option<Self> {
        let norm = &self.re * &self.re + &self.im * &self.im;
        if norm.is_zero() {
            return None;
        }
        Some(GaussRat::new(&self.re / &norm, -&self.im / &norm))
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl Field for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn inv(&self) -> Option<Self> {
        if self.norm_sqr() == 0.0 {
            None
        } else {
            Some(Complex64::inv(self))
        }
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(GaussRat),
    Float(Complex64),
}

impl Scalar {
    pub fn mode(&self) -> ScalarMode {
        match self {
            Scalar::Exact(_) => ScalarMode::Exact,
            Scalar::Float(_) => ScalarMode::Float,
        }
    }

    pub fn zero(mode: ScalarMode) -> Self {
        Self::from_int(0, mode)
    }

    pub fn one(mode: ScalarMode) -> Self {
        Self::from_int(1, mode)
    }

    pub fn from_int(n: i64, mode: ScalarMode) -> Self {
        match mode {
            ScalarMode::Exact => Scalar::Exact(GaussRat::from_int(n)),
            ScalarMode::Float => Scalar::Float(Complex64::new(n as f64, 0.0)),
        }
    }

    /// Exact values convert losslessly to the nearest floats; float to exact is refused.
    pub fn to_mode(&self, mode: ScalarMode) -> Result<Scalar> {
        match (self, mode) {
            (Scalar::Exact(q), ScalarMode::Float) => Ok(Scalar::Float(q.to_complex())),
            (Scalar::Float(_), ScalarMode::Exact) => {
                Err(mismatch!("float scalar cannot enter an exact computation"))
            }
            _ => Ok(self.clone()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => Field::is_zero(q),
            Scalar::Float(c) => Field::is_zero(c),
        }
    }

    pub fn conj(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(Field::conj(q)),
            Scalar::Float(c) => Scalar::Float(c.conj()),
        }
    }

    pub fn approx_eq(&self, other: &Scalar, tol: f64) -> Result<bool> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Ok(a == b),
            (Scalar::Float(a), Scalar::Float(b)) => Ok((a - b).norm() <= tol),
            _ => Err(mismatch!("scalars of different modes")),
        }
    }

    /// JSON form: exact as a `p/q+r/s*i` string, float as `[re, im]`.
    pub fn to_json(&self) -> Value {
        match self {
            Scalar::Exact(q) => Value::String(q.to_string()),
            Scalar::Float(c) => json!([c.re, c.im]),
        }
    }

    /// Reads a JSON scalar into `mode`. Strings are exact, numbers and pairs are
    /// converted (binary floats enter exact mode with their exact value).
    pub fn from_json(value: &Value, mode: ScalarMode) -> Result<Scalar> {
        let bad = || Error::Parse(format!("bad scalar {value}"));
        let float_to_exact = |x: f64| BigRational::from_float(x).ok_or_else(bad);
        match value {
            Value::String(s) => Scalar::Exact(s.parse()?).to_mode(mode),
            Value::Number(n) => {
                let x = n.as_f64().ok_or_else(bad)?;
                match mode {
                    ScalarMode::Float => Ok(Scalar::Float(Complex64::new(x, 0.0))),
                    ScalarMode::Exact => match n.as_i64() {
                        Some(i) => Ok(Scalar::Exact(GaussRat::from_int(i))),
                        None => Ok(Scalar::Exact(GaussRat::real(float_to_exact(x)?))),
                    },
                }
            }
            Value::Array(pair) if pair.len() == 2 => {
                let re = pair[0].as_f64().ok_or_else(bad)?;
                let im = pair[1].as_f64().ok_or_else(bad)?;
                match mode {
                    ScalarMode::Float => Ok(Scalar::Float(Complex64::new(re, im))),
                    ScalarMode::Exact => Ok(Scalar::Exact(GaussRat::new(
                        float_to_exact(re)?,
                        float_to_exact(im)?,
                    ))),
                }
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) if q.im.is_zero() => f.write_str(&fmt_rational(&q.re)),
            Scalar::Exact(q) => write!(f, "{q}"),
            Scalar::Float(c) if c.im == 0.0 => write!(f, "{}", c.re),
            Scalar::Float(c) => write!(f, "{}{:+}i", c.re, c.im),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Entries {
    Exact(Vec<GaussRat>),
    Float(Vec<Complex64>),
}

/// An element of M. Full matrices are stored row-major; diagonal ones as their diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffMatrix {
    shape: Shape,
    dim: usize,
    entries: Entries,
}

fn zip_with<T: Field>(a: &[T], b: &[T], f: impl Fn(&T, &T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

fn product<T: Field>(shape: Shape, d: usize, a: &[T], b: &[T]) -> Vec<T> {
    match shape {
        Shape::Diagonal => zip_with(a, b, T::mul),
        Shape::Full => {
            let mut out = vec![T::zero(); d * d];
            for i in 0..d {
                for k in 0..d {
                    let aik = &a[i * d + k];
                    if aik.is_zero() {
                        continue;
                    }
                    for j in 0..d {
                        let t = aik.mul(&b[k * d + j]);
                        out[i * d + j] = out[i * d + j].add(&t);
                    }
                }
            }
            out
        }
    }
}

fn adjoint_of<T: Field>(shape: Shape, d: usize, a: &[T]) -> Vec<T> {
    match shape {
        Shape::Diagonal => a.iter().map(T::conj).collect(),
        Shape::Full => (0..d * d).map(|k| a[(k % d) * d + k / d].conj()).collect(),
    }
}

/// Gauss-Jordan inverse of a full `d×d` matrix, `None` when singular.
fn inverse_of<T: Field>(d: usize, a: &[T], pivot_score: impl Fn(&T) -> f64) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv: Vec<T> = (0..d * d)
        .map(|k| if k / d == k % d { T::one() } else { T::zero() })
        .collect();
    for col in 0..d {
        let pivot = (col..d)
            .filter(|&r| !m[r * d + col].is_zero())
            .max_by(|&r, &s| {
                pivot_score(&m[r * d + col]).total_cmp(&pivot_score(&m[s * d + col]))
            })?;
        for j in 0..d {
            m.swap(col * d + j, pivot * d + j);
            inv.swap(col * d + j, pivot * d + j);
        }
        let p = m[col * d + col].inv()?;
        for j in 0..d {
            m[col * d + j] = m[col * d + j].mul(&p);
            inv[col * d + j] = inv[col * d + j].mul(&p);
        }
        for r in 0..d {
            if r == col || m[r * d + col].is_zero() {
                continue;
            }
            let f = m[r * d + col].clone();
            for j in 0..d {
                m[r * d + j] = m[r * d + j].sub(&f.mul(&m[col * d + j]));
                inv[r * d + j] = inv[r * d + j].sub(&f.mul(&inv[col * d + j]));
            }
        }
    }
    Some(inv)
}

impl CoeffMatrix {
    pub fn zero(space: CoeffSpace) -> Self {
        Self::filled(space, |_, _| false)
    }

    /// The unit `1_M`.
    pub fn identity(space: CoeffSpace) -> Self {
        Self::filled(space, |i, j| i == j)
    }

    /// Matrix unit `E_ij` (for diagonal shape only `i == j` is meaningful).
    pub fn unit(space: CoeffSpace, i: usize, j: usize) -> Self {
        Self::filled(space, |r, c| r == i && c == j)
    }

    fn filled(space: CoeffSpace, one_at: impl Fn(usize, usize) -> bool) -> Self {
        let d = space.dim;
        let coords: Vec<(usize, usize)> = match space.shape {
            Shape::Full => (0..d * d).map(|k| (k / d, k % d)).collect(),
            Shape::Diagonal => (0..d).map(|k| (k, k)).collect(),
        };
        let entries = match space.mode {
            ScalarMode::Exact => Entries::Exact(
                coords
                    .iter()
                    .map(|&(i, j)| if one_at(i, j) { GaussRat::one() } else { GaussRat::zero() })
                    .collect(),
            ),
            ScalarMode::Float => Entries::Float(
                coords
                    .iter()
                    .map(|&(i, j)| if one_at(i, j) { <Complex64 as Field>::one() } else { <Complex64 as Field>::zero() })
                    .collect(),
            ),
        };
        CoeffMatrix {
            shape: space.shape,
            dim: d,
            entries,
        }
    }

    /// Builds from stored entries (row-major for full, the diagonal for diagonal).
    pub fn from_scalars(space: CoeffSpace, values: Vec<Scalar>) -> Result<Self> {
        if values.len() != space.stored_len() {
            return Err(mismatch!(
                "expected {} entries for {:?}({}), got {}",
                space.stored_len(),
                space.shape,
                space.dim,
                values.len()
            ));
        }
        let entries = match space.mode {
            ScalarMode::Exact => Entries::Exact(
                values
                    .into_iter()
                    .map(|s| match s {
                        Scalar::Exact(q) => Ok(q),
                        Scalar::Float(_) => Err(mismatch!("float entry in an exact matrix")),
                    })
                    .collect::<Result<_>>()?,
            ),
            ScalarMode::Float => Entries::Float(
                values
                    .into_iter()
                    .map(|s| match s.to_mode(ScalarMode::Float)? {
                        Scalar::Float(c) => Ok(c),
                        Scalar::Exact(_) => unreachable!(),
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(CoeffMatrix {
            shape: space.shape,
            dim: space.dim,
            entries,
        })
    }

    pub fn diagonal_exact(values: Vec<GaussRat>) -> Result<Self> {
        let space = CoeffSpace::new(Shape::Diagonal, values.len(), ScalarMode::Exact)?;
        Self::from_scalars(space, values.into_iter().map(Scalar::Exact).collect())
    }

    /// Diagonal exact matrix from integer entries.
    pub fn diag_int(values: &[i64]) -> Result<Self> {
        Self::diagonal_exact(values.iter().map(|&v| GaussRat::from_int(v)).collect())
    }

    pub fn full_float(dim: usize, row_major: Vec<Complex64>) -> Result<Self> {
        let space = CoeffSpace::new(Shape::Full, dim, ScalarMode::Float)?;
        Self::from_scalars(space, row_major.into_iter().map(Scalar::Float).collect())
    }

    pub fn space(&self) -> CoeffSpace {
        CoeffSpace {
            shape: self.shape,
            dim: self.dim,
            mode: self.mode(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> ScalarMode {
        match self.entries {
            Entries::Exact(_) => ScalarMode::Exact,
            Entries::Float(_) => ScalarMode::Float,
        }
    }

    /// Stored entries as scalars (row-major for full, the diagonal otherwise).
    pub fn stored(&self) -> Vec<Scalar> {
        match &self.entries {
            Entries::Exact(v) => v.iter().cloned().map(Scalar::Exact).collect(),
            Entries::Float(v) => v.iter().copied().map(Scalar::Float).collect(),
        }
    }

    /// Entry `(i, j)` of the matrix, zero off the diagonal for diagonal shape.
    pub fn get(&self, i: usize, j: usize) -> Scalar {
        let idx = match self.shape {
            Shape::Full => Some(i * self.dim + j),
            Shape::Diagonal => (i == j).then_some(i),
        };
        match (&self.entries, idx) {
            (Entries::Exact(v), Some(k)) => Scalar::Exact(v[k].clone()),
            (Entries::Float(v), Some(k)) => Scalar::Float(v[k]),
            (_, None) => Scalar::zero(self.mode()),
        }
    }

    fn check_compatible(&self, other: &CoeffMatrix) -> Result<()> {
        if self.space() != other.space() {
            return Err(mismatch!(
                "{:?} vs {:?}",
                self.space(),
                other.space()
            ));
        }
        Ok(())
    }

    fn zip(
        &self,
        other: &CoeffMatrix,
        exact: impl Fn(&[GaussRat], &[GaussRat]) -> Vec<GaussRat>,
        float: impl Fn(&[Complex64], &[Complex64]) -> Vec<Complex64>,
    ) -> Result<CoeffMatrix> {
        self.check_compatible(other)?;
        let entries = match (&self.entries, &other.entries) {
            (Entries::Exact(a), Entries::Exact(b)) => Entries::Exact(exact(a, b)),
            (Entries::Float(a), Entries::Float(b)) => Entries::Float(float(a, b)),
            _ => unreachable!("modes checked above"),
        };
        Ok(CoeffMatrix {
            shape: self.shape,
            dim: self.dim,
            entries,
        })
    }

    fn map_entries(
        &self,
        exact: impl Fn(&[GaussRat]) -> Vec<GaussRat>,
        float: impl Fn(&[Complex64]) -> Vec<Complex64>,
    ) -> CoeffMatrix {
        let entries = match &self.entries {
            Entries::Exact(a) => Entries::Exact(exact(a)),
            Entries::Float(a) => Entries::Float(float(a)),
        };
        CoeffMatrix {
            shape: self.shape,
            dim: self.dim,
            entries,
        }
    }

    pub fn mul(&self, other: &CoeffMatrix) -> Result<CoeffMatrix> {
        let (s, d) = (self.shape, self.dim);
        self.zip(other, |a, b| product(s, d, a, b), |a, b| product(s, d, a, b))
    }

    pub fn add(&self, other: &CoeffMatrix) -> Result<CoeffMatrix> {
        self.zip(other, |a, b| zip_with(a, b, Field::add), |a, b| zip_with(a, b, Field::add))
    }

    pub fn sub(&self, other: &CoeffMatrix) -> Result<CoeffMatrix> {
        self.zip(other, |a, b| zip_with(a, b, Field::sub), |a, b| zip_with(a, b, Field::sub))
    }

    pub fn neg(&self) -> CoeffMatrix {
        self.map_entries(
            |a| a.iter().map(Field::neg).collect(),
            |a| a.iter().map(Field::neg).collect(),
        )
    }

    pub fn scale(&self, s: &Scalar) -> Result<CoeffMatrix> {
        match (s.to_mode(self.mode())?, &self.entries) {
            (Scalar::Exact(q), Entries::Exact(_)) => Ok(self.map_entries(
                |a| a.iter().map(|x| x.mul(&q)).collect(),
                |_| unreachable!(),
            )),
            (Scalar::Float(c), Entries::Float(_)) => Ok(self.map_entries(
                |_| unreachable!(),
                |a| a.iter().map(|x| x * c).collect(),
            )),
            _ => unreachable!("scalar converted to the matrix mode"),
        }
    }

    pub fn scale_int(&self, k: i64) -> CoeffMatrix {
        self.scale(&Scalar::from_int(k, self.mode()))
            .expect("integer scalars exist in every mode")
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CoeffMatrix {
        let (s, d) = (self.shape, self.dim);
        self.map_entries(|a| adjoint_of(s, d, a), |a| adjoint_of(s, d, a))
    }

    /// Exactly zero (every stored entry is `0`).
    pub fn is_zero(&self) -> bool {
        match &self.entries {
            Entries::Exact(a) => a.iter().all(Field::is_zero),
            Entries::Float(a) => a.iter().all(Field::is_zero),
        }
    }

    /// Zero up to `tol` in float mode; structurally zero in exact mode.
    pub fn is_negligible(&self, tol: f64) -> bool {
        match &self.entries {
            Entries::Exact(a) => a.iter().all(Field::is_zero),
            Entries::Float(a) => a.iter().all(|c| c.norm() <= tol),
        }
    }

    /// Entrywise comparison: structural in exact mode, `|Δ| <= tol` in float mode.
    pub fn approx_eq(&self, other: &CoeffMatrix, tol: f64) -> Result<bool> {
        self.check_compatible(other)?;
        Ok(match (&self.entries, &other.entries) {
            (Entries::Exact(a), Entries::Exact(b)) => a == b,
            (Entries::Float(a), Entries::Float(b)) => {
                a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
            }
            _ => unreachable!("modes checked above"),
        })
    }

    /// Largest entry modulus, as a float.
    pub fn max_abs(&self) -> f64 {
        match &self.entries {
            Entries::Exact(a) => a.iter().map(|q| q.to_complex().norm()).fold(0.0, f64::max),
            Entries::Float(a) => a.iter().map(|c| c.norm()).fold(0.0, f64::max),
        }
    }

    /// `Some(s)` when the matrix equals `s·1_M` (exactly, or within `tol` in float mode).
    pub fn as_scalar_multiple(&self, tol: f64) -> Option<Scalar> {
        let s = self.get(0, 0);
        let candidate = CoeffMatrix::identity(self.space()).scale(&s).ok()?;
        match self.approx_eq(&candidate, tol) {
            Ok(true) => Some(s),
            _ => None,
        }
    }

    /// The same matrix as a `Full(d)` element.
    pub fn to_full(&self) -> CoeffMatrix {
        match self.shape {
            Shape::Full => self.clone(),
            Shape::Diagonal => {
                let space = CoeffSpace {
                    shape: Shape::Full,
                    dim: self.dim,
                    mode: self.mode(),
                };
                let values = (0..self.dim * self.dim)
                    .map(|k| self.get(k / self.dim, k % self.dim))
                    .collect();
                CoeffMatrix::from_scalars(space, values).expect("sizes agree")
            }
        }
    }

    pub fn to_mode(&self, mode: ScalarMode) -> Result<CoeffMatrix> {
        match (&self.entries, mode) {
            (Entries::Exact(a), ScalarMode::Float) => Ok(CoeffMatrix {
                shape: self.shape,
                dim: self.dim,
                entries: Entries::Float(a.iter().map(GaussRat::to_complex).collect()),
            }),
            (Entries::Float(_), ScalarMode::Exact) => {
                Err(mismatch!("float matrix cannot be made exact"))
            }
            _ => Ok(self.clone()),
        }
    }

    /// Two-sided inverse, `None` when singular.
    pub fn inverse(&self) -> Option<CoeffMatrix> {
        let d = self.dim;
        let entries = match (&self.entries, self.shape) {
            (Entries::Exact(a), Shape::Diagonal) => {
                Entries::Exact(a.iter().map(Field::inv).collect::<Option<_>>()?)
            }
            (Entries::Float(a), Shape::Diagonal) => {
                Entries::Float(a.iter().map(Field::inv).collect::<Option<_>>()?)
            }
            (Entries::Exact(a), Shape::Full) => Entries::Exact(inverse_of(d, a, |_| 0.0)?),
            (Entries::Float(a), Shape::Full) => Entries::Float(inverse_of(d, a, |c| c.norm())?),
        };
        Some(CoeffMatrix {
            shape: self.shape,
            dim: d,
            entries,
        })
    }

    /// Relabels coordinates: entry `(i, j)` moves to `(σ(i), σ(j))`.
    pub fn permute(&self, images: &[usize]) -> Result<CoeffMatrix> {
        if images.len() != self.dim {
            return Err(mismatch!(
                "permutation of {} points applied to dimension {}",
                images.len(),
                self.dim
            ));
        }
        fn relabel<T: Clone>(shape: Shape, d: usize, a: &[T], s: &[usize]) -> Vec<T> {
            let mut out = a.to_vec();
            match shape {
                Shape::Diagonal => {
                    for i in 0..d {
                        out[s[i]] = a[i].clone();
                    }
                }
                Shape::Full => {
                    for i in 0..d {
                        for j in 0..d {
                            out[s[i] * d + s[j]] = a[i * d + j].clone();
                        }
                    }
                }
            }
            out
        }
        let (sh, d) = (self.shape, self.dim);
        Ok(self.map_entries(
            |a| relabel(sh, d, a, images),
            |a| relabel(sh, d, a, images),
        ))
    }

    /// JSON form: `{"shape", "dimension", "mode", "entries"}`; full entries are nested rows.
    pub fn to_json(&self) -> Value {
        let stored: Vec<Value> = self.stored().iter().map(Scalar::to_json).collect();
        let entries = match self.shape {
            Shape::Diagonal => Value::Array(stored),
            Shape::Full => Value::Array(
                stored
                    .chunks(self.dim)
                    .map(|row| Value::Array(row.to_vec()))
                    .collect(),
            ),
        };
        json!({
            "shape": self.shape,
            "dimension": self.dim,
            "mode": self.mode(),
            "entries": entries,
        })
    }

    /// Reads a matrix into `space`. `shape`, `dimension` and `mode` keys are
    /// optional but must agree with `space` when present.
    pub fn from_json(value: &Value, space: CoeffSpace) -> Result<CoeffMatrix> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse(format!("matrix must be an object: {value}")))?;
        if let Some(shape) = obj.get("shape") {
            let shape: Shape = serde_json::from_value(shape.clone())
                .map_err(|e| Error::Parse(format!("matrix shape: {e}")))?;
            if shape != space.shape {
                return Err(mismatch!("matrix shape {shape:?}, expected {:?}", space.shape));
            }
        }
        if let Some(dim) = obj.get("dimension") {
            if dim.as_u64() != Some(space.dim as u64) {
                return Err(mismatch!("matrix dimension {dim}, expected {}", space.dim));
            }
        }
        if let Some(mode) = obj.get("mode") {
            let mode: ScalarMode = serde_json::from_value(mode.clone())
                .map_err(|e| Error::Parse(format!("matrix mode: {e}")))?;
            if mode == ScalarMode::Float && space.mode == ScalarMode::Exact {
                return Err(mismatch!("float matrix in an exact scenario"));
            }
        }
        let entries = obj
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("matrix needs an 'entries' array".into()))?;
        let values: Vec<&Value> = match space.shape {
            Shape::Diagonal => entries.iter().collect(),
            Shape::Full => {
                if entries.len() != space.dim {
                    return Err(mismatch!("expected {} rows, got {}", space.dim, entries.len()));
                }
                let mut flat = Vec::new();
                for row in entries {
                    let row = row
                        .as_array()
                        .filter(|r| r.len() == space.dim)
                        .ok_or_else(|| mismatch!("each row needs {} entries", space.dim))?;
                    flat.extend(row.iter());
                }
                flat
            }
        };
        let scalars = values
            .into_iter()
            .map(|v| Scalar::from_json(v, space.mode))
            .collect::<Result<Vec<_>>>()?;
        CoeffMatrix::from_scalars(space, scalars)
    }
}

impl fmt::Display for CoeffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stored = self.stored();
        let join = |xs: &[Scalar]| {
            xs.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self.shape {
            Shape::Diagonal => write!(f, "diag({})", join(&stored)),
            Shape::Full => {
                let rows: Vec<String> = stored
                    .chunks(self.dim)
                    .map(|r| format!("[{}]", join(r)))
                    .collect();
                write!(f, "[{}]", rows.join(", "))
            }
        }
    }
}
