//! Dense matrices over the rationals.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Parse "3", "-1", "3/2" or a decimal like "0.5".
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        let d: BigInt = b.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Q::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        let n: BigInt = digits.parse().map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let d = BigInt::from(10u32).pow(fp.len() as u32);
        let v = Q::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| Error::Parse(format!("bad integer {s:?}")))?;
    Ok(Q::from_integer(n))
}

pub fn q_to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct QMatrix {
    n: usize,
    data: Vec<Q>,
}

impl QMatrix {
    pub fn zeros(n: usize) -> Self {
        QMatrix { n, data: vec![Q::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Q::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            data.extend(r);
        }
        Ok(QMatrix { n, data })
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "row {i} has wrong length");
            for (j, &v) in r.iter().enumerate() {
                m.data[i * n + j] = q(v);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<Q>> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j].clone();
            }
        }
        t
    }

    pub fn is_unitriangular(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let v = self.get(i, j);
                if i == j {
                    v.is_one()
                } else if i > j {
                    v.is_zero()
                } else {
                    true
                }
            })
        })
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn is_integral(&self) -> bool {
        self.data.iter().all(|v| v.is_integer())
    }

    /// Exact inverse of an upper unitriangular matrix by back substitution.
    pub fn unitriangular_inverse(&self) -> Result<Self> {
        if !self.is_unitriangular() {
            return Err(Error::NotUnitriangular);
        }
        let n = self.n;
        let mut inv = Self::identity(n);
        for j in 0..n {
            for i in (0..j).rev() {
                let mut s = Q::zero();
                for k in i + 1..=j {
                    s += self.get(i, k) * inv.get(k, j);
                }
                inv.set(i, j, -s);
            }
        }
        Ok(inv)
    }

    /// Determinant by fraction-exact Gaussian elimination.
    pub fn det(&self) -> Q {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = Q::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| !a[r * n + c].is_zero()) else {
                return Q::zero();
            };
            if p != c {
                for k in 0..n {
                    a.swap(p * n + k, c * n + k);
                }
                det = -det;
            }
            let piv = a[c * n + c].clone();
            det *= &piv;
            for r in c + 1..n {
                if a[r * n + c].is_zero() {
                    continue;
                }
                let f = &a[r * n + c] / &piv;
                for k in c..n {
                    let t = &f * &a[c * n + k];
                    a[r * n + k] -= t;
                }
            }
        }
        det
    }

    /// Coefficients c_0..c_n of det(lambda I - M), c_n = 1, by Faddeev-LeVerrier.
    pub fn charpoly(&self) -> Vec<Q> {
        let n = self.n;
        let mut coeffs = vec![Q::zero(); n + 1];
        coeffs[n] = Q::one();
        let mut mk = Self::zeros(n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = self * &mk;
            for i in 0..n {
                let v = next.get(i, i) + &coeffs[n - k + 1];
                next.set(i, i, v);
            }
            let am = self * &next;
            let mut tr = Q::zero();
            for i in 0..n {
                tr += am.get(i, i);
            }
            coeffs[n - k] = -tr / q(k as i64);
            mk = next;
        }
        coeffs
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| q_to_f64(self.get(i, j)))
    }

    pub fn max_abs(&self) -> Q {
        self.data.iter().map(|v| v.abs()).max().unwrap_or_else(Q::zero)
    }
}

impl<'a> Mul<&'a QMatrix> for &'a QMatrix {
    type Output = QMatrix;
    fn mul(self, rhs: &'a QMatrix) -> QMatrix {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = QMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &rhs.data[k * n + j];
                    if !b.is_zero() {
                        out.data[i * n + j] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl<'a> Add<&'a QMatrix> for &'a QMatrix {
    type Output = QMatrix;
    fn add(self, rhs: &'a QMatrix) -> QMatrix {
        assert_eq!(self.n, rhs.n);
        QMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a QMatrix> for &'a QMatrix {
    type Output = QMatrix;
    fn sub(self, rhs: &'a QMatrix) -> QMatrix {
        assert_eq!(self.n, rhs.n);
        QMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl fmt::Display for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}
