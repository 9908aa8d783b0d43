//! Shared text formats: 10-significant-digit numbers and matrix JSON.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{ComplexMatrix, C64};

pub const SIG_DIGITS: usize = 10;

/// `x` printed with 10 significant digits, without trailing zeros.
pub fn sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x.is_infinite() { format!("{x}") } else { "0".into() };
    }
    let s = format!("{:.*e}", SIG_DIGITS - 1, x);
    let v: f64 = s.parse().expect("formatted float parses");
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        let mut t = format!("{:.*}", decimals, v);
        if t.contains('.') {
            while t.ends_with('0') {
                t.pop();
            }
            if t.ends_with('.') {
                t.pop();
            }
        }
        if t == "-0" {
            t = "0".into();
        }
        t
    } else {
        s
    }
}

/// `x` rounded to 10 significant digits.
pub fn round10(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap()
}

/// Row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let re = (0..m.rows())
            .map(|r| (0..m.cols()).map(|c| round10(m[(r, c)].re)).collect())
            .collect();
        let im = (0..m.rows())
            .map(|r| (0..m.cols()).map(|c| round10(m[(r, c)].im)).collect())
            .collect();
        Self { re, im }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let rows = self.re.len();
        if rows == 0 || self.im.len() != rows {
            return Err(Error::DimensionMismatch("matrix document shape".into()));
        }
        let cols = self.re[0].len();
        if self.re.iter().chain(&self.im).any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged matrix document".into()));
        }
        Ok(ComplexMatrix::from_fn(rows, cols, |r, c| C64::new(self.re[r][c], self.im[r][c])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_digits() {
        assert_eq!(sig10(0.0), "0");
        assert_eq!(sig10(1.0), "1");
        assert_eq!(sig10(std::f64::consts::SQRT_2), "1.414213562");
        assert_eq!(sig10(-0.5), "-0.5");
        assert_eq!(sig10(5.656854249492381), "5.656854249");
        assert_eq!(sig10(1.9e-22), "1.900000000e-22");
        assert_eq!(sig10(123456.0), "123456");
        assert_eq!(round10(1.23456789012345), 1.234567890);
    }

    #[test]
    fn matrix_round_trip() {
        let m = crate::qlinalg::pauli_y();
        let doc = MatrixDoc::from_matrix(&m);
        assert_eq!(doc.to_matrix().unwrap(), m);
        let bad = MatrixDoc { re: vec![vec![1.0]], im: vec![] };
        assert!(bad.to_matrix().is_err());
    }
}
