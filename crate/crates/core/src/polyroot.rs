//! Real polynomials and their real roots inside a closed interval.
//!
//! Degrees one to three are solved in closed form; higher degrees go through
//! the eigenvalues of the balanced companion matrix. Every candidate root is
//! Newton-polished and certified by its residual before it is returned.

use nalgebra::DMatrix;

use crate::{Error, Result};

const TRIM_REL: f64 = 1e-14;
// Eigenvalues of a multiple root split by ~sqrt(eps); keep those and let the
// residual test decide.
const COMPANION_IMAG_REL: f64 = 1e-6;
const CLAMP_TOL: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-10;
const RESIDUAL_REL: f64 = 1e-8;

/// Real polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    /// Trailing coefficients below `1e-14·max|c|` are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if max == 0.0 || coeffs.is_empty() {
            return Self { coeffs: vec![0.0] };
        }
        while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= TRIM_REL * max {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Horner evaluation.
    pub fn evaluate(&self, d: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * d + c)
    }

    /// Value and first derivative at `d`.
    pub fn evaluate_with_derivative(&self, d: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for c in self.coeffs.iter().rev() {
            slope = slope * d + value;
            value = value * d + c;
        }
        (value, slope)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::constant(0.0);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// Coefficient convolution.
    pub fn multiply(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let out = (0..len)
            .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
            .collect();
        Self::new(out)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    fn residual_bound(&self, lo: f64, hi: f64) -> f64 {
        let reach = lo.abs().max(hi.abs()).max(1.0);
        let mut bound: f64 = 1.0;
        let mut power = 1.0;
        for c in &self.coeffs {
            bound = bound.max(c.abs() * power);
            power *= reach;
        }
        RESIDUAL_REL * bound
    }

    fn newton_polish(&self, mut x: f64, steps: usize) -> f64 {
        let mut fx = self.evaluate(x).abs();
        for _ in 0..steps {
            let (v, s) = self.evaluate_with_derivative(x);
            if s == 0.0 || !s.is_finite() {
                break;
            }
            let next = x - v / s;
            let fn_ = self.evaluate(next).abs();
            if !(fn_ < fx) {
                break;
            }
            x = next;
            fx = fn_;
        }
        x
    }
}

/// Real roots of `p` in `[lo, hi]`, sorted ascending with near-duplicates merged.
pub fn real_roots_in_interval(p: &RealPolynomial, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if p.degree() == 0 {
        return Err(Error::ConstantPolynomial);
    }
    if !(lo <= hi) {
        return Ok(Vec::new());
    }
    let (raw, polish_steps) = match p.degree() {
        1 => (vec![-p.coeffs[0] / p.coeffs[1]], 2),
        2 => (quadratic_roots(p.coeffs[2], p.coeffs[1], p.coeffs[0]), 2),
        3 => (
            cubic_roots(p.coeffs[3], p.coeffs[2], p.coeffs[1], p.coeffs[0]),
            2,
        ),
        _ => (companion_real_roots(p), 1),
    };

    let bound = p.residual_bound(lo, hi);
    let lo_slack = lo - CLAMP_TOL * lo.abs().max(1.0);
    let hi_slack = hi + CLAMP_TOL * hi.abs().max(1.0);
    let mut roots: Vec<f64> = Vec::with_capacity(raw.len());
    for r in raw {
        if !r.is_finite() {
            continue;
        }
        let mut r = p.newton_polish(r, polish_steps);
        if p.evaluate(r).abs() > bound {
            r = p.newton_polish(r, 16);
            if p.evaluate(r).abs() > bound {
                continue;
            }
        }
        if r < lo_slack || r > hi_slack {
            continue;
        }
        roots.push(r.clamp(lo, hi));
    }

    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|b, a| (*b - *a).abs() <= MERGE_TOL);
    // Collapse clusters around a multiple root: neighbours whose midpoint is
    // itself a certified root.
    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if r - *last <= 1e-6 * (1.0 + r.abs()) => {
                let mid = 0.5 * (*last + r);
                if p.evaluate(mid).abs() <= bound {
                    *last = mid;
                } else {
                    merged.push(r);
                }
            }
            _ => merged.push(r),
        }
    }
    let mut roots = merged;

    if roots.is_empty() {
        let (flo, fhi) = (p.evaluate(lo), p.evaluate(hi));
        if flo * fhi < 0.0 {
            roots.push(bisect(p, lo, hi, flo));
        }
    }
    Ok(roots)
}

fn bisect(p: &RealPolynomial, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = p.evaluate(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Real roots of `a·x² + b·x + c` (`a ≠ 0`) with the cancellation-free formula.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    let scale = b * b + (4.0 * a * c).abs();
    if disc < 0.0 {
        if disc >= -1e-14 * scale {
            return vec![-b / (2.0 * a)];
        }
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Real roots of `a·x³ + b·x² + c·x + d` (`a ≠ 0`).
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let ts: Vec<f64> = if p == 0.0 && q == 0.0 {
        vec![0.0]
    } else if disc > 0.0 {
        // one real root; pick the cube-root branch without cancellation
        let big = -(half_q.signum()) * (half_q.abs() + disc.sqrt()).cbrt();
        let t = if big != 0.0 { big - third_p / big } else { 0.0 };
        vec![t]
    } else {
        let r = (-third_p).sqrt();
        let cos_arg = (-half_q / (r * r * r)).clamp(-1.0, 1.0);
        let phi = cos_arg.acos() / 3.0;
        let two_r = 2.0 * r;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        vec![
            two_r * phi.cos(),
            two_r * (phi - tau).cos(),
            two_r * (phi + tau).cos(),
        ]
    };
    ts.into_iter().map(|t| t - shift).collect()
}

/// Real eigenvalues of the balanced companion matrix.
fn companion_real_roots(p: &RealPolynomial) -> Vec<f64> {
    let n = p.degree();
    let lead = p.coeffs[n];
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -p.coeffs[i] / lead;
    }
    balance(&mut comp);
    let eig = match comp.clone().try_schur(f64::EPSILON, 10_000) {
        Some(s) => s.complex_eigenvalues(),
        None => return Vec::new(),
    };
    eig.iter()
        .filter(|z| z.im.abs() <= COMPANION_IMAG_REL * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

/// Parlett–Reinsch diagonal balancing with radix-2 scaling.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    let mut converged = false;
    let mut guard = 0;
    while !converged && guard < 100 {
        guard += 1;
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].abs();
                    row += m[(i, j)].abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let sum = col + row;
            let mut f = 1.0;
            let mut g = row / RADIX;
            while col < g {
                f *= RADIX;
                col *= RADIX * RADIX;
            }
            g = row * RADIX;
            while col > g {
                f /= RADIX;
                col /= RADIX * RADIX;
            }
            if (col + row) / f < 0.95 * sum {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}
