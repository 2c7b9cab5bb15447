//! Model covariance inverse under low-rank coordinate updates, and the
//! negative log-likelihood objective `log|Σ| + tr(Σ⁻¹Σ̂)`.

use crate::linalg::{c, hermitize, hpd_cholesky, hpd_logdet, trace_product_re};
use crate::signal::SampleCovariance;
use crate::{CMatrix, CVector, Error, Result};

/// Current `Σ⁻¹` for one detector run.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    inv: CMatrix,
    noise_var: f64,
}

impl CovarianceState {
    /// `Σ⁻¹ = I/σ²`, i.e. every activity at zero.
    pub fn init(l: usize, noise_var: f64) -> Self {
        Self {
            inv: CMatrix::identity(l, l) * c(1.0 / noise_var),
            noise_var,
        }
    }

    pub fn inv(&self) -> &CMatrix {
        &self.inv
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn dim(&self) -> usize {
        self.inv.nrows()
    }

    /// `Σ⁻¹ ← (Σ + c·S·Sᴴ)⁻¹` by the Woodbury identity.
    pub fn rank_p_update(&mut self, block: &CMatrix, coef: f64) -> Result<()> {
        if coef == 0.0 {
            return Ok(());
        }
        let proj = &self.inv * block;
        let gram = block.adjoint() * &proj;
        self.apply_projected_update(&proj, &gram, coef)
    }

    /// Woodbury step with `proj = Σ⁻¹·S` and `gram = Sᴴ·Σ⁻¹·S` precomputed.
    ///
    /// Subtracts `c·proj·(I + c·gram)⁻¹·projᴴ`. The inner `P×P` system is
    /// factored by Cholesky when positive definite and by pivoted LU otherwise.
    pub fn apply_projected_update(
        &mut self,
        proj: &CMatrix,
        gram: &CMatrix,
        coef: f64,
    ) -> Result<()> {
        if coef == 0.0 {
            return Ok(());
        }
        let p = gram.nrows();
        let mut inner = CMatrix::identity(p, p) + gram * c(coef);
        hermitize(&mut inner);
        // solve inner · X = projᴴ
        let rhs = proj.adjoint();
        let solved = match hpd_cholesky(&inner) {
            Some(ch) => ch.solve(&rhs),
            None => inner.lu().solve(&rhs).ok_or(Error::SingularUpdate)?,
        };
        if solved
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::SingularUpdate);
        }
        self.inv.gemm(c(-coef), proj, &solved, c(1.0));
        Ok(())
    }

    /// Sherman–Morrison step `Σ⁻¹ ← (Σ + c·s·sᴴ)⁻¹`.
    pub fn rank_one_update(&mut self, s: &CVector, coef: f64) -> Result<()> {
        if coef == 0.0 {
            return Ok(());
        }
        let w = &self.inv * s;
        let quad = s.dotc(&w).re;
        self.apply_rank_one_projected(&w, quad, coef)
    }

    /// Sherman–Morrison with `w = Σ⁻¹·s` and `quad = sᴴ·Σ⁻¹·s` precomputed.
    pub fn apply_rank_one_projected(&mut self, w: &CVector, quad: f64, coef: f64) -> Result<()> {
        if coef == 0.0 {
            return Ok(());
        }
        let denom = 1.0 + coef * quad;
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::SingularUpdate);
        }
        self.inv.gerc(c(-coef / denom), w, w, c(1.0));
        Ok(())
    }

    /// Re-symmetrize `Σ⁻¹` against accumulated rounding.
    pub fn hermitize(&mut self) {
        hermitize(&mut self.inv);
    }
}

/// One covariance atom: an `L × k` block with its gain.
#[derive(Debug, Clone, Copy)]
pub struct Atom<'a> {
    pub block: &'a CMatrix,
    pub gain: f64,
}

/// Dense `Σ = Σ_j w_j·g_j·A_j·A_jᴴ + σ²·I`.
pub fn model_covariance(
    weights: &[f64],
    atoms: &[Atom<'_>],
    noise_var: f64,
    l: usize,
) -> Result<CMatrix> {
    if weights.len() != atoms.len() {
        return Err(Error::LengthMismatch(weights.len(), atoms.len()));
    }
    let mut sigma = CMatrix::identity(l, l) * c(noise_var);
    for (w, atom) in weights.iter().zip(atoms) {
        let coef = w * atom.gain;
        if coef != 0.0 {
            sigma.gemm(c(coef), atom.block, &atom.block.adjoint(), c(1.0));
        }
    }
    hermitize(&mut sigma);
    Ok(sigma)
}

/// `log|Σ| + tr(Σ⁻¹·Σ̂)` with `Σ` rebuilt densely from the weights.
pub fn objective(
    weights: &[f64],
    atoms: &[Atom<'_>],
    noise_var: f64,
    sample: &SampleCovariance,
) -> Result<f64> {
    let sigma = model_covariance(weights, atoms, noise_var, sample.dim())?;
    objective_of(&sigma, sample)
}

/// The objective for an explicit model covariance.
pub fn objective_of(sigma: &CMatrix, sample: &SampleCovariance) -> Result<f64> {
    let (logdet, chol) = hpd_logdet(sigma)?;
    let solved = chol.solve(sample.mat());
    let tr: f64 = (0..solved.nrows()).map(|i| solved[(i, i)].re).sum();
    let out = logdet + tr;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NotPositiveDefinite)
    }
}

/// `tr(a·b)` re-exported for oracle code.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_product_re(a, b)
}
