//! Options, diagnostics and candidate selection shared by both detectors.

/// When to rebuild the dense objective for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveTrace {
    #[default]
    Off,
    /// Once after every full sweep.
    PerSweep,
    /// After every accepted coordinate update (slow; tests only).
    PerUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub max_sweeps: usize,
    /// Stop once the largest coordinate change in a sweep falls below this.
    pub tol: f64,
    pub trace: ObjectiveTrace,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 20,
            tol: 1e-4,
            trace: ObjectiveTrace::Off,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub sweeps: usize,
    pub converged: bool,
    /// Accepted (non-zero) coordinate updates.
    pub updates: usize,
    /// Largest `|d*|` of each sweep.
    pub max_change: Vec<f64>,
    /// Dense objective values, as requested by [`ObjectiveTrace`].
    pub objective: Vec<f64>,
}

const TIE_REL: f64 = 1e-12;

/// Minimizer over `(d, f(d))` candidates; near-ties go to the smallest `|d|`.
pub fn pick_candidate(candidates: &[(f64, f64)]) -> Option<f64> {
    let best = candidates
        .iter()
        .filter(|(_, f)| f.is_finite())
        .map(|(_, f)| *f)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = TIE_REL * best.abs().max(1.0);
    candidates
        .iter()
        .filter(|(_, f)| f.is_finite() && *f <= best + tol)
        .map(|(d, _)| *d)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)))
}
