use serde::{Deserialize, Serialize};

/// Which basis data the witness was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessIndices {
    /// Allowed entries `(i,l)` and `(j,k)` of S with `G_lj` allowed and `(i,k)` forbidden.
    Pattern {
        i: usize,
        l: usize,
        j: usize,
        k: usize,
    },
    /// Basis elements `i <= j` whose symmetrized product leaves the subspace.
    Basis { i: usize, j: usize },
}

/// Verdict of a quadratic-invariance test. `W` is the controller representation
/// (a static matrix or an FIR transfer matrix).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QiReport<W> {
    pub qi: bool,
    pub witness_controller: Option<W>,
    /// `dist(KGK, S) / ||KGK||_F` for the witness; 0 when `qi` holds.
    pub witness_residual: f64,
    pub witness_indices: Option<WitnessIndices>,
    /// Largest normalized residual seen over all tested products.
    pub max_residual: f64,
    pub tol: f64,
    pub notes: Vec<String>,
}

impl<W> QiReport<W> {
    pub(crate) fn invariant(max_residual: f64, tol: f64) -> Self {
        QiReport {
            qi: true,
            witness_controller: None,
            witness_residual: 0.0,
            witness_indices: None,
            max_residual,
            tol,
            notes: Vec::new(),
        }
    }

    pub(crate) fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}
