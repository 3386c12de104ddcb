//! Input file schemas.
//!
//! A problem file holds the plant blocks and, optionally, the controller
//! subspace. Matrices are arrays of rows; FIR systems are
//! `{"horizon": h, "taps": [...]}` objects. A separate subspace file may
//! supply the subspace keys instead.

use std::fmt;
use std::path::{Path, PathBuf};

use quadinv_core::fir::FirSubspace;
use quadinv_core::{
    Dense, FirPlant, FirTransferMatrix, Matrix, Pattern, StaticPlant, SubspaceBasis,
};
use serde::Deserialize;

/// A static matrix or an FIR system.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Block {
    Static(Dense),
    Fir(FirTransferMatrix),
}

impl Block {
    fn as_fir(&self) -> FirTransferMatrix {
        match self {
            Block::Static(m) => FirTransferMatrix::constant(m.0.clone()),
            Block::Fir(f) => f.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceSpec {
    pub basis: Option<Vec<Block>>,
    pub pattern: Option<Pattern>,
    /// Minimum lag per entry, used with `pattern` for FIR subspaces.
    pub delays: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "P11")]
    pub p11: Option<Block>,
    #[serde(rename = "P12")]
    pub p12: Option<Block>,
    #[serde(rename = "P21")]
    pub p21: Option<Block>,
    #[serde(rename = "G")]
    pub g: Block,
    pub basis: Option<Vec<Block>>,
    pub pattern: Option<Pattern>,
    pub delays: Option<Vec<Vec<usize>>>,
    /// Sampling box per subspace coordinate for `probe` (default `[-1, 1]`).
    pub ranges: Option<Vec<(f64, f64)>>,
    /// `"grid"` (default) or `"random"`.
    pub scheme: Option<String>,
}

/// An input problem: exit code 2 territory when anything here fails.
#[derive(Debug)]
pub struct InputError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl InputError {
    pub fn new(path: &Path, message: impl Into<String>) -> Self {
        InputError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError::new(path, format!("cannot read file: {e}")))?;
    serde_json::from_str(&text).map_err(|e| InputError {
        path: path.to_path_buf(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    })
}

pub struct Problem {
    pub path: PathBuf,
    pub file: ProblemFile,
    pub subspace: SubspaceSpec,
}

impl Problem {
    pub fn load(input: &Path, subspace: Option<&Path>) -> Result<Self, InputError> {
        let file: ProblemFile = read_json(input)?;
        let spec = match subspace {
            Some(p) => read_json(p)?,
            None => SubspaceSpec {
                basis: file.basis.clone(),
                pattern: file.pattern.clone(),
                delays: file.delays.clone(),
            },
        };
        if spec.basis.is_some() == spec.pattern.is_some() {
            return Err(InputError::new(
                subspace.unwrap_or(input),
                "expected exactly one of \"basis\" or \"pattern\"",
            ));
        }
        Ok(Problem {
            path: input.to_path_buf(),
            file,
            subspace: spec,
        })
    }

    pub fn is_fir(&self) -> bool {
        let f = &self.file;
        let blocks = [&f.p11, &f.p12, &f.p21]
            .into_iter()
            .flatten()
            .chain(std::iter::once(&f.g))
            .chain(self.subspace.basis.iter().flatten());
        blocks.into_iter().any(|b| matches!(b, Block::Fir(_)))
    }

    fn err(&self, message: impl Into<String>) -> InputError {
        InputError::new(&self.path, message)
    }

    pub fn static_g(&self) -> Result<Matrix, InputError> {
        match &self.file.g {
            Block::Static(m) => Ok(m.0.clone()),
            Block::Fir(_) => Err(self.err("G must be a static matrix here")),
        }
    }

    pub fn fir_g(&self) -> FirTransferMatrix {
        self.file.g.as_fir()
    }

    /// Controllers are `G.cols x G.rows`.
    fn controller_shape(&self) -> (usize, usize) {
        match &self.file.g {
            Block::Static(m) => (m.ncols(), m.nrows()),
            Block::Fir(f) => (f.cols(), f.rows()),
        }
    }

    pub fn pattern(&self) -> Option<&Pattern> {
        self.subspace.pattern.as_ref()
    }

    pub fn static_basis(&self) -> Result<SubspaceBasis, InputError> {
        let (rows, cols) = self.controller_shape();
        if let Some(p) = &self.subspace.pattern {
            if (p.rows(), p.cols()) != (rows, cols) {
                return Err(self.err(format!(
                    "pattern is {}x{}, controllers must be {rows}x{cols}",
                    p.rows(),
                    p.cols()
                )));
            }
            return Ok(quadinv_core::pattern_to_basis(p));
        }
        let elements = self
            .subspace
            .basis
            .iter()
            .flatten()
            .map(|b| match b {
                Block::Static(m) => Ok(m.0.clone()),
                Block::Fir(_) => Err(self.err("basis elements must be static matrices here")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        SubspaceBasis::new(rows, cols, elements).map_err(|e| self.err(e.to_string()))
    }

    pub fn fir_subspace(&self, horizon: usize) -> Result<FirSubspace, InputError> {
        let (rows, cols) = self.controller_shape();
        if let Some(p) = &self.subspace.pattern {
            if (p.rows(), p.cols()) != (rows, cols) {
                return Err(self.err(format!(
                    "pattern is {}x{}, controllers must be {rows}x{cols}",
                    p.rows(),
                    p.cols()
                )));
            }
            return match &self.subspace.delays {
                Some(d) => FirSubspace::from_delay_pattern(p, d, horizon)
                    .map_err(|e| self.err(e.to_string())),
                None => Ok(FirSubspace::from_pattern(p, horizon)),
            };
        }
        let elements = self
            .subspace
            .basis
            .iter()
            .flatten()
            .map(|b| b.as_fir().with_horizon(horizon))
            .collect();
        FirSubspace::new(rows, cols, horizon, elements).map_err(|e| self.err(e.to_string()))
    }

    fn require(&self, b: &Option<Block>, name: &str) -> Result<Block, InputError> {
        b.clone()
            .ok_or_else(|| self.err(format!("missing plant block \"{name}\"")))
    }

    pub fn has_full_plant(&self) -> bool {
        self.file.p11.is_some() && self.file.p12.is_some() && self.file.p21.is_some()
    }

    pub fn static_plant(&self) -> Result<StaticPlant, InputError> {
        let get = |b: Block, name: &str| match b {
            Block::Static(m) => Ok(m.0),
            Block::Fir(_) => Err(self.err(format!("{name} must be a static matrix"))),
        };
        StaticPlant::new(
            get(self.require(&self.file.p11, "P11")?, "P11")?,
            get(self.require(&self.file.p12, "P12")?, "P12")?,
            get(self.require(&self.file.p21, "P21")?, "P21")?,
            self.static_g()?,
        )
        .map_err(|e| self.err(e.to_string()))
    }

    pub fn fir_plant(&self) -> Result<FirPlant, InputError> {
        FirPlant::new(
            self.require(&self.file.p11, "P11")?.as_fir(),
            self.require(&self.file.p12, "P12")?.as_fir(),
            self.require(&self.file.p21, "P21")?.as_fir(),
            self.fir_g(),
        )
        .map_err(|e| self.err(e.to_string()))
    }
}
