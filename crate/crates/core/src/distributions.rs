//! Finite discrete distributions over the reals and the elementary
//! information functionals built on them.
//!
//! All information quantities are in nats. Values are immutable after
//! construction and safe to share across threads.

use thiserror::Error;

/// Atoms closer than this are merged during normalization.
pub const ATOM_MERGE_TOL: f64 = 1e-9;

/// Probability mass must sum to one within this tolerance.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("degenerate distribution: all masses are zero")]
    Degenerate,
    #[error("atom collision: duplicate atom value {0}")]
    AtomCollision(f64),
    #[error("negative mass {0}")]
    NegativeMass(f64),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("atoms and probabilities have mismatched lengths")]
    LengthMismatch,
    #[error("empty support")]
    EmptySupport,
    #[error("table mass {0} differs from 1")]
    BadTableMass(f64),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A finite set of real-valued mass points with probabilities.
///
/// Invariants: atoms strictly increasing, probabilities nonnegative and
/// summing to one within `MASS_TOL`, equal nonzero lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Build from already-normalized pairs. Checks all invariants.
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        if atoms.len() != probs.len() {
            return Err(DistributionError::LengthMismatch);
        }
        if atoms.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        for w in atoms.windows(2) {
            if w[1] <= w[0] {
                return Err(DistributionError::AtomCollision(w[1]));
            }
        }
        let mut total = 0.0;
        for &p in &probs {
            if p < 0.0 {
                return Err(DistributionError::NegativeMass(p));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Self { atoms, probs })
    }

    /// Normalize raw masses into a distribution. Atoms are sorted
    /// ascending, zero-mass atoms dropped, and atoms within
    /// `ATOM_MERGE_TOL` merged with their probabilities summed.
    pub fn normalize(masses: &[f64], atoms: &[f64]) -> Result<Self, DistributionError> {
        if masses.len() != atoms.len() {
            return Err(DistributionError::LengthMismatch);
        }
        let total: f64 = masses.iter().sum();
        for &m in masses {
            if m < 0.0 {
                return Err(DistributionError::NegativeMass(m));
            }
        }
        if total <= 0.0 {
            return Err(DistributionError::Degenerate);
        }
        let mut pairs: Vec<(f64, f64)> = atoms
            .iter()
            .zip(masses)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&a, &m)| (a, m / total))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // merge optimizer atoms that coalesced
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (a, p) in pairs {
            match merged.last_mut() {
                Some(last) if (a - last.0).abs() <= ATOM_MERGE_TOL => last.1 += p,
                _ => merged.push((a, p)),
            }
        }
        let (atoms, probs): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
        Self::new(atoms, probs)
    }

    /// Point mass at `x`.
    pub fn point_mass(x: f64) -> Self {
        Self { atoms: vec![x], probs: vec![1.0] }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.probs.iter().copied())
    }

    /// k-th raw moment.
    pub fn moment(&self, k: u32) -> f64 {
        self.iter().map(|(a, p)| p * a.powi(k as i32)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Probability of the event {atom != 0}.
    pub fn prob_nonzero(&self) -> f64 {
        self.iter().filter(|(a, _)| *a != 0.0).map(|(_, p)| p).sum()
    }

    /// Two-column delimited text block, ascending atom order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (a, p) in self.iter() {
            s.push_str(&format!("{a:.17e}\t{p:.17e}\n"));
        }
        s
    }

    /// Parse the two-column format written by [`to_text`](Self::to_text).
    pub fn from_text(text: &str) -> Result<Self, DistributionError> {
        let mut atoms = Vec::new();
        let mut masses = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let a: f64 = it
                .next()
                .ok_or_else(|| DistributionError::Parse(format!("line {}: missing atom", lineno + 1)))?
                .parse()
                .map_err(|e| DistributionError::Parse(format!("line {}: {e}", lineno + 1)))?;
            let p: f64 = it
                .next()
                .ok_or_else(|| DistributionError::Parse(format!("line {}: missing probability", lineno + 1)))?
                .parse()
                .map_err(|e| DistributionError::Parse(format!("line {}: {e}", lineno + 1)))?;
            atoms.push(a);
            masses.push(p);
        }
        Self::normalize(&masses, &atoms)
    }
}

/// KL divergence sum p_i log(p_i/q_i) in nats over a shared atom set.
///
/// Returns +infinity when p places mass where q does not.
pub fn kl_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    assert_eq!(p.len(), q.len(), "kl_discrete requires a shared atom set");
    kl_vec(p.probs(), q.probs())
}

/// KL divergence between two probability vectors over the same index set.
pub fn kl_vec(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            d += pi * (pi / qi).ln();
        }
    }
    d
}

/// A joint pmf over a product of finite alphabets, stored row-major.
#[derive(Debug, Clone)]
pub struct JointPmf {
    dims: Vec<usize>,
    table: Vec<f64>,
}

impl JointPmf {
    pub fn new(dims: Vec<usize>, table: Vec<f64>) -> Result<Self, DistributionError> {
        let size: usize = dims.iter().product();
        if size == 0 || table.len() != size {
            return Err(DistributionError::LengthMismatch);
        }
        let mut total = 0.0;
        for &v in &table {
            if v < 0.0 {
                return Err(DistributionError::NegativeMass(v));
            }
            total += v;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(DistributionError::BadTableMass(total));
        }
        Ok(Self { dims, table })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Flat index of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut f = 0;
        for (i, &d) in idx.iter().zip(&self.dims) {
            f = f * d + i;
        }
        f
    }

    pub fn mass(&self, idx: &[usize]) -> f64 {
        self.table[self.flat_index(idx)]
    }

    /// Iterate all multi-indices with their mass.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let dims = self.dims.clone();
        self.table.iter().enumerate().map(move |(f, &v)| {
            let mut idx = vec![0usize; dims.len()];
            let mut rem = f;
            for k in (0..dims.len()).rev() {
                idx[k] = rem % dims[k];
                rem /= dims[k];
            }
            (idx, v)
        })
    }
}
