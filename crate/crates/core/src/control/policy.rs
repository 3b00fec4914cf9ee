//! Bin-path-adapted control tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use num_complex::Complex64;

use crate::matrixcore::{
    eigh, operator_norm, CMatrix, HermitianMatrix, MatrixTuple, SpectralDecomposition,
};

/// What a node at step `i` may read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoStructure {
    /// Bins and GUE increments of steps `1..=i`, including the step the
    /// control acts on.
    #[default]
    Anticipating,
    /// Bins and increments of steps `1..i` only.
    Predictable,
}

impl InfoStructure {
    /// Number of bins and increments visible at step `i` (1-based).
    pub fn visible(self, i: usize) -> usize {
        match self {
            InfoStructure::Anticipating => i,
            InfoStructure::Predictable => i - 1,
        }
    }
}

/// Matrix features of a polynomial node: the identity, symmetrized words in
/// the letters `(x0, visible increments)` up to `degree`, and componentwise
/// powers `Y_l^p`, `2 <= p <= state_powers`, of the uncontrolled state
/// `Y = x0 + beta_F * (sum of visible increments)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBasis {
    pub degree: usize,
    #[serde(default = "one")]
    pub state_powers: usize,
    #[serde(default)]
    pub info: InfoStructure,
}

fn one() -> usize {
    1
}

impl Default for FeatureBasis {
    fn default() -> Self {
        FeatureBasis {
            degree: 1,
            state_powers: 1,
            info: InfoStructure::Anticipating,
        }
    }
}

impl FeatureBasis {
    /// Letters at step `i`: `x0` components first, then increment `k` component `l`
    /// at `d (1 + k) + l`.
    pub fn letters(&self, d: usize, i: usize) -> usize {
        d * (1 + self.info.visible(i))
    }

    /// Words of length `1..=degree` up to reversal, in a fixed order.
    fn words(&self, d: usize, i: usize) -> Vec<Vec<usize>> {
        let letters = self.letters(d, i);
        let mut out = Vec::new();
        let mut layer: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..self.degree {
            let mut next = Vec::with_capacity(layer.len() * letters);
            for w in &layer {
                for a in 0..letters {
                    let mut v = w.clone();
                    v.push(a);
                    next.push(v);
                }
            }
            out.extend(
                next.iter()
                    .filter(|w| {
                        let r: Vec<usize> = w.iter().rev().copied().collect();
                        **w <= r
                    })
                    .cloned(),
            );
            layer = next;
        }
        out
    }

    /// Number of features at step `i`.
    pub fn len(&self, d: usize, i: usize) -> usize {
        1 + self.words(d, i).len() + d * self.state_powers.saturating_sub(1)
    }

    /// Feature matrices at step `i` given `x0` and all `K` increments; only
    /// the visible increments are read.
    pub fn features(
        &self,
        x0: &MatrixTuple,
        increments: &[MatrixTuple],
        beta_f: f64,
        i: usize,
    ) -> Vec<HermitianMatrix> {
        let d = x0.d();
        let n = x0.dim();
        let vis = self.info.visible(i);
        let letter = |a: usize| -> &HermitianMatrix {
            if a < d {
                x0.component(a)
            } else {
                increments[a / d - 1].component(a % d)
            }
        };
        let mut out = vec![HermitianMatrix::identity(n)];
        for w in self.words(d, i) {
            let mut m = letter(w[0]).matrix().clone();
            for &a in &w[1..] {
                m = m.matmul(letter(a).matrix());
            }
            out.push(if w.len() > 1 {
                HermitianMatrix::project(m.hermitian_part())
            } else {
                HermitianMatrix::project(m)
            });
        }
        if self.state_powers > 1 {
            for l in 0..d {
                let mut y = x0.component(l).clone();
                for inc in &increments[..vis] {
                    y.axpy(beta_f, inc.component(l));
                }
                let mut p: CMatrix = y.matrix().clone();
                for _ in 2..=self.state_powers {
                    p = p.matmul(y.matrix());
                    out.push(HermitianMatrix::project(p.hermitian_part()));
                }
            }
        }
        out
    }
}

/// A control table entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyNode {
    /// Open-loop in the GUE noise.
    Constant { value: MatrixTuple },
    /// `a_l = sum_f coeffs[l][f] F_f` over the step's feature basis.
    Polynomial { coeffs: Vec<Vec<f64>> },
}

/// Controls `a_{i,J}` for steps `i = 1..=K`, keyed by the visible bin prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePolicy {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n_bins: usize,
    /// Bins per step actually enumerated; `2N + 2`, or 1 without common noise.
    pub branching: usize,
    #[serde(rename = "R")]
    pub r: f64,
    /// Controls vanish when a visible increment has operator norm above this level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<f64>,
    pub d: usize,
    pub basis: FeatureBasis,
    /// `nodes[i - 1][key]` with `key` the mixed-radix code of the visible prefix.
    pub nodes: Vec<Vec<PolicyNode>>,
}

impl DiscretePolicy {
    /// Number of nodes at step `i`.
    pub fn layer_len(branching: usize, info: InfoStructure, i: usize) -> usize {
        branching.pow(info.visible(i) as u32)
    }

    /// All-zero polynomial policy.
    pub fn zero(
        k: usize,
        n_bins: usize,
        branching: usize,
        r: f64,
        d: usize,
        basis: FeatureBasis,
    ) -> Self {
        let nodes = (1..=k)
            .map(|i| {
                let m = basis.len(d, i);
                vec![
                    PolicyNode::Polynomial {
                        coeffs: vec![vec![0.0; m]; d]
                    };
                    Self::layer_len(branching, basis.info, i)
                ]
            })
            .collect();
        DiscretePolicy {
            k,
            n_bins,
            branching,
            r,
            gate: None,
            d,
            basis,
            nodes,
        }
    }

    /// Every node equal to `value`.
    pub fn constant(
        k: usize,
        n_bins: usize,
        branching: usize,
        r: f64,
        value: &MatrixTuple,
        info: InfoStructure,
    ) -> Self {
        let basis = FeatureBasis {
            degree: 0,
            state_powers: 1,
            info,
        };
        let nodes = (1..=k)
            .map(|i| {
                vec![
                    PolicyNode::Constant {
                        value: value.clone()
                    };
                    Self::layer_len(branching, info, i)
                ]
            })
            .collect();
        DiscretePolicy {
            k,
            n_bins,
            branching,
            r,
            gate: None,
            d: value.d(),
            basis,
            nodes,
        }
    }

    pub fn info(&self) -> InfoStructure {
        self.basis.info
    }

    /// Key of the node at step `i` for the full slot path `slots`.
    pub fn key(&self, i: usize, slots: &[usize]) -> usize {
        slots[..self.info().visible(i)]
            .iter()
            .fold(0, |k, &s| k * self.branching + s)
    }

    pub fn node(&self, i: usize, key: usize) -> &PolicyNode {
        &self.nodes[i - 1][key]
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "{} layers for K = {}",
                self.nodes.len(),
                self.k
            )));
        }
        if !(self.r > 0.0) {
            return Err(Error::Precondition(format!(
                "R must be positive, got {}",
                self.r
            )));
        }
        for (idx, layer) in self.nodes.iter().enumerate() {
            let i = idx + 1;
            if layer.len() != Self::layer_len(self.branching, self.info(), i) {
                return Err(Error::DimensionMismatch(format!(
                    "step {i} has {} nodes",
                    layer.len()
                )));
            }
            let m = self.basis.len(self.d, i);
            for node in layer {
                match node {
                    PolicyNode::Constant { value } if value.d() != self.d => {
                        return Err(Error::DimensionMismatch(
                            "constant node of the wrong arity".into(),
                        ))
                    }
                    PolicyNode::Polynomial { coeffs }
                        if coeffs.len() != self.d || coeffs.iter().any(|c| c.len() != m) =>
                    {
                        return Err(Error::DimensionMismatch(format!(
                            "polynomial node at step {i} needs {} x {m} coefficients",
                            self.d
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Node output before gating and clipping.
    pub fn raw_control(&self, i: usize, key: usize, features: &[HermitianMatrix]) -> MatrixTuple {
        match self.node(i, key) {
            PolicyNode::Constant { value } => value.clone(),
            PolicyNode::Polynomial { coeffs } => {
                let n = features[0].dim();
                let comps = coeffs
                    .iter()
                    .map(|row| {
                        let mut a = HermitianMatrix::zeros(n);
                        for (c, f) in row.iter().zip(features) {
                            if *c != 0.0 {
                                a.axpy(*c, f);
                            }
                        }
                        a
                    })
                    .collect();
                MatrixTuple::new(comps).expect("d >= 1 components of equal size")
            }
        }
    }

    /// Whether the gate is open for the given visible increments.
    pub fn gate_open(&self, visible: &[MatrixTuple]) -> Result<bool> {
        let Some(m) = self.gate else { return Ok(true) };
        for inc in visible {
            for c in inc.components() {
                if operator_norm(c)? > m {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Realized control at step `i`: gated, then clipped to operator norm `R`.
    pub fn control(
        &self,
        i: usize,
        key: usize,
        features: &[HermitianMatrix],
        gate_open: bool,
    ) -> Result<MatrixTuple> {
        Ok(self.control_with_pullback(i, key, features, gate_open)?.0)
    }

    /// [`DiscretePolicy::control`] together with the adjoint of the clip.
    pub fn control_with_pullback(
        &self,
        i: usize,
        key: usize,
        features: &[HermitianMatrix],
        gate_open: bool,
    ) -> Result<(MatrixTuple, ClipPullback)> {
        let raw = self.raw_control(i, key, features);
        if !gate_open {
            let d = raw.d();
            return Ok((
                MatrixTuple::zeros(raw.dim(), d),
                ClipPullback {
                    r: self.r,
                    parts: vec![None; d],
                },
            ));
        }
        clip_with_pullback(&raw, self.r)
    }
}

fn needs_clip(c: &HermitianMatrix, r: f64) -> Result<bool> {
    // The unnormalized Frobenius norm bounds the operator norm.
    Ok(c.frobenius() > r && operator_norm(c)? > r)
}

fn clip_value(s: f64, r: f64) -> f64 {
    s.clamp(-r, r)
}

/// `phi_R` componentwise; components already within `R` are returned
/// untouched. The flag reports whether anything was clipped.
pub fn clip_tuple(x: &MatrixTuple, r: f64) -> Result<(MatrixTuple, bool)> {
    let (out, pull) = clip_with_pullback(x, r)?;
    Ok((out, pull.parts.iter().any(Option::is_some)))
}

/// Adjoint of `phi_R` at a fixed argument: `G -> Q (D o Q* G Q) Q*` on the
/// clipped components, with `D` the divided differences of the clamp.
#[derive(Clone, Debug)]
pub struct ClipPullback {
    r: f64,
    parts: Vec<Option<SpectralDecomposition>>,
}

impl ClipPullback {
    pub fn is_identity(&self) -> bool {
        self.parts.iter().all(Option::is_none)
    }

    pub fn pull(&self, g: &MatrixTuple) -> MatrixTuple {
        if self.is_identity() {
            return g.clone();
        }
        let comps = g
            .components()
            .iter()
            .zip(&self.parts)
            .map(|(gc, part)| match part {
                None => gc.clone(),
                Some(sd) => {
                    let q = &sd.eigenvectors;
                    let lam = &sd.eigenvalues;
                    let mut m = q.adjoint().matmul(gc.matrix()).matmul(q);
                    let n = lam.len();
                    for a in 0..n {
                        for b in 0..n {
                            let (x, y) = (lam[a], lam[b]);
                            let dd = if (x - y).abs() > 1e-12 * (1.0 + x.abs() + y.abs()) {
                                (clip_value(x, self.r) - clip_value(y, self.r)) / (x - y)
                            } else if x.abs() < self.r {
                                1.0
                            } else {
                                0.0
                            };
                            m[(a, b)] *= Complex64::new(dd, 0.0);
                        }
                    }
                    HermitianMatrix::project(q.matmul(&m).matmul(&q.adjoint()))
                }
            })
            .collect();
        MatrixTuple::new(comps).expect("same shape as the clipped tuple")
    }
}

/// `phi_R` with its pullback.
pub fn clip_with_pullback(x: &MatrixTuple, r: f64) -> Result<(MatrixTuple, ClipPullback)> {
    let mut comps = Vec::with_capacity(x.d());
    let mut parts = Vec::with_capacity(x.d());
    for c in x.components() {
        if needs_clip(c, r)? {
            let sd = eigh(c)?;
            comps.push(HermitianMatrix::project(
                sd.reconstruct_with(|s| clip_value(s, r)),
            ));
            parts.push(Some(sd));
        } else {
            comps.push(c.clone());
            parts.push(None);
        }
    }
    Ok((MatrixTuple::new(comps)?, ClipPullback { r, parts }))
}

/// Constant nodes are clipped to `R`; polynomial nodes are clipped when
/// realized, so only the policy's cap changes.
pub fn clip_policy(policy: &DiscretePolicy, r: f64) -> Result<DiscretePolicy> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("R must be positive, got {r}")));
    }
    let mut out = policy.clone();
    out.r = policy.r.min(r);
    for layer in &mut out.nodes {
        for node in layer.iter_mut() {
            if let PolicyNode::Constant { value } = node {
                *value = clip_tuple(value, r)?.0;
            }
        }
    }
    Ok(out)
}
