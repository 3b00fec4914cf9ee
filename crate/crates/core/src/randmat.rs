//! Reproducible sampling: GUE matrices, GUE Brownian increments, Haar
//! unitaries and scalar Brownian increments.
//!
//! Randomness comes from [`RngStream`], a (seed, path) pair hashed into a
//! ChaCha8 key. Parallel work gives every sample its own child stream, so the
//! numbers never depend on how samples are scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::{CMatrix, HermitianMatrix, MatrixTuple};

/// A splittable random stream identified by its master seed and split lineage.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_path: Vec<u64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        RngStream {
            master_seed,
            stream_path: Vec::new(),
        }
    }

    /// Child stream `i`. Children with distinct indices never share a key.
    pub fn split(&self, i: u64) -> Self {
        let mut stream_path = self.stream_path.clone();
        stream_path.push(i);
        RngStream {
            master_seed: self.master_seed,
            stream_path,
        }
    }

    /// Child stream addressed by a short path.
    pub fn split_path(&self, path: &[u64]) -> Self {
        let mut s = self.clone();
        s.stream_path.extend_from_slice(path);
        s
    }

    /// Generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut h = splitmix64(self.master_seed);
        // Length is mixed in so that paths are prefix-free.
        h = splitmix64(h ^ self.stream_path.len() as u64);
        for &p in &self.stream_path {
            h = splitmix64(h ^ splitmix64(p));
        }
        let mut word = h;
        for chunk in seed.chunks_mut(8) {
            word = splitmix64(word);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Maps `f` over `count` child streams of `stream` in parallel; results come
/// back in index order.
pub fn map_samples<T, F>(stream: &RngStream, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &RngStream) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i, &stream.split(i as u64)))
        .collect()
}

/// Fallible variant of [`map_samples`]; the first error in index order wins.
pub fn try_map_samples<T, F>(stream: &RngStream, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &RngStream) -> Result<T> + Sync,
{
    map_samples(stream, count, f).into_iter().collect()
}

#[inline]
fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// GUE matrix with unit variance, `S = (1/n) sum_ij g_ij E_ij`, drawn from `rng`.
///
/// Expanding the basis gives `S_aa = g_aa / sqrt(n)` and, for `a < b`,
/// `S_ab = (g_ab - i g_ba) / sqrt(2n)`. Coefficients are drawn in row-major
/// `(i, j)` order.
pub fn sample_gue_with(n: usize, scale: f64, rng: &mut impl Rng) -> HermitianMatrix {
    let mut g = vec![0.0; n * n];
    for v in g.iter_mut() {
        *v = normal(rng);
    }
    let diag = scale / (n as f64).sqrt();
    let off = scale / (2.0 * n as f64).sqrt();
    let mut m = CMatrix::zeros(n);
    for a in 0..n {
        m[(a, a)] = Complex64::new(g[a * n + a] * diag, 0.0);
        for b in a + 1..n {
            let z = Complex64::new(g[a * n + b] * off, -g[b * n + a] * off);
            m[(a, b)] = z;
            m[(b, a)] = z.conj();
        }
    }
    HermitianMatrix::project(m)
}

/// GUE matrix from the start of `stream`.
pub fn sample_gue(n: usize, stream: &RngStream) -> HermitianMatrix {
    sample_gue_with(n, 1.0, &mut stream.rng())
}

/// `d` independent GUE matrices scaled by `scale`.
pub fn sample_gue_tuple_with(n: usize, d: usize, scale: f64, rng: &mut impl Rng) -> MatrixTuple {
    MatrixTuple::new((0..d).map(|_| sample_gue_with(n, scale, rng)).collect())
        .expect("uniform component sizes")
}

/// Increments of a `d`-dimensional GUE Brownian motion over a time grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GuePath {
    pub n: usize,
    pub d: usize,
    pub time_grid: Vec<f64>,
    pub increments: Vec<MatrixTuple>,
}

impl GuePath {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    /// `W_{t_k} - W_{t_0}` for `k = 0..=K`.
    pub fn partial_sums(&self) -> Vec<MatrixTuple> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = MatrixTuple::zeros(self.n, self.d);
        out.push(acc.clone());
        for inc in &self.increments {
            acc.axpy(1.0, inc);
            out.push(acc.clone());
        }
        out
    }

    /// `W_T - W_{t_0}`.
    pub fn total(&self) -> MatrixTuple {
        let mut acc = MatrixTuple::zeros(self.n, self.d);
        for inc in &self.increments {
            acc.axpy(1.0, inc);
        }
        acc
    }
}

pub(crate) fn check_grid(time_grid: &[f64]) -> Result<()> {
    if time_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite time".into()));
    }
    if time_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// GUE Brownian increments, step `k` component `l` distributed as
/// `sqrt(t_{k+1} - t_k) GUE(n)`.
pub fn gue_increments(
    n: usize,
    d: usize,
    time_grid: &[f64],
    stream: &RngStream,
) -> Result<GuePath> {
    check_grid(time_grid)?;
    if n == 0 || d == 0 {
        return Err(Error::Precondition("n and d must be positive".into()));
    }
    let mut rng = stream.rng();
    let increments = time_grid
        .windows(2)
        .map(|w| sample_gue_tuple_with(n, d, (w[1] - w[0]).sqrt(), &mut rng))
        .collect();
    Ok(GuePath {
        n,
        d,
        time_grid: time_grid.to_vec(),
        increments,
    })
}

/// Haar unitary from the QR factorization of a complex Ginibre matrix, with
/// the columns of `Q` rephased so that `R` has a positive diagonal.
pub fn sample_haar_unitary_with(n: usize, rng: &mut impl Rng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = CMatrix::from_fn(n, |_, _| Complex64::new(0.0, 0.0));
    for z in a.as_mut_slice() {
        *z = Complex64::new(normal(rng) * s, normal(rng) * s);
    }
    let mut q = CMatrix::identity(n);
    let mut rdiag = vec![Complex64::new(1.0, 0.0); n];
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let m = n - k;
        let xnorm = (k..n).map(|r| a[(r, k)].norm_sqr()).sum::<f64>().sqrt();
        let x0 = a[(k, k)];
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        for r in 0..m {
            v[r] = a[(k + r, k)];
        }
        v[0] -= alpha;
        let vnorm = v[..m].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            rdiag[k] = x0;
            continue;
        }
        for z in v[..m].iter_mut() {
            *z /= vnorm;
        }
        // A <- H A on rows k.., H = I - 2 v v*.
        for c in k..n {
            let t: Complex64 = (0..m).map(|r| v[r].conj() * a[(k + r, c)]).sum();
            for r in 0..m {
                let upd = v[r] * t * 2.0;
                a[(k + r, c)] -= upd;
            }
        }
        rdiag[k] = a[(k, k)];
        // Q <- Q H on columns k...
        for r in 0..n {
            let t: Complex64 = (0..m).map(|c| q[(r, k + c)] * v[c]).sum();
            for c in 0..m {
                let upd = t * v[c].conj() * 2.0;
                q[(r, k + c)] -= upd;
            }
        }
    }
    for (c, rd) in rdiag.iter().enumerate() {
        let ph = if rd.norm() > 0.0 {
            rd / rd.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for r in 0..n {
            q[(r, c)] *= ph;
        }
    }
    q
}

pub fn sample_haar_unitary(n: usize, stream: &RngStream) -> CMatrix {
    sample_haar_unitary_with(n, &mut stream.rng())
}

/// Independent `N(0, t_{k+1} - t_k)` draws; empty for grids with fewer than two
/// points.
pub fn brownian_increments(time_grid: &[f64], stream: &RngStream) -> Result<Vec<f64>> {
    check_grid(time_grid)?;
    let mut rng = stream.rng();
    Ok(time_grid
        .windows(2)
        .map(|w| (w[1] - w[0]).sqrt() * normal(&mut rng))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::normalized_trace;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn var(v: &[f64]) -> f64 {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(7);
        let a: u64 = s.split(3).rng().random();
        let b: u64 = s.split(3).rng().random();
        let c: u64 = s.split(4).rng().random();
        let d: u64 = s.split_path(&[3, 0]).rng().random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(
            RngStream::new(0).rng().random::<u64>(),
            RngStream::new(0).split(0).rng().random::<u64>()
        );
    }

    #[test]
    fn gue_low_moments() {
        let s = RngStream::new(11);
        let stats = map_samples(&s, 2000, |_, st| {
            let g = sample_gue(8, st);
            (normalized_trace(&g), g.inner(&g))
        });
        let m1 = mean(&stats.iter().map(|p| p.0).collect::<Vec<_>>());
        let m2 = mean(&stats.iter().map(|p| p.1).collect::<Vec<_>>());
        assert!(m1.abs() <= 0.02, "mean trace {m1}");
        assert!((0.98..=1.02).contains(&m2), "second moment {m2}");
    }

    #[test]
    fn gue_fourth_moment_is_catalan() {
        let s = RngStream::new(12);
        let m4 = mean(&map_samples(&s, 20, |_, st| {
            let g = sample_gue(256, st);
            let sq = HermitianMatrix::project(g.matrix() * g.matrix());
            sq.inner(&sq)
        }));
        assert!((1.9..=2.1).contains(&m4), "fourth moment {m4}");
    }

    #[test]
    fn increments_add_up() {
        let s = RngStream::new(13);
        let second = map_samples(&s, 2000, |_, st| {
            let p = gue_increments(6, 1, &[0.0, 0.5, 1.0], st).unwrap();
            let w = p.total();
            w.component(0).inner(w.component(0))
        });
        assert!((mean(&second) - 1.0).abs() < 0.05);
        assert!(gue_increments(4, 1, &[0.0, 1.0, 1.0], &s).is_err());
        let single = gue_increments(5, 1, &[0.0, 1.0], &s).unwrap();
        assert_eq!(single.steps(), 1);
    }

    #[test]
    fn haar_is_unitary_and_centered() {
        let s = RngStream::new(14);
        let u = sample_haar_unitary(17, &s);
        assert!((&u.adjoint() * &u).max_abs_diff(&CMatrix::identity(17)) < 1e-10);
        let tr = map_samples(&s, 2000, |_, st| {
            sample_haar_unitary(8, st).normalized_trace()
        });
        let avg = tr.iter().sum::<Complex64>() / tr.len() as f64;
        assert!(avg.norm() < 0.05, "mean trace {avg}");
    }

    #[test]
    fn brownian_variance() {
        let s = RngStream::new(15);
        let one = map_samples(&s, 5000, |_, st| {
            brownian_increments(&[0.0, 1.0], st).unwrap()[0]
        });
        assert!((0.95..=1.05).contains(&var(&one)));
        let sums = map_samples(&s, 5000, |_, st| {
            brownian_increments(&[0.0, 0.25, 0.5, 0.75, 1.0], st)
                .unwrap()
                .iter()
                .sum::<f64>()
        });
        assert!((var(&sums) - 1.0).abs() < 0.05);
        assert!(brownian_increments(&[], &s).unwrap().is_empty());
    }
}
