#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use supradiff_core::multinet::{InterCoupling, LayerSpec, MultilayerNetwork};
use supradiff_core::nalgebra::DMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random equal-size multiplex network together with the raw blocks it was
/// built from, every coupling direction spelled out.
pub struct RawMultiplex {
    pub m: usize,
    pub n: usize,
    pub layers: Vec<(DMatrix<f64>, f64)>,
    /// `(from, to, W, D)`, 0-based layers, both directions present.
    pub directed: Vec<(usize, usize, DMatrix<f64>, f64)>,
    pub network: MultilayerNetwork,
}

fn random_symmetric_adjacency(rng: &mut ChaCha8Rng, n: usize, p: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                let v = rng.random_range(0.1..2.0);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    w
}

pub fn random_multiplex(seed: u64, m_max: usize, n_max: usize) -> RawMultiplex {
    let mut rng = rng(seed);
    let m = rng.random_range(1..=m_max);
    let n = rng.random_range(1..=n_max);
    let mut layers = Vec::new();
    let mut specs = Vec::new();
    for a in 0..m {
        let w = random_symmetric_adjacency(&mut rng, n, 0.5);
        let d = rng.random_range(0.0..2.0);
        specs.push(LayerSpec::new(a + 1, w.clone(), d).unwrap());
        layers.push((w, d));
    }
    let mut directed = Vec::new();
    let mut couplings = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if !rng.random_bool(0.8) {
                continue;
            }
            let w = DMatrix::from_fn(n, n, |_, _| {
                if rng.random_bool(0.5) {
                    rng.random_range(0.1..2.0)
                } else {
                    0.0
                }
            });
            let d_ab = rng.random_range(0.0..2.0);
            let both = rng.random_bool(0.5);
            let d_ba = if both { rng.random_range(0.0..2.0) } else { d_ab };
            couplings.push(InterCoupling::new(a + 1, b + 1, w.clone(), d_ab).unwrap());
            if both {
                couplings.push(InterCoupling::new(b + 1, a + 1, w.transpose(), d_ba).unwrap());
            }
            directed.push((a, b, w.clone(), d_ab));
            directed.push((b, a, w.transpose(), d_ba));
        }
    }
    RawMultiplex {
        m,
        n,
        layers,
        directed,
        network: MultilayerNetwork::new(specs, couplings).unwrap(),
    }
}

/// Textbook Kronecker product, written out index by index.
pub fn naive_kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = b.shape();
    DMatrix::from_fn(a.nrows() * p, a.ncols() * q, |r, c| {
        a[(r / p, c / q)] * b[(r % p, c % q)]
    })
}

fn selector(m: usize, a: usize, b: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(m, m);
    e[(a, b)] = 1.0;
    e
}

fn degree(w: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&w.column_sum())
}

/// `Σ_α e_αα ⊗ D^α(K^α − W^α) + Σ_(α,β) [e_αα ⊗ D^αβ K^αβ − e_αβ ⊗ D^αβ W^αβ]`.
pub fn kronecker_supra(raw: &RawMultiplex) -> DMatrix<f64> {
    let size = raw.m * raw.n;
    let mut l = DMatrix::zeros(size, size);
    for (a, (w, d)) in raw.layers.iter().enumerate() {
        l += naive_kron(&selector(raw.m, a, a), &((degree(w) - w) * *d));
    }
    for (a, b, w, d) in &raw.directed {
        l += naive_kron(&selector(raw.m, *a, *a), &(degree(w) * *d));
        l -= naive_kron(&selector(raw.m, *a, *b), &(w * *d));
    }
    l
}

/// Connected symmetric network: each layer is a ring plus random chords,
/// replicas coupled one-to-one. Diffusion constants in `[1, 2]` keep the
/// spectral gap comfortably away from zero.
pub fn connected_network(seed: u64, max_layers: usize, max_nodes: usize) -> MultilayerNetwork {
    let mut rng = rng(seed);
    let m = rng.random_range(1..=max_layers);
    let n = rng.random_range(3..=max_nodes);
    let mut layers = Vec::new();
    for a in 0..m {
        let mut w = random_symmetric_adjacency(&mut rng, n, 0.3);
        for i in 0..n {
            let j = (i + 1) % n;
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        layers.push(LayerSpec::new(a + 1, w, rng.random_range(1.0..2.0)).unwrap());
    }
    let couplings = (1..m)
        .map(|a| InterCoupling::new(a, a + 1, DMatrix::identity(n, n), rng.random_range(1.0..2.0)).unwrap())
        .collect();
    MultilayerNetwork::new(layers, couplings).unwrap()
}

/// `Σ_{k<terms} (tA)^k / k!`.
pub fn taylor_exp(a: &DMatrix<f64>, t: f64, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let ta = a * t;
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..terms {
        term = &term * &ta / k as f64;
        sum += &term;
    }
    sum
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
