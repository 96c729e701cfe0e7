//! Dense-matrix oracles for the integration and acceptance suites.
//!
//! Everything here literally materializes the T x T diagonal matrices
//! K_T(u) and D_1(u) and the weighting matrix W_T(u; X), and inverts Gram
//! matrices by Gauss-Jordan elimination. The production code never does
//! any of that, which is what makes these independent checks.

#![allow(dead_code)]

use lsvar::ndarray::Array2;
use lsvar::{DesignMatrices, KernelFamily, KernelSpec, WeightVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn randn(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// A random nondegenerate regression instance.
pub fn random_design(rng: &mut ChaCha20Rng, dim: usize, t_len: usize) -> DesignMatrices {
    DesignMatrices::from_raw(randn(rng, t_len, dim), randn(rng, t_len, dim)).unwrap()
}

pub fn diag(values: &[f64]) -> Array2<f64> {
    let n = values.len();
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { values[i] } else { 0.0 })
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gj_inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let mut piv = col;
        let mut best = m[[col, col]].abs();
        for row in col + 1..n {
            if m[[row, col]].abs() > best {
                best = m[[row, col]].abs();
                piv = row;
            }
        }
        if best < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap([col, k], [piv, k]);
                inv.swap([col, k], [piv, k]);
            }
        }
        let d = m[[col, col]];
        for k in 0..n {
            m[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[[row, col]];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[[row, k]] -= f * m[[col, k]];
                inv[[row, k]] -= f * inv[[col, k]];
            }
        }
    }
    Some(inv)
}

/// Localized Yule-Walker estimate through the dense kernel matrix:
/// [X1' K X0][X0' K X0]^{-1}.
pub fn dense_yule_walker(design: &DesignMatrices, w: &WeightVector) -> Array2<f64> {
    let k = diag(w.weights());
    let x0 = design.x0();
    let x1 = design.x1();
    let gram = x0.t().dot(&k).dot(x0);
    x1.t()
        .dot(&k)
        .dot(x0)
        .dot(&gj_inverse(&gram).expect("oracle gram invertible"))
}

/// Local-constant estimate through the dense kernel matrix:
/// X1' K Z0 (Z0' K Z0)^{-1}.
pub fn dense_local_constant(design: &DesignMatrices, w: &WeightVector) -> Array2<f64> {
    let k = diag(w.weights());
    let z0 = design.z0();
    let x1 = design.x1();
    let gram = z0.t().dot(&k).dot(z0);
    x1.t()
        .dot(&k)
        .dot(z0)
        .dot(&gj_inverse(&gram).expect("oracle gram invertible"))
}

/// The dense weighting matrix W = K - K D Z0 (Z0' D K D Z0)^{-1} Z0' D K.
pub fn dense_w_matrix(design: &DesignMatrices, w: &WeightVector) -> Array2<f64> {
    let k = diag(w.weights());
    let d = diag(w.deltas());
    let z0 = design.z0();
    let s = z0.t().dot(&d).dot(&k).dot(&d).dot(z0);
    let s_inv = gj_inverse(&s).expect("oracle correction invertible");
    let kdz = k.dot(&d).dot(z0);
    &k - &kdz.dot(&s_inv).dot(&kdz.t())
}

/// Local-linear estimate through the dense weighting matrix:
/// X1' W Z0 (Z0' W Z0)^{-1}.
pub fn dense_local_linear(design: &DesignMatrices, w: &WeightVector) -> Array2<f64> {
    let big_w = dense_w_matrix(design, w);
    let z0 = design.z0();
    let x1 = design.x1();
    let gram = z0.t().dot(&big_w).dot(z0);
    x1.t()
        .dot(&big_w)
        .dot(z0)
        .dot(&gj_inverse(&gram).expect("oracle gram invertible"))
}

/// The stacked design [Z0 | D Z0].
pub fn stacked_design(design: &DesignMatrices, w: &WeightVector) -> Array2<f64> {
    let t_len = design.t_len();
    let p = design.dim() + 1;
    let mut ztil = Array2::<f64>::zeros((t_len, 2 * p));
    for t in 0..t_len {
        for j in 0..p {
            ztil[[t, j]] = design.z0()[[t, j]];
            ztil[[t, p + j]] = w.deltas()[t] * design.z0()[[t, j]];
        }
    }
    ztil
}

/// Solve the kernel-weighted stacked regression of X1 on [Z0 | D Z0] by
/// sqrt-weight row scaling and Gauss-Jordan normal equations; returns the
/// full r x 2(r+1) coefficient matrix. Its first (r+1)-column block is the
/// local-linear estimate by the partitioned-inverse derivation.
pub fn stacked_local_linear_full(design: &DesignMatrices, w: &WeightVector) -> Array2<f64> {
    let ztil = stacked_design(design, w);
    let t_len = design.t_len();
    let mut zs = ztil.clone();
    let mut xs = design.x1().clone();
    for t in 0..t_len {
        let sw = w.weights()[t].sqrt();
        for j in 0..zs.ncols() {
            zs[[t, j]] *= sw;
        }
        for j in 0..xs.ncols() {
            xs[[t, j]] *= sw;
        }
    }
    let gram = zs.t().dot(&zs);
    xs.t()
        .dot(&zs)
        .dot(&gj_inverse(&gram).expect("oracle stacked gram invertible"))
}

/// Local-constant estimate by sqrt-weight row scaling and Gauss-Jordan
/// normal equations (the plain stacked WLS route).
pub fn stacked_local_constant(design: &DesignMatrices, w: &WeightVector) -> Array2<f64> {
    let t_len = design.t_len();
    let mut zs = design.z0().clone();
    let mut xs = design.x1().clone();
    for t in 0..t_len {
        let sw = w.weights()[t].sqrt();
        for j in 0..zs.ncols() {
            zs[[t, j]] *= sw;
        }
        for j in 0..xs.ncols() {
            xs[[t, j]] *= sw;
        }
    }
    let gram = zs.t().dot(&zs);
    xs.t()
        .dot(&zs)
        .dot(&gj_inverse(&gram).expect("oracle gram invertible"))
}

/// Ridge solution by dense penalized normal equations:
/// X1' K Ztil (Ztil' K Ztil + lambda I)^{-1}, full stacked matrix.
pub fn dense_ridge_full(design: &DesignMatrices, w: &WeightVector, lambda: f64) -> Array2<f64> {
    let ztil = stacked_design(design, w);
    let k = diag(w.weights());
    let mut gram = ztil.t().dot(&k).dot(&ztil);
    for i in 0..gram.nrows() {
        gram[[i, i]] += lambda;
    }
    design
        .x1()
        .t()
        .dot(&k)
        .dot(&ztil)
        .dot(&gj_inverse(&gram).expect("oracle penalized gram invertible"))
}

pub fn rel_fro(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let denom = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let diff = a - b;
    diff.iter().map(|x| x * x).sum::<f64>().sqrt() / denom
}

/// Parameters of one randomized oracle-equivalence instance.
#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub dim: usize,
    pub t_len: usize,
    pub kernel: KernelSpec,
    pub u: f64,
}

/// Deterministic stream of nondegenerate instances cycling r in 1..=4,
/// both kernel families, and u in {0.2, 0.5, 0.8}. Sample sizes are drawn
/// in 20..=100 with a floor that keeps the local-linear window well posed
/// for the compact-support kernel.
pub fn instances(count: usize, seed: u64) -> Vec<(Instance, DesignMatrices)> {
    use rand::Rng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let dim = 1 + i % 4;
        let u = [0.2, 0.5, 0.8][(i / 4) % 3];
        let family = if i % 2 == 0 {
            KernelFamily::Epanechnikov
        } else {
            KernelFamily::Gaussian
        };
        let h = rng.random_range(0.3..0.6);
        let t_floor = 20usize.max(14 * (dim + 1));
        let t_len = rng.random_range(t_floor..=100);
        let kernel = KernelSpec::new(family, h).unwrap();
        let design = random_design(&mut rng, dim, t_len);
        out.push((
            Instance {
                dim,
                t_len,
                kernel,
                u,
            },
            design,
        ));
    }
    out
}
