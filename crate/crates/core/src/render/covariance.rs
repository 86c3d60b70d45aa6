//! Least-change mixing matrices that give a two-channel input a prescribed
//! output covariance.
//!
//! With `Cx = Kx Kxᵀ` and `Cy = Ky Kyᵀ`, every `M = Ky P Kx⁻¹` with `P`
//! orthogonal satisfies `M Cx Mᵀ = Cy`. The `P` closest to the prototype
//! mapping comes from the SVD `Kxᵀ Qᵀ Ky = U Σ Vᵀ` as `P = V Uᵀ`.
//!
//! Input components below a relative eigenvalue floor are treated as absent.
//! The solve then runs on the live subspace and the target is reduced to its
//! strongest components of the same rank, rescaled to keep the target power.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

/// Input eigenvalues below this fraction of the largest are not inverted.
pub const EIGEN_FLOOR: f64 = 1e-5;
/// Largest magnitude allowed for a single mixing gain.
pub const MAX_MIXING_GAIN: f64 = 4.0;

/// Factor `Ky` (S x 2) of a target covariance `Cy = Ky Kyᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFactor(pub DMatrix<f64>);

impl TargetFactor {
    /// `R E^½` for direct responses `R` (columns) and component powers `E`.
    pub fn from_components(responses: &[&[f64]; 2], powers: [f64; 2]) -> Self {
        let s = responses[0].len();
        let mut k = DMatrix::zeros(s, 2);
        for (c, (dr, &p)) in responses.iter().zip(&powers).enumerate() {
            let amp = p.max(0.0).sqrt();
            for (row, &g) in dr.iter().enumerate() {
                k[(row, c)] = g * amp;
            }
        }
        TargetFactor(k)
    }

    /// Rank-2 factor from the two largest eigenpairs of a full covariance.
    pub fn from_covariance(cy: &DMatrix<f64>) -> Self {
        let s = cy.nrows();
        let eig = SymmetricEigen::new(cy.clone());
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut k = DMatrix::zeros(s, 2);
        for (c, &i) in order.iter().take(2).enumerate() {
            let amp = eig.eigenvalues[i].max(0.0).sqrt();
            k.set_column(c, &(eig.eigenvectors.column(i) * amp));
        }
        TargetFactor(k)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.0 * self.0.transpose()
    }

    pub fn power(&self) -> f64 {
        self.0.norm_squared()
    }
}

/// Eigen-decomposition of a 2x2 covariance, strongest component first.
fn eigen2(c: &Matrix2<f64>) -> ([f64; 2], Matrix2<f64>) {
    let eig = SymmetricEigen::new(*c);
    let (a, b) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let vecs = Matrix2::from_columns(&[
        eig.eigenvectors.column(a).into_owned(),
        eig.eigenvectors.column(b).into_owned(),
    ]);
    ([eig.eigenvalues[a].max(0.0), eig.eigenvalues[b].max(0.0)], vecs)
}

/// Mixing matrix `M` (S x 2) with `M Cx Mᵀ ≈ Ky Kyᵀ` closest to `q` (S x 2).
pub fn synthesize(cx: &Matrix2<f64>, target: &TargetFactor, q: &DMatrix<f64>) -> DMatrix<f64> {
    let s = target.0.nrows();
    let sym = (cx + cx.transpose()) * 0.5;
    let (lx, wx) = eigen2(&sym);
    let live = if lx[0] <= 0.0 {
        0
    } else if lx[1] < EIGEN_FLOOR * lx[0] {
        1
    } else {
        2
    };
    if live == 0 || target.power() <= 0.0 {
        return DMatrix::zeros(s, 2);
    }

    // orthogonal target components, strongest first
    let (_, wy) = eigen2(&Matrix2::from_iterator(
        (target.0.transpose() * &target.0).iter().copied(),
    ));
    let ky_full = &target.0 * DMatrix::from_iterator(2, 2, wy.iter().copied());
    let mut ky = ky_full.columns(0, live).into_owned();
    let kept = ky.norm_squared();
    if live < 2 && kept > 0.0 {
        ky *= (target.power() / kept).sqrt();
    }

    let wx_live = DMatrix::from_iterator(2, live, wx.columns(0, live).iter().copied());
    let mut kx = wx_live.clone();
    let mut kx_pinv = wx_live.transpose();
    for (c, l) in lx.iter().take(live).enumerate() {
        let amp = l.sqrt();
        kx.column_mut(c).scale_mut(amp);
        kx_pinv.row_mut(c).scale_mut(amp.recip());
    }

    let a = kx.transpose() * q.transpose() * &ky;
    let svd = a.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let p = v_t.transpose() * u.transpose();
    let mut m = ky * p * kx_pinv;

    limit_gains(&mut m, &sym, target.power());
    m
}

/// Convenience wrapper taking the target as a full covariance matrix.
pub fn covariance_synthesis(cx: &Matrix2<f64>, cy: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    synthesize(cx, &TargetFactor::from_covariance(cy), q)
}

/// Output covariance `M Cx Mᵀ`.
pub fn achieved_covariance(m: &DMatrix<f64>, cx: &Matrix2<f64>) -> DMatrix<f64> {
    let cx = DMatrix::from_iterator(2, 2, cx.iter().copied());
    m * cx * m.transpose()
}

/// Clips entries to the gain limit, then scales toward the target output power
/// as far as the limit allows.
fn limit_gains(m: &mut DMatrix<f64>, cx: &Matrix2<f64>, target_power: f64) {
    let peak = m.amax();
    if peak <= MAX_MIXING_GAIN {
        return;
    }
    m.apply(|g| *g = g.clamp(-MAX_MIXING_GAIN, MAX_MIXING_GAIN));
    let achieved = achieved_covariance(m, cx).trace();
    if achieved <= 0.0 {
        return;
    }
    let scale = (target_power / achieved).sqrt().min(MAX_MIXING_GAIN / m.amax());
    *m *= scale;
}
