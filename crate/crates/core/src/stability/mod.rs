//! Static stability of an under-constrained cable robot held at a pose.
//!
//! The platform is stable when the Hessian of its potential, restricted to
//! the motions the cables leave unconstrained (the right null space of the
//! screw Jacobian), is positive definite.

mod config;

pub use config::{GeometryConfig, PoseConfig};

use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-9;
/// Residual norm above which `reduced_hessian` logs a warning.
pub const EQUILIBRIUM_WARN: f64 = 1e-3;
/// Cables shorter than this (m) are treated as zero length.
pub const MIN_CABLE_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub base_anchors: Vec<Vector3<f64>>,
    pub body_anchors: Vec<Vector3<f64>>,
    pub platform_mass: f64,
    pub payload_mass: f64,
    pub gravity: Vector3<f64>,
}

impl Geometry {
    pub fn new(
        base_anchors: Vec<Vector3<f64>>,
        body_anchors: Vec<Vector3<f64>>,
        platform_mass: f64,
        payload_mass: f64,
        gravity: Vector3<f64>,
    ) -> Result<Self> {
        let g = Self {
            base_anchors,
            body_anchors,
            platform_mass,
            payload_mass,
            gravity,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_anchors.is_empty() {
            return Err(Error::Empty("cable anchors"));
        }
        if self.base_anchors.len() != self.body_anchors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.base_anchors.len(),
                found: self.body_anchors.len(),
            });
        }
        let finite = self
            .base_anchors
            .iter()
            .chain(&self.body_anchors)
            .chain(std::iter::once(&self.gravity))
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite || !self.platform_mass.is_finite() || !self.payload_mass.is_finite() {
            return Err(Error::NonFinite("geometry".into()));
        }
        if self.platform_mass < 0.0 || self.payload_mass < 0.0 {
            return Err(Error::InvalidConfig("masses must be non-negative".into()));
        }
        Ok(())
    }

    pub fn n_cables(&self) -> usize {
        self.base_anchors.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.platform_mass + self.payload_mass
    }

    /// The four-cable test rig: frame corners 1420×860 mm at 1.6 m, a 1 kg
    /// weight under a 0.602 kg end effector whose 114×66 mm plate carries
    /// the cable attachments.
    pub fn reference_rig() -> Self {
        let corner = |sx: f64, sy: f64, x: f64, y: f64, z: f64| Vector3::new(sx * x, sy * y, z);
        let signs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        Self {
            base_anchors: signs.iter().map(|&(sx, sy)| corner(sx, sy, 0.71, 0.43, 1.6)).collect(),
            body_anchors: signs.iter().map(|&(sx, sy)| corner(sx, sy, 0.057, 0.033, 0.0)).collect(),
            platform_mass: 0.602,
            payload_mass: 1.0,
            gravity: Vector3::new(0.0, 0.0, -9.81),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EulerConvention {
    /// `R = Rx(φ)·Ry(ψ)·Rz(θ)`.
    #[default]
    Xyz,
    /// `R = Rz(θ)·Ry(ψ)·Rx(φ)`.
    Zyx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub p: Vector3<f64>,
    pub euler: Vector3<f64>,
    pub convention: EulerConvention,
    r: Matrix3<f64>,
}

impl Pose {
    pub fn new(p: Vector3<f64>, euler: Vector3<f64>, convention: EulerConvention) -> Result<Self> {
        if !p.iter().chain(euler.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("pose".into()));
        }
        let r = rotation(&euler, convention);
        Ok(Self { p, euler, convention, r })
    }

    pub fn at(p: Vector3<f64>) -> Self {
        Self::new(p, Vector3::zeros(), EulerConvention::Xyz).expect("finite position")
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn reference() -> Self {
        Self::at(Vector3::new(0.0, 0.0, 0.7))
    }
}

/// Cable tensions measured at the reference pose, N.
pub const REFERENCE_TENSIONS: [f64; 4] = [15.89, 11.19, 15.2, 12.57];

pub fn rotation(euler: &Vector3<f64>, convention: EulerConvention) -> Matrix3<f64> {
    let rx = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), euler[0]);
    let ry = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), euler[1]);
    let rz = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), euler[2]);
    match convention {
        EulerConvention::Xyz => (rx * ry * rz).into_inner(),
        EulerConvention::Zyx => (rz * ry * rx).into_inner(),
    }
}

/// Matrix with `skew(v)·w = v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `l_i = b_i − p − R·a_i`.
pub fn cable_vectors(g: &Geometry, pose: &Pose) -> Vec<Vector3<f64>> {
    g.base_anchors
        .iter()
        .zip(&g.body_anchors)
        .map(|(b, a)| b - pose.p - pose.r * a)
        .collect()
}

fn check_tensions(g: &Geometry, tensions: &[f64]) -> Result<()> {
    if tensions.len() != g.n_cables() {
        return Err(Error::DimensionMismatch {
            expected: g.n_cables(),
            found: tensions.len(),
        });
    }
    for (i, &t) in tensions.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("tension {}", i + 1)));
        }
        if t < 0.0 {
            return Err(Error::NegativeTension { index: i + 1, value: t });
        }
    }
    Ok(())
}

fn lengths(l: &[Vector3<f64>]) -> Result<Vec<f64>> {
    l.iter()
        .enumerate()
        .map(|(i, v)| {
            let n = v.norm();
            if n > MIN_CABLE_LENGTH {
                Ok(n)
            } else {
                Err(Error::ZeroLengthCable(i + 1))
            }
        })
        .collect()
}

/// Net wrench on the platform: cable forces plus gravity on the total mass
/// acting at the platform origin. Forces first, then moments about the
/// platform origin.
pub fn check_equilibrium(g: &Geometry, pose: &Pose, tensions: &[f64]) -> Result<[f64; 6]> {
    g.validate()?;
    check_tensions(g, tensions)?;
    let l = cable_vectors(g, pose);
    let len = lengths(&l)?;
    let mut force = g.total_mass() * g.gravity;
    let mut moment = Vector3::zeros();
    for (((li, a), &t), n) in l.iter().zip(&g.body_anchors).zip(tensions).zip(&len) {
        let r = pose.r * a;
        force += t / n * li;
        moment += t / n * r.cross(li);
    }
    Ok([force.x, force.y, force.z, moment.x, moment.y, moment.z])
}

/// Row `i` is `[l_iᵀ, (r_i × l_i)ᵀ]` with `r_i = R·a_i`.
pub fn jacobian(g: &Geometry, pose: &Pose, l: &[Vector3<f64>]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(l.len(), 6);
    for (i, (li, a)) in l.iter().zip(&g.body_anchors).enumerate() {
        let m = (pose.r * a).cross(li);
        for c in 0..3 {
            j[(i, c)] = li[c];
            j[(i, c + 3)] = m[c];
        }
    }
    j
}

/// Orthonormal basis of the right null space of `j`, one column per
/// dimension. Singular values at or below `tol·σ_max` count as zero.
pub fn null_space(j: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = j.ncols();
    // Pad to square so the SVD returns a complete right basis.
    let rows = j.nrows().max(cols);
    let mut a = DMatrix::zeros(rows, cols);
    a.view_mut((0, 0), (j.nrows(), cols)).copy_from(j);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma_max = svd.singular_values.max();
    let cutoff = tol * sigma_max;
    let null: Vec<usize> = (0..cols)
        .filter(|&i| sigma_max == 0.0 || svd.singular_values[i] <= cutoff)
        .collect();
    let mut n = DMatrix::zeros(cols, null.len());
    for (c, &i) in null.iter().enumerate() {
        n.set_column(c, &v_t.row(i).transpose());
    }
    n
}

/// Sum over cables of `(τ_i/‖l_i‖)·[[I, −r̃], [r̃, ½(r̃p̃ − r̃b̃ + p̃r̃ − b̃r̃)]]`.
pub fn platform_hessian(g: &Geometry, pose: &Pose, tensions: &[f64]) -> Result<DMatrix<f64>> {
    check_tensions(g, tensions)?;
    let l = cable_vectors(g, pose);
    let len = lengths(&l)?;
    let p = skew(&pose.p);
    let mut h = DMatrix::zeros(6, 6);
    for i in 0..g.n_cables() {
        let r = skew(&(pose.r * g.body_anchors[i]));
        let b = skew(&g.base_anchors[i]);
        let k = tensions[i] / len[i];
        let lower = 0.5 * (r * p - r * b + p * r - b * r);
        let mut blk = DMatrix::zeros(6, 6);
        blk.view_mut((0, 0), (3, 3)).copy_from(&Matrix3::identity());
        blk.view_mut((0, 3), (3, 3)).copy_from(&(-r));
        blk.view_mut((3, 0), (3, 3)).copy_from(&r);
        blk.view_mut((3, 3), (3, 3)).copy_from(&lower);
        h += k * blk;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub cable_vectors: Vec<Vector3<f64>>,
    pub cable_lengths: Vec<f64>,
    pub tensions: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub null_space: DMatrix<f64>,
    pub platform_hessian: DMatrix<f64>,
    pub reduced_hessian: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub stable: bool,
    pub equilibrium_residual: [f64; 6],
}

impl StabilityReport {
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn trace(&self) -> f64 {
        self.reduced_hessian.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.eigenvalues.iter().product()
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn reduced_hessian(g: &Geometry, pose: &Pose, tensions: &[f64]) -> Result<StabilityReport> {
    let residual = check_equilibrium(g, pose, tensions)?;
    let norm = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > EQUILIBRIUM_WARN {
        log::warn!("pose is not in exact static equilibrium (residual norm {norm:.4})");
    }
    let l = cable_vectors(g, pose);
    let len = lengths(&l)?;
    let j = jacobian(g, pose, &l);
    let n = null_space(&j, RANK_TOL);
    let hp = platform_hessian(g, pose, tensions)?;
    let hr = n.transpose() * &hp * &n;
    let hr = (&hr + hr.transpose()) * 0.5;
    let eigenvalues = symmetric_eigenvalues(&hr);
    let stable = eigenvalues.first().is_some_and(|&e| e > 0.0);
    Ok(StabilityReport {
        cable_vectors: l,
        cable_lengths: len,
        tensions: tensions.to_vec(),
        jacobian: j,
        null_space: n,
        platform_hessian: hp,
        reduced_hessian: hr,
        eigenvalues,
        stable,
        equilibrium_residual: residual,
    })
}

fn fmt_matrix(f: &mut fmt::Formatter<'_>, name: &str, m: &DMatrix<f64>) -> fmt::Result {
    writeln!(f, "{name} ({}x{}):", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:>10.4}")).collect();
        writeln!(f, "  [{}]", cells.join(" "))?;
    }
    Ok(())
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cables:")?;
        for (i, ((l, len), t)) in self.cable_vectors.iter().zip(&self.cable_lengths).zip(&self.tensions).enumerate() {
            writeln!(
                f,
                "  {}: l = [{:.4} {:.4} {:.4}] m, |l| = {:.4} m, tension = {:.3} N",
                i + 1,
                l.x,
                l.y,
                l.z,
                len,
                t
            )?;
        }
        let r = &self.equilibrium_residual;
        writeln!(
            f,
            "equilibrium residual: force [{:.4} {:.4} {:.4}] N, moment [{:.4} {:.4} {:.4}] N·m",
            r[0], r[1], r[2], r[3], r[4], r[5]
        )?;
        fmt_matrix(f, "J_p", &self.jacobian)?;
        fmt_matrix(f, "N_p", &self.null_space)?;
        fmt_matrix(f, "H_p", &self.platform_hessian)?;
        fmt_matrix(f, "H_r", &self.reduced_hessian)?;
        let eig: Vec<String> = self.eigenvalues.iter().map(|e| format!("{e:.4}")).collect();
        writeln!(f, "eigenvalues: [{}]", eig.join(", "))?;
        writeln!(f, "trace: {:.4}  det: {:.4}", self.trace(), self.determinant())?;
        write!(f, "verdict: {}", if self.stable { "stable" } else { "unstable" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference() -> StabilityReport {
        reduced_hessian(&Geometry::reference_rig(), &Pose::reference(), &REFERENCE_TENSIONS).unwrap()
    }

    #[test]
    fn reference_cable_vectors_and_lengths() {
        let l = cable_vectors(&Geometry::reference_rig(), &Pose::reference());
        assert_abs_diff_eq!(l[0], Vector3::new(-0.653, -0.397, 0.9), epsilon = 1e-12);
        assert_abs_diff_eq!(l[2], Vector3::new(0.653, 0.397, 0.9), epsilon = 1e-12);
        for v in &l {
            assert!((v.norm() - 1.1807).abs() < 5e-4);
        }
    }

    #[test]
    fn reference_pose_is_stable() {
        let r = reference();
        assert_eq!(r.null_space.ncols(), 2);
        assert_eq!(r.jacobian.shape(), (4, 6));
        assert!(r.stable);
        assert!((r.trace() - 3.0676).abs() < 0.05, "trace {}", r.trace());
        assert!((r.determinant() - 1.9467).abs() < 0.05, "det {}", r.determinant());
        assert!((r.eigenvalues[0] - 0.8967).abs() < 0.05);
        assert!((r.eigenvalues[1] - 2.1709).abs() < 0.05);
    }

    #[test]
    fn reference_residual() {
        let r = check_equilibrium(&Geometry::reference_rig(), &Pose::reference(), &REFERENCE_TENSIONS).unwrap();
        // The published tensions carry about 26 N more vertical pull than the
        // hanging mass needs; horizontal balance is close.
        assert!(r[0].abs() < 1.5 && r[1].abs() < 1.5, "{r:?}");
        assert!((r[2] - 26.1).abs() < 0.5, "{r:?}");
    }

    #[test]
    fn identity_reduction() {
        let g = Geometry::new(
            vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.5, 2.0)],
            vec![Vector3::zeros(); 2],
            1.0,
            0.0,
            Vector3::new(0.0, 0.0, -9.81),
        )
        .unwrap();
        let l = cable_vectors(&g, &Pose::at(Vector3::zeros()));
        assert_eq!(l, g.base_anchors);
        let j = jacobian(&g, &Pose::at(Vector3::zeros()), &l);
        assert!(j.columns(3, 3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_vertical_cable_balances_point_mass() {
        let m = 2.0;
        let g = Geometry::new(
            vec![Vector3::new(0.0, 0.0, 3.0)],
            vec![Vector3::zeros()],
            m,
            0.0,
            Vector3::new(0.0, 0.0, -9.81),
        )
        .unwrap();
        let r = check_equilibrium(&g, &Pose::at(Vector3::new(0.0, 0.0, 1.0)), &[m * 9.81]).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn residual_scales_without_gravity() {
        let mut g = Geometry::reference_rig();
        g.gravity = Vector3::zeros();
        let pose = Pose::reference();
        let a = check_equilibrium(&g, &pose, &REFERENCE_TENSIONS).unwrap();
        let doubled: Vec<f64> = REFERENCE_TENSIONS.iter().map(|t| 2.0 * t).collect();
        let b = check_equilibrium(&g, &pose, &doubled).unwrap();
        for i in 0..6 {
            assert_eq!(b[i], 2.0 * a[i]);
        }
    }

    #[test]
    fn rejects_negative_tension_and_zero_length() {
        let g = Geometry::reference_rig();
        let err = check_equilibrium(&g, &Pose::reference(), &[1.0, -1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NegativeTension { index: 2, .. }));
        let pose = Pose::at(g.base_anchors[0] - g.body_anchors[0]);
        assert!(matches!(
            reduced_hessian(&g, &pose, &REFERENCE_TENSIONS),
            Err(Error::ZeroLengthCable(1))
        ));
    }

    #[test]
    fn zero_tensions_are_unstable() {
        let r = reduced_hessian(&Geometry::reference_rig(), &Pose::reference(), &[0.0; 4]).unwrap();
        assert!(r.platform_hessian.iter().all(|&x| x == 0.0));
        assert!(!r.stable);
    }

    #[test]
    fn null_space_examples() {
        let mut j = DMatrix::zeros(3, 6);
        j.view_mut((0, 0), (3, 3)).fill_with_identity();
        let n = null_space(&j, RANK_TOL);
        assert_eq!(n.ncols(), 3);
        assert!(n.rows(0, 3).iter().all(|x| x.abs() < 1e-12));
        let full = DMatrix::from_fn(6, 6, |i, k| if i == k { 2.0 } else { 0.1 * (i + k) as f64 });
        assert_eq!(null_space(&full, RANK_TOL).ncols(), 0);
        let r = reference();
        let sv = r.jacobian.clone().svd(false, false).singular_values;
        assert!(sv.iter().all(|&s| s > 1e-6), "rank 4 expected: {sv}");
    }

    #[test]
    fn rotation_is_orthonormal() {
        for conv in [EulerConvention::Xyz, EulerConvention::Zyx] {
            let r = rotation(&Vector3::new(0.3, -1.1, 2.4), conv);
            assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-10);
            assert!((r.determinant() - 1.0).abs() < 1e-10);
        }
        let a = rotation(&Vector3::new(0.3, 0.0, 0.0), EulerConvention::Xyz);
        assert_abs_diff_eq!(a * Vector3::y(), Vector3::new(0.0, 0.3f64.cos(), 0.3f64.sin()), epsilon = 1e-12);
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        prop::array::uniform3(-2.0f64..2.0).prop_map(Vector3::from)
    }

    fn perturbed_rig() -> impl Strategy<Value = (Geometry, Vec<f64>)> {
        (
            prop::collection::vec(vec3(), 4),
            prop::collection::vec(1.0f64..30.0, 4),
        )
            .prop_map(|(jitter, t)| {
                let mut g = Geometry::reference_rig();
                for (b, j) in g.base_anchors.iter_mut().zip(jitter) {
                    *b += 0.05 * j;
                }
                (g, t)
            })
    }

    proptest! {
        #[test]
        fn skew_property(v in vec3(), w in vec3()) {
            let s = skew(&v);
            prop_assert_eq!(s.transpose(), -s);
            prop_assert!((s * v).amax() < 1e-12);
            prop_assert!((s * w - v.cross(&w)).amax() < 1e-12);
        }

        #[test]
        fn null_space_is_orthonormal_kernel((g, t) in perturbed_rig(), euler in vec3()) {
            let pose = Pose::new(Vector3::new(0.0, 0.0, 0.7), 0.1 * euler, EulerConvention::Xyz).unwrap();
            let r = reduced_hessian(&g, &pose, &t).unwrap();
            let n = &r.null_space;
            prop_assert!((&r.jacobian * n).amax() < 1e-9);
            prop_assert!((n.transpose() * n - DMatrix::identity(n.ncols(), n.ncols())).amax() < 1e-9);
            prop_assert!((&r.reduced_hessian - r.reduced_hessian.transpose()).amax() < 1e-9);
            prop_assert_eq!(r.stable, r.eigenvalues[0] > 0.0);
        }

        #[test]
        fn hessian_is_linear_in_tensions((g, t) in perturbed_rig(), alpha in 0.1f64..10.0) {
            let pose = Pose::reference();
            let a = reduced_hessian(&g, &pose, &t).unwrap();
            let scaled: Vec<f64> = t.iter().map(|x| alpha * x).collect();
            let b = reduced_hessian(&g, &pose, &scaled).unwrap();
            prop_assert!((&b.platform_hessian - alpha * &a.platform_hessian).amax() < 1e-9 * alpha.max(1.0) * 100.0);
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!((y - alpha * x).abs() < 1e-8 * (1.0 + y.abs()));
            }
            prop_assert_eq!(a.stable, b.stable);
        }

        #[test]
        fn eigenvalues_survive_rebasing((g, t) in perturbed_rig(), angle in 0.0f64..6.3) {
            let r = reduced_hessian(&g, &Pose::reference(), &t).unwrap();
            let (c, s) = (angle.cos(), angle.sin());
            let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            let n2 = &r.null_space * q;
            let h2 = n2.transpose() * &r.platform_hessian * &n2;
            let e2 = symmetric_eigenvalues(&((&h2 + h2.transpose()) * 0.5));
            for (x, y) in r.eigenvalues.iter().zip(&e2) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }

        #[test]
        fn rigid_translation_changes_nothing((g, t) in perturbed_rig(), delta in vec3()) {
            let pose = Pose::reference();
            let a = reduced_hessian(&g, &pose, &t).unwrap();
            let mut g2 = g.clone();
            for b in &mut g2.base_anchors {
                *b += delta;
            }
            let pose2 = Pose::at(pose.p + delta);
            let b = reduced_hessian(&g2, &pose2, &t).unwrap();
            for (x, y) in a.cable_vectors.iter().zip(&b.cable_vectors) {
                prop_assert!((x - y).amax() < 1e-12);
            }
            prop_assert!((&a.jacobian - &b.jacobian).amax() < 1e-12);
            prop_assert_eq!(a.stable, b.stable);
        }

        #[test]
        fn permuting_cables_permutes_rows((g, _t) in perturbed_rig()) {
            let pose = Pose::reference();
            let j = jacobian(&g, &pose, &cable_vectors(&g, &pose));
            let order = [2usize, 0, 3, 1];
            let mut g2 = g.clone();
            g2.base_anchors = order.iter().map(|&i| g.base_anchors[i]).collect();
            g2.body_anchors = order.iter().map(|&i| g.body_anchors[i]).collect();
            let j2 = jacobian(&g2, &pose, &cable_vectors(&g2, &pose));
            for (row, &i) in order.iter().enumerate() {
                prop_assert_eq!(j2.row(row), j.row(i));
            }
        }
    }
}
