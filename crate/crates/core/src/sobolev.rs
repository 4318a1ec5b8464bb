//! Sobolev cubature forms.
//!
//! A form of order `k` is `sum_{|beta|_1 <= k} D_beta^T diag(c) D_beta` with
//! `c = w` (the cubature weights, [`FormKind::W`]) or `c = w^2`
//! ([`FormKind::U`]). For samples of a polynomial in `Pi_{m,n}` the W-kind
//! quadratic equals the squared `H^k` norm exactly.

use ndarray::Array2;

use crate::diff::{DiffOperator, Side};
use crate::error::{Error, Result};
use crate::grid::{check_len, TensorGrid};

/// Largest dense form [`SobolevForm::assemble`] will build.
pub const MAX_ASSEMBLED: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// Weighted by the cubature weights `w_alpha`.
    W,
    /// Weighted by the squared cubature weights `w_alpha^2`.
    U,
}

/// All multi-indices of length `dim` with `|beta|_1 <= order`, in
/// lexicographic order.
pub fn multi_indices_up_to(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, budget: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for b in 0..=budget {
            prefix.push(b);
            rec(dim, budget - b, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, order, &mut Vec::with_capacity(dim), &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct SobolevForm {
    kind: FormKind,
    order: usize,
    betas: Vec<Vec<usize>>,
    diff: DiffOperator,
    diag: Vec<f64>,
}

impl SobolevForm {
    pub fn new(grid: &TensorGrid, order: usize, kind: FormKind) -> Self {
        let diag = match kind {
            FormKind::W => grid.weights().to_vec(),
            FormKind::U => grid.weights().iter().map(|w| w * w).collect(),
        };
        Self {
            kind,
            order,
            betas: multi_indices_up_to(grid.dim(), order),
            diff: DiffOperator::new(grid),
            diag,
        }
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn betas(&self) -> &[Vec<usize>] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_len(self.len(), u.len())?;
        check_len(self.len(), v.len())?;
        let mut total = 0.0;
        for beta in &self.betas {
            let du = self.diff.apply_multi(u, beta)?;
            let dv = self.diff.apply_multi(v, beta)?;
            total += du.iter().zip(&dv).zip(&self.diag).map(|((a, b), c)| a * b * c).sum::<f64>();
        }
        Ok(total)
    }

    /// `values^T F values`.
    pub fn quadratic(&self, values: &[f64]) -> Result<f64> {
        check_len(self.len(), values.len())?;
        let mut total = 0.0;
        for beta in &self.betas {
            let d = self.diff.apply_multi(values, beta)?;
            total += d.iter().zip(&self.diag).map(|(a, c)| a * a * c).sum::<f64>();
        }
        Ok(total)
    }

    /// `2 F values`, the gradient of [`quadratic`](Self::quadratic).
    pub fn gradient(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), values.len())?;
        let mut grad = vec![0.0; values.len()];
        for beta in &self.betas {
            let d = self.diff.apply_multi(values, beta)?;
            let scaled: Vec<f64> = d.iter().zip(&self.diag).map(|(a, c)| 2.0 * a * c).collect();
            let back = self.diff.apply_multi_transpose(&scaled, beta)?;
            for (g, b) in grad.iter_mut().zip(&back) {
                *g += b;
            }
        }
        Ok(grad)
    }

    /// Dense symmetric matrix of the form, row-major. Only for small grids.
    pub fn assemble(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n > MAX_ASSEMBLED {
            return Err(Error::AssemblyTooLarge { size: n, cap: MAX_ASSEMBLED });
        }
        let mut dense = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for col in 0..n {
            e[col] = 1.0;
            let half = self.gradient(&e)?;
            e[col] = 0.0;
            for (row, h) in half.iter().enumerate() {
                dense[row * n + col] = 0.5 * h;
            }
        }
        Ok(dense)
    }
}

/// Shorthand for [`SobolevForm::quadratic`].
pub fn sobolev_quadratic(form: &SobolevForm, values: &[f64]) -> Result<f64> {
    form.quadratic(values)
}

/// Shorthand for [`SobolevForm::gradient`].
pub fn sobolev_gradient(form: &SobolevForm, values: &[f64]) -> Result<Vec<f64>> {
    form.gradient(values)
}

/// How face residuals are combined before the boundary form is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySum {
    /// One quadratic form per face, summed.
    #[default]
    PerFace,
    /// Face vectors are summed first and the form is applied once.
    Pre,
}

/// Integer boundary order for an interior order `k`: `max(0, floor(k - 1/2))`.
pub fn trace_order(k: f64) -> usize {
    (k - 0.5).floor().max(0.0) as usize
}

/// Boundary form over the `2m` faces of `[-1,1]^m`.
///
/// Faces are numbered `2 * axis + side` with the lower face first. In one
/// dimension each face is a single point and the form reduces to a sum of
/// squares.
#[derive(Debug, Clone)]
pub struct BoundaryForm {
    dim: usize,
    degree: usize,
    order: usize,
    sum: BoundarySum,
    face: Option<(TensorGrid, SobolevForm)>,
}

impl BoundaryForm {
    pub fn new(dim: usize, degree: usize, order: usize, kind: FormKind, sum: BoundarySum) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        let face = if dim > 1 {
            let grid = TensorGrid::new(dim - 1, degree)?;
            let form = SobolevForm::new(&grid, order, kind);
            Some((grid, form))
        } else {
            None
        };
        Ok(Self { dim, degree, order, sum, face })
    }

    /// Boundary form matching an interior Sobolev order `k`: order
    /// [`trace_order`]`(k)`, plain cubature weights when `k < 1/2` and squared
    /// weights otherwise.
    pub fn for_interior_order(dim: usize, degree: usize, k: f64, sum: BoundarySum) -> Result<Self> {
        let kind = if k < 0.5 { FormKind::W } else { FormKind::U };
        Self::new(dim, degree, trace_order(k), kind, sum)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn aggregation(&self) -> BoundarySum {
        self.sum
    }

    pub fn face_count(&self) -> usize {
        2 * self.dim
    }

    pub fn face_len(&self) -> usize {
        self.face.as_ref().map_or(1, |(g, _)| g.len())
    }

    pub fn face_grid(&self) -> Option<&TensorGrid> {
        self.face.as_ref().map(|(g, _)| g)
    }

    pub fn face_axis_side(face: usize) -> (usize, Side) {
        (face / 2, if face % 2 == 0 { Side::Lower } else { Side::Upper })
    }

    /// Points of face `face` embedded in `[-1,1]^m`, one per row.
    pub fn face_points(&self, face: usize) -> Array2<f64> {
        let (axis, side) = Self::face_axis_side(face);
        match &self.face {
            None => Array2::from_elem((1, 1), side.coordinate()),
            Some((grid, _)) => Array2::from_shape_fn((grid.len(), self.dim), |(r, i)| {
                use std::cmp::Ordering::*;
                match i.cmp(&axis) {
                    Less => grid.coords(i)[r],
                    Equal => side.coordinate(),
                    Greater => grid.coords(i - 1)[r],
                }
            }),
        }
    }

    fn check_faces(&self, faces: &[Vec<f64>]) -> Result<()> {
        check_len(self.face_count(), faces.len())?;
        for f in faces {
            check_len(self.face_len(), f.len())?;
        }
        Ok(())
    }

    fn face_quadratic(&self, v: &[f64]) -> Result<f64> {
        match &self.face {
            None => Ok(v[0] * v[0]),
            Some((_, form)) => form.quadratic(v),
        }
    }

    fn face_gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        match &self.face {
            None => Ok(vec![2.0 * v[0]]),
            Some((_, form)) => form.gradient(v),
        }
    }

    fn presum(&self, faces: &[Vec<f64>]) -> Vec<f64> {
        let mut total = vec![0.0; self.face_len()];
        for f in faces {
            for (t, v) in total.iter_mut().zip(f) {
                *t += v;
            }
        }
        total
    }

    pub fn quadratic(&self, faces: &[Vec<f64>]) -> Result<f64> {
        self.check_faces(faces)?;
        match self.sum {
            BoundarySum::PerFace => faces.iter().map(|f| self.face_quadratic(f)).sum(),
            BoundarySum::Pre => self.face_quadratic(&self.presum(faces)),
        }
    }

    /// Gradient with respect to each face vector.
    pub fn gradient(&self, faces: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_faces(faces)?;
        match self.sum {
            BoundarySum::PerFace => faces.iter().map(|f| self.face_gradient(f)).collect(),
            BoundarySum::Pre => {
                let g = self.face_gradient(&self.presum(faces))?;
                Ok(vec![g; faces.len()])
            }
        }
    }
}

/// Shorthand for [`BoundaryForm::quadratic`].
pub fn boundary_quadratic(form: &BoundaryForm, faces: &[Vec<f64>]) -> Result<f64> {
    form.quadratic(faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tensor_grid;
    use crate::rng::SplitMix64;

    fn random_vec(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
    }

    #[test]
    fn beta_enumeration() {
        assert_eq!(multi_indices_up_to(1, 2), vec![vec![0], vec![1], vec![2]]);
        let b = multi_indices_up_to(2, 1);
        assert_eq!(b, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(multi_indices_up_to(2, 3).len(), 10);
    }

    #[test]
    fn analytic_spot_values() {
        let g = tensor_grid(1, 3).unwrap();
        let form = SobolevForm::new(&g, 1, FormKind::W);
        let q = form.quadratic(&g.sample(|x| x[0])).unwrap();
        assert!((q - 8.0 / 3.0).abs() < 1e-12);
        let q = form.quadratic(&g.sample(|x| x[0] * x[0])).unwrap();
        assert!((q - 46.0 / 15.0).abs() < 1e-12);

        let g = tensor_grid(2, 4).unwrap();
        let form = SobolevForm::new(&g, 0, FormKind::W);
        assert!((form.quadratic(&vec![1.0; g.len()]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_psd() {
        let mut rng = SplitMix64::new(5);
        for (m, n, k, kind) in [(1, 6, 2, FormKind::W), (2, 4, 1, FormKind::U), (2, 3, 3, FormKind::W)] {
            let g = tensor_grid(m, n).unwrap();
            let form = SobolevForm::new(&g, k, kind);
            for _ in 0..10 {
                let u = random_vec(&mut rng, g.len());
                let v = random_vec(&mut rng, g.len());
                let a = form.bilinear(&u, &v).unwrap();
                let b = form.bilinear(&v, &u).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                assert!(form.quadratic(&u).unwrap() >= -1e-12);
            }
        }
    }

    #[test]
    fn order_zero_w_is_weighted_l2() {
        let g = tensor_grid(2, 5).unwrap();
        let form = SobolevForm::new(&g, 0, FormKind::W);
        let mut rng = SplitMix64::new(9);
        let u = random_vec(&mut rng, g.len());
        let direct: f64 = u.iter().zip(g.weights()).map(|(x, w)| w * x * x).sum();
        assert!((form.quadratic(&u).unwrap() - direct).abs() < 1e-14);
        let grad = form.gradient(&u).unwrap();
        for ((gr, x), w) in grad.iter().zip(&u).zip(g.weights()) {
            assert!((gr - 2.0 * w * x).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(21);
        let g = tensor_grid(1, 5).unwrap();
        for kind in [FormKind::W, FormKind::U] {
            let form = SobolevForm::new(&g, 2, kind);
            let u = random_vec(&mut rng, g.len());
            let grad = form.gradient(&u).unwrap();
            assert!(form.gradient(&vec![0.0; g.len()]).unwrap().iter().all(|&v| v == 0.0));
            let h = 1e-5;
            for i in 0..u.len() {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (form.quadratic(&up).unwrap() - form.quadratic(&dn).unwrap()) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-3);
                assert!(rel < 1e-6, "i={i} fd={fd} an={}", grad[i]);
            }
        }
    }

    #[test]
    fn monotone_in_order() {
        let mut rng = SplitMix64::new(2);
        let g = tensor_grid(2, 4).unwrap();
        let u = random_vec(&mut rng, g.len());
        let mut prev = 0.0;
        for k in 0..4 {
            let q = SobolevForm::new(&g, k, FormKind::W).quadratic(&u).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn assembled_form_matches_operator() {
        let g = tensor_grid(2, 3).unwrap();
        let form = SobolevForm::new(&g, 2, FormKind::U);
        let dense = form.assemble().unwrap();
        let n = g.len();
        let mut rng = SplitMix64::new(4);
        let u = random_vec(&mut rng, n);
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += u[i] * dense[i * n + j] * u[j];
                assert!((dense[i * n + j] - dense[j * n + i]).abs() < 1e-10);
            }
        }
        assert!((q - form.quadratic(&u).unwrap()).abs() < 1e-9 * q.abs().max(1.0));
        let big = tensor_grid(2, 70).unwrap();
        assert!(matches!(
            SobolevForm::new(&big, 0, FormKind::W).assemble(),
            Err(Error::AssemblyTooLarge { .. })
        ));
    }

    #[test]
    fn trace_order_rule() {
        assert_eq!(trace_order(0.0), 0);
        assert_eq!(trace_order(1.0), 0);
        assert_eq!(trace_order(2.0), 1);
        assert_eq!(trace_order(3.0), 2);
    }

    #[test]
    fn boundary_examples() {
        let b = BoundaryForm::new(1, 10, 0, FormKind::W, BoundarySum::PerFace).unwrap();
        assert_eq!(b.quadratic(&[vec![0.0], vec![0.0]]).unwrap(), 0.0);
        assert_eq!(b.quadratic(&[vec![1.0], vec![0.0]]).unwrap(), 1.0);

        let b = BoundaryForm::new(2, 2, 0, FormKind::W, BoundarySum::PerFace).unwrap();
        let t = b.face_grid().unwrap().sample(|x| x[0]);
        let zero = vec![0.0; 3];
        let faces = vec![zero.clone(), t, zero.clone(), zero];
        assert!((b.quadratic(&faces).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn presum_allows_cancellation() {
        let per = BoundaryForm::new(1, 4, 0, FormKind::W, BoundarySum::PerFace).unwrap();
        let pre = BoundaryForm::new(1, 4, 0, FormKind::W, BoundarySum::Pre).unwrap();
        let faces = vec![vec![1.0], vec![-1.0]];
        assert_eq!(per.quadratic(&faces).unwrap(), 2.0);
        assert_eq!(pre.quadratic(&faces).unwrap(), 0.0);
    }

    #[test]
    fn boundary_errors_and_points() {
        let b = BoundaryForm::new(2, 3, 1, FormKind::U, BoundarySum::PerFace).unwrap();
        assert!(matches!(b.quadratic(&[vec![0.0; 4]]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(b.quadratic(&vec![vec![0.0; 3]; 4]), Err(Error::LengthMismatch { .. })));
        let p = b.face_points(3);
        assert_eq!(p.shape(), &[4, 2]);
        assert!(p.column(1).iter().all(|&y| y == 1.0));
        let p = b.face_points(0);
        assert!(p.column(0).iter().all(|&x| x == -1.0));
    }

    #[test]
    fn boundary_gradient_fd() {
        let mut rng = SplitMix64::new(8);
        for sum in [BoundarySum::PerFace, BoundarySum::Pre] {
            let b = BoundaryForm::new(2, 4, 1, FormKind::U, sum).unwrap();
            let faces: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 5)).collect();
            let grad = b.gradient(&faces).unwrap();
            let h = 1e-6;
            for f in 0..4 {
                for i in 0..5 {
                    let mut up = faces.clone();
                    let mut dn = faces.clone();
                    up[f][i] += h;
                    dn[f][i] -= h;
                    let fd = (b.quadratic(&up).unwrap() - b.quadratic(&dn).unwrap()) / (2.0 * h);
                    assert!((fd - grad[f][i]).abs() < 1e-6 * grad[f][i].abs().max(1.0));
                }
            }
        }
    }
}
