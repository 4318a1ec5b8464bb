//! Independent polynomial oracle: symbolic derivatives and exact integrals
//! of multivariate polynomials on the cube [-1, 1]^m.

#![allow(dead_code)]

use scpinn::rng::SplitMix64;

#[derive(Debug, Clone)]
pub struct Poly {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Poly {
    pub fn monomial(exps: &[u32]) -> Self {
        Self { dim: exps.len(), terms: vec![(1.0, exps.to_vec())] }
    }

    /// Random polynomial with per-axis degree at most `deg`.
    pub fn random(rng: &mut SplitMix64, dim: usize, deg: u32, nterms: usize) -> Self {
        let terms = (0..nterms)
            .map(|_| {
                let e = (0..dim).map(|_| (rng.next_u64() % (deg as u64 + 1)) as u32).collect();
                (rng.uniform(-1.0, 1.0), e)
            })
            .collect();
        Self { dim, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn derivative(&self, beta: &[usize]) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter_map(|(c, e)| {
                let mut c = *c;
                let mut out = e.clone();
                for (k, &b) in out.iter_mut().zip(beta) {
                    if (*k as usize) < b {
                        return None;
                    }
                    for _ in 0..b {
                        c *= *k as f64;
                        *k -= 1;
                    }
                }
                Some((c, out))
            })
            .collect();
        Poly { dim: self.dim, terms }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = Vec::new();
        for (a, ea) in &self.terms {
            for (b, eb) in &other.terms {
                terms.push((a * b, ea.iter().zip(eb).map(|(x, y)| x + y).collect()));
            }
        }
        Poly { dim: self.dim, terms }
    }

    /// Exact integral over the cube.
    pub fn integral(&self) -> f64 {
        self.terms.iter().map(|(c, e)| c * monomial_integral(e)).sum()
    }

    /// `sum |c| int |x^e|`, a cancellation-free scale.
    pub fn integral_scale(&self) -> f64 {
        self.terms.iter().map(|(c, e)| c.abs() * e.iter().map(|&k| 2.0 / (k as f64 + 1.0)).product::<f64>()).sum()
    }

    /// `sum_{|beta| <= k} int (D^beta Q)^2`.
    pub fn sobolev_norm_sq(&self, k: usize) -> f64 {
        scpinn::sobolev::multi_indices_up_to(self.dim, k)
            .iter()
            .map(|b| {
                let d = self.derivative(b);
                d.mul(&d).integral()
            })
            .sum()
    }
}

fn monomial_integral(e: &[u32]) -> f64 {
    e.iter().map(|&k| if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) }).product()
}

/// Largest absolute entry.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Truncated Taylor coefficients of `a(t) * b(t)` by full polynomial
/// multiplication followed by truncation.
pub fn truncated_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            full[i + j] += x * y;
        }
    }
    full.truncate(a.len());
    full
}

/// Central-difference derivative of order `k <= 4` with one Richardson
/// extrapolation step.
pub fn richardson(f: &dyn Fn(f64) -> f64, x: f64, k: usize, h: f64) -> f64 {
    let stencil = |h: f64| -> f64 {
        match k {
            0 => f(x),
            1 => (f(x + h) - f(x - h)) / (2.0 * h),
            2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
            3 => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h.powi(3)),
            4 => (f(x + 2.0 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / h.powi(4),
            _ => panic!("order {k}"),
        }
    };
    if k == 0 {
        return f(x);
    }
    (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0
}
