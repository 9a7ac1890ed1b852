//! Euclidean projection onto a polytope by a primal active-set method.

use nalgebra::{DMatrix, DVector};

/// `{ x : rows x <= rhs, eq x = eq_rhs }` in dense form.
#[derive(Debug, Clone)]
pub(crate) struct Polytope {
    pub rows: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl Polytope {
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let ineq = (&self.rows * x - &self.rhs).max().max(0.0);
        let eq = (&self.eq * x - &self.eq_rhs).amax();
        ineq.max(eq)
    }

    /// Projects `target` onto the polytope, starting from the feasible point
    /// `start`. Returns the projection, which stays feasible throughout.
    pub fn project(&self, target: &DVector<f64>, start: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let m = self.rows.nrows();
        let scale = 1.0 + target.amax().max(start.amax());
        let tol = 1e-11 * scale;
        let mut x = start.clone();
        let mut working: Vec<usize> = Vec::new();

        for _ in 0..(50 * (n + m) + 100) {
            let k_eq = self.eq.nrows();
            let k = k_eq + working.len();
            let mut c = DMatrix::zeros(k, n);
            for r in 0..k_eq {
                c.set_row(r, &self.eq.row(r));
            }
            for (r, &i) in working.iter().enumerate() {
                c.set_row(k_eq + r, &self.rows.row(i));
            }
            let g = &x - target;
            // s = -g - C^T mu with C s = 0
            let (step, mu) = if k == 0 {
                (-&g, DVector::zeros(0))
            } else {
                let cct = &c * c.transpose();
                let rhs = -(&c * &g);
                let mu = match cct.clone().cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => cct.pseudo_inverse(1e-12).map(|p| p * &rhs).unwrap_or_else(|_| DVector::zeros(k)),
                };
                (-&g - c.transpose() * &mu, mu)
            };

            if step.amax() <= tol {
                // stationary on the working face; check inequality multipliers
                let mut worst: Option<(usize, f64)> = None;
                for (r, _) in working.iter().enumerate() {
                    let lam = mu[k_eq + r];
                    if lam < -tol && worst.is_none_or(|(_, w)| lam < w) {
                        worst = Some((r, lam));
                    }
                }
                match worst {
                    Some((r, _)) => {
                        working.remove(r);
                    }
                    None => return x,
                }
                continue;
            }

            let mut alpha = 1.0;
            let mut blocking = None;
            for i in 0..m {
                if working.contains(&i) {
                    continue;
                }
                let row = self.rows.row(i);
                let dir = row.dot(&step.transpose());
                if dir > 1e-14 * scale {
                    let slack = self.rhs[i] - row.dot(&x.transpose());
                    let t = (slack / dir).max(0.0);
                    if t < alpha {
                        alpha = t;
                        blocking = Some(i);
                    }
                }
            }
            x += alpha * &step;
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        x
    }
}
