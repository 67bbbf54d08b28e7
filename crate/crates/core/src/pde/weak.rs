use std::f64::consts::TAU;

use super::PdeTrajectory;
use crate::error::{invalid, Result};
use crate::field::DensityField;
use crate::invariant_measure::PhiTable;
use crate::zero_range::RateFunction;

/// Smooth space-time test function with the derivatives the weak form needs.
pub trait TestFunction {
    fn value(&self, s: f64, x: f64) -> f64;
    fn ds(&self, s: f64, x: f64) -> f64;
    fn dx(&self, s: f64, x: f64) -> f64;
    fn dxx(&self, s: f64, x: f64) -> f64;
}

/// G(s, x) = (1 - s/T)^2 cos(2 pi n x), or sin when `sine`.
#[derive(Debug, Clone, Copy)]
pub struct TrigTest {
    pub n: u32,
    pub sine: bool,
    pub t_final: f64,
}

impl TrigTest {
    fn time(&self, s: f64) -> (f64, f64) {
        let a = 1.0 - s / self.t_final;
        (a * a, -2.0 * a / self.t_final)
    }

    fn space(&self, x: f64) -> [f64; 3] {
        let k = TAU * self.n as f64;
        let (s, c) = (k * x).sin_cos();
        if self.sine {
            [s, k * c, -k * k * s]
        } else {
            [c, -k * s, -k * k * c]
        }
    }
}

impl TestFunction for TrigTest {
    fn value(&self, s: f64, x: f64) -> f64 {
        self.time(s).0 * self.space(x)[0]
    }
    fn ds(&self, s: f64, x: f64) -> f64 {
        self.time(s).1 * self.space(x)[0]
    }
    fn dx(&self, s: f64, x: f64) -> f64 {
        self.time(s).0 * self.space(x)[1]
    }
    fn dxx(&self, s: f64, x: f64) -> f64 {
        self.time(s).0 * self.space(x)[2]
    }
}

/// Streams a trajectory through the weak form
///   R(G) = int int d_sG rho + int G(0) rho0 + int int (G_xx/2 + 2 G_x W') Phi(rho),
/// trapezoid in time. In space, rho-terms use the cell centres and the drift
/// term the faces (x_{i+1/2}, with Phi averaged across the face), which is
/// the dual grid of the flux.
pub struct WeakAccumulator<'a> {
    tests: &'a [&'a dyn TestFunction],
    face_drift: Vec<f64>,
    table: PhiTable,
    acc: Vec<f64>,
    prev: Option<(f64, Vec<f64>)>,
    phi: Vec<f64>,
}

impl<'a> WeakAccumulator<'a> {
    pub fn new(tests: &'a [&'a dyn TestFunction], face_drift: Vec<f64>, g: &RateFunction) -> Result<Self> {
        Ok(Self {
            tests,
            table: PhiTable::new(g, 4.0, 1.0 / 1024.0)?,
            acc: vec![0.0; tests.len()],
            prev: None,
            phi: vec![0.0; face_drift.len()],
            face_drift,
        })
    }

    /// Space integrals of the time integrand at time s, one per test.
    fn integrand(&mut self, s: f64, rho: &[f64]) -> Result<Vec<f64>> {
        let m = rho.len();
        let dx = 1.0 / m as f64;
        for (p, &r) in self.phi.iter_mut().zip(rho) {
            *p = self.table.phi(r)?;
        }
        Ok(self
            .tests
            .iter()
            .map(|t| {
                let mut v = 0.0;
                for i in 0..m {
                    let xc = (i as f64 + 0.5) * dx;
                    let xf = (i + 1) as f64 * dx;
                    let j = if i + 1 == m { 0 } else { i + 1 };
                    v += t.ds(s, xc) * rho[i] + 0.5 * t.dxx(s, xc) * self.phi[i];
                    v += 2.0 * t.dx(s, xf) * self.face_drift[i] * 0.5 * (self.phi[i] + self.phi[j]);
                }
                v * dx
            })
            .collect())
    }

    pub fn push(&mut self, s: f64, rho: &[f64]) -> Result<()> {
        if rho.len() != self.face_drift.len() {
            return invalid("field size differs from drift grid");
        }
        let cur = self.integrand(s, rho)?;
        match self.prev.take() {
            None => {
                let dx = 1.0 / rho.len() as f64;
                for (a, t) in self.acc.iter_mut().zip(self.tests) {
                    *a += (0..rho.len()).map(|i| t.value(s, (i as f64 + 0.5) * dx) * rho[i]).sum::<f64>() * dx;
                }
            }
            Some((s0, f0)) => {
                for ((a, x0), x1) in self.acc.iter_mut().zip(&f0).zip(&cur) {
                    *a += 0.5 * (s - s0) * (x0 + x1);
                }
            }
        }
        self.prev = Some((s, cur));
        Ok(())
    }

    /// Residual per test. Fails if a test does not vanish at the final time.
    pub fn finish(self) -> Result<Vec<f64>> {
        if let Some((s, _)) = &self.prev {
            let m = self.face_drift.len();
            for t in self.tests {
                let end = (0..m).map(|i| t.value(*s, (i as f64 + 0.5) / m as f64).abs()).fold(0.0, f64::max);
                if end > 1e-12 {
                    return invalid(format!("test function does not vanish at T = {s}"));
                }
            }
        }
        Ok(self.acc)
    }
}

/// Weak-form residual of a stored trajectory (its first field is rho0).
pub fn weak_residual(traj: &PdeTrajectory, tests: &[&dyn TestFunction], g: &RateFunction) -> Result<Vec<f64>> {
    weak_residual_fields(&traj.times, &traj.fields, traj.face_drift.clone(), tests, g)
}

pub fn weak_residual_fields(
    times: &[f64],
    fields: &[DensityField],
    face_drift: Vec<f64>,
    tests: &[&dyn TestFunction],
    g: &RateFunction,
) -> Result<Vec<f64>> {
    if times.first() != Some(&0.0) {
        return invalid("trajectory must start at t = 0");
    }
    let mut acc = WeakAccumulator::new(tests, face_drift, g)?;
    for (t, f) in times.iter().zip(fields) {
        acc.push(*t, &f.values)?;
    }
    acc.finish()
}
