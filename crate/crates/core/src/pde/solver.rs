use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::DensityField;
use crate::invariant_measure::PhiTable;
use crate::zero_range::RateFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FluxType {
    Central,
    /// Advective face value taken from the upwind cell by sign of W'_eps.
    #[default]
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    pub cfl: f64,
    pub flux: FluxType,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self { cfl: 0.4, flux: FluxType::Upwind }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<DensityField>,
    pub steps: usize,
    /// Largest time step used.
    pub dt_max: f64,
    /// Cells clipped from [-1e-12, 0) to 0.
    pub clipped: usize,
    /// max_t |mass(t) - mass(0)| / mass(0) over the snapshots.
    pub mass_drift: f64,
    /// W'_eps at the faces x_{i+1/2} = (i+1)/M.
    pub face_drift: Vec<f64>,
}

const CLIP_TOL: f64 = 1e-12;

pub fn solve_pde(
    rho0: &DensityField,
    drift: &dyn Fn(f64) -> f64,
    g: &RateFunction,
    t_end: f64,
    snapshots: &[f64],
    cfg: PdeConfig,
) -> Result<PdeTrajectory> {
    solve_pde_observed(rho0, drift, g, t_end, snapshots, cfg, &mut |_, _| {})
}

/// As `solve_pde`, calling `on_step(t, rho)` at t = 0 and after every step.
pub fn solve_pde_observed(
    rho0: &DensityField,
    drift: &dyn Fn(f64) -> f64,
    g: &RateFunction,
    t_end: f64,
    snapshots: &[f64],
    cfg: PdeConfig,
    on_step: &mut dyn FnMut(f64, &[f64]),
) -> Result<PdeTrajectory> {
    let m = rho0.len();
    if !m.is_power_of_two() || !(128..=16384).contains(&m) {
        return invalid(format!("grid size must be a power of two in [2^7, 2^14], got {m}"));
    }
    if rho0.values.iter().any(|v| !(*v >= 0.0)) {
        return invalid("initial density must be nonnegative");
    }
    if !(cfg.cfl > 0.0 && cfg.cfl <= 0.4) {
        return invalid(format!("CFL number must lie in (0, 0.4], got {}", cfg.cfl));
    }
    if snapshots.iter().any(|&s| !(0.0..=t_end).contains(&s)) || snapshots.windows(2).any(|w| w[1] < w[0]) {
        return invalid("snapshot times must be sorted and within [0, t_end]");
    }
    let dx = 1.0 / m as f64;
    let face_drift: Vec<f64> = (0..m).map(|i| drift((i + 1) as f64 * dx)).collect();
    let wmax = face_drift.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rho_max0 = rho0.values.iter().cloned().fold(0.0, f64::max);
    let mut table = PhiTable::new(g, (2.0 * rho_max0).max(1.0), 1.0 / 1024.0)?;

    let mut rho = rho0.values.clone();
    let mass0 = rho0.mass();
    let mut phi = vec![0.0; m];
    let mut flux = vec![0.0; m];
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut clipped = 0usize;
    let mut dt_max = 0.0f64;
    let mut out = PdeTrajectory {
        times: Vec::new(),
        fields: Vec::new(),
        steps: 0,
        dt_max: 0.0,
        clipped: 0,
        mass_drift: 0.0,
        face_drift: face_drift.clone(),
    };
    let mut next_snap = 0usize;
    let record = |out: &mut PdeTrajectory, t: f64, rho: &[f64]| {
        let f = DensityField::new(rho.to_vec());
        let drift = (f.mass() - mass0).abs() / mass0.max(f64::MIN_POSITIVE);
        out.mass_drift = out.mass_drift.max(drift);
        out.times.push(t);
        out.fields.push(f);
    };
    on_step(0.0, &rho);
    while next_snap < snapshots.len() && snapshots[next_snap] <= 0.0 {
        record(&mut out, 0.0, &rho);
        next_snap += 1;
    }
    while t < t_end {
        let mut dmax = 0.0f64;
        for i in 0..m {
            let (p, d) = table.get(rho[i])?;
            phi[i] = p;
            dmax = dmax.max(d);
        }
        let mut dt = cfg.cfl / (dmax / (dx * dx) + 2.0 * wmax * dmax / dx).max(f64::MIN_POSITIVE);
        let target = if next_snap < snapshots.len() { snapshots[next_snap].min(t_end) } else { t_end };
        let landing = t + dt >= target;
        if landing {
            dt = target - t;
        }
        for i in 0..m {
            let j = if i + 1 == m { 0 } else { i + 1 };
            let w = face_drift[i];
            let adv = match cfg.flux {
                FluxType::Central => 0.5 * (phi[i] + phi[j]),
                FluxType::Upwind => {
                    if w >= 0.0 {
                        phi[i]
                    } else {
                        phi[j]
                    }
                }
            };
            flux[i] = -(phi[j] - phi[i]) / (2.0 * dx) + 2.0 * w * adv;
        }
        let c = dt / dx;
        for i in 0..m {
            let left = if i == 0 { flux[m - 1] } else { flux[i - 1] };
            let v = rho[i] - c * (flux[i] - left);
            if v.is_nan() {
                return Err(Error::Pde { step: steps, t, reason: format!("NaN in cell {i}") });
            }
            rho[i] = if v < 0.0 {
                if v < -CLIP_TOL {
                    return Err(Error::Pde { step: steps, t, reason: format!("density {v:e} in cell {i}") });
                }
                clipped += 1;
                0.0
            } else {
                v
            };
        }
        t = if landing { target } else { t + dt };
        steps += 1;
        dt_max = dt_max.max(dt);
        on_step(t, &rho);
        while next_snap < snapshots.len() && snapshots[next_snap] <= t {
            record(&mut out, t, &rho);
            next_snap += 1;
        }
    }
    if snapshots.is_empty() {
        record(&mut out, t, &rho);
    }
    out.steps = steps;
    out.dt_max = dt_max;
    out.clipped = clipped;
    Ok(out)
}
