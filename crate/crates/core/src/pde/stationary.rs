use crate::error::{invalid, Error, Result};
use crate::field::DensityField;
use crate::invariant_measure::moments;
use crate::zero_range::RateFunction;

/// Shape h of the stationary Phi(rho) = u0 h on the cell centres of an
/// M-grid. With V = int_0^x W' and I(x) = int_0^x e^{-4V}, the flux balance
/// u'/2 - 2 W' u = const has the periodic solution
///   h(x) = e^{4V(x)} [1 + (e^{-4V(1)} - 1) I(x)/I(1)].
pub fn stationary_shape(drift: &dyn Fn(f64) -> f64, m: usize) -> Vec<f64> {
    // Fine grid with 16 nodes per cell; cell centres sit on odd multiples of 8.
    let k = 16 * m;
    let h = 1.0 / k as f64;
    let w: Vec<f64> = (0..=k).map(|i| drift(i as f64 * h)).collect();
    let mut v = vec![0.0; k + 1];
    for i in 0..k {
        v[i + 1] = v[i] + 0.5 * h * (w[i] + w[i + 1]);
    }
    let e: Vec<f64> = v.iter().map(|x| (-4.0 * x).exp()).collect();
    let mut int = vec![0.0; k + 1];
    for i in 0..k {
        int[i + 1] = int[i] + 0.5 * h * (e[i] + e[i + 1]);
    }
    let (v1, i1) = (v[k], int[k]);
    let c = (-4.0 * v1).exp() - 1.0;
    (0..m)
        .map(|cell| {
            let i = 16 * cell + 8;
            (4.0 * v[i]).exp() * (1.0 + c * int[i] / i1)
        })
        .collect()
}

/// Stationary density with the given mass: rho = R(u0 h), u0 by bisection.
pub fn stationary_profile(
    drift: &dyn Fn(f64) -> f64,
    total_mass: f64,
    g: &RateFunction,
    m: usize,
) -> Result<DensityField> {
    if !(total_mass > 0.0) {
        return invalid("mass must be positive");
    }
    let shape = stationary_shape(drift, m);
    if shape.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Shooting("stationary shape not positive and finite".into()));
    }
    let mass_at = |u0: f64| -> Result<f64> {
        let mut s = 0.0;
        for &h in &shape {
            s += moments(g, u0 * h)?.0;
        }
        Ok(s / m as f64)
    };
    let hmean = shape.iter().sum::<f64>() / m as f64;
    let mut lo = 0.0;
    let mut hi = g.g_star_upper * total_mass / hmean;
    let mut tries = 0;
    while mass_at(hi)? < total_mass {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Shooting("could not bracket the mass".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass_at(mid)? < total_mass {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let u0 = 0.5 * (lo + hi);
    let values: Result<Vec<f64>> = shape.iter().map(|&h| Ok(moments(g, u0 * h)?.0)).collect();
    Ok(DensityField::new(values?))
}
