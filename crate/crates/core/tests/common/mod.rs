#![allow(dead_code)]

use ambival::oracle::{random_instance, Instance, InstanceLimits};
use ambival::scenario::{AdaptedProcess, ScenarioLattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree, cash flow, tilt family and θ-grid, small enough for the oracle.
pub fn instance(seed: u64) -> Instance {
    random_instance(&mut rng(seed), &InstanceLimits::default()).unwrap()
}

pub fn instance_with(seed: u64, limits: &InstanceLimits) -> Instance {
    random_instance(&mut rng(seed), limits).unwrap()
}

/// Random process on every layer of `lattice`, values in [-1, 1].
pub fn random_process(lattice: &ScenarioLattice, seed: u64) -> AdaptedProcess {
    let mut r = rng(seed);
    AdaptedProcess::from_fn(lattice, "Y", |_| r.random_range(-1.0..=1.0))
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// E[g(ε)] for standard normal ε, trapezoid rule on [-20, 20].
pub fn normal_quadrature<G: Fn(f64) -> f64>(g: G) -> f64 {
    const H: f64 = 0.05;
    const N: i64 = 800;
    let mut acc = 0.0;
    for i in 0..=N {
        let x = -20.0 + i as f64 * H;
        let w = if i == 0 || i == N { 0.5 } else { 1.0 };
        acc += w * g(x) * ambival::numerics::norm_pdf(x);
    }
    acc * H
}

/// `E^P[f_t(θ)]` of the chain-ladder family by quadrature, at both steps.
/// The second step is integrated at the given `C_{0,1}`.
pub fn family_normalization(
    fam: &ambival::gaussian::ChainLadderFamily,
    theta: &[f64],
    c01: f64,
) -> (f64, f64) {
    use ambival::priors::DensityFamily;
    let f1 = normal_quadrature(|a| {
        normal_quadrature(|b| fam.density_step(1, theta, &[a, b][..]).unwrap())
    });
    let f2 = normal_quadrature(|e| fam.density_step(2, theta, &[e, c01][..]).unwrap());
    (f1, f2)
}

/// Points of the level-`p` region of a default-model cloud, at random radii.
pub fn thetas_in_region(count: usize, seed: u64) -> Vec<Vec<f64>> {
    use ambival::gaussian::{cloud_region, estimator_cloud, GaussianModel};
    let cloud = estimator_cloud(&GaussianModel::default(), 1000, seed).unwrap();
    let region = cloud_region(&cloud, 0.9).unwrap();
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let s: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s: Vec<f64> = s.iter().map(|v| v / n).collect();
            region.point(&s, r.random_range(0.0..1.0) * region.radius())
        })
        .collect()
}

/// Standardized errors of `r1_closed_form` and `closed_form_g` against plain
/// Monte Carlo with `n` draws, at a random probe.
pub struct ProbeErrors {
    pub r1_z: f64,
    pub g_z: f64,
}

pub fn closed_form_probe(k: u64, n: usize) -> ProbeErrors {
    use ambival::gaussian::{closed_form_g, r1_closed_form, GaussianModel};
    use ambival::numerics::{norm_inv, norm_pdf};
    use ambival::riskmeasures::{gaussian_c, RiskKind, RiskMeasureSpec};
    use ambival::scenario::paths::normal_column;

    let model = GaussianModel::default();
    let mut r = rng(0x5eed ^ k);
    let c01 = r.random_range(0.3..1.1);
    let kind = if r.random_bool(0.5) {
        RiskKind::Var
    } else {
        RiskKind::Avar
    };
    let q = r.random_range(0.005..0.1);
    let beta1 = r.random_range(1.2..1.8);
    let sigma1 = r.random_range(0.1..0.35);
    let rm = RiskMeasureSpec::new(kind, q).unwrap();
    let c = gaussian_c(&rm);
    let v0 = model.v(0);

    // R_1 = ρ_1(−X_2) with X_2 | C_{0,1} under the base parameters
    let scale = v0.sqrt() * model.sigma1;
    let eps = normal_column(k, "probe_r1", n);
    let minus_x2: Vec<f64> = eps
        .iter()
        .map(|e| -(v0 * (model.beta1 - 1.0) * c01 + scale * e))
        .collect();
    let r1_mc = rm.apply(&minus_x2).unwrap();
    let z = norm_inv(1.0 - q);
    let se = match kind {
        RiskKind::Var => scale * (q * (1.0 - q) / n as f64).sqrt() / norm_pdf(z),
        RiskKind::Avar => {
            let es = norm_pdf(z) / q;
            let tail_var = 1.0 + z * es - es * es;
            scale * ((tail_var + (1.0 - q) * (es - z).powi(2)) / (n as f64 * q)).sqrt()
        }
    };
    let r1_z = (r1_mc - r1_closed_form(c01, &model, c)).abs() / se;

    // E^θ_1[(R_1 − X_2)^+] with X_2 | C_{0,1} under (β1, σ1)
    let r1 = r1_closed_form(c01, &model, c);
    let eps = normal_column(k, "probe_g", n);
    let y: Vec<f64> = eps
        .iter()
        .map(|e| (r1 - v0 * (beta1 - 1.0) * c01 - v0.sqrt() * sigma1 * e).max(0.0))
        .collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let g = closed_form_g((beta1, sigma1), c01, &model, c).unwrap();
    let g_z = (mean - g).abs() / (var / n as f64).sqrt().max(1e-300);
    ProbeErrors { r1_z, g_z }
}
