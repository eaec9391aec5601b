//! Named invariant suites: every check reports a measured residual against its bound.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::{
    build_lift, lift_holonomy, perturbed_census, realize_hypersurface, realize_reeb, semigroup_onset, threshold,
    verify_torus_action, BaseHamiltonian, ReebRealization, TorusCheckConfig,
};
use crate::cover::{latitude_holonomy, project_reeb_orbit, pullback_residual, Pullback};
use crate::dynamics::{
    contact_flow_closed, correspondence_check, deformed_flow_closed, integrate, periodic_census_ellipsoid,
    return_map_scan, IntegrationOptions, Manifold, OrbitCensus, ScanConfig, Verdict,
};
use crate::error::{Error, Result};
use crate::finsler::{finsler_report, FinslerCheckConfig};
use crate::forms::{reeb, st_structure_residuals, structure_residuals, ContactFormSpec};
use crate::quat::{Quaternion, UnitQuaternion};
use crate::sampling::{
    random_s3_tangent, random_st_point, random_st_tangent, random_unit_quaternion, rng_from_seed, RNG_NAME,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `measured < bound`.
    pub fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, passed: measured < bound }
    }

    /// A yes/no check; `measured` is 1 on success.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), measured: if ok { 1.0 } else { 0.0 }, bound: 1.0, passed: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub rng: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    StructureEquations,
    Pullback,
    ReebPeriodicity,
    Latitude,
    Magnetic,
    TwoOrbit,
    Finsler,
    BoothbyWang,
    Counting,
    Ellipsoid,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::StructureEquations,
        Suite::Pullback,
        Suite::ReebPeriodicity,
        Suite::Latitude,
        Suite::Magnetic,
        Suite::TwoOrbit,
        Suite::Finsler,
        Suite::BoothbyWang,
        Suite::Counting,
        Suite::Ellipsoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::StructureEquations => "structure-equations",
            Suite::Pullback => "pullback",
            Suite::ReebPeriodicity => "reeb-periodicity",
            Suite::Latitude => "latitude",
            Suite::Magnetic => "magnetic",
            Suite::TwoOrbit => "two-orbit",
            Suite::Finsler => "finsler",
            Suite::BoothbyWang => "boothby-wang",
            Suite::Counting => "counting",
            Suite::Ellipsoid => "ellipsoid",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite {s:?}")))
    }
}

pub const STRUCTURE_SAMPLES: usize = 10_000;

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::StructureEquations => structure_equations(seed)?,
        Suite::Pullback => pullbacks(seed)?,
        Suite::ReebPeriodicity => reeb_periodicity(seed)?,
        Suite::Latitude => latitudes()?,
        Suite::Magnetic => magnetic(seed)?,
        Suite::TwoOrbit => two_orbit()?,
        Suite::Finsler => finsler(seed)?,
        Suite::BoothbyWang => boothby_wang(seed)?,
        Suite::Counting => counting()?,
        Suite::Ellipsoid => ellipsoid()?,
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport { suite, seed, rng: RNG_NAME.into(), checks, passed })
}

fn structure_equations(seed: u64) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let names = ["d alpha_i = alpha_j ^ alpha_k", "d alpha_j = alpha_k ^ alpha_i", "d alpha_k = alpha_i ^ alpha_j"];
    let mut s3 = [0.0f64; 3];
    let mut st = [0.0f64; 3];
    for _ in 0..STRUCTURE_SAMPLES {
        let u = random_unit_quaternion(&mut rng);
        let (v, w) = (random_s3_tangent(&mut rng, u), random_s3_tangent(&mut rng, u));
        for (m, r) in s3.iter_mut().zip(structure_residuals(&v, &w)?) {
            *m = m.max(r);
        }
        let p = random_st_point(&mut rng);
        let (a, b) = (random_st_tangent(&mut rng, p), random_st_tangent(&mut rng, p));
        for (m, r) in st.iter_mut().zip(st_structure_residuals(&a, &b)?) {
            *m = m.max(r);
        }
    }
    let mut out: Vec<Check> = names.iter().zip(s3).map(|(n, r)| Check::below(format!("S3: {n}"), r, 1e-12)).collect();
    let st_names = ["d lambda1 = lambda2 ^ alpha", "d lambda2 = alpha ^ lambda1", "d alpha = lambda1 ^ lambda2"];
    out.extend(st_names.iter().zip(st).map(|(n, r)| Check::below(format!("ST*S2: {n}"), r, 1e-12)));
    Ok(out)
}

fn pullbacks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let mut worst = [0.0f64; 3];
    for _ in 0..STRUCTURE_SAMPLES {
        let u = random_unit_quaternion(&mut rng);
        let v = random_s3_tangent(&mut rng, u);
        for (m, which) in worst.iter_mut().zip(Pullback::ALL) {
            *m = m.max(pullback_residual(which, u, &v)?);
        }
    }
    Ok(Pullback::ALL.iter().zip(worst).map(|(w, r)| Check::below(format!("{w:?}"), r, 1e-12)).collect())
}

fn reeb_periodicity(seed: u64) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let cases: Vec<(f64, UnitQuaternion)> =
        (0..20).map(|_| (rand::Rng::random_range(&mut rng, 0.0..TAU), random_unit_quaternion(&mut rng))).collect();
    let rows: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|&(theta, u0)| -> Result<(f64, f64)> {
            let spec = ContactFormSpec::from_angle(theta, 0.0)?;
            let closure = (contact_flow_closed(&spec, u0, 2.0 * TAU)?.quaternion() - u0.quaternion()).norm();
            let opts = IntegrationOptions { flow: "reeb".into(), manifold: Manifold::S3, energy: None };
            let field = |p: &[f64]| {
                let u = UnitQuaternion::new_normalize(Quaternion::new(p[0], p[1], p[2], p[3]))?;
                Ok(reeb(&spec, u).vector().to_array().to_vec())
            };
            let traj = integrate(field, &u0.quaternion().to_array(), 2.0 * TAU, 1e-3, &opts)?;
            let mut sup: f64 = 0.0;
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let exact = contact_flow_closed(&spec, u0, *t)?.quaternion().to_array();
                sup = sup.max(s.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
            Ok((closure, sup))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Check::below("closed form returns at 4 pi", rows.iter().map(|r| r.0).fold(0.0, f64::max), 1e-10),
        Check::below("RK4 dt=1e-3 against closed form", rows.iter().map(|r| r.1).fold(0.0, f64::max), 1e-6),
    ])
}

fn latitudes() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for theta in [PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
        let p = project_reeb_orbit(theta, 2000)?;
        out.push(Check::below(format!("theta={theta:.6}: fitted latitude"), (p.fit.angle - theta).abs(), 1e-6));
        out.push(Check::holds(format!("theta={theta:.6}: winding 2"), p.fit.winding == 2));
        out.push(Check::below(format!("theta={theta:.6}: stereographic radius"), p.radius_error, 1e-6));
    }
    Ok(out)
}

fn magnetic(seed: u64) -> Result<Vec<Check>> {
    let u0 = random_unit_quaternion(&mut rng_from_seed(seed));
    [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]
        .into_iter()
        .map(|theta| {
            let c = correspondence_check(theta, u0, TAU)?;
            Ok(Check::below(format!("theta={theta:.6}: sup mismatch at lambda={:.9}", c.lambda), c.mismatch, 1e-5))
        })
        .collect()
}

/// Return-map census of the Reeb flow of the deformed form `alpha_{i,eps}`.
pub fn two_orbit_census(eps: f64, cfg: &ScanConfig) -> Result<OrbitCensus> {
    ContactFormSpec::new(crate::quat::PureImaginary::I, eps)?;
    return_map_scan(|u, t| deformed_flow_closed(eps, u, t).expect("eps in range"), cfg)
}

fn two_orbit() -> Result<Vec<Check>> {
    let cfg = ScanConfig::default();
    let eps = FRAC_1_SQRT_2;
    let census = two_orbit_census(eps, &cfg)?;
    let coordinate = census.orbits.iter().all(|o| {
        o.representative.is_some_and(|r| {
            let (z0, z1) = Quaternion::from_array(r).to_complex_pair();
            z0.norm() < 1e-9 || z1.norm() < 1e-9
        })
    });
    let mut periods: Vec<f64> = census.orbits.iter().map(|o| o.period).collect();
    periods.sort_by(f64::total_cmp);
    let expected = [2.0 * TAU / (1.0 + eps), 2.0 * TAU / (1.0 - eps)];
    let period_err = if periods.len() == 2 {
        periods.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let zero = two_orbit_census(0.0, &cfg)?;
    let third = two_orbit_census(1.0 / 3.0, &cfg)?;
    Ok(vec![
        Check::holds("eps=1/sqrt2: exactly two clusters", census.verdict == Verdict::Finite(2)),
        Check::holds("eps=1/sqrt2: clusters are the coordinate circles", coordinate),
        Check::below("eps=1/sqrt2: periods 4 pi/(1 +- eps)", period_err, 1e-9),
        Check::holds(
            "eps=0: every seed periodic",
            zero.verdict == Verdict::ResonantFamily && zero.periodic_seeds == cfg.seeds,
        ),
        Check::holds("eps=1/3: resonant family", third.verdict == Verdict::ResonantFamily),
    ])
}

fn finsler(seed: u64) -> Result<Vec<Check>> {
    let mut cfg = FinslerCheckConfig::new(0.05)?;
    cfg.seed = seed;
    let r = finsler_report(&cfg, STRUCTURE_SAMPLES)?;
    Ok(vec![
        Check::below("homogeneity degree of K_eps is 2", (r.homogeneity_degree - 2.0).abs(), 1e-9),
        Check::holds(format!("(K_eps)^2 fibrewise convex at eps=0.05 ({} fibres)", r.min_eigenvalues.len()), r.convex),
        Check::below("Randers identity", r.randers_identity_residual, 1e-13),
        Check::below("K_eps = H_eps o l_abar", r.k_eps_identity_residual, 1e-12),
    ])
}

fn boothby_wang(seed: u64) -> Result<Vec<Check>> {
    let lift = build_lift(BaseHamiltonian::new(2.0, 1.0), 0.0)?;
    let torus = verify_torus_action(&lift, &TorusCheckConfig { samples: 1000, seed, ..Default::default() })?;
    let mut out = vec![
        Check::below("L_X~ alpha_i", torus.lie_x_tilde, 1e-6),
        Check::below("[R_i, X_h]", torus.bracket, 1e-8),
        Check::below("alpha_i(X~) = H~", torus.alpha_x_tilde, 1e-12),
    ];
    if let Some(c) = torus.closure {
        out.push(Check::below(format!("S3 orbit closes at t={:.6}", c.s3_period), c.s3_distance, 1e-8));
        out.push(Check::below(format!("ST*S2 orbit closes at t={:.6}", c.st_period), c.st_distance, 1e-8));
    } else {
        out.push(Check::holds("closure times available", false));
    }

    let mut hol: f64 = 0.0;
    for colat in [0.3, PI / 3.0, PI / 2.0, 2.0] {
        hol = hol.max(latitude_holonomy([0.0, 0.0, 1.0], colat, 64)?.mismatch);
    }
    out.push(Check::below("latitude holonomy = -(cap area) mod 2 pi", hol, 1e-5));

    let mut rng = rng_from_seed(seed.wrapping_add(1));
    let mut moment: f64 = 0.0;
    for _ in 0..5 {
        moment = moment.max(lift_holonomy(&lift, random_unit_quaternion(&mut rng), 1e-3)?.mismatch);
    }
    out.push(Check::below("lift holonomy = -2 pi H(q) mod 2 pi", moment, 1e-4));

    let (census, over_fixed) = perturbed_census(&lift, FRAC_1_SQRT_2, &ScanConfig::default())?;
    out.push(Check::holds("X~ + R_i/sqrt2: two closed orbits", census.verdict == Verdict::Finite(2)));
    out.push(Check::holds("X~ + R_i/sqrt2: orbits lie over fixed points", over_fixed));
    Ok(out)
}

/// Exhaustive feasibility and fewest plugs over `b, c <= 60`, `plugs <= 200`.
pub fn brute_force_plan(n: u64, k: i64) -> Option<u64> {
    let n = n as i64;
    let mut best: Option<u64> = None;
    for b in 0..=60i64 {
        for c in 0..=60i64 {
            let count = n + 1 + b * (4 * n - 1) + c * 4 * n;
            let d = if n == 1 { k - count } else { count - k };
            if (0..=200).contains(&d) {
                best = Some(best.map_or(d as u64, |x| x.min(d as u64)));
            }
        }
    }
    best
}

fn counting() -> Result<Vec<Check>> {
    let reeb_ok = (3..=100u64)
        .all(|k| matches!(realize_reeb(2, k), Ok(ReebRealization::Feasible { a, .. }) if 3 + a == k));
    let cases: Vec<(u64, i64)> = (1..=3u64).flat_map(|n| (0..=200i64).map(move |k| (n, k))).collect();
    let agree = cases
        .par_iter()
        .map(|&(n, k)| {
            let plan = realize_hypersurface(n, k)?;
            let oracle = brute_force_plan(n, k);
            Ok(plan.verify() && plan.feasible == oracle.is_some() && (!plan.feasible || Some(plan.plugs) == oracle))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .all(|x| x);
    let dim3 = (0..=200i64).all(|k| realize_hypersurface(1, k).map(|p| p.feasible == (k >= 2)).unwrap_or(false));
    let mut onset = true;
    for n in 2..=10u64 {
        let t = threshold(n)?;
        onset &= t == n + 1 + (4 * n - 2) * (4 * n - 1) && t == semigroup_onset(n);
        onset &= realize_hypersurface(n, t as i64 - 1)?.plugs > 0;
        for k in t..t + 4 * n {
            onset &= realize_hypersurface(n, k as i64)?.plugs == 0;
        }
    }
    Ok(vec![
        Check::holds("realize_reeb(2, k) for 3 <= k <= 100", reeb_ok),
        Check::holds("realize_hypersurface matches brute force, n in 1..3, k in 0..200", agree),
        Check::holds("n = 1 feasible exactly for k >= 2", dim3),
        Check::holds("threshold is the no-gap onset for n in 2..10", onset),
    ])
}

fn ellipsoid() -> Result<Vec<Check>> {
    let roots = [1.0, 2f64.sqrt(), 3f64.sqrt(), 5f64.sqrt(), 7f64.sqrt(), 11f64.sqrt()];
    let mut out = Vec::new();
    for n in 1..=5 {
        let c = periodic_census_ellipsoid(&roots[..=n])?;
        out.push(Check::holds(
            format!("n={n}: {} coordinate orbits", n + 1),
            c.verdict == Verdict::Finite(n + 1) && c.orbits.len() == n + 1,
        ));
    }
    for w in [[1.0, 1.0], [2.0, 3.0]] {
        let c = periodic_census_ellipsoid(&w)?;
        out.push(Check::holds(format!("weights {w:?}: resonance detected"), c.verdict == Verdict::ResonantFamily));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nonsense".parse::<Suite>().is_err());
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_plan(2, 45), Some(0));
        assert_eq!(brute_force_plan(2, 0), Some(3));
        assert_eq!(brute_force_plan(1, 1), None);
        assert_eq!(brute_force_plan(1, 3), Some(1));
    }

    #[test]
    fn failed_check_fails_report() {
        assert!(!Check::below("x", 2.0, 1.0).passed);
        assert!(!Check::below("nan", f64::NAN, 1.0).passed);
        assert!(Check::holds("y", true).passed);
    }
}
