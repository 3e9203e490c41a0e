//! Invariant suites run by `verify`. Each writes `report.json` and fails the
//! process with exit code 1 when any of its checks fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cylflow::fit::loglog_fit;
use cylflow::frozen_solver::{
    membership_check, mode_residual, solve_frozen, FlowPath, FrozenProblem,
};
use cylflow::integrator::UniformGrid;
use cylflow::modulation::SymmetryParams;
use cylflow::nonlinearity::{
    admissible_shape, calibrate, expansion_defect, gaussian_area, gradient_pairing,
    nonlinear_remainder, random_shape, remainder_lipschitz, stored_constants, GraphFunction,
    CALIBRATION_SEED, CONSTANT_HEADROOM,
};
use cylflow::spectral_operator::{build_modes, ModeFamily};
use cylflow::stable_manifold::{decay_fits, default_a0, sample_seed, SeedControls};
use cylflow::weighted_space::{interpolation_check, sobolev_norm, SpectralField};

use crate::artifacts::OutputDir;
use crate::commands::{run_fixed_point, FIT_WINDOW};
use crate::config::{ManifoldConfig, Suite, VerifyConfig};
use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"le"` when the value must not exceed the bound, `"ge"` otherwise.
    pub relation: &'static str,
    pub pass: bool,
}

fn at_most(name: &str, value: f64, bound: f64) -> Check {
    Check {
        name: name.into(),
        value,
        bound,
        relation: "le",
        pass: value <= bound,
    }
}

fn at_least(name: &str, value: f64, bound: f64) -> Check {
    Check {
        name: name.into(),
        value,
        bound,
        relation: "ge",
        pass: value >= bound,
    }
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    suite: Suite,
    pass: bool,
    checks: Vec<Check>,
    #[serde(flatten)]
    details: T,
}

pub fn run(cfg: &VerifyConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let checks = match cfg.suite {
        Suite::Nonlinearity => nonlinearity(cfg, out)?,
        Suite::Interpolation => interpolation(cfg, out)?,
        Suite::Orthogonality => orthogonality(cfg, out)?,
        Suite::Decay => decay(cfg, out)?,
        Suite::Calibrate => calibration(cfg, out)?,
    };
    for c in &checks {
        let op = if c.relation == "le" { "<=" } else { ">=" };
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {:.6e} ({op} {:.3e})", c.name, c.value, c.bound);
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.clone())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

fn write<T: Serialize>(
    out: &mut OutputDir,
    suite: Suite,
    checks: &[Check],
    details: T,
) -> Result<(), Failure> {
    let pass = checks.iter().all(|c| c.pass);
    out.write_json(
        "report.json",
        &Report {
            suite,
            pass,
            checks: checks.to_vec(),
            details,
        },
    )?;
    Ok(())
}

/// `ξ` of norm `amplitude`, or zero.
fn probe<R: Rng>(rng: &mut R, cfg: &VerifyConfig, norm: f64) -> Result<SpectralField, Failure> {
    let tr = cfg.truncation();
    if norm == 0.0 {
        return Ok(SpectralField::zeros(tr, 0.5));
    }
    Ok(admissible_shape(rng, tr, 0.5, cfg.s, norm)?)
}

#[derive(Serialize)]
struct NonlinearityDetails {
    identity_residual: f64,
    gradient_consistency_order: f64,
    quadratic_slope: f64,
    lipschitz_ratios: Vec<f64>,
    remainder_norm: f64,
}

/// Central-difference steps of the gradient check.
const GRADIENT_STEPS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

fn nonlinearity(cfg: &VerifyConfig, out: &mut OutputDir) -> Result<Vec<Check>, Failure> {
    let tr = cfg.truncation();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = default_a0(cfg.delta);
    let mut identity = 0.0f64;
    let mut order = f64::INFINITY;
    let mut remainder = 0.0f64;
    for _ in 0..cfg.samples {
        let xi = probe(&mut rng, cfg, cfg.amplitude)?;
        identity = identity.max(sobolev_norm(&expansion_defect(a, &xi)?, a, cfg.s - 2)?);
        remainder = remainder.max(sobolev_norm(&nonlinear_remainder(a, &xi)?, a, cfg.s - 2)?);
        let h = random_shape(&mut rng, tr, 0.5, cfg.s, 1.0)?;
        let g = GraphFunction::from_perturbation(&xi, a);
        let pair = gradient_pairing(&g, &h)?;
        let mut errs = Vec::new();
        for e in GRADIENT_STEPS {
            let p = gaussian_area(&GraphFunction {
                v: g.v.axpy(e, &h)?,
                a,
            })?;
            let m = gaussian_area(&GraphFunction {
                v: g.v.axpy(-e, &h)?,
                a,
            })?;
            errs.push(((p - m) / (2.0 * e) - pair).abs());
        }
        order = order.min(loglog_fit(&GRADIENT_STEPS, &errs)?.slope);
    }

    let eps = [cfg.delta / 8.0, cfg.delta / 4.0, cfg.delta / 2.0, cfg.delta];
    let set = build_modes(a, tr, 0.5)?;
    let shape = admissible_shape(&mut rng, tr, 0.5, cfg.s, 1.0)?;
    let mut slope = 2.0f64;
    for fam in [ModeFamily::Axial, ModeFamily::Quadratic] {
        let mut vals = Vec::new();
        for e in eps {
            vals.push(sobolev_norm(
                &set.project(&nonlinear_remainder(a, &shape.scaled(e))?, fam)?,
                a,
                0,
            )?);
        }
        let s = loglog_fit(&eps, &vals)?.slope;
        if (s - 2.0).abs() > (slope - 2.0).abs() {
            slope = s;
        }
    }

    let constants = stored_constants(cfg.naxis)?;
    let delta1 = if cfg.amplitude > 0.0 {
        cfg.amplitude
    } else {
        cfg.delta
    };
    let mut lipschitz = Vec::new();
    for _ in 0..cfg.samples {
        let xi0 = probe(&mut rng, cfg, 0.5 * delta1)?;
        let dxi = admissible_shape(&mut rng, tr, 0.5, cfg.s, 0.1 * delta1)?;
        let a1 = a + rng.gen_range(-1e-3..1e-3);
        let (lhs, rhs) = remainder_lipschitz(
            a,
            &xi0,
            a1,
            &xi0.add(&dxi)?,
            delta1,
            cfg.s,
            constants.lipschitz,
        )?;
        lipschitz.push(lhs / rhs);
    }
    let worst_lip = lipschitz.iter().cloned().fold(0.0, f64::max);

    let checks = vec![
        at_most("identity_residual", identity, 1e-8),
        at_least("gradient_consistency_order", order, 1.9),
        at_most("quadratic_slope_deviation", (slope - 2.0).abs(), 0.05),
        at_most("lipschitz_ratio", worst_lip, CONSTANT_HEADROOM),
    ];
    write(
        out,
        Suite::Nonlinearity,
        &checks,
        NonlinearityDetails {
            identity_residual: identity,
            gradient_consistency_order: order,
            quadratic_slope: slope,
            lipschitz_ratios: lipschitz,
            remainder_norm: remainder,
        },
    )?;
    Ok(checks)
}

#[derive(Serialize)]
struct InterpolationDetails {
    ratios: Vec<f64>,
    embedding_ratios: Vec<f64>,
}

fn interpolation(cfg: &VerifyConfig, out: &mut OutputDir) -> Result<Vec<Check>, Failure> {
    let tr = cfg.truncation();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ratios = Vec::new();
    let mut embedding = Vec::new();
    for _ in 0..cfg.samples {
        let a = 0.5 + 2.0 * cfg.delta * rng.gen::<f64>();
        let norm = rng.gen_range(0.01..0.5);
        let phi = random_shape(&mut rng, tr, 0.5, cfg.s, norm)?;
        let (lhs, rhs) = interpolation_check(&phi, a, 1.0, cfg.delta, cfg.s)?;
        ratios.push(lhs / rhs);
        let b = 0.5 * a;
        embedding.push(sobolev_norm(&phi, a, cfg.s)? / sobolev_norm(&phi, b, cfg.s)?);
    }
    let checks = vec![
        at_most(
            "interpolation_ratio",
            ratios.iter().cloned().fold(0.0, f64::max),
            1.0,
        ),
        at_most(
            "embedding_ratio",
            embedding.iter().cloned().fold(0.0, f64::max),
            1.0,
        ),
    ];
    write(
        out,
        Suite::Interpolation,
        &checks,
        InterpolationDetails {
            ratios,
            embedding_ratios: embedding,
        },
    )?;
    Ok(checks)
}

#[derive(Serialize)]
struct OrthogonalityDetails {
    seed_mode_residual: f64,
    path_residual_max: f64,
    modulation_defect: f64,
}

fn orthogonality(cfg: &VerifyConfig, out: &mut OutputDir) -> Result<Vec<Check>, Failure> {
    let tr = cfg.truncation();
    let a0 = default_a0(cfg.delta);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seed = sample_seed(
        &mut rng,
        cfg.delta,
        a0,
        tr,
        &SeedControls {
            s: cfg.s,
            ..SeedControls::default()
        },
    )?;
    let grid = UniformGrid::new(0.01, 40.0)?;
    let base = FlowPath::constant(&SymmetryParams::identity(cfg.naxis, a0), grid, tr, 0.5)?;
    let sol = solve_frozen(&FrozenProblem {
        base,
        initial: seed.initial.clone(),
        corrections: None,
        delta: cfg.delta,
    })?;
    let seed_res = mode_residual(&seed.initial, a0)?;
    let path_res = sol.path.orthogonality()?.into_iter().fold(0.0, f64::max);
    let checks = vec![
        at_most("seed_mode_residual", seed_res, 1e-10),
        at_most("path_orthogonality", path_res, 1e-6),
    ];
    write(
        out,
        Suite::Orthogonality,
        &checks,
        OrthogonalityDetails {
            seed_mode_residual: seed_res,
            path_residual_max: path_res,
            modulation_defect: sol.modulation_defect,
        },
    )?;
    Ok(checks)
}

#[derive(Serialize)]
struct DecayDetails {
    perturbation_exponent: f64,
    symmetry_exponent: f64,
    membership: bool,
    min_c0: f64,
}

fn decay(cfg: &VerifyConfig, out: &mut OutputDir) -> Result<Vec<Check>, Failure> {
    let mcfg = ManifoldConfig {
        delta: cfg.delta,
        naxis: cfg.naxis,
        ny: cfg.ny,
        m_omega: cfg.m_omega,
        seed: cfg.seed,
        s: cfg.s,
        ..ManifoldConfig::default()
    };
    let path = match &cfg.path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::config("path", format!("{}: {e}", p.display())))?;
            serde_json::from_str::<FlowPath>(&text)
                .map_err(|e| Failure::config("path", format!("{}: {e}", p.display())))?
        }
        None => run_fixed_point(&mcfg)?.fixed_point.path,
    };
    let fits = decay_fits(&path, cfg.s, FIT_WINDOW.0, FIT_WINDOW.1)?;
    let m = membership_check(&path, cfg.delta, mcfg.c0, mcfg.c, cfg.s)?;
    let checks = vec![
        at_least("perturbation_decay_exponent", fits.perturbation.slope, 1.9),
        at_least("symmetry_decay_exponent", fits.symmetry.slope, 0.9),
    ];
    write(
        out,
        Suite::Decay,
        &checks,
        DecayDetails {
            perturbation_exponent: fits.perturbation.slope,
            symmetry_exponent: fits.symmetry.slope,
            membership: m.pass,
            min_c0: m.min_c0,
        },
    )?;
    Ok(checks)
}

fn calibration(cfg: &VerifyConfig, out: &mut OutputDir) -> Result<Vec<Check>, Failure> {
    let measured = calibrate(
        CALIBRATION_SEED,
        cfg.samples,
        cfg.truncation(),
        cfg.delta,
        cfg.s,
    )?;
    let stored = stored_constants(cfg.naxis)?;
    let checks = vec![
        at_most(
            "projected_quadratic",
            measured.projected_quadratic,
            CONSTANT_HEADROOM * stored.projected_quadratic,
        ),
        at_most(
            "lipschitz",
            measured.lipschitz,
            CONSTANT_HEADROOM * stored.lipschitz,
        ),
        at_most(
            "pointwise",
            measured.pointwise,
            CONSTANT_HEADROOM * stored.pointwise,
        ),
    ];
    #[derive(Serialize)]
    struct Details {
        measured: cylflow::nonlinearity::NonlinearConstants,
        stored: cylflow::nonlinearity::NonlinearConstants,
    }
    write(out, Suite::Calibrate, &checks, Details { measured, stored })?;
    Ok(checks)
}
