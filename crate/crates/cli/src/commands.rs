//! The `spectrum`, `simulate`, `manifold` and `reconstruct` subcommands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cylflow::fit::LinearFit;
use cylflow::frozen_solver::{membership_check, solve_frozen, FlowPath, FrozenProblem};
use cylflow::integrator::UniformGrid;
use cylflow::modulation::SymmetryParams;
use cylflow::rescaling::{reconstruct_flow, rescaling_from_path, tangent_flow_limit, TangentFlow};
use cylflow::spectral_operator::spectrum_table;
use cylflow::stable_manifold::{
    contraction_bound, decay_fits, sample_fixed_point, sample_seed, unfrozen_residual,
    CorrectionCoeffs, FixedPointControls, ManifoldPoint, SeedControls,
};

use crate::artifacts::OutputDir;
use crate::config::{ManifoldConfig, ReconstructConfig, SimulateConfig, SpectrumConfig};
use crate::Failure;

pub fn spectrum(cfg: &SpectrumConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let rows = spectrum_table(cfg.a, cfg.truncation())?;
    let mut csv = String::from("alpha_multi_index,fourier_m,eigenvalue,classification\n");
    for r in &rows {
        let alpha: Vec<String> = r.alpha.iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{:.15e},{}\n",
            alpha.join(";"),
            r.fourier_m,
            r.eigenvalue,
            r.classification
        ));
    }
    out.write("spectrum.csv", csv.as_bytes())?;
    Ok(())
}

fn load_path(p: &std::path::Path) -> Result<FlowPath, Failure> {
    let text = std::fs::read_to_string(p)
        .map_err(|e| Failure::config("path", format!("{}: {e}", p.display())))?;
    let path: FlowPath = serde_json::from_str(&text)
        .map_err(|e| Failure::config("path", format!("{}: {e}", p.display())))?;
    path.validate()
        .map_err(|e| Failure::config("path", e.to_string()))?;
    Ok(path)
}

#[derive(Serialize)]
struct SimulateReport {
    a0: f64,
    corrections: CorrectionCoeffs,
    modulation_defect: f64,
    tail: f64,
    orthogonality_max: f64,
    perturbation_norm_final: f64,
}

pub fn simulate(cfg: &SimulateConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let trunc = cfg.truncation();
    let base = match &cfg.path {
        Some(p) => {
            let path = load_path(p)?;
            if path.trunc() != trunc {
                return Err(Failure::config(
                    "path",
                    format!(
                        "path truncation {:?} differs from {:?}",
                        path.trunc(),
                        trunc
                    ),
                ));
            }
            if let Some(a0) = cfg.a0 {
                if (a0 - path.symmetry[0].a).abs() > 1e-14 {
                    return Err(Failure::config(
                        "a0",
                        format!(
                            "{a0} differs from the path's initial weight {}",
                            path.symmetry[0].a
                        ),
                    ));
                }
            }
            path
        }
        None => {
            let grid = UniformGrid::new(cfg.dt, cfg.tau_max)?;
            FlowPath::constant(
                &SymmetryParams::identity(cfg.naxis, cfg.a0()),
                grid,
                trunc,
                0.5,
            )?
        }
    };
    let a0 = base.symmetry[0].a;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seed = sample_seed(&mut rng, cfg.delta, a0, trunc, &SeedControls::default())?;
    let sol = solve_frozen(&FrozenProblem {
        base,
        initial: seed.initial.clone(),
        corrections: None,
        delta: cfg.delta,
    })?;
    let orth = sol.path.orthogonality()?;
    let norms = sol.path.perturbation_norms(cfg.s)?;
    out.write("flow.csv", sol.path.to_csv(cfg.s)?.as_bytes())?;
    out.write_json("path.json", &sol.path)?;
    out.write_json("seed.json", &seed.initial)?;
    if cfg.snapshot_every > 0 {
        for j in (0..sol.path.len()).step_by(cfg.snapshot_every) {
            out.write_json(
                &format!("fields/perturbation_{j:06}.json"),
                &sol.path.perturbation[j],
            )?;
        }
    }
    out.write_json(
        "report.json",
        &SimulateReport {
            a0,
            corrections: sol.corrections,
            modulation_defect: sol.modulation_defect,
            tail: sol.tail,
            orthogonality_max: orth.iter().cloned().fold(0.0, f64::max),
            perturbation_norm_final: *norms.last().expect("non-empty path"),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct Fits {
    perturbation: LinearFit,
    symmetry: LinearFit,
}

#[derive(Serialize)]
struct Residuals {
    orthogonality_max: f64,
    unfrozen_max: f64,
    modulation_defect: f64,
}

#[derive(Serialize)]
struct Membership {
    pass: bool,
    min_c0: f64,
    decay_margin: f64,
    modulation_margin: f64,
    pivot_margin: f64,
}

#[derive(Serialize)]
struct ManifoldReport {
    delta: f64,
    a0: f64,
    seed: u64,
    rejected_seeds: usize,
    iterations: usize,
    axial: Vec<f64>,
    quadratic: Vec<f64>,
    increments: Vec<f64>,
    ratios: Vec<f64>,
    contraction_bound: f64,
    contracts: bool,
    decay_fits: Fits,
    residuals: Residuals,
    membership: Membership,
}

pub fn fixed_point_controls(cfg: &ManifoldConfig) -> FixedPointControls {
    FixedPointControls {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        c0: cfg.c0,
        s: cfg.s,
        dt: cfg.dt,
        tau_max: cfg.tau_max,
    }
}

pub fn run_fixed_point(cfg: &ManifoldConfig) -> Result<ManifoldPoint, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(sample_fixed_point(
        &mut rng,
        cfg.delta,
        cfg.a0(),
        cfg.truncation(),
        &SeedControls {
            s: cfg.s,
            ..SeedControls::default()
        },
        &fixed_point_controls(cfg),
        cfg.max_draws,
    )?)
}

/// Decay window used by every fit.
pub const FIT_WINDOW: (f64, f64) = (2.0, 30.0);

pub fn manifold(cfg: &ManifoldConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let point = run_fixed_point(cfg)?;
    let fp = &point.fixed_point;
    let path = &fp.path;
    let (lo, hi) = (FIT_WINDOW.0.min(cfg.tau_max), FIT_WINDOW.1.min(cfg.tau_max));
    let fits = decay_fits(path, cfg.s, lo, hi)?;
    let check = solve_frozen(&FrozenProblem {
        base: path.clone(),
        initial: point.seed.initial.clone(),
        corrections: None,
        delta: cfg.delta,
    })?;
    let residuals = Residuals {
        orthogonality_max: path.orthogonality()?.into_iter().fold(0.0, f64::max),
        unfrozen_max: unfrozen_residual(path, cfg.s)?.max_interior(),
        modulation_defect: check.modulation_defect,
    };
    let m = membership_check(path, cfg.delta, cfg.c0, cfg.c, cfg.s)?;
    let report = ManifoldReport {
        delta: cfg.delta,
        a0: cfg.a0(),
        seed: cfg.seed,
        rejected_seeds: point.rejected,
        iterations: fp.iterations(),
        axial: fp.corrections.axial.clone(),
        quadratic: fp.corrections.quadratic.clone(),
        increments: fp.increments.clone(),
        ratios: fp.ratios.clone(),
        contraction_bound: contraction_bound(cfg.delta),
        contracts: fp.contracts(cfg.delta),
        decay_fits: Fits {
            perturbation: fits.perturbation,
            symmetry: fits.symmetry,
        },
        residuals,
        membership: Membership {
            pass: m.pass,
            min_c0: m.min_c0,
            decay_margin: m.decay.worst_margin,
            modulation_margin: m.modulation.worst_margin,
            pivot_margin: m.pivot.worst_margin,
        },
    };
    out.write_json("report.json", &report)?;
    out.write("path.csv", path.to_csv(cfg.s)?.as_bytes())?;
    out.write_json("path.json", path)?;
    out.write_json("seed.json", &point.seed.initial)?;
    out.write_json(
        "correction.json",
        &fp.corrections
            .field(cfg.a0(), cfg.truncation(), point.seed.initial.basis_weight)?,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ReconstructReport {
    t_final: f64,
    scale_residual: f64,
    tangent_flow: TangentFlow,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn reconstruct(cfg: &ReconstructConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let path = load_path(&cfg.path)?;
    let n = path.trunc().n_axis;
    let rs = rescaling_from_path(&path, cfg.t_final, cfg.steps)?;
    let ys = linspace(-cfg.y_max, cfg.y_max, cfg.y_points);
    let thetas: Vec<f64> = (0..cfg.theta_points)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / cfg.theta_points as f64)
        .collect();
    let mut points = Vec::new();
    let total = cfg.y_points.pow(n as u32);
    for idx in 0..total {
        let mut y = Vec::with_capacity(n);
        let mut r = idx;
        for _ in 0..n {
            y.push(ys[r % cfg.y_points]);
            r /= cfg.y_points;
        }
        for th in &thetas {
            points.push((y.clone(), *th));
        }
    }
    let samples = reconstruct_flow(&path, &rs, &cfg.times, &points)?;
    let mut csv = String::from("t,tau");
    for i in 0..n + 2 {
        csv.push_str(&format!(",x_{}", i + 1));
    }
    csv.push_str(",radius\n");
    for s in &samples {
        csv.push_str(&format!("{:.15e},{:.15e}", s.t, s.tau));
        for v in &s.x {
            csv.push_str(&format!(",{v:.15e}"));
        }
        csv.push_str(&format!(",{:.15e}\n", s.radius));
    }
    out.write("surface.csv", csv.as_bytes())?;
    let mut clock = String::from("t,tau,lambda,a\n");
    for j in 0..rs.len() {
        clock.push_str(&format!(
            "{:.15e},{:.15e},{:.15e},{:.15e}\n",
            rs.t[j], rs.tau[j], rs.lambda[j], rs.a[j]
        ));
    }
    out.write("clock.csv", clock.as_bytes())?;
    out.write_json(
        "report.json",
        &ReconstructReport {
            t_final: cfg.t_final,
            scale_residual: rs.scale_residual()?,
            tangent_flow: tangent_flow_limit(&path)?,
        },
    )?;
    Ok(())
}
