//! Norms, convergence studies, stability classification, and
//! coercivity/continuity probes.
//!
//! The space-time norm `||u||_{L2(0,T;L2)}` integrates the squared
//! instantaneous L2 norms sampled at the discrete time levels with a
//! composite closed 8-point Newton-Cotes rule (blocks of 7 uniform
//! subintervals); a leftover tail of m < 7 subintervals uses the closed
//! rule on m+1 points, and a truncated final step (shorter than the nominal
//! dt) is integrated by the trapezoid rule.

use std::fmt;
use std::io::{self, Write as IoWrite};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::IPVariant;
use crate::evolve::{EvolveError, RunConfig, Trajectory};
use crate::mms::ExactSolution;
use crate::quadrature::gauss_legendre_unit;
use crate::space::{DGSpace, SpaceError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample times must increase uniformly (apart from a truncated final step): {0}")]
    BadSampleSpacing(String),
    #[error("convergence study needs at least 2 mesh levels, got {0}")]
    TooFewLevels(usize),
    #[error("mesh levels must strictly refine (n increasing), got {0:?}")]
    NonIncreasingLevels(Vec<usize>),
}

/// Instantaneous L2(Omega) norm of a coefficient vector, computed
/// element-locally by quadrature (no global matrix required).
pub fn l2_norm(space: &DGSpace, coeffs: &[f64]) -> Result<f64, AnalysisError> {
    space.check_len(coeffs)?;
    let k = space.dofs_per_element();
    let rule = space.volume_quadrature();
    let (values, _) = space.volume_tables();
    let mut total = 0.0;
    for e in 0..space.mesh().num_elements() {
        let map = space.element_map(e)?;
        let local = &coeffs[space.dof_range(e)];
        for (q, &w) in rule.weights.iter().enumerate() {
            let u: f64 = (0..k).map(|i| local[i] * values[q * k + i]).sum();
            total += w * map.det * u * u;
        }
    }
    Ok(total.max(0.0).sqrt())
}

/// DG norm: broken-gradient energy plus sigma/h_e-weighted jump energy over
/// interior and boundary edges.
pub fn dg_norm(space: &DGSpace, coeffs: &[f64], sigma: f64) -> Result<f64, AnalysisError> {
    Ok(dg_norm_squared(space, coeffs, sigma)?.max(0.0).sqrt())
}

/// Squared DG norm; separate entry point for energy-identity checks.
pub fn dg_norm_squared(space: &DGSpace, coeffs: &[f64], sigma: f64) -> Result<f64, AnalysisError> {
    space.check_len(coeffs)?;
    let k = space.dofs_per_element();
    let mesh = space.mesh();
    let mut total = 0.0;

    // Broken gradients through the precomputed reference tables.
    let rule = space.volume_quadrature();
    let (_, ref_grads) = space.volume_tables();
    for e in 0..mesh.num_elements() {
        let map = space.element_map(e)?;
        let local = &coeffs[space.dof_range(e)];
        for (q, &w) in rule.weights.iter().enumerate() {
            let mut g = [0.0; 2];
            for i in 0..k {
                let rg = ref_grads[q * k + i];
                g[0] += local[i] * rg[0];
                g[1] += local[i] * rg[1];
            }
            let pg = map.grad_to_physical(g);
            total += w * map.det * (pg[0] * pg[0] + pg[1] * pg[1]);
        }
    }

    // Jump terms. |[u]|^2 = (u_left - u_right)^2 on interior edges and
    // u^2 on boundary edges (the jump is a vector along the unit normal).
    let erule = space.edge_quadrature();
    for edge in mesh.edges() {
        let a = mesh.vertices()[edge.vertices[0]];
        let b = mesh.vertices()[edge.vertices[1]];
        let mut jump_sq = 0.0;
        for (q, &s) in erule.points.iter().enumerate() {
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let left = space.eval_field(coeffs, edge.left, p)?;
            let jump = match edge.right {
                Some(r) => left - space.eval_field(coeffs, r, p)?,
                None => left,
            };
            jump_sq += erule.weights[q] * edge.length * jump * jump;
        }
        total += sigma / edge.length * jump_sq;
    }
    Ok(total)
}

/// Integral of uniformly sampled data by composite closed 8-point
/// Newton-Cotes (a truncated final interval is allowed and handled by the
/// trapezoid rule).
pub fn integrate_samples(times: &[f64], values: &[f64]) -> Result<f64, AnalysisError> {
    if times.len() < 2 {
        return Err(AnalysisError::TooFewSamples { needed: 2, got: times.len() });
    }
    if times.len() != values.len() {
        return Err(AnalysisError::BadSampleSpacing(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(AnalysisError::BadSampleSpacing(format!(
            "non-increasing times at index 1 (dt = {dt})"
        )));
    }
    // All interior intervals must equal dt; the final one may be shorter.
    let mut uniform_end = times.len() - 1; // index of last sample in the uniform part
    let last = times.len() - 1;
    for i in 1..last {
        let step = times[i + 1] - times[i];
        if (step - dt).abs() > 1e-9 * dt && !(i + 1 == last && step < dt) {
            return Err(AnalysisError::BadSampleSpacing(format!(
                "interval {i} has width {step}, expected {dt}"
            )));
        }
    }
    let final_step = times[last] - times[last - 1];
    let mut tail = 0.0;
    if last >= 2 && (final_step - dt).abs() > 1e-9 * dt {
        if !(final_step > 0.0 && final_step < dt) {
            return Err(AnalysisError::BadSampleSpacing(format!(
                "final interval has width {final_step}, expected at most {dt}"
            )));
        }
        uniform_end = last - 1;
        tail = 0.5 * final_step * (values[last - 1] + values[last]);
    }
    Ok(newton_cotes_uniform(&values[..=uniform_end], dt) + tail)
}

/// Closed Newton-Cotes weights on m subintervals (m+1 points), scaled by dt.
fn newton_cotes_weights(m: usize, dt: f64) -> Vec<f64> {
    let (scale, w): (f64, &[f64]) = match m {
        1 => (1.0 / 2.0, &[1.0, 1.0]),
        2 => (1.0 / 3.0, &[1.0, 4.0, 1.0]),
        3 => (3.0 / 8.0, &[1.0, 3.0, 3.0, 1.0]),
        4 => (2.0 / 45.0, &[7.0, 32.0, 12.0, 32.0, 7.0]),
        5 => (5.0 / 288.0, &[19.0, 75.0, 50.0, 50.0, 75.0, 19.0]),
        6 => (1.0 / 140.0, &[41.0, 216.0, 27.0, 272.0, 27.0, 216.0, 41.0]),
        7 => (
            7.0 / 17280.0,
            &[751.0, 3577.0, 1323.0, 2989.0, 2989.0, 1323.0, 3577.0, 751.0],
        ),
        _ => unreachable!("block size is at most 7 subintervals"),
    };
    w.iter().map(|v| v * scale * dt).collect()
}

fn newton_cotes_uniform(values: &[f64], dt: f64) -> f64 {
    let n_intervals = values.len() - 1;
    if n_intervals == 0 {
        return 0.0;
    }
    let blocks = n_intervals / 7;
    let tail = n_intervals % 7;
    let mut total = 0.0;
    let w7 = newton_cotes_weights(7, dt);
    for b in 0..blocks {
        let base = b * 7;
        for (j, &w) in w7.iter().enumerate() {
            total += w * values[base + j];
        }
    }
    if tail > 0 {
        let base = blocks * 7;
        let wt = newton_cotes_weights(tail, dt);
        for (j, &w) in wt.iter().enumerate() {
            total += w * values[base + j];
        }
    }
    total
}

/// Space-time norm sqrt(int ||u(t)||^2 dt) from per-sample instantaneous
/// norms at the given times.
pub fn spacetime_norm(times: &[f64], norms: &[f64]) -> Result<f64, AnalysisError> {
    let squared: Vec<f64> = norms.iter().map(|v| v * v).collect();
    Ok(integrate_samples(times, &squared)?.max(0.0).sqrt())
}

/// Space-time norms of both fields of a trajectory.
pub fn trajectory_spacetime_norms(trajectory: &Trajectory) -> Result<(f64, f64), AnalysisError> {
    let times: Vec<f64> = trajectory.records.iter().map(|r| r.t).collect();
    let n1: Vec<f64> = trajectory.records.iter().map(|r| r.norm_u1).collect();
    let n2: Vec<f64> = trajectory.records.iter().map(|r| r.norm_u2).collect();
    Ok((spacetime_norm(&times, &n1)?, spacetime_norm(&times, &n2)?))
}

/// Exact space-time norms of the manufactured solution over [0, t_final]:
/// the real part integrates in closed form, the imaginary part by
/// high-resolution Gauss-Legendre quadrature of its closed-form squared
/// norm.
pub fn exact_spacetime_norms(exact: &ExactSolution, t_final: f64) -> (f64, f64) {
    // int_0^T (3/4) c11^2 e^{-2 c_l t} dt
    let real_sq = 0.75 * exact.c11 * exact.c11 * (1.0 - (-2.0 * exact.c_l * t_final).exp())
        / (2.0 * exact.c_l);
    // int_0^T (1/4) c12^2 e^{2 c2 sin(c_l t)} dt, 64-point rule per unit time
    let (points, weights) = gauss_legendre_unit(64);
    let mut imag_sq = 0.0f64;
    let segments = t_final.ceil().max(1.0) as usize;
    let width = t_final / segments as f64;
    for s in 0..segments {
        let t0 = s as f64 * width;
        for (&x, &w) in points.iter().zip(&weights) {
            imag_sq += w * width * exact.imag_l2_squared(t0 + x * width);
        }
    }
    (real_sq.max(0.0).sqrt(), imag_sq.max(0.0).sqrt())
}

/// Stability classes assigned by [`classify_stability`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Transitional,
    Unstable,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Stable => "stable",
            Classification::Transitional => "transitional",
            Classification::Unstable => "unstable",
        })
    }
}

/// Run solver status recorded per level and per sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Blowup,
    PicardWarn,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Blowup => "blowup",
            RunStatus::PicardWarn => "picard_warn",
        })
    }
}

/// One mesh level of a convergence/stability study.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    /// Space-time norms of the two fields.
    pub norm_u1: f64,
    pub norm_u2: f64,
    /// Combined final-time L2 error against the exact solution.
    pub err_l2_final: f64,
    /// log2(previous error / this error); None on the coarsest level.
    pub rate: Option<f64>,
    /// DG norm of the final u1 field.
    pub dg_norm_final: f64,
    pub status: RunStatus,
}

/// Multi-level study report (one row per mesh).
#[derive(Debug, Clone)]
pub struct NormReport {
    pub variant: IPVariant,
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub levels: Vec<LevelRecord>,
}

impl NormReport {
    /// `method,a,b,sigma,n,h,dt,norm_u1,norm_u2,err_l2_final,rate,classification`
    pub fn write_csv<W: IoWrite>(&self, out: &mut W) -> io::Result<()> {
        let class = classify_stability(self);
        writeln!(
            out,
            "method,a,b,sigma,n,h,dt,norm_u1,norm_u2,err_l2_final,rate,classification"
        )?;
        for level in &self.levels {
            let rate = level.rate.map(|r| format!("{r:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                self.variant.name(),
                self.a,
                self.b,
                self.sigma,
                level.n,
                level.h,
                level.dt,
                level.norm_u1,
                level.norm_u2,
                level.err_l2_final,
                rate,
                class
            )?;
        }
        Ok(())
    }
}

/// Final-time L2 error of a run against the exact solution, combined over
/// both fields: sqrt(e1^2 + e2^2).
pub fn final_l2_error(
    space: &DGSpace,
    exact: &ExactSolution,
    state: &crate::evolve::FieldPair,
) -> Result<f64, AnalysisError> {
    space.check_len(&state.u1)?;
    space.check_len(&state.u2)?;
    let k = space.dofs_per_element();
    let rule = space.volume_quadrature();
    let (values, _) = space.volume_tables();
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for e in 0..space.mesh().num_elements() {
        let map = space.element_map(e)?;
        let l1 = &state.u1[space.dof_range(e)];
        let l2 = &state.u2[space.dof_range(e)];
        for (q, &w) in rule.weights.iter().enumerate() {
            let p = map.to_physical(rule.points[q]);
            let mut uh1 = 0.0;
            let mut uh2 = 0.0;
            for i in 0..k {
                uh1 += l1[i] * values[q * k + i];
                uh2 += l2[i] * values[q * k + i];
            }
            let d1 = uh1 - exact.real(p[0], p[1], state.t);
            let d2 = uh2 - exact.imag(p[0], p[1], state.t);
            e1 += w * map.det * d1 * d1;
            e2 += w * map.det * d2 * d2;
        }
    }
    Ok((e1 + e2).max(0.0).sqrt())
}

/// Runs `base` at each mesh level in `ns` (dt = dt_factor * h^2 per level)
/// and reports space-time norms, final-time errors, and observed rates.
pub fn convergence_study(base: &RunConfig, ns: &[usize]) -> Result<NormReport, AnalysisError> {
    if ns.len() < 2 {
        return Err(AnalysisError::TooFewLevels(ns.len()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::NonIncreasingLevels(ns.to_vec()));
    }
    let mut levels = Vec::with_capacity(ns.len());
    let mut prev_err: Option<f64> = None;
    for &n in ns {
        let mut config = base.clone();
        config.n = n;
        let (trajectory, level) = run_level(&config)?;
        let rate = match (prev_err, level.err_l2_final) {
            (Some(p), e) if p > 0.0 && e > 0.0 => Some((p / e).log2()),
            _ => None,
        };
        prev_err = Some(level.err_l2_final);
        levels.push(LevelRecord { rate, ..level });
        drop(trajectory);
    }
    Ok(NormReport { variant: base.variant, a: base.a, b: base.b, sigma: base.sigma, levels })
}

/// Runs one configuration and condenses it into a level record.
pub fn run_level(config: &RunConfig) -> Result<(Trajectory, LevelRecord), AnalysisError> {
    let mut ops = crate::evolve::Operators::new(config)?;
    let exact = ops.exact().clone();
    let initial = crate::mms::initial_fields(ops.space(), &exact);
    let trajectory = crate::evolve::run_from(config, &mut ops, initial)?;
    let (norm_u1, norm_u2) = trajectory_spacetime_norms(&trajectory)?;
    let status = if trajectory.blown_up {
        RunStatus::Blowup
    } else if trajectory.picard_warnings() > 0 {
        RunStatus::PicardWarn
    } else {
        RunStatus::Ok
    };
    let (err_l2_final, dg_norm_final) = if trajectory.final_state.is_finite() {
        (
            final_l2_error(ops.space(), &exact, &trajectory.final_state)?,
            dg_norm(ops.space(), &trajectory.final_state.u1, config.sigma)?,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let record = LevelRecord {
        n: config.n,
        h: ops.space().mesh().h(),
        dt: config.dt(),
        norm_u1,
        norm_u2,
        err_l2_final,
        rate: None,
        dg_norm_final,
        status,
    };
    Ok((trajectory, record))
}

/// Rule-based stability classes: `unstable` if any space-time norm exceeds
/// 1e2 (absolute threshold, checked first) or the finest/coarsest norm
/// ratio exceeds 10; `transitional` for ratios in (3, 10]; `stable`
/// otherwise. Blow-ups are unstable by definition.
pub fn classify_stability(report: &NormReport) -> Classification {
    let worst = report
        .levels
        .iter()
        .map(|l| l.norm_u1.max(l.norm_u2))
        .fold(0.0, f64::max);
    if worst > 1e2 || !worst.is_finite() {
        return Classification::Unstable;
    }
    if report.levels.iter().any(|l| l.status == RunStatus::Blowup) {
        return Classification::Unstable;
    }
    let first = &report.levels[0];
    let last = &report.levels[report.levels.len() - 1];
    let ratio = (last.norm_u1 / first.norm_u1.max(f64::MIN_POSITIVE))
        .max(last.norm_u2 / first.norm_u2.max(f64::MIN_POSITIVE));
    if ratio > 10.0 {
        Classification::Unstable
    } else if ratio > 3.0 {
        Classification::Transitional
    } else {
        Classification::Stable
    }
}

/// Measured coercivity and continuity of the bilinear form.
#[derive(Debug, Clone, Copy)]
pub struct ProbeResult {
    /// min over trials of a(u,u) / ||u||_DG^2.
    pub min_rayleigh: f64,
    /// max over trials of |a(u,v)| / (||u||_DG ||v||_DG).
    pub max_continuity: f64,
    /// max |A - A^T| entry relative to max |A| entry.
    pub symmetry_defect: f64,
}

/// Probes coercivity and continuity with seeded random coefficient vectors
/// (deterministic across runs).
pub fn coercivity_probe(
    space: &DGSpace,
    variant: IPVariant,
    sigma: f64,
    trials: usize,
) -> Result<ProbeResult, AnalysisError> {
    let stiffness = crate::assembly::assemble_stiffness(space, variant, sigma)
        .map_err(EvolveError::from)?;
    let dofs = space.total_dofs();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let dist = Uniform::new_inclusive(-1.0f64, 1.0).expect("valid range");
    let sample = |rng: &mut ChaCha8Rng| -> Result<(Vec<f64>, f64), AnalysisError> {
        loop {
            let u: Vec<f64> = (0..dofs).map(|_| dist.sample(rng)).collect();
            let dg = dg_norm(space, &u, sigma)?;
            if dg > 1e-8 {
                return Ok((u, dg));
            }
        }
    };
    let mut min_rayleigh = f64::INFINITY;
    let mut max_continuity = 0.0f64;
    for _ in 0..trials.max(1) {
        let (u, dg_u) = sample(&mut rng)?;
        let rayleigh = stiffness.bilinear(&u, &u) / (dg_u * dg_u);
        min_rayleigh = min_rayleigh.min(rayleigh);
        let (v, dg_v) = sample(&mut rng)?;
        let continuity = stiffness.bilinear(&v, &u).abs() / (dg_u * dg_v);
        max_continuity = max_continuity.max(continuity);
    }
    let defect = stiffness.symmetry_defect() / stiffness.max_abs().max(f64::MIN_POSITIVE);
    Ok(ProbeResult { min_rayleigh, max_continuity, symmetry_defect: defect })
}
