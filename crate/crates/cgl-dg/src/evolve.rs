//! Backward-Euler time stepping with Picard iteration on the frozen cubic
//! modulus.
//!
//! Each implicit step solves the coupled system
//!
//! ```text
//! [ M/dt + A - M + N,      -a A - b N     ] [u1]   [M u1_prev/dt + L1(t)]
//! [    a A + b N,      M/dt + A - M + N   ] [u2] = [M u2_prev/dt + L2(t)]
//! ```
//!
//! where A is the interior-penalty stiffness matrix, M the mass matrix and
//! N the reaction matrix with the modulus |u|^2 frozen at the previous
//! Picard iterate. The system has the rotational block structure of a
//! complex matrix `P + i Q` with `P = M/dt + A - M + N` and `Q = a A + b N`,
//! and the default direct solver factorizes that complex form at half the
//! real dimension. Matrix patterns never change between iterates (the
//! reaction pattern is a subset of the stiffness pattern and explicit zeros
//! are retained), so the symbolic factorization is computed once per run.

use std::io::{self, Write as IoWrite};

use thiserror::Error;

use crate::assembly::{
    assemble_frozen_reaction, assemble_load, assemble_mass, assemble_stiffness,
    refresh_frozen_reaction, AssemblyError, IPVariant,
};
use crate::linalg::{solve, BlockSystem, ComplexBlockSolver, LinalgError, SolveMethod};
use crate::mesh::{Mesh, MeshError};
use crate::mms::{Component, ExactSolution};
use crate::space::{DGSpace, SpaceError};
use crate::sparse::SparseMatrix;

#[derive(Debug, Error)]
#[error("invalid value for `{key}`: {reason}")]
pub struct InvalidConfig {
    pub key: &'static str,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error(transparent)]
    Config(#[from] InvalidConfig),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Discrete state: coefficient vectors of the real and imaginary parts at
/// time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub t: f64,
}

impl FieldPair {
    pub fn zeros(dofs: usize) -> Self {
        FieldPair { u1: vec![0.0; dofs], u2: vec![0.0; dofs], t: 0.0 }
    }

    /// Non-finite coefficients signal blow-up.
    pub fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|v| v.is_finite())
    }
}

/// Full description of one run: physics parameters, discretization, and
/// solver knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Linear dispersion coefficient (the `a` in `(1 + ia) Lap u`).
    pub a: f64,
    /// Nonlinear frequency coefficient (the `b` in `(1 + ib)|u|^2 u`).
    pub b: f64,
    /// Interior penalty parameter.
    pub sigma: f64,
    pub variant: IPVariant,
    /// Mesh subdivisions per side.
    pub n: usize,
    /// Time step as a multiple of h^2 (dt = dt_factor * h^2).
    pub dt_factor: f64,
    /// Final time.
    pub t_final: f64,
    /// Relative L2 tolerance of the Picard iteration.
    pub picard_tol: f64,
    /// Maximum Picard iterations per step.
    pub picard_max: usize,
    /// Polynomial degree of the DG space.
    pub degree: usize,
    pub solver: SolveMethod,
    /// Apply the manufactured forcing. Disable to evolve the raw equation.
    pub forcing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            a: 1e-4,
            b: 1e-4,
            sigma: 1e8,
            variant: IPVariant::Nipg,
            n: 6,
            dt_factor: 2.0,
            t_final: 1.0,
            picard_tol: 1e-8,
            picard_max: 50,
            degree: 1,
            solver: SolveMethod::Direct,
            forcing: true,
        }
    }
}

impl RunConfig {
    pub fn new(variant: IPVariant, a: f64, b: f64, sigma: f64, n: usize) -> Self {
        RunConfig { a, b, sigma, variant, n, ..RunConfig::default() }
    }

    /// Time step dt = dt_factor * h^2 with h the longest edge (the diagonal).
    pub fn dt(&self) -> f64 {
        let h = std::f64::consts::SQRT_2 / self.n as f64;
        self.dt_factor * h * h
    }

    /// Checks all invariants, reporting the first offending field by name.
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let fail = |key: &'static str, reason: String| Err(InvalidConfig { key, reason });
        if !(self.a >= 0.0) {
            return fail("a", format!("must be >= 0, got {}", self.a));
        }
        if !(self.b >= 0.0) {
            return fail("b", format!("must be >= 0, got {}", self.b));
        }
        if !(self.sigma > 0.0) {
            return fail("sigma", format!("must be > 0, got {}", self.sigma));
        }
        if self.n == 0 {
            return fail("n", "must be >= 1".to_string());
        }
        if !(self.t_final > 0.0) {
            return fail("t_final", format!("must be > 0, got {}", self.t_final));
        }
        if !(self.dt_factor > 0.0) {
            return fail("dt_factor", format!("must be > 0, got {}", self.dt_factor));
        }
        if !(self.dt() <= self.t_final) {
            return fail(
                "dt_factor",
                format!("dt = {} exceeds t_final = {}", self.dt(), self.t_final),
            );
        }
        if !(self.picard_tol > 0.0) {
            return fail("picard_tol", format!("must be > 0, got {}", self.picard_tol));
        }
        if self.picard_max == 0 {
            return fail("picard_max", "must be >= 1".to_string());
        }
        if self.degree == 0 || self.degree > 15 {
            return fail("degree", format!("must be between 1 and 15, got {}", self.degree));
        }
        if let SolveMethod::Iterative { tol, max_iterations } = self.solver {
            if !(tol > 0.0) {
                return fail("solver_tol", format!("must be > 0, got {tol}"));
            }
            if max_iterations == 0 {
                return fail("solver_max_iterations", "must be >= 1".to_string());
            }
        }
        Ok(())
    }
}

/// Pre-assembled matrices and solver state shared by all steps of a run.
pub struct Operators {
    space: DGSpace,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    /// A - M + M/dt on the stiffness pattern, for the current dt.
    lhs_linear: SparseMatrix,
    /// a * A on the stiffness pattern.
    q_base: SparseMatrix,
    /// M embedded into the stiffness pattern (explicit zeros elsewhere).
    mass_in_stiffness: SparseMatrix,
    /// Frozen-reaction matrix on its own block-diagonal pattern.
    reaction: SparseMatrix,
    /// Maps each reaction value slot to the matching stiffness value slot.
    reaction_slots: Vec<usize>,
    /// Work buffers holding P and Q of the current Picard iterate.
    p_work: SparseMatrix,
    q_work: SparseMatrix,
    direct: ComplexBlockSolver,
    exact: ExactSolution,
    current_dt: f64,
}

impl Operators {
    pub fn new(config: &RunConfig) -> Result<Self, EvolveError> {
        config.validate()?;
        let mesh = Mesh::unit_square(config.n)?;
        let space = DGSpace::new(mesh, config.degree)?;
        let mass = assemble_mass(&space);
        let stiffness = assemble_stiffness(&space, config.variant, config.sigma)?;
        let dofs = space.total_dofs();
        let reaction = assemble_frozen_reaction(&space, &vec![0.0; dofs], &vec![0.0; dofs])?;

        // Embed the mass values into the stiffness pattern and record, for
        // every reaction slot, where it lands in that pattern. Element
        // volume terms guarantee every block-diagonal entry is present.
        let mut mass_in_stiffness = stiffness.scaled(0.0);
        let mut reaction_slots = Vec::with_capacity(reaction.nnz());
        for (r, c, _) in reaction.entries() {
            let slot = mass_in_stiffness.position(r, c).expect(
                "block-diagonal entries are always present in the stiffness pattern",
            );
            reaction_slots.push(slot);
            mass_in_stiffness.values_mut()[slot] = mass.get(r, c);
        }

        let q_base = stiffness.scaled(config.a);
        let direct = ComplexBlockSolver::new(&stiffness)?;
        let mut ops = Operators {
            p_work: stiffness.scaled(0.0),
            q_work: stiffness.scaled(0.0),
            lhs_linear: stiffness.scaled(0.0),
            space,
            mass,
            stiffness,
            q_base,
            mass_in_stiffness,
            reaction,
            reaction_slots,
            direct,
            exact: ExactSolution::default(),
            current_dt: 0.0,
        };
        ops.set_dt(config.dt());
        Ok(ops)
    }

    pub fn space(&self) -> &DGSpace {
        &self.space
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn exact(&self) -> &ExactSolution {
        &self.exact
    }

    /// Rebuilds the dt-dependent linear part A - M + M/dt. Cheap; called
    /// once per run plus once more if the last step is truncated.
    fn set_dt(&mut self, dt: f64) {
        let inv_dt = 1.0 / dt;
        let av = self.stiffness.values();
        let mv = self.mass_in_stiffness.values();
        let lv = self.lhs_linear.values_mut();
        for i in 0..av.len() {
            lv[i] = av[i] + (inv_dt - 1.0) * mv[i];
        }
        self.current_dt = dt;
    }

    /// L2 norm of a coefficient vector through the assembled mass matrix.
    pub fn l2_norm(&self, coeffs: &[f64]) -> f64 {
        self.mass.bilinear(coeffs, coeffs).max(0.0).sqrt()
    }

    /// Loads P and Q for the frozen iterate (w1, w2) into the work buffers.
    fn refresh_system(&mut self, config: &RunConfig, w1: &[f64], w2: &[f64]) -> Result<(), EvolveError> {
        refresh_frozen_reaction(&self.space, w1, w2, &mut self.reaction)?;
        self.p_work.values_mut().copy_from_slice(self.lhs_linear.values());
        self.q_work.values_mut().copy_from_slice(self.q_base.values());
        let nv = self.reaction.values();
        for (i, &slot) in self.reaction_slots.iter().enumerate() {
            self.p_work.values_mut()[slot] += nv[i];
            self.q_work.values_mut()[slot] += config.b * nv[i];
        }
        Ok(())
    }
}

/// Result of one implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FieldPair,
    pub picard_iters: usize,
    pub picard_converged: bool,
    /// Relative change of the last Picard iterate.
    pub picard_residual: f64,
    pub blown_up: bool,
}

/// Advances `state` by `dt` (to time `state.t + dt`), using the previous
/// time level as the initial Picard iterate.
pub fn step(
    state: &FieldPair,
    config: &RunConfig,
    ops: &mut Operators,
    dt: f64,
) -> Result<StepOutcome, EvolveError> {
    step_with_initial_iterate(state, config, ops, dt, state)
}

/// Advances `state` by `dt` with an explicit initial Picard iterate. With
/// the exact solution of the nonlinear step supplied as `iterate`, a single
/// Picard pass reproduces it to solver tolerance (fixed-point property).
pub fn step_with_initial_iterate(
    state: &FieldPair,
    config: &RunConfig,
    ops: &mut Operators,
    dt: f64,
    iterate: &FieldPair,
) -> Result<StepOutcome, EvolveError> {
    if (dt - ops.current_dt).abs() > 1e-15 * ops.current_dt.max(dt) {
        ops.set_dt(dt);
    }
    let t_new = state.t + dt;
    let inv_dt = 1.0 / dt;
    let dofs = ops.space.total_dofs();

    // Right-hand side is fixed across Picard iterates.
    let mut rhs1 = ops.mass.matvec(&state.u1);
    let mut rhs2 = ops.mass.matvec(&state.u2);
    for v in rhs1.iter_mut().chain(rhs2.iter_mut()) {
        *v *= inv_dt;
    }
    if config.forcing {
        let exact = ops.exact.clone();
        let (a, b) = (config.a, config.b);
        let l1 = assemble_load(&ops.space, |x, y| exact.forcing(Component::Real, a, b, x, y, t_new));
        let l2 = assemble_load(&ops.space, |x, y| exact.forcing(Component::Imag, a, b, x, y, t_new));
        for i in 0..dofs {
            rhs1[i] += l1[i];
            rhs2[i] += l2[i];
        }
    }

    let mut w1 = iterate.u1.clone();
    let mut w2 = iterate.u2.clone();
    let mut converged = false;
    let mut blown_up = false;
    let mut iters = 0;
    let mut residual = f64::INFINITY;
    let mut best_residual = f64::INFINITY;
    let mut since_best = 0usize;
    for k in 1..=config.picard_max {
        iters = k;
        ops.refresh_system(config, &w1, &w2)?;
        let (x1, x2) = match config.solver {
            SolveMethod::Direct => {
                match ops.direct.factorize(&ops.p_work, &ops.q_work) {
                    Ok(()) => match ops.direct.solve(&rhs1, &rhs2) {
                        Ok(pair) => pair,
                        Err(LinalgError::FactorizationFailed) => {
                            blown_up = true;
                            break;
                        }
                        Err(e) => return Err(e.into()),
                    },
                    // Non-finite matrix entries mean the iterate already
                    // blew up; report, don't crash.
                    Err(LinalgError::NonFinite) => {
                        blown_up = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            SolveMethod::Iterative { .. } => {
                let system = BlockSystem {
                    a11: ops.p_work.clone(),
                    a12: ops.q_work.scaled(-1.0),
                    a21: ops.q_work.clone(),
                    a22: ops.p_work.clone(),
                    rhs: rhs1.iter().chain(rhs2.iter()).copied().collect(),
                };
                match solve(&system, config.solver) {
                    Ok(x) => (x[..dofs].to_vec(), x[dofs..].to_vec()),
                    Err(LinalgError::NonFinite) => {
                        blown_up = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        if !x1.iter().chain(&x2).all(|v| v.is_finite()) {
            blown_up = true;
            w1 = x1;
            w2 = x2;
            break;
        }
        // Relative L2 change of the iterate.
        let diff1: Vec<f64> = x1.iter().zip(&w1).map(|(a, b)| a - b).collect();
        let diff2: Vec<f64> = x2.iter().zip(&w2).map(|(a, b)| a - b).collect();
        let change = (ops.mass.bilinear(&diff1, &diff1).max(0.0)
            + ops.mass.bilinear(&diff2, &diff2).max(0.0))
        .sqrt();
        let scale = (ops.mass.bilinear(&x1, &x1).max(0.0) + ops.mass.bilinear(&x2, &x2).max(0.0)).sqrt();
        residual = change / scale.max(1.0);
        w1 = x1;
        w2 = x2;
        if residual < config.picard_tol {
            converged = true;
            break;
        }
        // Divergence guards for deliberately unstable regimes: a hard
        // blow-up of the relative change, or no progress toward a new
        // minimum for several iterations, ends the step early (flagged).
        if !residual.is_finite() || residual > 1e8 {
            break;
        }
        if residual < best_residual {
            best_residual = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 6 && k >= 8 {
                break;
            }
        }
    }
    if !blown_up && !(w1.iter().chain(&w2).all(|v| v.is_finite())) {
        blown_up = true;
    }
    Ok(StepOutcome {
        state: FieldPair { u1: w1, u2: w2, t: t_new },
        picard_iters: iters,
        picard_converged: converged,
        picard_residual: residual,
        blown_up,
    })
}

/// One per-step record of the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub norm_u1: f64,
    pub norm_u2: f64,
    /// Discrete energy a^n = (|u1|^2 + |u2|^2) / 2.
    pub energy: f64,
    pub picard_iters: usize,
    pub picard_converged: bool,
}

/// Time history of one run, including the initial state as step 0.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub blown_up: bool,
    pub final_state: FieldPair,
}

impl Trajectory {
    /// Number of steps whose Picard iteration did not reach tolerance.
    pub fn picard_warnings(&self) -> usize {
        self.records.iter().filter(|r| !r.picard_converged).count()
    }

    pub fn max_norm(&self) -> f64 {
        self.records.iter().map(|r| r.norm_u1.max(r.norm_u2)).fold(0.0, f64::max)
    }

    /// `step,t,norm_u1,norm_u2,energy,picard_iters` rows at full precision.
    pub fn write_csv<W: IoWrite>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "step,t,norm_u1,norm_u2,energy,picard_iters")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.step, r.t, r.norm_u1, r.norm_u2, r.energy, r.picard_iters
            )?;
        }
        Ok(())
    }
}

/// Runs the full manufactured problem: projected exact initial data,
/// forcing per `config.forcing`, backward Euler from 0 to `t_final`.
pub fn run(config: &RunConfig) -> Result<Trajectory, EvolveError> {
    let mut ops = Operators::new(config)?;
    let initial = crate::mms::initial_fields(&ops.space, &ops.exact);
    run_from(config, &mut ops, initial)
}

/// Runs from a caller-supplied initial state using prebuilt operators.
pub fn run_from(
    config: &RunConfig,
    ops: &mut Operators,
    initial: FieldPair,
) -> Result<Trajectory, EvolveError> {
    config.validate()?;
    let dt_nominal = config.dt();
    let mut state = initial;
    let mut records = Vec::with_capacity((config.t_final / dt_nominal).ceil() as usize + 2);
    let push_record = |records: &mut Vec<StepRecord>, ops: &Operators, state: &FieldPair, step, iters, conv| {
        let n1 = ops.l2_norm(&state.u1);
        let n2 = ops.l2_norm(&state.u2);
        records.push(StepRecord {
            step,
            t: state.t,
            norm_u1: n1,
            norm_u2: n2,
            energy: 0.5 * (n1 * n1 + n2 * n2),
            picard_iters: iters,
            picard_converged: conv,
        });
    };
    push_record(&mut records, ops, &state, 0, 0, true);

    let mut blown_up = !state.is_finite();
    let mut index = 0usize;
    // Tolerance keeps floating-point drift from spawning a spurious final
    // micro-step.
    while !blown_up && state.t < config.t_final - 1e-12 * config.t_final {
        index += 1;
        let dt = dt_nominal.min(config.t_final - state.t);
        let outcome = step(&state, config, ops, dt)?;
        state = outcome.state;
        push_record(&mut records, ops, &state, index, outcome.picard_iters, outcome.picard_converged);
        if outcome.blown_up {
            blown_up = true;
        }
    }
    Ok(Trajectory { records, blown_up, final_state: state })
}

/// Energy sequence a^n with step ratios a^n / a^{n-1} (first ratio 1).
pub fn energy_monitor(trajectory: &Trajectory) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(trajectory.records.len());
    let mut prev: Option<f64> = None;
    for r in &trajectory.records {
        let ratio = match prev {
            Some(p) if p > 0.0 => r.energy / p,
            _ => 1.0,
        };
        out.push((r.energy, ratio));
        prev = Some(r.energy);
    }
    out
}

/// Indices n at which the discrete energy bound
/// `a^n <= (1 + c dt) a^{n-1} + c dt` fails, with dt taken from the record
/// times.
pub fn energy_bound_violations(trajectory: &Trajectory, c: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for w in trajectory.records.windows(2) {
        let dt = w[1].t - w[0].t;
        if w[1].energy > (1.0 + c * dt) * w[0].energy + c * dt {
            out.push(w[1].step);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms::initial_fields;
    use approx::assert_relative_eq;

    fn table1_config(n: usize) -> RunConfig {
        RunConfig::new(IPVariant::Nipg, 1e-4, 1e-4, 1e8, n)
    }

    #[test]
    fn config_dt_matches_mesh_spacing() {
        let c = table1_config(6);
        // h = sqrt(2)/6, dt = 2 h^2 = 4/36
        assert_relative_eq!(c.dt(), 4.0 / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn config_validation_names_offending_field() {
        let mut c = table1_config(6);
        c.sigma = -1.0;
        assert_eq!(c.validate().unwrap_err().key, "sigma");
        let mut c = table1_config(6);
        c.picard_max = 0;
        assert_eq!(c.validate().unwrap_err().key, "picard_max");
        let mut c = table1_config(6);
        c.t_final = 0.0;
        assert_eq!(c.validate().unwrap_err().key, "t_final");
        let mut c = table1_config(6);
        c.dt_factor = 1e9;
        assert_eq!(c.validate().unwrap_err().key, "dt_factor");
    }

    #[test]
    fn zero_state_without_forcing_is_a_fixed_point() {
        let mut config = table1_config(3);
        config.forcing = false;
        config.t_final = 3.0 * config.dt();
        let mut ops = Operators::new(&config).unwrap();
        let zero = FieldPair::zeros(ops.space().total_dofs());
        let traj = run_from(&config, &mut ops, zero).unwrap();
        assert!(!traj.blown_up);
        assert_eq!(traj.records.len(), 4);
        for r in &traj.records {
            assert_eq!(r.norm_u1, 0.0);
            assert_eq!(r.norm_u2, 0.0);
            assert_eq!(r.energy, 0.0);
        }
    }

    /// With a = b = 0 and tiny data the nonlinear terms are O(1e-16) and a
    /// single step must match an independently assembled linear
    /// backward-Euler solve through the general-purpose solver.
    #[test]
    fn linear_regime_step_matches_independent_solve() {
        let mut config = RunConfig::new(IPVariant::Sipg, 0.0, 0.0, 1e3, 4);
        config.forcing = false;
        let mut ops = Operators::new(&config).unwrap();
        let dofs = ops.space().total_dofs();
        let exact = ops.exact().clone();
        let mut state = initial_fields(ops.space(), &exact);
        for v in state.u1.iter_mut().chain(state.u2.iter_mut()) {
            *v *= 1e-8;
        }
        let dt = config.dt();
        let outcome = step(&state, &config, &mut ops, dt).unwrap();
        assert!(outcome.picard_converged);

        // Independent route: assemble M/dt + A - M (no reaction) and solve
        // the decoupled system directly.
        let mut lhs = ops.stiffness().clone();
        let inv_dt = 1.0 / dt;
        for (i, (r, c, v)) in ops.stiffness().clone().entries().enumerate() {
            let m = ops.mass().get(r, c);
            lhs.values_mut()[i] = v + (inv_dt - 1.0) * m;
        }
        let mut rhs: Vec<f64> = ops.mass().matvec(&state.u1);
        rhs.extend(ops.mass().matvec(&state.u2));
        for v in rhs.iter_mut() {
            *v *= inv_dt;
        }
        let system = BlockSystem {
            a11: lhs.clone(),
            a12: lhs.scaled(0.0),
            a21: lhs.scaled(0.0),
            a22: lhs,
            rhs,
        };
        let x = solve(&system, SolveMethod::Direct).unwrap();
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..dofs {
            assert!((outcome.state.u1[i] - x[i]).abs() < 1e-12 * scale.max(1.0));
            assert!((outcome.state.u2[i] - x[dofs + i]).abs() < 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn table1_coarse_run_converges_quickly_and_stays_finite() {
        let config = table1_config(6);
        let traj = run(&config).unwrap();
        assert!(!traj.blown_up);
        assert!(traj.final_state.is_finite());
        // 9 steps of dt = 1/9 plus the initial record
        assert_eq!(traj.records.len(), 10);
        assert_relative_eq!(traj.records.last().unwrap().t, 1.0, epsilon = 1e-12);
        for r in &traj.records[1..] {
            assert!(r.picard_converged, "step {} did not converge", r.step);
            assert!(r.picard_iters <= 10, "step {} took {} Picard iterations", r.step, r.picard_iters);
        }
        // times strictly increasing
        for w in traj.records.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn zero_final_time_is_rejected_and_tiny_horizon_truncates() {
        let mut config = table1_config(6);
        config.t_final = 0.5 * config.dt();
        // dt > t_final violates the invariant 0 < dt <= t_final
        assert_eq!(config.validate().unwrap_err().key, "dt_factor");
        // a horizon between one and two steps truncates the second step
        let mut config = table1_config(6);
        config.t_final = 1.5 * config.dt();
        let traj = run(&config).unwrap();
        assert_eq!(traj.records.len(), 3);
        assert_relative_eq!(traj.final_state.t, config.t_final, epsilon = 1e-12);
    }

    #[test]
    fn direct_and_iterative_steps_agree() {
        let mut config = RunConfig::new(IPVariant::Nipg, 0.3, 0.2, 1e3, 3);
        let mut ops = Operators::new(&config).unwrap();
        let state = initial_fields(ops.space(), &ops.exact().clone());
        let dt = config.dt();
        let direct = step(&state, &config, &mut ops, dt).unwrap();
        config.solver = SolveMethod::Iterative { tol: 1e-13, max_iterations: 20_000 };
        let iterative = step(&state, &config, &mut ops, dt).unwrap();
        let mut max_diff = 0.0f64;
        for i in 0..state.u1.len() {
            max_diff = max_diff.max((direct.state.u1[i] - iterative.state.u1[i]).abs());
            max_diff = max_diff.max((direct.state.u2[i] - iterative.state.u2[i]).abs());
        }
        assert!(max_diff < 1e-7, "solver routes disagree by {max_diff}");
    }

    /// Supplying the converged solution as the initial iterate must
    /// reproduce it in a single Picard pass.
    #[test]
    fn picard_fixed_point_property() {
        let config = RunConfig::new(IPVariant::Nipg, 0.5, 0.5, 1e3, 3);
        let mut ops = Operators::new(&config).unwrap();
        let state = initial_fields(ops.space(), &ops.exact().clone());
        let dt = config.dt();
        let mut tight = config.clone();
        tight.picard_tol = 1e-13;
        let converged = step(&state, &tight, &mut ops, dt).unwrap();
        assert!(converged.picard_converged);
        let mut one_pass = config.clone();
        one_pass.picard_max = 1;
        let reproduced =
            step_with_initial_iterate(&state, &one_pass, &mut ops, dt, &converged.state).unwrap();
        for i in 0..state.u1.len() {
            assert!((reproduced.state.u1[i] - converged.state.u1[i]).abs() < 1e-9);
            assert!((reproduced.state.u2[i] - converged.state.u2[i]).abs() < 1e-9);
        }
    }

    /// Halving dt at fixed mesh changes final norms at first order.
    #[test]
    fn backward_euler_is_first_order_in_time() {
        let norm_at = |factor: f64| {
            let mut config = table1_config(6);
            config.dt_factor = factor;
            let traj = run(&config).unwrap();
            let last = traj.records.last().unwrap();
            (last.norm_u1, last.norm_u2)
        };
        let (a1, _) = norm_at(2.0);
        let (a2, _) = norm_at(1.0);
        let (a3, _) = norm_at(0.5);
        let ratio = (a1 - a2) / (a2 - a3);
        assert!(
            (1.5..=2.5).contains(&ratio),
            "first-order dt-consistency ratio out of range: {ratio}"
        );
    }

    #[test]
    fn runs_are_deterministic() {
        let config = table1_config(6);
        let t1 = run(&config).unwrap();
        let t2 = run(&config).unwrap();
        assert_eq!(t1.records, t2.records);
        assert_eq!(t1.final_state, t2.final_state);
    }

    #[test]
    fn energy_monitor_reports_unit_ratio_for_zero_energy() {
        let mut config = table1_config(3);
        config.forcing = false;
        config.t_final = 2.0 * config.dt();
        let mut ops = Operators::new(&config).unwrap();
        let zero = FieldPair::zeros(ops.space().total_dofs());
        let traj = run_from(&config, &mut ops, zero).unwrap();
        for (energy, ratio) in energy_monitor(&traj) {
            assert_eq!(energy, 0.0);
            assert_eq!(ratio, 1.0);
        }
    }

    #[test]
    fn stable_run_satisfies_energy_bound() {
        let traj = run(&table1_config(6)).unwrap();
        assert!(energy_bound_violations(&traj, 10.0).is_empty());
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let mut config = table1_config(6);
        config.t_final = 2.0 * config.dt();
        let traj = run(&config).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,norm_u1,norm_u2,energy,picard_iters");
        assert_eq!(lines.len(), 1 + traj.records.len());
        assert!(lines[1].starts_with("0,"));
    }
}
