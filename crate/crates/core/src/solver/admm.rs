use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::cones::{cone_distance, project_cone, project_cone_faces, PsdFace};
use super::csr::Csr;
use super::linsys::LinearSystem;
use super::Settings;
use crate::error::{Error, Result};
use crate::sdp::{warm_row_map, ConeBlock, ConicProgram, SolverSolution, SolverStatus};

/// Iterates in the coordinates of the original program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    /// Dual iterate, in `K*`.
    pub y: Vec<f64>,
    pub rho: f64,
    /// Iterations over all solves that produced this state.
    pub iteration: u64,
    /// `max(primal, dual, gap)` at recent checks, oldest first.
    pub history: VecDeque<f64>,
}

impl SolverState {
    pub fn cold(program: &ConicProgram, settings: &Settings) -> SolverState {
        SolverState {
            x: vec![0.0; program.n_vars()],
            s: vec![0.0; program.n_rows()],
            y: vec![0.0; program.n_rows()],
            rho: settings.rho,
            iteration: 0,
            history: VecDeque::new(),
        }
    }

    /// Moves a state of `from` onto the rows of `to`. Rows new to `to` start
    /// with a zero dual and the cone projection of `b − Ax`.
    pub fn remap(&self, from: &ConicProgram, to: &ConicProgram) -> Result<SolverState> {
        if self.x.len() != from.n_vars() || self.s.len() != from.n_rows() || self.y.len() != from.n_rows() {
            return Err(Error::Mismatch("state does not belong to the source program".into()));
        }
        let map = warm_row_map(from, to)?;
        let ax = to.apply(&self.x);
        let mut s: Vec<f64> = to.b().iter().zip(&ax).map(|(b, a)| b - a).collect();
        project_cone(to.cones(), &mut s)?;
        let mut y = vec![0.0; to.n_rows()];
        for (row, src) in map.iter().enumerate() {
            if let Some(src) = *src {
                s[row] = self.s[src];
                y[row] = self.y[src];
            }
        }
        Ok(SolverState { x: self.x.clone(), s, y, rho: self.rho, iteration: self.iteration, history: VecDeque::new() })
    }

    /// [`remap`](Self::remap) onto a constrained SOS program, with the dual
    /// replaced by the unit multiplier on the `λ` upper bound. That multiplier
    /// alone is dual optimal whenever the bound is attainable, so the solve
    /// only has to repair the primal.
    pub fn constrained_warm_start(&self, from: &ConicProgram, to: &ConicProgram) -> Result<SolverState> {
        let constrained =
            matches!(to.metadata().map(|m| &m.variant), Some(crate::sdp::ProgramVariant::Constrained { .. }));
        if !constrained || to.nonneg_rows() != 2 {
            return Err(Error::InvalidArgument("target is not a constrained SOS program".into()));
        }
        let mut state = self.remap(from, to)?;
        state.y.fill(0.0);
        state.y[to.zero_rows() + 1] = 1.0;
        Ok(state)
    }
}

/// Projects a slack vector onto the cone of `program`.
pub fn project_slack(program: &ConicProgram, s: &mut [f64]) -> Result<()> {
    if s.len() != program.n_rows() {
        return Err(Error::Mismatch("slack length differs from the row count".into()));
    }
    project_cone(program.cones(), s)
}

/// One line of the iteration log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub objective: f64,
    /// `−bᵀy`.
    pub dual_objective: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolverStatus,
    /// Iterations of this solve.
    pub iterations: u64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub objective: f64,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn relative_residuals(
    program: &ConicProgram,
    q: &[f64],
    x: &[f64],
    s: &[f64],
    y: &[f64],
) -> (f64, f64, f64) {
    let b = program.b();
    let ax = program.apply(x);
    let rp = ax.iter().zip(s).zip(b).map(|((a, s), b)| (a + s - b).abs()).fold(0.0, f64::max);
    let aty = program.apply_transpose(y);
    let rd = aty.iter().zip(q).map(|(a, q)| (a + q).abs()).fold(0.0, f64::max);
    let (pobj, dobj) = (dot(q, x), -dot(b, y));
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    (rp / (1.0 + norm_inf(b)), rd / (1.0 + norm_inf(q)), gap)
}

/// Relative primal residual, dual residual and gap of a state.
pub fn residuals(program: &ConicProgram, state: &SolverState) -> (f64, f64, f64) {
    relative_residuals(program, &program.objective_dense(), &state.x, &state.s, &state.y)
}

/// Ruiz equilibration: rows scaled by `e` (uniformly within PSD blocks),
/// columns by `d`.
fn equilibrate(program: &ConicProgram, passes: u32) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (program.n_rows(), program.n_vars());
    let mut e = vec![1.0; m];
    let mut d = vec![1.0; n];
    let blocks: Vec<(usize, usize, bool)> = {
        let mut at = 0;
        program
            .cones()
            .iter()
            .map(|c| {
                let r = (at, at + c.dim(), matches!(c, ConeBlock::Psd(_)));
                at += c.dim();
                r
            })
            .collect()
    };
    for _ in 0..passes {
        let mut rn = vec![0.0f64; m];
        let mut cn = vec![0.0f64; n];
        for &(r, c, v) in program.triplets() {
            let a = (e[r] * v * d[c]).abs();
            rn[r] = rn[r].max(a);
            cn[c] = cn[c].max(a);
        }
        for &(lo, hi, psd) in &blocks {
            if psd {
                let mx = rn[lo..hi].iter().cloned().fold(0.0, f64::max);
                rn[lo..hi].fill(mx);
            }
        }
        for (ei, r) in e.iter_mut().zip(&rn) {
            if *r > 0.0 {
                *ei /= r.sqrt();
            }
        }
        for (dj, c) in d.iter_mut().zip(&cn) {
            if *c > 0.0 {
                *dj /= c.sqrt();
            }
        }
    }
    (e, d)
}

pub fn solve(
    program: &ConicProgram,
    settings: &Settings,
    warm: Option<&SolverState>,
) -> Result<(SolveReport, SolverState)> {
    solve_with_observer(program, settings, warm, &mut |_| {})
}

/// The face `P·1 = 0` of the Gram block of an SOS program. Every feasible
/// `P` lies on it: the coefficients of `Δ² − λΔ` sum to zero, so `1ᵀP1 = 0`.
/// Empty for programs without SOS metadata.
pub fn sos_faces(program: &ConicProgram) -> Vec<PsdFace> {
    let Some(meta) = program.metadata() else { return Vec::new() };
    let last = program.cones().len().wrapping_sub(1);
    match program.cones().last() {
        Some(&ConeBlock::Psd(side)) if side == meta.basis_size && side > 1 => {
            vec![PsdFace { cone: last, kernel: vec![vec![1.0; side]] }]
        }
        _ => Vec::new(),
    }
}

/// Solves an SOS program on [`sos_faces`] and reads `λ₀`, `P₀` off the result.
pub fn solve_sos(
    program: &ConicProgram,
    settings: &Settings,
    warm: Option<&SolverState>,
) -> Result<(SolverSolution, SolverState)> {
    let (report, state) = solve_on_faces(program, settings, warm, &sos_faces(program), &mut |_| {})?;
    let sol = SolverSolution::from_primal(
        program,
        &state.x,
        (report.primal_residual, report.dual_residual, report.gap),
        report.status,
        report.iterations,
    )?;
    Ok((sol, state))
}

/// As [`solve`], calling `observer` at every convergence check.
pub fn solve_with_observer(
    program: &ConicProgram,
    settings: &Settings,
    warm: Option<&SolverState>,
    observer: &mut dyn FnMut(&IterationLog),
) -> Result<(SolveReport, SolverState)> {
    solve_on_faces(program, settings, warm, &[], observer)
}

/// As [`solve_with_observer`], with the listed PSD blocks restricted to faces
/// known to contain every feasible point. Restricting removes the directions
/// in which no strictly feasible point exists, which otherwise slows the
/// iteration down badly.
pub fn solve_on_faces(
    program: &ConicProgram,
    settings: &Settings,
    warm: Option<&SolverState>,
    faces: &[PsdFace],
    observer: &mut dyn FnMut(&IterationLog),
) -> Result<(SolveReport, SolverState)> {
    settings.validate()?;
    let faces = faces.iter().map(|f| f.normalized(program.cones())).collect::<Result<Vec<_>>>()?;
    faer::set_global_parallelism(faer::Par::Seq);
    let (m, n) = (program.n_rows(), program.n_vars());
    if let Some(w) = warm {
        if w.x.len() != n || w.s.len() != m || w.y.len() != m {
            return Err(Error::Mismatch("warm state dimensions differ from the program".into()));
        }
        if !(w.rho.is_finite() && w.rho > 0.0) {
            return Err(Error::InvalidArgument("warm state has an invalid step size".into()));
        }
    }
    let q = program.objective_dense();
    let c = settings.scale;
    let (e, d) = equilibrate(program, settings.equilibrate_passes);
    let scaled: Vec<(usize, usize, f64)> =
        program.triplets().iter().map(|&(r, j, v)| (r, j, e[r] * v * d[j])).collect();
    let a = Csr::from_sorted(m, n, &scaled);
    let bh: Vec<f64> = program.b().iter().zip(&e).map(|(b, e)| b * e).collect();
    let qh: Vec<f64> = q.iter().zip(&d).map(|(q, d)| c * q * d).collect();
    let zero_rows: Vec<bool> = program
        .cones()
        .iter()
        .flat_map(|cone| std::iter::repeat_n(matches!(cone, ConeBlock::Zero(_)), cone.dim()))
        .collect();

    // scaled iterates: x = D x̂, s = E⁻¹ ŝ, y = E ŷ / c
    let (mut xh, mut sh, mut yh, mut rho, start_iter) = match warm {
        Some(w) => (
            w.x.iter().zip(&d).map(|(x, d)| x / d).collect::<Vec<_>>(),
            w.s.iter().zip(&e).map(|(s, e)| s * e).collect::<Vec<_>>(),
            w.y.iter().zip(&e).map(|(y, e)| c * y / e).collect::<Vec<_>>(),
            w.rho,
            w.iteration,
        ),
        None => (vec![0.0; n], vec![0.0; m], vec![0.0; m], settings.rho, 0),
    };
    let rho_rows = |rho: f64| -> Vec<f64> {
        zero_rows.iter().map(|&z| if z { settings.equality_rho_factor * rho } else { rho }).collect()
    };
    let mut rv = rho_rows(rho);
    let mut sys = LinearSystem::new(&a)?;
    sys.factor(&a, settings.sigma, &rv)?;
    let mut last_rho_update = 0u64;

    let unscale = |xh: &[f64], sh: &[f64], yh: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            xh.iter().zip(&d).map(|(x, d)| x * d).collect(),
            sh.iter().zip(&e).map(|(s, e)| s / e).collect(),
            yh.iter().zip(&e).map(|(y, e)| y * e / c).collect(),
        )
    };

    let alpha = settings.alpha;
    let sigma = settings.sigma;
    let mut rhs = vec![0.0; n];
    let mut w = vec![0.0; m];
    let mut st = vec![0.0; m];
    let mut s_rel = vec![0.0; m];
    let mut prev_x = xh.clone();
    let mut prev_y = yh.clone();
    let mut history: VecDeque<f64> = VecDeque::new();
    let mut status = SolverStatus::IterationLimit;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0);
    let mut k = 0u64;
    while k < settings.max_iters {
        k += 1;
        let checking = k.is_multiple_of(settings.check_interval) || k == settings.max_iters;
        if checking {
            prev_x.copy_from_slice(&xh);
            prev_y.copy_from_slice(&yh);
        }
        for i in 0..m {
            w[i] = rv[i] * (bh[i] - sh[i]) - yh[i];
        }
        a.mul_t_into(&w, &mut rhs);
        for j in 0..n {
            rhs[j] += sigma * xh[j] - qh[j];
        }
        sys.solve(&a, &mut rhs);
        let xt = &rhs;
        a.mul_into(xt, &mut st);
        for i in 0..m {
            st[i] = bh[i] - st[i];
        }
        for j in 0..n {
            xh[j] = alpha * xt[j] + (1.0 - alpha) * xh[j];
        }
        for i in 0..m {
            s_rel[i] = alpha * st[i] + (1.0 - alpha) * sh[i];
            sh[i] = s_rel[i] - yh[i] / rv[i];
        }
        project_cone_faces(program.cones(), &faces, &mut sh)?;
        for i in 0..m {
            yh[i] += rv[i] * (sh[i] - s_rel[i]);
        }
        if !checking {
            continue;
        }

        let (x, s, y) = unscale(&xh, &sh, &yh);
        let (pr, dr, gap) = relative_residuals(program, &q, &x, &s, &y);
        let objective = dot(&q, &x);
        if !(pr.is_finite() && dr.is_finite() && gap.is_finite()) {
            return Err(Error::Numerical(format!("iterates diverged at iteration {k}")));
        }
        observer(&IterationLog {
            iteration: start_iter + k,
            primal_residual: pr,
            dual_residual: dr,
            gap,
            objective,
            dual_objective: -dot(program.b(), &y),
            rho,
        });
        last = (pr, dr, gap, objective);
        let merit = pr.max(dr).max(gap);
        if merit <= settings.eps {
            status = SolverStatus::Optimal { eps: settings.eps };
            break;
        }
        if settings.eps_infeasible > 0.0 {
            if let Some(st) = infeasibility(program, &q, &x, &y, &prev_x, &prev_y, &d, &e, c, settings.eps_infeasible)?
            {
                status = st;
                break;
            }
        }
        history.push_back(merit);
        if history.len() > settings.stall_window + 1 {
            history.pop_front();
        }
        if history.len() == settings.stall_window + 1 {
            let best = history.iter().skip(1).cloned().fold(f64::INFINITY, f64::min);
            if history[0] < settings.stall_factor * best {
                status = SolverStatus::Stalled;
                break;
            }
        }
        if settings.adaptive_rho && k - last_rho_update >= settings.adaptive_rho_interval {
            let ax = a.mul(&xh);
            let aty = a.mul_t(&yh);
            let rp = (0..m).map(|i| (ax[i] + sh[i] - bh[i]).abs()).fold(0.0, f64::max);
            let rd = (0..n).map(|j| (aty[j] + qh[j]).abs()).fold(0.0, f64::max);
            let pn = norm_inf(&ax).max(norm_inf(&sh)).max(norm_inf(&bh)).max(1e-30);
            let dn = norm_inf(&aty).max(norm_inf(&qh)).max(1e-30);
            let ratio = ((rp / pn) / (rd / dn).max(1e-30)).sqrt();
            let proposal = (rho * ratio).clamp(1e-6, 1e6);
            if ratio.is_finite() && (proposal > 5.0 * rho || proposal < rho / 5.0) {
                rho = proposal;
                rv = rho_rows(rho);
                sys.factor(&a, sigma, &rv)?;
                last_rho_update = k;
            }
        }
    }

    let (x, s, y) = unscale(&xh, &sh, &yh);
    let state = SolverState { x, s, y, rho, iteration: start_iter + k, history };
    let report = SolveReport {
        status,
        iterations: k,
        primal_residual: last.0,
        dual_residual: last.1,
        gap: last.2,
        objective: last.3,
    };
    Ok((report, state))
}

/// Tests the last step of the dual (primal) iterate as a certificate of
/// primal (dual) infeasibility.
#[allow(clippy::too_many_arguments)]
fn infeasibility(
    program: &ConicProgram,
    q: &[f64],
    x: &[f64],
    y: &[f64],
    prev_xh: &[f64],
    prev_yh: &[f64],
    d: &[f64],
    e: &[f64],
    c: f64,
    eps: f64,
) -> Result<Option<SolverStatus>> {
    let dy: Vec<f64> = (0..y.len()).map(|i| y[i] - prev_yh[i] * e[i] / c).collect();
    let ny = norm_inf(&dy);
    if ny > 0.0 {
        let aty = program.apply_transpose(&dy);
        if norm_inf(&aty) <= eps * ny
            && dot(program.b(), &dy) < -eps * ny
            && cone_distance(program.cones(), &dy, true)? <= eps * ny
        {
            return Ok(Some(SolverStatus::InfeasibleCertificate { dual: false }));
        }
    }
    let dx: Vec<f64> = (0..x.len()).map(|j| x[j] - prev_xh[j] * d[j]).collect();
    let nx = norm_inf(&dx);
    if nx > 0.0 && dot(q, &dx) < -eps * nx {
        let neg_adx: Vec<f64> = program.apply(&dx).iter().map(|v| -v).collect();
        if cone_distance(program.cones(), &neg_adx, false)? <= eps * nx {
            return Ok(Some(SolverStatus::InfeasibleCertificate { dual: true }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{ConeBlock, ConicProgram};

    fn bounded_lambda() -> ConicProgram {
        // minimize −λ subject to λ ≥ 0 and λ ≤ 3
        ConicProgram::new(
            1,
            vec![(0, -1.0)],
            vec![(0, 0, -1.0), (1, 0, 1.0)],
            vec![0.0, 3.0],
            vec![ConeBlock::Nonneg(2)],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional() {
        let p = bounded_lambda();
        let (rep, st) = solve(&p, &Settings::default(), None).unwrap();
        assert!(rep.status.is_optimal(), "{rep:?}");
        assert!((st.x[0] - 3.0).abs() < 1e-7);
        let exact = SolverState { x: vec![3.0], s: vec![3.0, 0.0], y: vec![0.0, 1.0], ..st };
        assert_eq!(residuals(&p, &exact), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_iterate_residual_is_b_scaled() {
        let p = bounded_lambda();
        let st = SolverState::cold(&p, &Settings::default());
        let (pr, dr, gap) = residuals(&p, &st);
        assert_eq!(pr, 3.0 / 4.0);
        assert_eq!(dr, 1.0 / 2.0);
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn smallest_eigenvalue() {
        // minimize −λ subject to diag(1, 2) − λI ⪰ 0
        let p = ConicProgram::new(
            1,
            vec![(0, -1.0)],
            vec![(0, 0, 1.0), (2, 0, 1.0)],
            vec![1.0, 0.0, 2.0],
            vec![ConeBlock::Psd(2)],
            vec![],
            None,
        )
        .unwrap();
        let (rep, st) = solve(&p, &Settings::default(), None).unwrap();
        assert!(rep.status.is_optimal());
        assert!((st.x[0] - 1.0).abs() < 1e-7, "{}", st.x[0]);
    }

    #[test]
    fn detects_infeasibility() {
        // λ ≥ 1 and λ ≤ −1
        let p = ConicProgram::new(
            1,
            vec![],
            vec![(0, 0, -1.0), (1, 0, 1.0)],
            vec![-1.0, -1.0],
            vec![ConeBlock::Nonneg(2)],
            vec![],
            None,
        )
        .unwrap();
        let (rep, _) = solve(&p, &Settings::default(), None).unwrap();
        assert_eq!(rep.status, SolverStatus::InfeasibleCertificate { dual: false });
        // minimize −λ subject to λ ≥ 0 only
        let p = ConicProgram::new(
            1,
            vec![(0, -1.0)],
            vec![(0, 0, -1.0)],
            vec![0.0],
            vec![ConeBlock::Nonneg(1)],
            vec![],
            None,
        )
        .unwrap();
        let (rep, _) = solve(&p, &Settings::default(), None).unwrap();
        assert_eq!(rep.status, SolverStatus::InfeasibleCertificate { dual: true });
    }

    #[test]
    fn deterministic_and_limits() {
        let p = bounded_lambda();
        let s = Settings { max_iters: 7, eps: 1e-14, ..Settings::default() };
        let a = solve(&p, &s, None).unwrap();
        let b = solve(&p, &s, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.status, SolverStatus::IterationLimit);
        assert_eq!(a.0.iterations, 7);
        assert!(solve(&p, &Settings { alpha: 2.0, ..Settings::default() }, None).is_err());
    }
}
