use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generate::{
    default_point, h1_base, h1_bounded_member, h1_horizon, smooth_bump, spike, spike_horizon, BumpSpec,
};
use crate::grid::{GridFunction, OpenSetMask, ProductGrid};
use crate::maximal::{tau_build, TauParams};
use crate::norms::{bmo_d_norm_search_with, h1_norm, SearchOptions};
use crate::sum::sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    /// `f + ½ a_{R_n}` with shrinking `R_n ∋ x0`; H¹ norms stay at most one.
    H1Bounded,
    /// Mass-one spikes at `x0`, converging to zero off `x0` but not weakly.
    Spike,
    /// `f_n = f`.
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoremRunConfig {
    pub grid: ProductGrid,
    pub sequence: SequenceKind,
    pub epsilon: f64,
    pub eta: f64,
    pub alpha: f64,
    pub delta: f64,
    pub c: f64,
    pub tol: f64,
    pub kmax: usize,
    pub q: f64,
    pub x0: Option<Vec<f64>>,
    /// Amplitude of the limit atom and of each bump (H¹-bounded sequence).
    pub amplitude: f64,
    /// Last member index; defaults to the finest the grid resolves.
    pub horizon: Option<usize>,
    pub phi: BumpSpec,
    pub restarts: usize,
    pub seed: u64,
    /// Whether to run the packing search on `φτ` for members past burn-in.
    pub packing: bool,
}

impl Default for TheoremRunConfig {
    fn default() -> Self {
        TheoremRunConfig {
            grid: ProductGrid::new(vec![1, 1], vec![5, 5]).expect("valid grid"),
            sequence: SequenceKind::H1Bounded,
            epsilon: 1e-2,
            eta: 1e-2,
            alpha: 1.0 / 16.0,
            delta: 1.0,
            c: 0.5,
            tol: 1e-10,
            kmax: 60,
            q: 0.9,
            x0: None,
            amplitude: 0.5,
            horizon: None,
            phi: BumpSpec::default(),
            restarts: 4,
            seed: 0,
            packing: true,
        }
    }
}

impl TheoremRunConfig {
    pub fn tau_params(&self) -> TauParams {
        TauParams {
            delta: self.delta,
            c: self.c,
            tol: self.tol,
            kmax: self.kmax,
            q: self.q,
        }
    }
}

/// The packing constant of `φτ` against the two cases of the argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingCheck {
    pub value: f64,
    pub witness_measure: f64,
    /// `|Ω| ≤ α`: `2 d! (‖τ‖²_bmo + α^{2/n})`.
    pub case_small_bound: f64,
    /// `|Ω| > α`: `‖φτ‖₂² / α`.
    pub case_large_bound: f64,
    pub within_bounds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub n: usize,
    pub h1_norm: f64,
    pub rescaled: bool,
    pub pairing: f64,
    pub gap: f64,
    /// `|E_n|`, `E_n = {x ∈ supp φ : |f_n - f| > η}`.
    pub e_measure: f64,
    /// `|∫ (f - f_n) φ (1 - τ)|`.
    pub t1: Option<f64>,
    /// `∫_{supp τ} |f φ|`.
    pub t2: Option<f64>,
    /// `|∫ f_n φ τ|`.
    pub t3: Option<f64>,
    pub tau_support: Option<f64>,
    pub tau_bmo: Option<f64>,
    pub c_used: Option<f64>,
    pub packing: Option<PackingCheck>,
}

impl MemberReport {
    pub fn terms_below(&self, eps: f64) -> bool {
        [self.t1, self.t2, self.t3].iter().all(|t| t.is_none_or(|t| t < eps))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub config: TheoremRunConfig,
    pub limit_pairing: f64,
    pub phi_at_x0: f64,
    pub members: Vec<MemberReport>,
    /// First member with `|E_n| < η`.
    pub burn_in: Option<usize>,
    pub final_gap: f64,
    /// Every member past burn-in has gap below `ε`.
    pub converged: bool,
    /// Every member past burn-in has all three split terms below `ε`.
    pub terms_below_epsilon: bool,
    pub monotone_after_burn_in: bool,
    pub min_gap_after_burn_in: Option<f64>,
    /// `h1(f_n) / h1(f_{n-1})` where defined.
    pub h1_growth: Vec<f64>,
}

impl TheoremReport {
    pub fn after_burn_in(&self) -> impl Iterator<Item = &MemberReport> {
        let b = self.burn_in.unwrap_or(usize::MAX);
        self.members.iter().filter(move |m| m.n >= b)
    }
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

pub fn theorem_demo(config: &TheoremRunConfig) -> Result<TheoremReport> {
    let grid = &config.grid;
    let x0 = config.x0.clone().unwrap_or_else(|| default_point(grid));
    let phi = smooth_bump(grid, &config.phi)?;
    let supp_phi = phi.support();
    let f = match config.sequence {
        SequenceKind::Spike => GridFunction::zeros(grid.clone()),
        _ => h1_base(grid, config.amplitude)?,
    };
    let limit_pairing = f.inner(&phi)?;
    let horizon = config.horizon.unwrap_or(match config.sequence {
        SequenceKind::H1Bounded => h1_horizon(grid),
        SequenceKind::Spike => spike_horizon(grid),
        SequenceKind::Stationary => 4,
    });
    let params = config.tau_params();
    params.validate()?;
    let mut members = Vec::new();
    let mut burn_in = None;
    for n in 0..=horizon {
        let (fnn, rescaled) = match config.sequence {
            SequenceKind::H1Bounded => h1_bounded_member(grid, &x0, n, config.amplitude)?,
            SequenceKind::Spike => (spike(grid, &x0, n)?, false),
            SequenceKind::Stationary => (f.clone(), false),
        };
        let pairing = fnn.inner(&phi)?;
        let diff = fnn.sub(&f)?;
        let e = OpenSetMask::from_fn(grid.clone(), |c| supp_phi.contains(c) && diff.value(c).abs() > config.eta);
        let e_measure = e.measure();
        if burn_in.is_none() && e_measure < config.eta {
            burn_in = Some(n);
        }
        let mut report = MemberReport {
            n,
            h1_norm: h1_norm(&fnn),
            rescaled,
            pairing,
            gap: (pairing - limit_pairing).abs(),
            e_measure,
            t1: None,
            t2: None,
            t3: None,
            tau_support: None,
            tau_bmo: None,
            c_used: None,
            packing: None,
        };
        if burn_in.is_some() {
            split_terms(config, &params, &f, &fnn, &phi, &e, &mut report)?;
        }
        members.push(report);
    }
    let after: Vec<&MemberReport> = members.iter().filter(|m| burn_in.is_some_and(|b| m.n >= b)).collect();
    let converged = !after.is_empty() && after.iter().all(|m| m.gap < config.epsilon);
    let terms_below_epsilon = !after.is_empty() && after.iter().all(|m| m.terms_below(config.epsilon));
    let monotone_after_burn_in = after.windows(2).all(|w| w[1].gap <= w[0].gap);
    let min_gap_after_burn_in = after.iter().map(|m| m.gap).reduce(f64::min);
    let h1_growth = members
        .windows(2)
        .filter(|w| w[0].h1_norm > 0.0)
        .map(|w| w[1].h1_norm / w[0].h1_norm)
        .collect();
    let phi_at_x0 = phi.value(grid.cell_at(&x0)?);
    Ok(TheoremReport {
        config: config.clone(),
        limit_pairing,
        phi_at_x0,
        final_gap: members.last().map_or(0.0, |m| m.gap),
        members,
        burn_in,
        converged,
        terms_below_epsilon,
        monotone_after_burn_in,
        min_gap_after_burn_in,
        h1_growth,
    })
}

fn split_terms(
    config: &TheoremRunConfig,
    params: &TauParams,
    f: &GridFunction,
    fnn: &GridFunction,
    phi: &GridFunction,
    e: &OpenSetMask,
    report: &mut MemberReport,
) -> Result<()> {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let integral = |h: &dyn Fn(usize) -> f64| sum((0..grid.cell_count()).map(h)) * vol;
    if e.is_empty() {
        report.t1 = Some(integral(&|c| (f.value(c) - fnn.value(c)) * phi.value(c)).abs());
        report.t2 = Some(0.0);
        report.t3 = Some(0.0);
        report.tau_support = Some(0.0);
        return Ok(());
    }
    let tr = tau_build(e, params)?;
    let tau = &tr.tau;
    report.t1 = Some(integral(&|c| (f.value(c) - fnn.value(c)) * phi.value(c) * (1.0 - tau.value(c))).abs());
    report.t2 = Some(integral(&|c| if tau.value(c) > 0.0 { (f.value(c) * phi.value(c)).abs() } else { 0.0 }));
    report.t3 = Some(integral(&|c| fnn.value(c) * phi.value(c) * tau.value(c)).abs());
    report.tau_support = Some(tr.support_measure);
    report.tau_bmo = Some(tr.bmo_norm_measured);
    report.c_used = Some(tr.c_used);
    if config.packing {
        let pt = phi.mul(tau)?;
        let r = bmo_d_norm_search_with(
            &pt,
            &SearchOptions {
                restarts: config.restarts,
                seed: config.seed,
                size_cap: None,
            },
        )?;
        let n = grid.total_dim() as f64;
        let small = 2.0 * factorial(grid.d()) * (tr.bmo_norm_measured.powi(2) + config.alpha.powf(2.0 / n));
        let large = pt.l2_norm_sq() / config.alpha;
        report.packing = Some(PackingCheck {
            value: r.value,
            witness_measure: r.witness.measure(),
            case_small_bound: small,
            case_large_bound: large,
            within_bounds: r.value <= small.max(large) * (1.0 + 1e-10),
        });
    }
    Ok(())
}
