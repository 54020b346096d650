//! One function per subcommand, each evaluating a single sweep point.

use std::f64::consts::PI;

use rayon::prelude::*;

use darklattice::analytics::{
    big_gamma, defect_renorm, gamma_infinite, memory_emission, nonmarkov_amplitudes,
    reflectivity_analytic, reflectivity_half_width, transfer_fidelity, Branch, InfiniteArrayParams,
    Scheme, TransferParams,
};
use darklattice::dynamics::{
    integrate_delay, integrate_four_mode, optimize_delayed_transfer, simulate_memory_release,
    simulate_transfer_full, FullTransferConfig, PreHistory, TransferTrajectory,
};
use darklattice::geometry::{Curvature, LatticeSpec};
use darklattice::greens::Polarization;
use darklattice::hamiltonian::{scalar_for, TWO_EXCITATION_CAP};
use darklattice::probe::{reflectivity_numeric, ProbeConfig, Reflector};
use darklattice::spectrum::{
    dark_bright_of, default_waist_bounds, defect_monte_carlo, field_profile, four_level_pairs,
    optimize_waist, spectrum_of, two_excitation_rate, Bound, DarkBrightPair, TwoExcitationMethod,
};
use darklattice::{c64, K0};

use crate::config::{
    AnalyticKind, CurvatureChoice, DipoleModel, LatticeConfig, NonmarkovKind, OmegaChoice, RunConfig,
    TransferModel,
};
use crate::error::CliError;
use crate::output::{Cell, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Spectrum,
    Transfer,
    Probe,
    Analytic,
    Field,
    Defects,
    Nonmarkov,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Transfer => "transfer",
            Command::Probe => "probe",
            Command::Analytic => "analytic",
            Command::Field => "field",
            Command::Defects => "defects",
            Command::Nonmarkov => "nonmarkov",
        }
    }
}

/// Result of one sweep point: a one-row summary and, for single-point
/// runs, an optional detailed table.
pub struct Outcome {
    pub summary: Table,
    pub detail: Option<Table>,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Spectrum => spectrum(cfg),
        Command::Transfer => transfer(cfg),
        Command::Probe => probe(cfg),
        Command::Analytic => analytic(cfg),
        Command::Field => field(cfg),
        Command::Defects => defects(cfg),
        Command::Nonmarkov => nonmarkov(cfg),
    }
}

struct Prepared {
    spec: LatticeSpec,
    pair: DarkBrightPair,
    at_bound: Option<Bound>,
}

fn prepare(l: &LatticeConfig) -> Result<Prepared, CliError> {
    let template = l.template();
    template.validate()?;
    if l.curvature != CurvatureChoice::Optimize {
        let pair = dark_bright_of(&template)?;
        return Ok(Prepared { spec: template, pair, at_bound: None });
    }
    let bounds = match l.waist_bounds.as_slice() {
        [] => default_waist_bounds(&template),
        [lo, hi] if 0.0 < *lo && lo < hi => (*lo, *hi),
        other => {
            return Err(CliError::Config(format!(
                "lattice.waist_bounds must be [lo, hi] with 0 < lo < hi, got {other:?}"
            )))
        }
    };
    let opt = optimize_waist(&template, bounds)?;
    Ok(Prepared { spec: template.with_waist(opt.waist), pair: opt.pair, at_bound: opt.at_bound })
}

fn waist_of(spec: &LatticeSpec) -> f64 {
    match spec.curvature {
        Curvature::Flat => f64::NAN,
        Curvature::Gaussian { waist } => waist,
    }
}

fn bound_label(b: Option<Bound>) -> &'static str {
    match b {
        None => "none",
        Some(Bound::Lower) => "lower",
        Some(Bound::Upper) => "upper",
    }
}

fn lattice_cells(p: &Prepared) -> Vec<(&'static str, Cell)> {
    let s = &p.spec;
    vec![
        ("n_perp", s.n_perp.into()),
        ("spacing", s.spacing.into()),
        ("separation", s.separation.into()),
        ("waist", waist_of(s).into()),
        ("waist_at_bound", bound_label(p.at_bound).into()),
        ("gamma_d", p.pair.dark.gamma().into()),
        ("gamma_b", p.pair.bright.gamma().into()),
        ("ratio", p.pair.ratio.into()),
        ("delta_d", p.pair.shift.into()),
    ]
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = prepare(&cfg.lattice)?;
    let mut cells = lattice_cells(&p);
    let (d, b) = (&p.pair.dark, &p.pair.bright);
    cells.extend([
        ("qbar_d", d.qbar.unwrap_or(f64::NAN).into()),
        ("qbar_b", b.qbar.unwrap_or(f64::NAN).into()),
        ("overlap_d", d.overlap.unwrap_or(f64::NAN).into()),
        ("overlap_b", b.overlap.unwrap_or(f64::NAN).into()),
        ("ipr_d", d.ipr.into()),
        ("parity_d", i64::from(d.parity.unwrap_or(0)).into()),
        ("ambiguous", p.pair.ambiguous.into()),
    ]);
    if cfg.spectrum.model == DipoleModel::Vector {
        let f = four_level_pairs(&p.spec)?;
        cells.extend([
            ("gamma_d_vector", f.gamma_dark.into()),
            ("gamma_b_vector", f.gamma_bright.into()),
            ("dark_splitting", f.dark_splitting.into()),
            ("bright_splitting", f.bright_splitting.into()),
        ]);
    }
    if cfg.spectrum.two_excitation {
        let method = if 2 * p.spec.sites_per_array() <= TWO_EXCITATION_CAP {
            TwoExcitationMethod::Exact
        } else {
            TwoExcitationMethod::Refined
        };
        let r = two_excitation_rate(&p.spec, method)?;
        cells.extend([
            ("gamma2_exact", r.exact.into()),
            ("gamma2_perturbative", r.perturbative.into()),
            ("ratio2", (r.exact / b.gamma()).into()),
        ]);
    }
    let detail = if cfg.spectrum.modes {
        let mut t = Table::new(&["index", "delta", "gamma", "qbar", "parity", "ipr", "overlap"]);
        for (i, m) in spectrum_of(&p.spec)?.iter().enumerate() {
            t.push(vec![
                i.into(),
                m.delta().into(),
                m.gamma().into(),
                m.qbar.unwrap_or(f64::NAN).into(),
                i64::from(m.parity.unwrap_or(0)).into(),
                m.ipr.into(),
                m.overlap.unwrap_or(f64::NAN).into(),
            ]);
        }
        Some(t)
    } else {
        None
    };
    Ok(Outcome { summary: Table::record(cells), detail })
}

fn trajectory_table(tr: &TransferTrajectory) -> Table {
    let mut t = Table::new(&[
        "time", "pop_s1", "pop_s2", "pop_e", "re_c1", "im_c1", "re_c2", "im_c2", "re_cb", "im_cb", "re_cd",
        "im_cd",
    ]);
    for k in 0..tr.times.len() {
        t.push(vec![
            tr.times[k].into(),
            tr.pop_s1[k].into(),
            tr.pop_s2[k].into(),
            tr.pop_e[k].into(),
            tr.c1[k].re.into(),
            tr.c1[k].im.into(),
            tr.c2[k].re.into(),
            tr.c2[k].im.into(),
            tr.cb[k].re.into(),
            tr.cb[k].im.into(),
            tr.cd[k].re.into(),
            tr.cd[k].im.into(),
        ]);
    }
    t
}

fn drive(cfg: &RunConfig, gamma_d: f64, gamma_b: f64) -> Result<(f64, f64), CliError> {
    let optimal = (gamma_d * gamma_b / 8.0).sqrt();
    let omega = match cfg.transfer.omega_mode {
        OmegaChoice::Optimal => optimal,
        OmegaChoice::Fixed => cfg.transfer.omega,
    };
    let clock = if omega > 0.0 { omega } else { optimal };
    if !(clock > 0.0 && cfg.transfer.duration > 0.0) {
        return Err(CliError::Validation("transfer needs Ω > 0 or γ_d > 0, and duration > 0".into()));
    }
    Ok((omega, cfg.transfer.duration * PI / clock))
}

fn transfer(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tc = &cfg.transfer;
    match tc.model {
        TransferModel::FourMode => {
            let (omega, t_end) = drive(cfg, tc.gamma_d, tc.gamma_b)?;
            let params = TransferParams::markov(tc.gamma_d, tc.gamma_b, omega);
            let tr = integrate_four_mode(&params, t_end, tc.samples, None)?;
            let law = transfer_fidelity(tc.gamma_d, tc.gamma_b).ok();
            let summary = Table::record(vec![
                ("gamma_d", tc.gamma_d.into()),
                ("gamma_b", tc.gamma_b.into()),
                ("ratio", (tc.gamma_d / tc.gamma_b).into()),
                ("omega", omega.into()),
                ("fidelity", tr.fidelity.into()),
                ("t_max", tr.t_at_max.into()),
                ("fidelity_law", law.map_or(f64::NAN, |l| l.fidelity).into()),
                ("t_max_law", law.map_or(f64::NAN, |l| l.t_max).into()),
            ]);
            Ok(Outcome { summary, detail: Some(trajectory_table(&tr)) })
        }
        TransferModel::Full => {
            let p = prepare(&cfg.lattice)?;
            let (gd, gb) = (p.pair.dark.gamma(), p.pair.bright.gamma());
            let (omega, t_end) = drive(cfg, gd, gb)?;
            let h = scalar_for(&p.spec)?;
            let parity = p.pair.dark.parity.ok_or_else(|| {
                CliError::Validation("full transfer needs mirror-symmetric arrays".into())
            })?;
            let tr = simulate_transfer_full(&FullTransferConfig {
                hamiltonian: &h,
                dark: &p.pair.dark.vector,
                dark_parity: parity,
                frame_shift: p.pair.shift,
                omega,
                drive: [true, true],
                t_end,
                samples: tc.samples,
            })?;
            let four = integrate_four_mode(&TransferParams::markov(gd, gb, omega), t_end, tc.samples, None)?;
            let (t_peak, peak) = darklattice::dynamics::refine_peak(&tr.times, &tr.pop_s2);
            let mut cells = lattice_cells(&p);
            cells.extend([
                ("omega", omega.into()),
                ("pi_over_omega", (PI / omega).into()),
                ("peak_pop_s2", peak.into()),
                ("t_peak", t_peak.into()),
                ("fidelity", tr.fidelity.into()),
                ("fidelity_four_mode", four.fidelity.into()),
                ("t_max_four_mode", four.t_at_max.into()),
                ("steps", tr.stats.steps.into()),
            ]);
            Ok(Outcome { summary: Table::record(cells), detail: Some(trajectory_table(&tr)) })
        }
        TransferModel::Release => {
            let p = prepare(&cfg.lattice)?;
            let (gd, gb) = (p.pair.dark.gamma(), p.pair.bright.gamma());
            let g = 0.5 * (gb - gd);
            let shifted = LatticeSpec { separation: p.spec.separation + tc.release_offset, ..p.spec };
            shifted.validate()?;
            let h = scalar_for(&shifted)?;
            let parity = p.pair.dark.parity.ok_or_else(|| {
                CliError::Validation("memory release needs mirror-symmetric arrays".into())
            })?;
            let omega = tc.release_omega * g;
            let expected = 2.0 * omega * omega / g;
            let rel = simulate_memory_release(
                &h,
                &p.pair.dark.vector,
                parity,
                p.pair.shift,
                omega,
                tc.duration / expected,
                20.0 / g,
            )?;
            let an = memory_emission(omega, g, gd, K0 * shifted.separation)?;
            let mut cells = lattice_cells(&p);
            cells.extend([
                ("release_separation", shifted.separation.into()),
                ("big_gamma", g.into()),
                ("omega", omega.into()),
                ("rate_fit", rel.rate.into()),
                ("rate_analytic", an.rate.into()),
                ("rate_ideal", expected.into()),
                ("flux_forward", an.forward.into()),
                ("flux_backward", an.backward.into()),
                ("fit_points", rel.fit_points.into()),
            ]);
            Ok(Outcome { summary: Table::record(cells), detail: Some(trajectory_table(&rel.trajectory)) })
        }
    }
}

fn probe(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pc = &cfg.probe;
    if pc.points == 0 || !(pc.span > 0.0) {
        return Err(CliError::Validation("probe grid needs points > 0 and span > 0".into()));
    }
    let p = prepare(&cfg.lattice)?;
    let (gd, gb) = (p.pair.dark.gamma(), p.pair.bright.gamma());
    let reflector = Reflector::new(&p.spec)?;
    let mut detail = Table::new(&["scheme", "delta", "r_numeric", "r_analytic"]);
    let mut cells = lattice_cells(&p);
    for scheme in pc.scheme.schemes() {
        let hw = reflectivity_half_width(gd, gb, scheme);
        let n = pc.points;
        let detunings: Vec<f64> = (0..n)
            .map(|k| if n == 1 { 0.0 } else { pc.span * hw * (2.0 * k as f64 / (n - 1) as f64 - 1.0) })
            .collect();
        let curve = reflectivity_numeric(&ProbeConfig {
            spec: p.spec,
            scheme,
            shift: p.pair.shift,
            detunings: detunings.clone(),
        })?;
        let label = scheme_label(scheme);
        for (d, r) in detunings.iter().zip(&curve.values) {
            detail.push(vec![label.into(), (*d).into(), (*r).into(), reflectivity_analytic(*d, gd, gb, scheme).into()]);
        }
        let hw_num = reflector.half_width(p.pair.shift, scheme)?;
        let r0 = reflector.reflectivity(0.0, p.pair.shift, scheme)?;
        let names = match scheme {
            Scheme::Symmetric => ["half_width_symmetric", "half_width_symmetric_analytic", "r0_symmetric"],
            Scheme::Opposite => ["half_width_opposite", "half_width_opposite_analytic", "r0_opposite"],
        };
        cells.extend([(names[0], hw_num.into()), (names[1], hw.into()), (names[2], r0.into())]);
    }
    Ok(Outcome { summary: Table::record(cells), detail: Some(detail) })
}

fn scheme_label(s: Scheme) -> &'static str {
    match s {
        Scheme::Symmetric => "symmetric",
        Scheme::Opposite => "opposite",
    }
}

fn grid(from: f64, to: f64, points: usize, log: bool) -> Result<Vec<f64>, CliError> {
    if points == 0 || !(from.is_finite() && to.is_finite()) || (log && !(from > 0.0 && to > 0.0)) {
        return Err(CliError::Validation(format!("bad grid {from}..{to} with {points} points")));
    }
    Ok((0..points)
        .map(|k| {
            let f = if points == 1 { 0.0 } else { k as f64 / (points - 1) as f64 };
            if log {
                (from.ln() + f * (to.ln() - from.ln())).exp()
            } else {
                from + f * (to - from)
            }
        })
        .collect())
}

fn analytic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ac = &cfg.analytic;
    let xs = grid(ac.from, ac.to, ac.points, ac.log)?;
    let spacing = cfg.lattice.spacing;
    let g = big_gamma(spacing);
    let detail = match ac.kind {
        AnalyticKind::Infinite => {
            let mut t = Table::new(&["separation", "k0l", "gamma_s", "gamma_a", "law_s", "law_a"]);
            for &l in &xs {
                let rate = |parity: i8| -> Result<f64, CliError> {
                    let r = gamma_infinite(&InfiniteArrayParams { spacing, separation: l, q: [0.0, 0.0], parity })?;
                    Ok(r.unwrap_or(0.0))
                };
                let c = (K0 * l).cos();
                t.push(vec![
                    l.into(),
                    (K0 * l).into(),
                    rate(1)?.into(),
                    rate(-1)?.into(),
                    (g * (1.0 + c)).into(),
                    (g * (1.0 - c)).into(),
                ]);
            }
            t
        }
        AnalyticKind::Fidelity => {
            let mut t = Table::new(&["ratio", "fidelity", "fidelity_linear", "omega_opt", "t_max"]);
            for &r in &xs {
                let e = transfer_fidelity(r, 1.0)?;
                t.push(vec![r.into(), e.fidelity.into(), e.fidelity_linear.into(), e.omega_opt.into(), e.t_max.into()]);
            }
            t
        }
        AnalyticKind::Release => {
            let mut t = Table::new(&["separation", "k0l", "rate", "rate_over_ideal", "flux_forward", "flux_backward"]);
            let omega = ac.omega * g;
            for &l in &xs {
                let m = memory_emission(omega, g, ac.gamma_d * g, K0 * l)?;
                t.push(vec![
                    l.into(),
                    (K0 * l).into(),
                    m.rate.into(),
                    (m.rate / (2.0 * omega * omega / g)).into(),
                    m.forward.into(),
                    m.backward.into(),
                ]);
            }
            t
        }
    };
    let summary = Table::record(vec![
        ("kind", format!("{:?}", ac.kind).to_lowercase().into()),
        ("spacing", spacing.into()),
        ("big_gamma", g.into()),
        ("points", xs.len().into()),
    ]);
    Ok(Outcome { summary, detail: Some(detail) })
}

fn field(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let fc = &cfg.field;
    let p = prepare(&cfg.lattice)?;
    let z_extent = if fc.z_extent > 0.0 { fc.z_extent } else { 0.6 * p.spec.separation };
    let xs = grid(-fc.x_extent, fc.x_extent, fc.nx, false)?;
    let zs = grid(-z_extent, z_extent, fc.nz, false)?;
    let h = scalar_for(&p.spec)?;
    let pol = Polarization::circular();
    let at = |v: &[c64], r: [f64; 3]| -> f64 {
        field_profile(v, &h.sites, &[r], &pol).map_or(f64::NAN, |e| e[0].norm())
    };
    let rows: Vec<Vec<Cell>> = zs
        .par_iter()
        .flat_map_iter(|&z| {
            let (d, b) = (&p.pair.dark.vector, &p.pair.bright.vector);
            let y = fc.y;
            xs.iter()
                .map(move |&x| vec![x.into(), z.into(), at(d, [x, y, z]).into(), at(b, [x, y, z]).into()])
                .collect::<Vec<_>>()
        })
        .collect();
    let mut detail = Table::new(&["x", "z", "abs_dark", "abs_bright"]);
    rows.into_iter().for_each(|r| detail.push(r));
    Ok(Outcome { summary: Table::record(lattice_cells(&p)), detail: Some(detail) })
}

fn defects(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dc = &cfg.defects;
    let p = prepare(&cfg.lattice)?;
    let stats = defect_monte_carlo(&p.spec, dc.probability, dc.realizations, cfg.seed)?;
    let first_order = |eps: c64| -> Result<f64, CliError> { Ok(-2.0 * defect_renorm(eps, dc.probability)?.im) };
    let mut cells = lattice_cells(&p);
    cells.extend([
        ("probability", dc.probability.into()),
        ("realizations", stats.realizations.into()),
        ("mean_gamma_d", stats.mean_gamma_dark.into()),
        ("stderr_gamma_d", stats.stderr_gamma_dark.into()),
        ("mean_gamma_b", stats.mean_gamma_bright.into()),
        ("stderr_gamma_b", stats.stderr_gamma_bright.into()),
        ("first_order_gamma_d", first_order(p.pair.dark.eps)?.into()),
        ("first_order_gamma_b", first_order(p.pair.bright.eps)?.into()),
        ("resampled", stats.resampled.into()),
    ]);
    Ok(Outcome { summary: Table::record(cells), detail: None })
}

fn nonmarkov(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let nc = &cfg.nonmarkov;
    match nc.kind {
        NonmarkovKind::Optimize => {
            let markov = optimize_delayed_transfer(1.0, nc.gamma_d, 0.0, nc.kappa_l)?;
            let o = optimize_delayed_transfer(1.0, nc.gamma_d, nc.gamma_tau, nc.kappa_l)?;
            let summary = Table::record(vec![
                ("gamma_tau", nc.gamma_tau.into()),
                ("gamma_d", nc.gamma_d.into()),
                ("kappa_l", nc.kappa_l.into()),
                ("omega_opt", o.omega.into()),
                ("fidelity", o.fidelity.into()),
                ("infidelity", (1.0 - o.fidelity).into()),
                ("t_max", o.t_max.into()),
                ("omega_ratio", (o.omega / markov.omega).into()),
                ("omega_law", (1.0 / (1.0 + 0.75 * nc.gamma_tau).sqrt()).into()),
                ("t_ratio", (o.t_max / markov.t_max).into()),
                ("t_law", (1.0 + 0.5 * nc.gamma_tau).into()),
            ]);
            Ok(Outcome { summary, detail: None })
        }
        NonmarkovKind::Amplitude => {
            let one = c64::new(1.0, 0.0);
            let trace = |branch| {
                integrate_delay(1.0, nc.gamma_d, nc.gamma_tau, nc.kappa_l, branch, one, nc.duration, nc.samples, PreHistory::Zero)
            };
            let (dark, bright) = (trace(Branch::Dark)?, trace(Branch::Bright)?);
            let mut detail = Table::new(&["time", "abs_dark", "abs_dark_first_order", "abs_bright", "abs_bright_first_order"]);
            let mut worst_dark: f64 = 0.0;
            for k in 0..dark.times.len() {
                let t = dark.times[k];
                let fd = nonmarkov_amplitudes(t, 1.0, nc.gamma_d, nc.gamma_tau, nc.kappa_l, Branch::Dark)?;
                let fb = nonmarkov_amplitudes(t, 1.0, nc.gamma_d, nc.gamma_tau, nc.kappa_l, Branch::Bright)?;
                worst_dark = worst_dark.max((dark.values[k].norm() - fd).abs() / fd.abs().max(1e-300));
                detail.push(vec![t.into(), dark.values[k].norm().into(), fd.into(), bright.values[k].norm().into(), fb.into()]);
            }
            let summary = Table::record(vec![
                ("gamma_tau", nc.gamma_tau.into()),
                ("gamma_d", nc.gamma_d.into()),
                ("kappa_l", nc.kappa_l.into()),
                ("dt", dark.dt.into()),
                ("max_rel_dev_dark", worst_dark.into()),
            ]);
            Ok(Outcome { summary, detail: Some(detail) })
        }
    }
}
