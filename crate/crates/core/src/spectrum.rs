//! Eigenmodes of the effective Hamiltonians: classification, the dark and
//! bright Bell pair, curvature optimization, vacancy disorder, the
//! two-excitation sector and radiated field maps.

use std::collections::HashMap;
use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{build_arrays, AtomSite, GaussianMode, LatticeSpec};
use crate::greens::{scalar_green, Polarization};
use crate::hamiltonian::{
    build_vector, for_each_pair_coupling, mirror_symmetric, DefectMask,
    EffectiveHamiltonian, Variant, TWO_EXCITATION_CAP,
};
use crate::linalg::{self, gauge};
use crate::seeding::task_seed;
use crate::{c64, Error, Result, Vec3};

const PARITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct EigenMode {
    pub eps: c64,
    /// Right eigenvector over the Hamiltonian's basis.
    pub vector: Vec<c64>,
    /// +1 or −1 under exchange of the two arrays.
    pub parity: Option<i8>,
    pub qbar: Option<f64>,
    /// Σ|v|⁴ of the single-array profile, i.e. twice the inverse
    /// participation ratio of the full vector.
    pub ipr: f64,
    pub overlap: Option<f64>,
}

impl EigenMode {
    pub fn gamma(&self) -> f64 {
        -2.0 * self.eps.im
    }

    pub fn delta(&self) -> f64 {
        self.eps.re
    }

    /// Single-array profile v with c_{(j⊥,1)} = v_{j⊥}/√2, for parity-definite
    /// scalar modes.
    pub fn half_vector(&self) -> Option<Vec<c64>> {
        self.parity?;
        let n = self.vector.len() / 2;
        Some(self.vector[..n].iter().map(|c| c * std::f64::consts::SQRT_2).collect())
    }
}

/// Transverse grid information used to classify modes.
#[derive(Clone, Debug)]
struct Grid {
    n_perp: usize,
    spacing: f64,
}

fn detect_grid(sites: &[AtomSite]) -> Option<Grid> {
    if !mirror_symmetric(sites) {
        return None;
    }
    let half = sites.len() / 2;
    let n_perp = (half as f64).sqrt().round() as usize;
    if n_perp * n_perp != half {
        return None;
    }
    let spacing = if n_perp > 1 {
        (sites[n_perp].position[0] - sites[0].position[0]).abs()
    } else {
        1.0
    };
    Some(Grid { n_perp, spacing })
}

/// Mean absolute quasi-momentum of a single-array profile on an N⊥×N⊥ grid
/// (row-major over j_x, j_y), using q = −π/δ⊥ + 2πn/L⊥.
pub fn quasi_momentum(v: &[c64], n_perp: usize, spacing: f64) -> f64 {
    let spectrum = dft2(v, n_perp, spacing);
    let q = q_grid(n_perp, spacing);
    let mut total = 0.0;
    for nx in 0..n_perp {
        for ny in 0..n_perp {
            let w = spectrum[nx * n_perp + ny].norm_sqr();
            total += w * (q[nx] * q[nx] + q[ny] * q[ny]).sqrt();
        }
    }
    total
}

fn q_grid(n_perp: usize, spacing: f64) -> Vec<f64> {
    let side = n_perp as f64 * spacing;
    (0..n_perp).map(|n| -PI / spacing + 2.0 * PI * n as f64 / side).collect()
}

/// Unitary 2D transform ṽ_q = (1/N⊥)Σ v_j e^{iδ⊥ j·q}, done one axis at a time.
pub fn dft2(v: &[c64], n_perp: usize, spacing: f64) -> Vec<c64> {
    let q = q_grid(n_perp, spacing);
    let table: Vec<c64> = (0..n_perp)
        .flat_map(|n| {
            let qn = q[n];
            (0..n_perp).map(move |j| c64::cis(spacing * j as f64 * qn))
        })
        .collect();
    let mut partial = vec![c64::new(0.0, 0.0); n_perp * n_perp];
    for jx in 0..n_perp {
        for ny in 0..n_perp {
            let row = &table[ny * n_perp..(ny + 1) * n_perp];
            partial[jx * n_perp + ny] =
                (0..n_perp).map(|jy| v[jx * n_perp + jy] * row[jy]).sum();
        }
    }
    let scale = 1.0 / n_perp as f64;
    let mut out = vec![c64::new(0.0, 0.0); n_perp * n_perp];
    for nx in 0..n_perp {
        let row = &table[nx * n_perp..(nx + 1) * n_perp];
        for ny in 0..n_perp {
            out[nx * n_perp + ny] =
                (0..n_perp).map(|jx| row[jx] * partial[jx * n_perp + ny]).sum::<c64>() * scale;
        }
    }
    out
}

/// Gaussian mode sampled on the sites of array 1.
pub fn sample_mode(mode: &GaussianMode, sites: &[AtomSite]) -> Vec<c64> {
    sites.iter().filter(|s| s.index.jz == 1).map(|s| mode.field(s.position)).collect()
}

/// O = |Σ E·conj(v)|² / Σ|E|² for a unit single-array profile v.
pub fn gaussian_overlap(v: &[c64], mode: &GaussianMode, sites: &[AtomSite]) -> f64 {
    overlap_with(v, &sample_mode(mode, sites))
}

fn overlap_with(v: &[c64], e: &[c64]) -> f64 {
    let num: c64 = e.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
    let den: f64 = e.iter().map(|a| a.norm_sqr()).sum();
    num.norm_sqr() / den
}

fn ipr_of(vector: &[c64]) -> f64 {
    2.0 * vector.iter().map(|c| c.norm_sqr().powi(2)).sum::<f64>()
}

fn parity_of(vector: &[c64]) -> Option<i8> {
    let n = vector.len() / 2;
    let (a, b) = vector.split_at(n);
    if a.iter().zip(b).all(|(x, y)| (x - y).norm() < PARITY_TOL) {
        Some(1)
    } else if a.iter().zip(b).all(|(x, y)| (x + y).norm() < PARITY_TOL) {
        Some(-1)
    } else {
        None
    }
}

fn sort_modes(modes: &mut [EigenMode]) {
    modes.sort_by(|a, b| {
        a.gamma()
            .total_cmp(&b.gamma())
            .then(a.delta().total_cmp(&b.delta()))
            .then(a.parity.cmp(&b.parity))
    });
}

/// Full eigendecomposition, sorted by ascending decay rate. Mirror-symmetric
/// scalar Hamiltonians are solved block by parity.
pub fn diagonalize(h: &EffectiveHamiltonian) -> Result<Vec<EigenMode>> {
    diagonalize_with_mode(h, None)
}

/// As [`diagonalize`], also filling Gaussian overlaps against `mode`.
pub fn diagonalize_with_mode(
    h: &EffectiveHamiltonian,
    mode: Option<&GaussianMode>,
) -> Result<Vec<EigenMode>> {
    let use_blocks = h.variant == Variant::Scalar && h.is_mirror_symmetric();
    let mut modes = if use_blocks { block_modes(h)? } else { full_modes(h)? };
    if h.variant == Variant::Scalar {
        classify(&mut modes, &h.sites, mode);
    }
    sort_modes(&mut modes);
    Ok(modes)
}

/// Eigendecomposition of the whole matrix without using parity blocks.
pub fn diagonalize_full(h: &EffectiveHamiltonian) -> Result<Vec<EigenMode>> {
    let mut modes = full_modes(h)?;
    if h.variant == Variant::Scalar {
        classify(&mut modes, &h.sites, None);
    }
    sort_modes(&mut modes);
    Ok(modes)
}

fn full_modes(h: &EffectiveHamiltonian) -> Result<Vec<EigenMode>> {
    let symmetric = h.variant == Variant::Scalar && h.is_mirror_symmetric();
    Ok(linalg::eig(h.matrix.as_ref())?
        .into_iter()
        .map(|(eps, vector)| {
            let parity = if symmetric { parity_of(&vector) } else { None };
            let ipr = ipr_of(&vector);
            EigenMode { eps, vector, parity, qbar: None, ipr, overlap: None }
        })
        .collect())
}

fn block_modes(h: &EffectiveHamiltonian) -> Result<Vec<EigenMode>> {
    let (h0, h1) = h.parity_blocks()?;
    let mut out = Vec::with_capacity(h.dim());
    for (sign, block) in [(1i8, &h0 + &h1), (-1i8, &h0 - &h1)] {
        for (eps, v) in linalg::eig(block.as_ref())? {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut vector: Vec<c64> = v.iter().map(|c| c * s).collect();
            vector.extend(v.iter().map(|c| c * (s * sign as f64)));
            let ipr = ipr_of(&vector);
            out.push(EigenMode { eps, vector, parity: Some(sign), qbar: None, ipr, overlap: None });
        }
    }
    Ok(out)
}

fn classify(modes: &mut [EigenMode], sites: &[AtomSite], mode: Option<&GaussianMode>) {
    let Some(grid) = detect_grid(sites) else { return };
    let profile = mode.map(|m| sample_mode(m, sites));
    for m in modes.iter_mut() {
        if let Some(v) = m.half_vector() {
            m.qbar = Some(quasi_momentum(&v, grid.n_perp, grid.spacing));
            if let Some(e) = &profile {
                m.overlap = Some(overlap_with(&v, e));
            }
        }
    }
}

/// Builds and diagonalizes the scalar Hamiltonian of a lattice.
pub fn spectrum_of(spec: &LatticeSpec) -> Result<Vec<EigenMode>> {
    let h = crate::hamiltonian::scalar_for(spec)?;
    diagonalize_with_mode(&h, spec.mode().as_ref())
}

#[derive(Clone, Debug)]
pub struct DarkBrightPair {
    pub dark: EigenMode,
    pub bright: EigenMode,
    /// γ_d/γ_b.
    pub ratio: f64,
    /// Δ_d = Re ε_dark.
    pub shift: f64,
    /// Another mode's q̄ lay within 5% of the second-smallest.
    pub ambiguous: bool,
}

/// Picks the two modes of lowest q̄; among near-ties for the second slot,
/// prefers the opposite parity, then the larger Gaussian overlap.
pub fn find_dark_bright(modes: &[EigenMode]) -> Result<DarkBrightPair> {
    let mut ranked: Vec<&EigenMode> = modes.iter().filter(|m| m.qbar.is_some()).collect();
    if ranked.len() < 2 {
        return Err(Error::invalid("need at least two classified modes"));
    }
    let key = |m: &EigenMode| m.qbar.unwrap();
    let ov = |m: &EigenMode| m.overlap.unwrap_or(0.0);
    ranked.sort_by(|a, b| key(a).total_cmp(&key(b)).then(ov(b).total_cmp(&ov(a))));
    let first = ranked[0];
    let q2 = key(ranked[1]);
    let contenders: Vec<&EigenMode> =
        ranked[1..].iter().copied().filter(|m| key(m) <= q2 * 1.05 + 1e-12).collect();
    let second = contenders
        .iter()
        .copied()
        .max_by(|a, b| {
            let opp = |m: &EigenMode| (m.parity.is_some() && m.parity != first.parity) as u8;
            opp(a)
                .cmp(&opp(b))
                .then(ov(a).total_cmp(&ov(b)))
                .then(key(b).total_cmp(&key(a)))
        })
        .unwrap();
    let (dark, bright) =
        if first.gamma() <= second.gamma() { (first, second) } else { (second, first) };
    Ok(DarkBrightPair {
        ratio: dark.gamma() / bright.gamma(),
        shift: dark.delta(),
        dark: dark.clone(),
        bright: bright.clone(),
        ambiguous: contenders.len() > 1,
    })
}

/// Dark/bright pair of a lattice.
pub fn dark_bright_of(spec: &LatticeSpec) -> Result<DarkBrightPair> {
    find_dark_bright(&spectrum_of(spec)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Clone, Debug)]
pub struct WaistOptimum {
    pub waist: f64,
    pub pair: DarkBrightPair,
    pub at_bound: Option<Bound>,
    pub evaluations: usize,
}

/// Default search interval [0.5, L⊥] for the waist.
pub fn default_waist_bounds(spec: &LatticeSpec) -> (f64, f64) {
    (0.5, spec.side().max(0.6))
}

/// Minimizes γ_d/γ_b over the curvature waist: a 16-point log-spaced scan
/// followed by golden-section refinement around the best point.
pub fn optimize_waist(template: &LatticeSpec, bounds: (f64, f64)) -> Result<WaistOptimum> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("bad waist bounds ({lo}, {hi})")));
    }
    let objective = |w: f64| -> f64 {
        match dark_bright_of(&template.with_waist(w)) {
            Ok(p) if p.ratio.is_finite() => p.ratio,
            _ => f64::INFINITY,
        }
    };
    const COARSE: usize = 16;
    let grid: Vec<f64> = (0..COARSE)
        .map(|i| lo * (hi / lo).powf(i as f64 / (COARSE - 1) as f64))
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|&w| objective(w)).collect();
    let best = (0..COARSE).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    if !values[best].is_finite() {
        return Err(Error::NotConverged("no waist in the bounds yields a dark/bright pair".into()));
    }
    let mut a = grid[best.saturating_sub(1)].ln();
    let mut b = grid[(best + 1).min(COARSE - 1)].ln();
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let f = |x: f64| objective(x.exp());
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut evaluations = COARSE + 2;
    while b - a > 1e-4 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
        evaluations += 1;
    }
    let (mut waist, mut value) = if f1 <= f2 { (x1.exp(), f1) } else { (x2.exp(), f2) };
    if values[best] < value {
        waist = grid[best];
        value = values[best];
    }
    let _ = value;
    let at_bound = if (waist / lo).ln() < 1e-3 {
        Some(Bound::Lower)
    } else if (hi / waist).ln() < 1e-3 {
        Some(Bound::Upper)
    } else {
        None
    };
    let pair = dark_bright_of(&template.with_waist(waist))?;
    Ok(WaistOptimum { waist, pair, at_bound, evaluations })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefectStats {
    pub probability: f64,
    pub realizations: usize,
    pub mean_gamma_dark: f64,
    pub stderr_gamma_dark: f64,
    pub mean_gamma_bright: f64,
    pub stderr_gamma_bright: f64,
    /// Masks redrawn because an entire array was empty.
    pub resampled: usize,
    pub ideal_gamma_dark: f64,
    pub ideal_gamma_bright: f64,
}

fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn best_match(target: &[c64], modes: &[(c64, Vec<c64>)]) -> usize {
    let score = |v: &[c64]| linalg::inner(target, v).norm();
    (0..modes.len()).max_by(|&a, &b| score(&modes[a].1).total_cmp(&score(&modes[b].1))).unwrap()
}

/// Averages dark and bright rates over random vacancy masks. Realization i
/// uses seed `task_seed(seed, i)`, so results do not depend on scheduling.
pub fn defect_monte_carlo(
    spec: &LatticeSpec,
    p: f64,
    realizations: usize,
    seed: u64,
) -> Result<DefectStats> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::invalid(format!("vacancy probability {p} outside [0, 0.5]")));
    }
    if realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let h = crate::hamiltonian::scalar_for(spec)?;
    let pair = find_dark_bright(&diagonalize_with_mode(&h, spec.mode().as_ref())?)?;
    let per_array = spec.sites_per_array();
    let n_sites = h.dim();

    let runs: Vec<Result<(f64, f64, usize)>> = (0..realizations)
        .into_par_iter()
        .map(|i| {
            let base = task_seed(seed, i as u64);
            let mut redraws = 0;
            let mask = loop {
                let m = DefectMask::sample(n_sites, p, task_seed(base, redraws as u64))?;
                let in_one = m.missing.iter().filter(|&&s| s < per_array).count();
                let in_two = m.missing.len() - in_one;
                if in_one < per_array && in_two < per_array {
                    break m;
                }
                redraws += 1;
            };
            let hd = h.apply_defects(&mask)?;
            let keep: Vec<usize> = (0..n_sites).filter(|s| !mask.missing.contains(s)).collect();
            let restrict = |v: &[c64]| keep.iter().map(|&s| v[s]).collect::<Vec<c64>>();
            let modes = linalg::eig(hd.matrix.as_ref())?;
            let d = best_match(&restrict(&pair.dark.vector), &modes);
            let b = best_match(&restrict(&pair.bright.vector), &modes);
            Ok((-2.0 * modes[d].0.im, -2.0 * modes[b].0.im, redraws))
        })
        .collect();
    let runs: Vec<(f64, f64, usize)> = runs.into_iter().collect::<Result<_>>()?;
    let dark: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let bright: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (md, sd) = mean_stderr(&dark);
    let (mb, sb) = mean_stderr(&bright);
    Ok(DefectStats {
        probability: p,
        realizations,
        mean_gamma_dark: md,
        stderr_gamma_dark: sd,
        mean_gamma_bright: mb,
        stderr_gamma_bright: sb,
        resampled: runs.iter().map(|r| r.2).sum(),
        ideal_gamma_dark: pair.dark.gamma(),
        ideal_gamma_bright: pair.bright.gamma(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoExcitationMethod {
    /// Full diagonalization of the (parity-even) two-excitation sector.
    Exact,
    /// Rayleigh quotient refined by shift-invert iteration.
    Refined,
}

#[derive(Clone, Debug)]
pub struct TwoExcitationRates {
    /// Decay rate per excitation from the two-excitation eigenvalue, −Im ε₂.
    pub exact: f64,
    /// First-order estimate [γ_d(1−p) + γ_d + γ_e·p]/2.
    pub perturbative: f64,
    /// p = Σ|v_d|⁴ over one array.
    pub ipr: f64,
    pub gamma_dark: f64,
    pub eigenvalue: c64,
    pub method: TwoExcitationMethod,
    pub sector_dim: usize,
}

/// Orbits of site pairs under the array exchange; the parity-even sector
/// has one basis vector per orbit.
struct EvenSector {
    reps: Vec<(usize, usize)>,
    size: Vec<usize>,
    orbit_of: HashMap<(usize, usize), usize>,
}

fn even_sector(n: usize) -> EvenSector {
    let half = n / 2;
    let mirror = |s: usize| if s < half { s + half } else { s - half };
    let mut reps = Vec::new();
    let mut size = Vec::new();
    let mut orbit_of = HashMap::new();
    for j in 0..n {
        for k in j + 1..n {
            if orbit_of.contains_key(&(j, k)) {
                continue;
            }
            let (a, b) = (mirror(j), mirror(k));
            let img = if a < b { (a, b) } else { (b, a) };
            let idx = reps.len();
            reps.push((j, k));
            orbit_of.insert((j, k), idx);
            if img != (j, k) {
                orbit_of.insert(img, idx);
                size.push(2);
            } else {
                size.push(1);
            }
        }
    }
    EvenSector { reps, size, orbit_of }
}

fn even_sector_matrix(h: &Mat<c64>, sector: &EvenSector) -> Mat<c64> {
    let d = sector.reps.len();
    let mut m = Mat::<c64>::zeros(d, d);
    for (o, &(j, k)) in sector.reps.iter().enumerate() {
        let so = sector.size[o] as f64;
        for_each_pair_coupling(h, j, k, |a, b, v| {
            let t = sector.orbit_of[&(a, b)];
            m[(o, t)] += v * (so / sector.size[t] as f64).sqrt();
        });
    }
    m
}

/// Two-excitation decay of the dark pair state (σ_d⁺)²|G⟩ versus the
/// first-order estimate.
pub fn two_excitation_rate(
    spec: &LatticeSpec,
    method: TwoExcitationMethod,
) -> Result<TwoExcitationRates> {
    let h = crate::hamiltonian::scalar_for(spec)?;
    let pair = find_dark_bright(&diagonalize_with_mode(&h, spec.mode().as_ref())?)?;
    let c = &pair.dark.vector;
    let n = h.dim();
    let gamma_d = pair.dark.gamma();
    let p = pair.dark.ipr;
    let perturbative = 0.5 * (gamma_d * (1.0 - p) + gamma_d + p);

    if method == TwoExcitationMethod::Exact && n > TWO_EXCITATION_CAP {
        return Err(Error::DimensionTooLarge { atoms: n, cap: TWO_EXCITATION_CAP });
    }
    // The pair state is even under array exchange, so only that sector is needed.
    let sector = even_sector(n);
    if sector.reps.len() > 5000 {
        return Err(Error::DimensionTooLarge { atoms: n, cap: TWO_EXCITATION_CAP });
    }
    let m = even_sector_matrix(&h.matrix, &sector);
    let target: Vec<c64> = sector
        .reps
        .iter()
        .zip(&sector.size)
        .map(|(&(j, k), &s)| c[j] * c[k] * (s as f64).sqrt())
        .collect();

    let eigenvalue = match method {
        TwoExcitationMethod::Exact => {
            let modes = linalg::eig(m.as_ref())?;
            let best = best_match(&target, &modes);
            modes[best].0
        }
        TwoExcitationMethod::Refined => refine(&m, &target)?,
    };
    Ok(TwoExcitationRates {
        exact: -eigenvalue.im,
        perturbative,
        ipr: p,
        gamma_dark: gamma_d,
        eigenvalue,
        method,
        sector_dim: sector.reps.len(),
    })
}

/// Bilinear Rayleigh quotient vᵀMv / vᵀv (stationary for complex-symmetric M).
pub fn rayleigh_quotient(m: &Mat<c64>, v: &[c64]) -> c64 {
    let mut mv = vec![c64::new(0.0, 0.0); v.len()];
    linalg::matvec(m.as_ref(), v, &mut mv);
    linalg::bilinear(v, &mv) / linalg::bilinear(v, v)
}

fn refine(m: &Mat<c64>, start: &[c64]) -> Result<c64> {
    let mut shift = rayleigh_quotient(m, start);
    let mut v = start.to_vec();
    let d = m.nrows();
    let mut shifted = m.clone();
    for i in 0..d {
        shifted[(i, i)] -= shift;
    }
    // Nudge off the exact quotient so the first solve is well posed.
    let nudge = c64::new(1e-9, 1e-9) * (1.0 + shift.norm());
    for i in 0..d {
        shifted[(i, i)] -= nudge;
    }
    let lu = shifted.partial_piv_lu();
    use faer::prelude::Solve;
    for _ in 0..20 {
        let rhs = Mat::from_fn(d, 1, |i, _| v[i]);
        let x = lu.solve(&rhs);
        v = (0..d).map(|i| x[(i, 0)]).collect();
        gauge(&mut v);
        let next = rayleigh_quotient(m, &v);
        let moved = (next - shift).norm();
        shift = next;
        if moved < 1e-6 {
            return Ok(shift);
        }
    }
    Err(Error::NotConverged("shift-invert refinement of the two-excitation state".into()))
}

/// Field radiated by amplitudes `c` on `sites`, projected on `p`.
pub fn field_profile(
    c: &[c64],
    sites: &[AtomSite],
    grid: &[Vec3],
    p: &Polarization,
) -> Result<Vec<c64>> {
    if c.len() != sites.len() {
        return Err(Error::invalid("amplitude count does not match site count"));
    }
    grid.iter()
        .map(|r| {
            let mut acc = c64::new(0.0, 0.0);
            for (cj, s) in c.iter().zip(sites) {
                let d = [r[0] - s.position[0], r[1] - s.position[1], r[2] - s.position[2]];
                if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < 1e-3 {
                    return Err(Error::invalid(format!("grid point {r:?} sits on an atom")));
                }
                acc += cj * scalar_green(d, p);
            }
            Ok(acc)
        })
        .collect()
}

/// Dark and bright doublets of the vector-dipole (J = 0 → J = 1) model.
#[derive(Clone, Debug)]
pub struct FourLevelPairs {
    pub dark: [c64; 2],
    pub bright: [c64; 2],
    pub dark_splitting: f64,
    pub bright_splitting: f64,
    pub gamma_dark: f64,
    pub gamma_bright: f64,
}

/// Diagonalizes the vector model and picks the four modes with the largest
/// weight on the in-plane-polarized Gaussian Bell states.
pub fn four_level_pairs(spec: &LatticeSpec) -> Result<FourLevelPairs> {
    let sites = build_arrays(spec)?;
    let h = build_vector(&sites)?;
    let n = sites.len();
    let half = n / 2;
    let profile: Vec<f64> = match spec.mode() {
        Some(m) => sites[..half].iter().map(|s| m.field(s.position).norm()).collect(),
        None => vec![1.0; half],
    };
    let mut targets = Vec::new();
    for sign in [1.0, -1.0] {
        for axis in 0..2 {
            let mut t = vec![c64::new(0.0, 0.0); 3 * n];
            for j in 0..half {
                t[3 * j + axis] = c64::from(profile[j]);
                t[3 * (half + j) + axis] = c64::from(sign * profile[j]);
            }
            let norm = linalg::norm(&t);
            t.iter_mut().for_each(|c| *c /= norm);
            targets.push(t);
        }
    }
    let modes = linalg::eig(h.matrix.as_ref())?;
    let weight = |v: &[c64]| targets.iter().map(|t| linalg::inner(t, v).norm_sqr()).sum::<f64>();
    let mut idx: Vec<usize> = (0..modes.len()).collect();
    idx.sort_by(|&a, &b| weight(&modes[b].1).total_cmp(&weight(&modes[a].1)));
    let mut top: Vec<c64> = idx[..4].iter().map(|&i| modes[i].0).collect();
    top.sort_by(|a, b| b.im.total_cmp(&a.im));
    let (dark, bright) = ([top[0], top[1]], [top[2], top[3]]);
    Ok(FourLevelPairs {
        dark_splitting: (dark[0] - dark[1]).norm(),
        bright_splitting: (bright[0] - bright[1]).norm(),
        gamma_dark: -(dark[0].im + dark[1].im),
        gamma_bright: -(bright[0].im + bright[1].im),
        dark,
        bright,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_scalar, scalar_for};
    use proptest::prelude::*;

    #[test]
    fn single_atom_mode() {
        let sites = build_arrays(&LatticeSpec::flat(1, 1.0, 1.0)).unwrap();
        let h = build_scalar(&sites[..1], &Polarization::circular()).unwrap();
        let modes = diagonalize(&h).unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].eps - c64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((modes[0].gamma() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_atom_pair_matches_closed_form() {
        let spec = LatticeSpec::flat(1, 1.0, 1.37);
        let pair = dark_bright_of(&spec).unwrap();
        let g = scalar_green([0.0, 0.0, 1.37], &Polarization::circular());
        let plus = c64::new(0.0, -0.5) * (1.0 + g);
        let minus = c64::new(0.0, -0.5) * (1.0 - g);
        let (d, b) = if (-plus.im) < (-minus.im) { (plus, minus) } else { (minus, plus) };
        assert!((pair.dark.eps - d).norm() < 1e-12);
        assert!((pair.bright.eps - b).norm() < 1e-12);
    }

    #[test]
    fn quasi_momentum_plane_waves() {
        let n = 6;
        let uniform = vec![c64::from(1.0 / n as f64); n * n];
        assert!(quasi_momentum(&uniform, n, 0.5).abs() < 1e-12);
        let alternating: Vec<c64> = (0..n * n)
            .map(|i| c64::from(if (i / n) % 2 == 0 { 1.0 } else { -1.0 } / n as f64))
            .collect();
        assert!((quasi_momentum(&alternating, n, 0.5) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn overlap_extremes() {
        let spec = LatticeSpec::curved(6, 0.5, 4.0, 1.2);
        let sites = build_arrays(&spec).unwrap();
        let mode = spec.mode().unwrap();
        let mut e = sample_mode(&mode, &sites);
        let norm = linalg::norm(&e);
        e.iter_mut().for_each(|c| *c /= norm);
        assert!((gaussian_overlap(&e, &mode, &sites) - 1.0).abs() < 1e-12);
        let odd: Vec<c64> = (0..36)
            .map(|i| c64::from(if i / 6 < 3 { 1.0 } else { -1.0 } / 6.0))
            .collect();
        assert!(gaussian_overlap(&odd, &mode, &sites) < 1e-12);
    }

    #[test]
    fn modes_satisfy_eigen_equation_and_sum_rules() {
        let h = scalar_for(&LatticeSpec::curved(5, 0.6, 3.0, 1.3)).unwrap();
        let modes = diagonalize(&h).unwrap();
        let hnorm = h.matrix.norm_l2();
        let mut sum_gamma = 0.0;
        let mut sum_delta = 0.0;
        for m in &modes {
            let mut hv = vec![c64::new(0.0, 0.0); h.dim()];
            linalg::matvec(h.matrix.as_ref(), &m.vector, &mut hv);
            let res: f64 = hv.iter().zip(&m.vector).map(|(a, b)| (a - m.eps * b).norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * hnorm);
            assert!((linalg::norm(&m.vector) - 1.0).abs() < 1e-12);
            let p = m.parity.unwrap() as f64;
            for j in 0..25 {
                assert!((m.vector[j] - p * m.vector[25 + j]).norm() < 1e-6);
            }
            sum_gamma += m.gamma();
            sum_delta += m.delta();
        }
        assert!((sum_gamma - 50.0).abs() < 1e-8 * 50.0);
        assert!(sum_delta.abs() < 1e-8 * 50.0);
        assert!(modes.windows(2).all(|w| w[0].gamma() <= w[1].gamma()));
    }

    #[test]
    fn full_and_block_paths_agree() {
        let h = scalar_for(&LatticeSpec::curved(3, 0.5, 2.5, 1.0)).unwrap();
        let a = diagonalize(&h).unwrap();
        let b = diagonalize_full(&h).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.eps - y.eps).norm() < 1e-10);
            assert_eq!(x.parity, y.parity);
        }
    }

    #[test]
    fn dark_parity_follows_separation() {
        // k₀L = mπ: which parity is dark alternates with m.
        let even = dark_bright_of(&LatticeSpec::flat(6, 0.5, 1.0)).unwrap();
        let odd = dark_bright_of(&LatticeSpec::flat(6, 0.5, 1.5)).unwrap();
        assert_ne!(even.dark.parity, odd.dark.parity);
        assert_ne!(even.dark.parity, even.bright.parity);
        assert!(even.ratio < 0.2 && odd.ratio < 0.2);
    }

    #[test]
    fn waist_optimum_is_local_minimum() {
        let template = LatticeSpec::curved(6, 0.5, 3.0, 1.0);
        let opt = optimize_waist(&template, default_waist_bounds(&template)).unwrap();
        let worse = dark_bright_of(&template.with_waist(1.5 * opt.waist)).unwrap();
        assert!(opt.pair.ratio <= worse.ratio);
        assert!(opt.pair.dark.overlap.unwrap() > 0.8);
    }

    #[test]
    fn field_of_single_atom() {
        let sites = build_arrays(&LatticeSpec::flat(1, 1.0, 2.0)).unwrap();
        let p = Polarization::circular();
        let grid: Vec<Vec3> = (1..5).map(|k| [0.0, 0.0, -1.0 + 0.37 * k as f64]).collect();
        let f = field_profile(&[c64::from(1.0)], &sites[..1], &grid, &p).unwrap();
        for (r, v) in grid.iter().zip(&f) {
            let g = scalar_green([0.0, 0.0, r[2] + 1.0], &p);
            assert!((v.norm() - g.norm()).abs() < 1e-14);
        }
        assert!(field_profile(&[c64::from(1.0)], &sites[..1], &[[0.0, 0.0, -1.0]], &p).is_err());
    }

    #[test]
    fn defect_free_monte_carlo_is_exact() {
        let spec = LatticeSpec::curved(4, 0.5, 3.0, 1.0);
        let stats = defect_monte_carlo(&spec, 0.0, 5, 3).unwrap();
        assert_eq!(stats.stderr_gamma_dark, 0.0);
        assert!((stats.mean_gamma_dark - stats.ideal_gamma_dark).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let spec = LatticeSpec::curved(4, 0.5, 3.0, 1.0);
        let a = defect_monte_carlo(&spec, 0.05, 12, 99).unwrap();
        let b = defect_monte_carlo(&spec, 0.05, 12, 99).unwrap();
        assert_eq!(a.mean_gamma_dark.to_bits(), b.mean_gamma_dark.to_bits());
        assert_eq!(a.stderr_gamma_bright.to_bits(), b.stderr_gamma_bright.to_bits());
    }

    #[test]
    fn two_excitation_rayleigh_quotient_identity() {
        // For a pair state built from an eigenvector c (bilinear norm 1),
        // vᵀTv/vᵀv = 2ε − 2(ε + i/2)Q/(1 − Q) with Q = Σ c_j⁴; its first-order
        // expansion is ε(1 − p) + ε − (i/2)p with p = 2Q.
        let h = scalar_for(&LatticeSpec::curved(4, 0.5, 2.0, 1.0)).unwrap();
        let t = h.two_excitation().unwrap();
        let pair = find_dark_bright(&diagonalize(&h).unwrap()).unwrap();
        let mut c = pair.dark.vector.clone();
        let bn = linalg::bilinear(&c, &c).sqrt();
        c.iter_mut().for_each(|x| *x /= bn);
        let n = h.dim();
        let mut v = Vec::with_capacity(t.dim());
        for j in 0..n {
            for k in j + 1..n {
                v.push(c[j] * c[k]);
            }
        }
        let rq = rayleigh_quotient(&t.matrix, &v);
        let eps = pair.dark.eps;
        let q: c64 = c.iter().map(|x| x.powi(4)).sum();
        let i_half = c64::new(0.0, 0.5);
        let exact = 2.0 * eps - 2.0 * (eps + i_half) * q / (1.0 - q);
        assert!((rq - exact).norm() < 1e-8 * exact.norm(), "{rq} vs {exact}");
        let p = 2.0 * q;
        let first_order = eps * (1.0 - p) + eps - i_half * p;
        assert!((rq - first_order).norm() < 0.05 * first_order.norm());
    }

    #[test]
    fn even_sector_matches_full_sector() {
        let h = scalar_for(&LatticeSpec::curved(2, 0.6, 1.5, 1.0)).unwrap();
        let full = h.two_excitation().unwrap();
        let sector = even_sector(h.dim());
        let m = even_sector_matrix(&h.matrix, &sector);
        let mut ev_full = linalg::eigenvalues(full.matrix.as_ref()).unwrap();
        for e in linalg::eigenvalues(m.as_ref()).unwrap() {
            let k = (0..ev_full.len())
                .min_by(|&a, &b| (ev_full[a] - e).norm().total_cmp(&(ev_full[b] - e).norm()))
                .unwrap();
            assert!((ev_full[k] - e).norm() < 1e-10);
            ev_full.remove(k);
        }
        for i in 0..m.nrows() {
            for j in 0..m.nrows() {
                assert!((m[(i, j)] - m[(j, i)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn two_excitation_methods_agree() {
        let spec = LatticeSpec::curved(3, 0.5, 2.0, 0.9);
        let a = two_excitation_rate(&spec, TwoExcitationMethod::Exact).unwrap();
        let b = two_excitation_rate(&spec, TwoExcitationMethod::Refined).unwrap();
        assert!((a.eigenvalue - b.eigenvalue).norm() < 1e-6);
        assert!(a.exact > a.gamma_dark);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn dft_is_unitary(n in 1usize..7, spacing in 0.2..1.5f64, seed in any::<u64>()) {
            let mut s = seed;
            let v: Vec<c64> = (0..n * n).map(|_| {
                s = crate::seeding::splitmix64(s);
                let a = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                s = crate::seeding::splitmix64(s);
                let b = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                c64::new(a, b)
            }).collect();
            let f = dft2(&v, n, spacing);
            let lhs: f64 = f.iter().map(|c| c.norm_sqr()).sum();
            let rhs: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn exchanging_arrays_preserves_modes_up_to_parity(n in 1usize..4, sep in 0.5..4.0f64, waist in 0.7..3.0f64) {
            let spec = LatticeSpec::curved(n, 0.6, sep, waist);
            let h = scalar_for(&spec).unwrap();
            let modes = diagonalize(&h).unwrap();
            let half = h.dim() / 2;
            for m in &modes {
                let swapped: Vec<c64> = m.vector[half..].iter().chain(&m.vector[..half]).copied().collect();
                let p = m.parity.unwrap() as f64;
                for (a, b) in swapped.iter().zip(&m.vector) {
                    prop_assert!((a - p * b).norm() < 1e-9);
                }
            }
        }
    }
}
