//! Effective non-hermitian Hamiltonians of the two arrays in the
//! single-excitation sector (scalar or vector dipoles) and the
//! two-excitation sector.

use std::collections::BTreeSet;
use std::io::Write;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::AtomSite;
use crate::greens::{dyadic_green, scalar_green, Polarization};
use crate::{c64, Error, Result, Vec3};

/// Largest atom count for which the two-excitation sector is built densely.
pub const TWO_EXCITATION_CAP: usize = 80;

const MIRROR_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Scalar,
    Vector,
    TwoExcitation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisLabel {
    Site(usize),
    /// Site and Cartesian dipole axis (0 = x, 1 = y, 2 = z).
    SiteAxis(usize, usize),
    /// Two excited sites, first < second.
    Pair(usize, usize),
}

#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    pub matrix: Mat<c64>,
    pub basis: Vec<BasisLabel>,
    pub variant: Variant,
    /// Sites referenced by the basis labels.
    pub sites: Vec<AtomSite>,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn check_distinct(sites: &[AtomSite]) -> Result<()> {
    for i in 0..sites.len() {
        for j in 0..i {
            let d = sub(sites[i].position, sites[j].position);
            if d.iter().all(|c| c.abs() < 1e-12) {
                return Err(Error::invalid(format!("sites {j} and {i} coincide")));
            }
        }
    }
    Ok(())
}

/// H_{jj'} = −(i/2)·p*·Ĝ(r_j − r_j')·p.
pub fn build_scalar(sites: &[AtomSite], p: &Polarization) -> Result<EffectiveHamiltonian> {
    if sites.is_empty() {
        return Err(Error::invalid("no sites"));
    }
    check_distinct(sites)?;
    let n = sites.len();
    let half_i = c64::new(0.0, -0.5);
    let mut m = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = half_i;
        for l in 0..j {
            let v = half_i * scalar_green(sub(sites[j].position, sites[l].position), p);
            m[(j, l)] = v;
            m[(l, j)] = v;
        }
    }
    Ok(EffectiveHamiltonian {
        matrix: m,
        basis: (0..n).map(BasisLabel::Site).collect(),
        variant: Variant::Scalar,
        sites: sites.to_vec(),
    })
}

/// Three dipole axes per site; entries −(i/2)·Ĝ_{ab}(r_j − r_j').
pub fn build_vector(sites: &[AtomSite]) -> Result<EffectiveHamiltonian> {
    if sites.is_empty() {
        return Err(Error::invalid("no sites"));
    }
    check_distinct(sites)?;
    let n = sites.len();
    let half_i = c64::new(0.0, -0.5);
    let mut m = Mat::<c64>::zeros(3 * n, 3 * n);
    for j in 0..n {
        for l in 0..=j {
            let g = dyadic_green(sub(sites[j].position, sites[l].position));
            for a in 0..3 {
                for b in 0..3 {
                    let v = half_i * g[a][b];
                    m[(3 * j + a, 3 * l + b)] = v;
                    m[(3 * l + b, 3 * j + a)] = v;
                }
            }
        }
    }
    let basis = (0..n).flat_map(|j| (0..3).map(move |a| BasisLabel::SiteAxis(j, a))).collect();
    Ok(EffectiveHamiltonian { matrix: m, basis, variant: Variant::Vector, sites: sites.to_vec() })
}

/// Index of the pair (j, k), j < k, in lexicographic order over n sites.
pub fn pair_index(j: usize, k: usize, n: usize) -> usize {
    debug_assert!(j < k && k < n);
    j * (2 * n - j - 1) / 2 + (k - j - 1)
}

/// Visits the nonzero two-excitation couplings out of the pair (j, k):
/// one excitation hops while the other stays put.
pub(crate) fn for_each_pair_coupling(
    h: &Mat<c64>,
    j: usize,
    k: usize,
    mut f: impl FnMut(usize, usize, c64),
) {
    let n = h.nrows();
    for l in 0..n {
        if l != k {
            let (a, b) = if l < k { (l, k) } else { (k, l) };
            f(a, b, h[(j, l)]);
        }
    }
    for m in 0..n {
        if m != j {
            let (a, b) = if m < j { (m, j) } else { (j, m) };
            f(a, b, h[(k, m)]);
        }
    }
}

impl EffectiveHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn require(&self, v: Variant) -> Result<()> {
        if self.variant != v {
            return Err(Error::invalid(format!("expected {v:?} Hamiltonian, got {:?}", self.variant)));
        }
        Ok(())
    }

    /// True when sites come in mirror pairs: the second half reflects the
    /// first through z = 0, in the same order.
    pub fn is_mirror_symmetric(&self) -> bool {
        mirror_symmetric(&self.sites)
    }

    /// Within-array block H₀ and cross-array block H₁.
    pub fn parity_blocks(&self) -> Result<(Mat<c64>, Mat<c64>)> {
        self.require(Variant::Scalar)?;
        if !self.is_mirror_symmetric() {
            return Err(Error::invalid("parity blocks need mirror-symmetric sites"));
        }
        let n = self.sites.len() / 2;
        let h0 = Mat::from_fn(n, n, |i, j| self.matrix[(i, j)]);
        let h1 = Mat::from_fn(n, n, |i, j| self.matrix[(i, n + j)]);
        Ok((h0, h1))
    }

    /// Adds Δ₁ to the diagonal of array 1 and Δ₂ to that of array 2.
    pub fn add_detuning(&self, d1: f64, d2: f64) -> Result<Self> {
        self.require(Variant::Scalar)?;
        let mut out = self.clone();
        for (i, s) in self.sites.iter().enumerate() {
            out.matrix[(i, i)] += if s.index.jz == 1 { d1 } else { d2 };
        }
        Ok(out)
    }

    /// Deletes the rows and columns of missing sites.
    pub fn apply_defects(&self, mask: &DefectMask) -> Result<Self> {
        self.require(Variant::Scalar)?;
        let keep: Vec<usize> = (0..self.dim()).filter(|i| !mask.missing.contains(i)).collect();
        if keep.is_empty() {
            return Err(Error::invalid("defect mask removes every site"));
        }
        if let Some(&bad) = mask.missing.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::invalid(format!("defect index {bad} out of range")));
        }
        let m = Mat::from_fn(keep.len(), keep.len(), |a, b| self.matrix[(keep[a], keep[b])]);
        Ok(Self {
            matrix: m,
            basis: (0..keep.len()).map(BasisLabel::Site).collect(),
            variant: Variant::Scalar,
            sites: keep.iter().map(|&i| self.sites[i]).collect(),
        })
    }

    /// Sector with two excitations on distinct sites.
    pub fn two_excitation(&self) -> Result<Self> {
        self.require(Variant::Scalar)?;
        let n = self.dim();
        if n > TWO_EXCITATION_CAP {
            return Err(Error::DimensionTooLarge { atoms: n, cap: TWO_EXCITATION_CAP });
        }
        if n < 2 {
            return Err(Error::invalid("two excitations need at least two sites"));
        }
        let dim = n * (n - 1) / 2;
        let mut m = Mat::<c64>::zeros(dim, dim);
        let mut basis = Vec::with_capacity(dim);
        for j in 0..n {
            for k in j + 1..n {
                let row = pair_index(j, k, n);
                basis.push(BasisLabel::Pair(j, k));
                for_each_pair_coupling(&self.matrix, j, k, |a, b, v| {
                    m[(row, pair_index(a, b, n))] += v;
                });
            }
        }
        Ok(Self { matrix: m, basis, variant: Variant::TwoExcitation, sites: self.sites.clone() })
    }

    /// Writes `row,col,re,im` lines for every entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,re,im")?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let c = self.matrix[(i, j)];
                writeln!(w, "{i},{j},{:.16e},{:.16e}", c.re, c.im)?;
            }
        }
        Ok(())
    }
}

pub fn mirror_symmetric(sites: &[AtomSite]) -> bool {
    if sites.len() % 2 != 0 || sites.is_empty() {
        return false;
    }
    let n = sites.len() / 2;
    (0..n).all(|i| {
        let (a, b) = (&sites[i], &sites[n + i]);
        a.index.jz == 1
            && b.index.jz == 2
            && (a.position[0] - b.position[0]).abs() < MIRROR_TOL
            && (a.position[1] - b.position[1]).abs() < MIRROR_TOL
            && (a.position[2] + b.position[2]).abs() < MIRROR_TOL
    })
}

/// Build H for a lattice spec with circular polarization.
pub fn scalar_for(spec: &crate::geometry::LatticeSpec) -> Result<EffectiveHamiltonian> {
    let sites = crate::geometry::build_arrays(spec)?;
    build_scalar(&sites, &Polarization::circular())
}

/// Set of vacant sites.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectMask {
    pub missing: BTreeSet<usize>,
    pub probability: f64,
    pub seed: u64,
}

impl DefectMask {
    /// Independent Bernoulli(p) vacancy on each of `n_sites` sites.
    pub fn sample(n_sites: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("vacancy probability {p} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let missing = (0..n_sites).filter(|_| rng.random::<f64>() < p).collect();
        Ok(Self { missing, probability: p, seed })
    }

    pub fn from_sites(missing: impl IntoIterator<Item = usize>) -> Self {
        Self { missing: missing.into_iter().collect(), probability: 0.0, seed: 0 }
    }
}
