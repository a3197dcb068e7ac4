//! Diamond lattice around the NV vacancy, coordination shells, and random
//! ¹³C occupations.
//!
//! Sites are held on the integer grid of a/4 (a = 3.567 Å): sublattice A
//! has even coordinates summing to 0 mod 4, sublattice B odd coordinates
//! summing to 3 mod 4. The vacancy is the A site at the origin and the
//! nitrogen the B site at (1,1,1), so the NV axis is [111].

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::numeric::Num;
use crate::{Error, Result};

/// Conventional cubic lattice constant of diamond, Å.
pub const LATTICE_CONSTANT: f64 = 3.567;

/// Upper bound on generated sites.
pub const MAX_SITES: usize = 10_000_000;

const NITROGEN: [i32; 3] = [1, 1, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSite {
    /// Position in units of a/4.
    pub grid: [i32; 3],
    /// Position in Å, vacancy at the origin.
    pub position: [f64; 3],
    /// 1-based shell index, 0 when unclassified.
    pub shell: u32,
    pub sublattice: Sublattice,
}

impl LatticeSite {
    fn from_grid(grid: [i32; 3]) -> Self {
        let q = LATTICE_CONSTANT / 4.0;
        let sublattice = if grid[0].rem_euclid(2) == 0 { Sublattice::A } else { Sublattice::B };
        Self { grid, position: [grid[0] as f64 * q, grid[1] as f64 * q, grid[2] as f64 * q], shell: 0, sublattice }
    }

    /// |r|² in units of (a/4)²; exact.
    pub fn grid_norm2(&self) -> i64 {
        self.grid.iter().map(|&c| i64::from(c) * i64::from(c)).sum()
    }

    pub fn distance(&self) -> f64 {
        (self.grid_norm2() as f64).sqrt() * LATTICE_CONSTANT / 4.0
    }

    /// Projection on the NV axis in units of a/(4√3), positive towards N.
    pub fn axial_projection(&self) -> i32 {
        self.grid.iter().sum()
    }

    /// cos θ between the site vector and the NV axis.
    pub fn cos_theta(&self) -> f64 {
        self.axial_projection() as f64 / (3.0 * self.grid_norm2() as f64).sqrt()
    }
}

/// True when the a/4 grid point is a diamond lattice site.
pub fn is_diamond_site(g: [i32; 3]) -> bool {
    let sum = g[0] + g[1] + g[2];
    let parity = g.map(|c| c.rem_euclid(2));
    match parity {
        [0, 0, 0] => sum.rem_euclid(4) == 0,
        [1, 1, 1] => sum.rem_euclid(4) == 3,
        _ => false,
    }
}

/// Rough site count inside a sphere: 8 atoms per a³.
pub fn estimated_site_count(radius: f64) -> usize {
    let v = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
    (8.0 * v / LATTICE_CONSTANT.powi(3)).ceil() as usize
}

/// All carbon sites within `radius` Å of the vacancy (vacancy and nitrogen
/// excluded), sorted by distance then grid coordinates. Shells are not yet
/// assigned.
pub fn generate_lattice(radius: f64) -> Result<Vec<LatticeSite>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::validation("lattice radius must be positive"));
    }
    let estimated = estimated_site_count(radius);
    if estimated > MAX_SITES {
        return Err(Error::ResourceLimit { radius, estimated, limit: MAX_SITES });
    }
    let r_grid = radius * 4.0 / LATTICE_CONSTANT;
    let r2 = r_grid * r_grid;
    let m = r_grid.floor() as i32;
    let mut sites = Vec::with_capacity(estimated);
    for x in -m..=m {
        for y in -m..=m {
            for z in -m..=m {
                let g = [x, y, z];
                if g == [0, 0, 0] || g == NITROGEN || !is_diamond_site(g) {
                    continue;
                }
                let n2 = (x * x + y * y + z * z) as f64;
                if n2 <= r2 * (1.0 + 1e-12) {
                    sites.push(LatticeSite::from_grid(g));
                }
            }
        }
    }
    sites.sort_by_key(|s| (s.grid_norm2(), s.grid));
    Ok(sites)
}

/// Problem found while assigning shells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShellWarning {
    /// The outermost shell holds fewer sites than the full lattice has at
    /// that distance (the radius cut through it).
    IncompleteShell { shell: u32, found: usize, expected: usize },
}

/// Sites with shell indices assigned.
#[derive(Debug, Clone)]
pub struct ShellAssignment {
    pub sites: Vec<LatticeSite>,
    pub warnings: Vec<ShellWarning>,
}

impl ShellAssignment {
    pub fn shell(&self, index: u32) -> impl Iterator<Item = &LatticeSite> {
        self.sites.iter().filter(move |s| s.shell == index)
    }

    pub fn shell_count(&self, index: u32) -> usize {
        self.shell(index).count()
    }

    /// Sizes of the C₃ᵥ classes within a shell, ascending.
    pub fn symmetry_classes(&self, index: u32) -> Vec<usize> {
        let mut by_class: std::collections::BTreeMap<(i64, i32), usize> = Default::default();
        for s in self.shell(index) {
            *by_class.entry((s.grid_norm2(), s.axial_projection())).or_default() += 1;
        }
        let mut sizes: Vec<usize> = by_class.into_values().collect();
        sizes.sort_unstable();
        sizes
    }
}

/// Third-neighbour distance class (|r|² = 11 in (a/4)²).
const THIRD_NEIGHBOUR_NORM2: i64 = 11;
/// The C₃ᵥ orbit of the third-neighbour class farthest from the nitrogen
/// (axial projection −5), split off as its own shell.
const FAR_THIRD_NEIGHBOUR_AXIAL: i32 = -5;

/// Assign shell indices by distance class from the vacancy.
///
/// Shell 1 is the three dangling-bond carbons and shell 2 the twelve second
/// neighbours. The twelve third neighbours (2.958 Å) form three C₃ᵥ orbits
/// of 6, 3 and 3 sites; the 6- and 3-site orbits nearest the nitrogen make up
/// shell 3 (the nine sites carrying the ~14 MHz contact coupling) and the
/// remaining orbit is shell 4. Every later distance class is shifted up by
/// one.
pub fn classify_shells(sites: &[LatticeSite]) -> ShellAssignment {
    let mut classes: Vec<i64> = sites.iter().map(LatticeSite::grid_norm2).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut out: Vec<LatticeSite> = sites.to_vec();
    for s in &mut out {
        let class = classes.binary_search(&s.grid_norm2()).unwrap() as u32 + 1;
        let third = classes.binary_search(&THIRD_NEIGHBOUR_NORM2).ok().map(|k| k as u32 + 1);
        s.shell = match third {
            Some(t) if class == t && s.axial_projection() == FAR_THIRD_NEIGHBOUR_AXIAL => class + 1,
            Some(t) if class > t => class + 1,
            _ => class,
        };
    }

    let mut warnings = Vec::new();
    if let Some(&outer) = classes.last() {
        let found = out.iter().filter(|s| s.grid_norm2() == outer).count();
        let expected = count_sites_at_norm2(outer);
        if found < expected {
            let shell = out.iter().filter(|s| s.grid_norm2() == outer).map(|s| s.shell).max().unwrap_or(0);
            warnings.push(ShellWarning::IncompleteShell { shell, found, expected });
        }
    }
    ShellAssignment { sites: out, warnings }
}

fn count_sites_at_norm2(norm2: i64) -> usize {
    let m = (norm2 as f64).sqrt().floor() as i32;
    let mut count = 0;
    for x in -m..=m {
        for y in -m..=m {
            let rem = norm2 - i64::from(x * x + y * y);
            if rem < 0 {
                continue;
            }
            let z = (rem as f64).sqrt().round() as i32;
            for zz in if z == 0 { vec![0] } else { vec![z, -z] } {
                let g = [x, y, zz];
                if i64::from(zz * zz) == rem && g != [0, 0, 0] && g != NITROGEN && is_diamond_site(g) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Generate and classify in one step.
pub fn shells_within(radius: f64) -> Result<ShellAssignment> {
    Ok(classify_shells(&generate_lattice(radius)?))
}

/// Electron–¹³C point-dipole coupling scale (μ₀/4π)·g_eμ_B·g_nμ_N/(h r³)
/// for `r_angstrom`, in kHz.
pub fn dipolar_coupling_khz(constants: &PhysicalConstants, r_angstrom: f64) -> f64 {
    let r = r_angstrom * 1e-10;
    constants.electron_nuclear_dipolar_hz_m3() / (r * r * r) * 1e-3
}

/// One random ¹³C occupation of a site list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSample {
    pub seed: u64,
    pub concentration: f64,
    /// Indices into the site list the sample was drawn from.
    pub occupied: Vec<usize>,
    pub positions: Vec<[f64; 3]>,
    /// Point-dipole coupling scale per occupied site, kHz.
    pub couplings_khz: Vec<f64>,
}

impl BathSample {
    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# n={}", self.concentration)?;
        writeln!(out, "site,x_angstrom,y_angstrom,z_angstrom,coupling_khz")?;
        for ((i, p), c) in self.occupied.iter().zip(&self.positions).zip(&self.couplings_khz) {
            writeln!(out, "{i},{},{},{},{}", Num(p[0]), Num(p[1]), Num(p[2]), Num(*c))?;
        }
        Ok(())
    }
}

/// Uniform draw in [0, 1) for one site, from a ChaCha stream keyed by
/// (seed, site index). Independent of visiting order.
pub fn site_uniform(seed: u64, site: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(site as u64);
    rng.random::<f64>()
}

/// Occupy each site independently with probability `n`.
pub fn sample_bath(sites: &[LatticeSite], n: f64, seed: u64) -> Result<BathSample> {
    sample_bath_with(sites, n, seed, &PhysicalConstants::default())
}

pub fn sample_bath_with(sites: &[LatticeSite], n: f64, seed: u64, constants: &PhysicalConstants) -> Result<BathSample> {
    if !(0.0..=1.0).contains(&n) {
        return Err(Error::validation(format!("concentration {n} outside [0, 1]")));
    }
    let occupied: Vec<usize> = (0..sites.len()).filter(|&i| site_uniform(seed, i) < n).collect();
    let positions: Vec<[f64; 3]> = occupied.iter().map(|&i| sites[i].position).collect();
    let couplings_khz = occupied.iter().map(|&i| dipolar_coupling_khz(constants, sites[i].distance())).collect();
    Ok(BathSample { seed, concentration: n, occupied, positions, couplings_khz })
}

/// C(m, k)·nᵏ·(1 − n)^(m − k).
pub fn shell_occupancy_probability(m: u32, n: f64, k: u32) -> Result<f64> {
    if k > m {
        return Err(Error::validation(format!("k = {k} exceeds multiplicity {m}")));
    }
    if !(0.0..=1.0).contains(&n) {
        return Err(Error::validation(format!("concentration {n} outside [0, 1]")));
    }
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * f64::from(m - i) / f64::from(i + 1);
    }
    Ok(binom * n.powi(k as i32) * (1.0 - n).powi((m - k) as i32))
}

pub fn write_sites_csv<W: Write>(sites: &[LatticeSite], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x_angstrom,y_angstrom,z_angstrom,shell")?;
    for s in sites {
        writeln!(out, "{},{},{},{}", Num(s.position[0]), Num(s.position[1]), Num(s.position[2]), s.shell)?;
    }
    Ok(())
}
