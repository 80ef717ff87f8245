//! Overlapping ball coverings and partition-of-unity weights.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::domain::{dist, Domain, Point};
use crate::kernel::{unisolvency_check, PolyBasis};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("patch {patch} has no trial points after inflation")]
    EmptyPatch { patch: usize },
    #[error("patch {patch} is not unisolvent after inflation")]
    NotUnisolvent { patch: usize },
    #[error("point {point} is not covered by any patch")]
    CoverageGap { point: usize },
    #[error("point is not covered by any patch")]
    NoCoverage,
    #[error("weight scheme {0:?} has no derivatives")]
    NotDifferentiable(WeightScheme),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightScheme {
    /// Shepard weights built from the Wendland function.
    Smooth,
    /// `1 / |I(x)|` on every patch containing `x`.
    ConstGen1,
    /// All weight on the closest patch centre.
    ConstGen2,
    /// Closest patch for interior centres, Shepard weights among boundary patches.
    Hybrid,
}

impl std::str::FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" => Ok(Self::Smooth),
            "const1" | "constgen1" => Ok(Self::ConstGen1),
            "const2" | "constgen2" | "const" => Ok(Self::ConstGen2),
            "hybrid" => Ok(Self::Hybrid),
            _ => Err(format!("unknown weight scheme `{s}`")),
        }
    }
}

impl std::fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Smooth => "smooth",
            Self::ConstGen1 => "const1",
            Self::ConstGen2 => "const2",
            Self::Hybrid => "hybrid",
        })
    }
}

/// Wendland `ψ(r) = (1-r)_+^6 (35r^2 + 18r + 3)`.
pub fn wendland(r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    (1.0 - r).powi(6) * (35.0 * r * r + 18.0 * r + 3.0)
}

/// Uniform bins over a point cloud for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell: f64,
    bins: HashMap<[i64; 3], Vec<usize>>,
}

impl SpatialIndex {
    pub fn new(points: &[Point], cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut bins: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            bins.entry(Self::key_for(cell, p)).or_default().push(i);
        }
        Self { cell, bins }
    }

    fn key_for(cell: f64, p: &Point) -> [i64; 3] {
        [(p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64]
    }

    /// Indices `i` with `‖points[i] - x‖ < r`, ascending.
    pub fn within(&self, points: &[Point], x: &Point, r: f64) -> Vec<usize> {
        let lo = Self::key_for(self.cell, &[x[0] - r, x[1] - r, x[2] - r]);
        let hi = Self::key_for(self.cell, &[x[0] + r, x[1] + r, x[2] + r]);
        let mut out = Vec::new();
        for a in lo[0]..=hi[0] {
            for b in lo[1]..=hi[1] {
                for c in lo[2]..=hi[2] {
                    if let Some(v) = self.bins.get(&[a, b, c]) {
                        out.extend(v.iter().copied().filter(|&i| dist(&points[i], x) < r));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Balls `B(ω_ℓ, ρ_ℓ)` with their trial-point memberships.
#[derive(Debug, Clone)]
pub struct Covering {
    pub dim: usize,
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    pub members: Vec<Vec<usize>>,
    /// Whether the centre lies on the boundary of the domain.
    pub boundary_center: Vec<bool>,
    pub h_c: f64,
    pub c_c: f64,
    center_index: SpatialIndex,
    max_radius: f64,
}

/// Smooth weight `w_ℓ` with first and second derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDerivs {
    pub patch: usize,
    pub w: f64,
    pub grad: Point,
    pub hess: [[f64; 3]; 3],
}

impl WeightDerivs {
    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1] + self.hess[2][2]
    }
}

impl Covering {
    /// Assembles a covering from explicit patches; members are computed by
    /// range query against `trial`.
    pub fn from_patches(
        dim: usize,
        centers: Vec<Point>,
        radii: Vec<f64>,
        boundary_center: Vec<bool>,
        trial: &[Point],
        h_c: f64,
        c_c: f64,
    ) -> Self {
        let max_radius = radii.iter().copied().fold(0.0, f64::max);
        let trial_index = SpatialIndex::new(trial, max_radius.max(1e-300));
        let members = centers.iter().zip(&radii).map(|(c, &r)| trial_index.within(trial, c, r)).collect();
        let center_index = SpatialIndex::new(&centers, max_radius.max(1e-300));
        Self { dim, centers, radii, members, boundary_center, h_c, c_c, center_index, max_radius }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `I(x)`: ascending indices of patches whose open ball contains `x`.
    pub fn patches_containing(&self, x: &Point) -> Vec<usize> {
        self.center_index
            .within(&self.centers, x, self.max_radius)
            .into_iter()
            .filter(|&l| dist(x, &self.centers[l]) < self.radii[l])
            .collect()
    }

    /// Closest patch centre in `patches`, ties broken by the smaller index.
    fn closest(&self, x: &Point, patches: &[usize]) -> usize {
        let mut best = patches[0];
        let mut bd = dist(x, &self.centers[best]);
        for &l in &patches[1..] {
            let d = dist(x, &self.centers[l]);
            if d < bd {
                best = l;
                bd = d;
            }
        }
        best
    }

    fn psi(&self, l: usize, x: &Point) -> f64 {
        wendland(dist(x, &self.centers[l]) / self.radii[l])
    }

    fn shepard(&self, x: &Point, patches: &[usize]) -> Vec<(usize, f64)> {
        let psi: Vec<f64> = patches.iter().map(|&l| self.psi(l, x)).collect();
        let s: f64 = psi.iter().sum();
        patches.iter().zip(psi).map(|(&l, p)| (l, p / s)).collect()
    }

    /// Nonzero-capable weights `(ℓ, w_ℓ(x))` for `ℓ ∈ I(x)` (entries outside
    /// `I(x)` vanish and are omitted).
    pub fn pu_weights(&self, scheme: WeightScheme, x: &Point) -> Result<Vec<(usize, f64)>, PartitionError> {
        let patches = self.patches_containing(x);
        if patches.is_empty() {
            return Err(PartitionError::NoCoverage);
        }
        Ok(match scheme {
            WeightScheme::Smooth => self.shepard(x, &patches),
            WeightScheme::ConstGen1 => {
                let w = 1.0 / patches.len() as f64;
                patches.iter().map(|&l| (l, w)).collect()
            }
            WeightScheme::ConstGen2 => vec![(self.closest(x, &patches), 1.0)],
            WeightScheme::Hybrid => {
                let l = self.closest(x, &patches);
                if self.boundary_center[l] {
                    let bnd: Vec<usize> = patches.into_iter().filter(|&j| self.boundary_center[j]).collect();
                    self.shepard(x, &bnd)
                } else {
                    vec![(l, 1.0)]
                }
            }
        })
    }

    /// `w_ℓ(x)`; zero when `ℓ ∉ I(x)`.
    pub fn pu_weight(&self, scheme: WeightScheme, l: usize, x: &Point) -> Result<f64, PartitionError> {
        Ok(self.pu_weights(scheme, x)?.into_iter().find(|&(j, _)| j == l).map_or(0.0, |(_, w)| w))
    }

    /// Smooth Shepard weights with gradients and Hessians for every `ℓ ∈ I(x)`.
    pub fn pu_weight_derivs_all(&self, x: &Point) -> Result<Vec<WeightDerivs>, PartitionError> {
        let patches = self.patches_containing(x);
        if patches.is_empty() {
            return Err(PartitionError::NoCoverage);
        }
        let d = self.dim;
        let mut raw = Vec::with_capacity(patches.len());
        for &l in &patches {
            let rho = self.radii[l];
            let off: Point = [x[0] - self.centers[l][0], x[1] - self.centers[l][1], x[2] - self.centers[l][2]];
            let r = dist(x, &self.centers[l]) / rho;
            let om = 1.0 - r;
            let psi = om.powi(6) * (35.0 * r * r + 18.0 * r + 3.0);
            let g = -56.0 * om.powi(5) * (5.0 * r + 1.0);
            let h = 1680.0 * om.powi(4);
            let mut grad = [0.0; 3];
            let mut hess = [[0.0; 3]; 3];
            for i in 0..d {
                grad[i] = g * off[i] / (rho * rho);
                for j in 0..d {
                    hess[i][j] = h * off[i] * off[j] / rho.powi(4) + if i == j { g / (rho * rho) } else { 0.0 };
                }
            }
            raw.push((l, psi, grad, hess));
        }
        let s: f64 = raw.iter().map(|r| r.1).sum();
        let mut gs = [0.0; 3];
        let mut hs = [[0.0; 3]; 3];
        for (_, _, g, h) in &raw {
            for i in 0..3 {
                gs[i] += g[i];
                for j in 0..3 {
                    hs[i][j] += h[i][j];
                }
            }
        }
        Ok(raw
            .into_iter()
            .map(|(l, psi, g, h)| {
                let w = psi / s;
                let mut grad = [0.0; 3];
                for i in 0..3 {
                    grad[i] = (g[i] - w * gs[i]) / s;
                }
                let mut hess = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        hess[i][j] = (h[i][j] - grad[i] * gs[j] - grad[j] * gs[i] - w * hs[i][j]) / s;
                    }
                }
                WeightDerivs { patch: l, w, grad, hess }
            })
            .collect())
    }

    /// `(w_ℓ, ∇w_ℓ, Δw_ℓ)` of the smooth Shepard weight.
    pub fn pu_weight_derivs(&self, l: usize, x: &Point) -> Result<(f64, Point, f64), PartitionError> {
        let all = self.pu_weight_derivs_all(x)?;
        Ok(all.into_iter().find(|d| d.patch == l).map_or((0.0, [0.0; 3], 0.0), |d| (d.w, d.grad, d.laplacian())))
    }

    /// Fails with the first trial point index that lies in no patch.
    pub fn check_coverage(&self, points: &[Point]) -> Result<(), PartitionError> {
        for (i, p) in points.iter().enumerate() {
            if self.patches_containing(p).is_empty() {
                return Err(PartitionError::CoverageGap { point: i });
            }
        }
        Ok(())
    }

    /// One row per patch: centre coordinates, radius, member count.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("c{i}")).collect();
        header.extend(["radius".to_string(), "members".to_string(), "boundary".to_string()]);
        writeln!(w, "{}", header.join(","))?;
        for l in 0..self.len() {
            let mut row: Vec<String> = self.centers[l][..self.dim].iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", self.radii[l]));
            row.push(self.members[l].len().to_string());
            row.push(u8::from(self.boundary_center[l]).to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Grid centres strictly inside `domain` with spacing `h_c`, symmetric about
/// the centre of the enclosing cube.
fn interior_centers(domain: &Domain, h_c: f64) -> Vec<Point> {
    let d = domain.dim;
    let mid: Vec<f64> = (0..d).map(|i| 0.5 * (domain.bbox_lo[i] + domain.bbox_hi[i])).collect();
    let half = 0.5 * domain.cube_side();
    let m = (half / h_c).floor() as i64 + 1;
    let mut out = Vec::new();
    let range: Vec<i64> = (-m..=m).collect();
    let zs: &[i64] = if d == 3 { &range } else { &[0] };
    for &k in zs {
        for &j in &range {
            for &i in &range {
                let mut p = [mid[0] + i as f64 * h_c, mid[1] + j as f64 * h_c, 0.0];
                if d == 3 {
                    p[2] = mid[2] + k as f64 * h_c;
                }
                if domain.contains(&p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

const INFLATION: f64 = 1.25;
const MAX_INFLATIONS: usize = 3;

/// Builds the covering: interior grid centres plus boundary centres with
/// spacing about `h_c`, radius `C_c h_c` (times 1.5 within `h_c` of the
/// boundary), inflating patches that are empty or not unisolvent.
pub fn build_covering(
    domain: &Domain,
    trial: &[Point],
    h_c: f64,
    c_c: f64,
    basis: &PolyBasis,
) -> Result<Covering, PartitionError> {
    let mut centers = interior_centers(domain, h_c);
    let mut boundary_center = vec![false; centers.len()];
    let nb = domain.boundary_count_for_spacing(h_c);
    for b in domain.boundary_sample(nb, crate::domain::BcMode::Dirichlet) {
        centers.push(b.position);
        boundary_center.push(true);
    }
    let rho = c_c * h_c;
    let radii: Vec<f64> = centers
        .iter()
        .zip(&boundary_center)
        .map(|(c, &b)| if b || domain.boundary_gap(c) <= h_c { 1.5 * rho } else { rho })
        .collect();

    let max_possible = 1.5 * rho * INFLATION.powi(MAX_INFLATIONS as i32);
    let trial_index = SpatialIndex::new(trial, max_possible);
    let mut radii = radii;
    let mut members = Vec::with_capacity(centers.len());
    for (l, c) in centers.iter().enumerate() {
        let mut attempt = 0;
        loop {
            let m = trial_index.within(trial, c, radii[l]);
            let pts: Vec<Point> = m.iter().map(|&i| trial[i]).collect();
            let ok = !m.is_empty() && unisolvency_check(&pts, basis, c, radii[l]);
            if ok {
                members.push(m);
                break;
            }
            if attempt == MAX_INFLATIONS {
                return Err(if m.is_empty() {
                    PartitionError::EmptyPatch { patch: l }
                } else {
                    PartitionError::NotUnisolvent { patch: l }
                });
            }
            radii[l] *= INFLATION;
            attempt += 1;
        }
    }
    let max_radius = radii.iter().copied().fold(0.0, f64::max);
    let center_index = SpatialIndex::new(&centers, max_radius);
    let cov =
        Covering { dim: domain.dim, centers, radii, members, boundary_center, h_c, c_c, center_index, max_radius };
    cov.check_coverage(trial)?;
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_patches() -> Covering {
        let centers = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let trial = vec![[0.5, 0.0, 0.0]];
        Covering::from_patches(2, centers, vec![0.8, 0.8], vec![false, false], &trial, 1.0, 0.8)
    }

    #[test]
    fn wendland_values() {
        assert_eq!(wendland(0.0), 3.0);
        assert_eq!(wendland(1.0), 0.0);
        assert_eq!(wendland(1.5), 0.0);
    }

    #[test]
    fn lens_region_lists_both() {
        let c = two_patches();
        assert_eq!(c.patches_containing(&[0.5, 0.1, 0.0]), vec![0, 1]);
        assert_eq!(c.patches_containing(&[0.0, 0.0, 0.0]), vec![0]);
        assert!(c.patches_containing(&[5.0, 5.0, 0.0]).is_empty());
    }

    #[test]
    fn closest_centre_and_ties() {
        let c = two_patches();
        let w = c.pu_weights(WeightScheme::ConstGen2, &[0.6, 0.0, 0.0]).unwrap();
        assert_eq!(w, vec![(1, 1.0)]);
        let tie = c.pu_weights(WeightScheme::ConstGen2, &[0.5, 0.3, 0.0]).unwrap();
        assert_eq!(tie, vec![(0, 1.0)]);
        let w1 = c.pu_weights(WeightScheme::ConstGen1, &[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(w1, vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn single_patch_weight_is_one_with_zero_derivatives() {
        let c = two_patches();
        let x = [-0.2, 0.1, 0.0];
        assert_eq!(c.pu_weight(WeightScheme::Smooth, 0, &x).unwrap(), 1.0);
        let (w, g, lap) = c.pu_weight_derivs(0, &x).unwrap();
        assert_eq!(w, 1.0);
        assert!(g.iter().all(|v| v.abs() < 1e-14) && lap.abs() < 1e-12);
    }
}
