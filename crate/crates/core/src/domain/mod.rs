//! Computational domains, boundary segmentation and node generation.
//!
//! Points are stored as `[f64; 3]`; in two dimensions the third coordinate is
//! zero, so Euclidean distances are unaffected.

mod sequences;
mod sphere;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::OnceLock;

pub use sequences::{halton, hammersley, radical_inverse};
pub use sphere::equal_area_points;

pub type Point = [f64; 3];

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("node generator exhausted after {candidates} candidates with {kept} of {target} points kept")]
    GeneratorExhausted { target: usize, kept: usize, candidates: usize },
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("{what} must be at least {min}, got {got}")]
    TooSmall { what: &'static str, min: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    /// Unit square `(0,1)^2`.
    Box2D,
    /// Unit disk.
    Disk2D,
    /// Star `r < 0.7 + 0.12 (sin 6θ + sin 3θ)`.
    Star2D,
    /// Unit ball in three dimensions.
    Ball3D,
    /// Star-shaped body `r < r_Q(θ, φ)`.
    Quasi3D,
}

impl std::str::FromStr for DomainKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "box" | "box2d" => Ok(Self::Box2D),
            "disk" | "disk2d" | "circle" => Ok(Self::Disk2D),
            "star" | "star2d" => Ok(Self::Star2D),
            "ball" | "ball3d" => Ok(Self::Ball3D),
            "quasi" | "quasi3d" => Ok(Self::Quasi3D),
            _ => Err(DomainError::UnknownDomain(s.to_string())),
        }
    }
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Box2D => "box",
            Self::Disk2D => "disk",
            Self::Star2D => "star",
            Self::Ball3D => "ball",
            Self::Quasi3D => "quasi",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    Halton,
    Hammersley,
    Grid,
}

impl std::str::FromStr for Generator {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "halton" => Ok(Self::Halton),
            "hammersley" => Ok(Self::Hammersley),
            "grid" => Ok(Self::Grid),
            _ => Err(DomainError::UnknownGenerator(s.to_string())),
        }
    }
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Halton => "halton",
            Self::Hammersley => "hammersley",
            Self::Grid => "grid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// How boundary conditions are assigned along the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BcMode {
    /// Neumann on the upper part of the boundary, Dirichlet elsewhere.
    #[default]
    Mixed,
    Dirichlet,
    Neumann,
}

impl std::str::FromStr for BcMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mixed" => Ok(Self::Mixed),
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            _ => Err(format!("unknown boundary condition mode `{s}`")),
        }
    }
}

impl std::fmt::Display for BcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mixed => "mixed",
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: Point,
    /// Outward unit normal.
    pub normal: Point,
    pub bc: BcKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Interior,
    Dirichlet,
    Neumann,
}

impl NodeKind {
    pub fn flag(self) -> u8 {
        match self {
            Self::Interior => 0,
            Self::Dirichlet => 1,
            Self::Neumann => 2,
        }
    }
}

impl From<BcKind> for NodeKind {
    fn from(bc: BcKind) -> Self {
        match bc {
            BcKind::Dirichlet => Self::Dirichlet,
            BcKind::Neumann => Self::Neumann,
        }
    }
}

/// Points with an estimated fill distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub points: Vec<Point>,
    pub h_est: f64,
}

/// Trial (and test) nodes: interior points first, then boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub dim: usize,
    pub points: Vec<Point>,
    pub kinds: Vec<NodeKind>,
    /// Outward unit normals; zero for interior nodes.
    pub normals: Vec<Point>,
    pub h: f64,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Interior).count()
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.kinds[i] == NodeKind::Interior).collect()
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.kinds[i] != NodeKind::Interior).collect()
    }

    /// Rebuilds the node set with the given boundary condition mode.
    pub fn with_bc_mode(&self, domain: &Domain, mode: BcMode) -> NodeSet {
        let mut out = self.clone();
        for i in 0..out.len() {
            if out.kinds[i] != NodeKind::Interior {
                out.kinds[i] = domain.bc_at(&out.points[i], mode).into();
            }
        }
        out
    }

    /// One row per node: `x1..xd, flag, n1..nd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.dim;
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        header.push("flag".into());
        header.extend((1..=d).map(|i| format!("n{i}")));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.points[i][..d].iter().map(|v| format!("{v:.17e}")).collect();
            row.push(self.kinds[i].flag().to_string());
            row.extend(self.normals[i][..d].iter().map(|v| format!("{v:.17e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// A computational domain together with its smallest enclosing cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub kind: DomainKind,
    pub dim: usize,
    pub bbox_lo: Point,
    pub bbox_hi: Point,
}

pub fn star_radius(theta: f64) -> f64 {
    0.7 + 0.12 * ((6.0 * theta).sin() + (3.0 * theta).sin())
}

pub fn star_radius_derivative(theta: f64) -> f64 {
    0.12 * (6.0 * (6.0 * theta).cos() + 3.0 * (3.0 * theta).cos())
}

/// `r_Q` evaluated at a unit direction `u`.
pub fn quasi_radius(u: &Point) -> f64 {
    let s = |t: f64| (2.0 * t).sin().powi(2);
    (1.0 + s(u[0]) * s(u[1]) * s(u[2])).sqrt()
}

/// Gradient of `u -> r_Q(u)` as a function on `R^3` (not projected).
fn quasi_radius_grad(u: &Point) -> Point {
    let s = |t: f64| (2.0 * t).sin().powi(2);
    let ds = |t: f64| 2.0 * (4.0 * t).sin();
    let r = quasi_radius(u);
    let (sx, sy, sz) = (s(u[0]), s(u[1]), s(u[2]));
    [ds(u[0]) * sy * sz / (2.0 * r), sx * ds(u[1]) * sz / (2.0 * r), sx * sy * ds(u[2]) / (2.0 * r)]
}

/// Unit vector along `x`, or the north pole for the origin.
fn direction(x: &Point) -> Point {
    let r = norm(x);
    if r == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    [x[0] / r, x[1] / r, x[2] / r]
}

fn quasi_midpoint_samples() -> impl Iterator<Item = (Point, f64)> {
    const M: usize = 100;
    let (dphi, dtheta) = (PI / M as f64, 2.0 * PI / M as f64);
    (0..M).flat_map(move |i| {
        let phi = (i as f64 + 0.5) * dphi;
        (0..M).map(move |j| {
            let theta = (j as f64 + 0.5) * dtheta;
            let u = [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()];
            (u, phi.sin() * dphi * dtheta)
        })
    })
}

struct Measures {
    volume: f64,
    boundary: f64,
}

fn star_measures() -> &'static Measures {
    static CELL: OnceLock<Measures> = OnceLock::new();
    CELL.get_or_init(|| {
        const M: usize = 10_000;
        let dt = 2.0 * PI / M as f64;
        let (mut area, mut perim) = (0.0, 0.0);
        for k in 0..M {
            let t = (k as f64 + 0.5) * dt;
            let (r, dr) = (star_radius(t), star_radius_derivative(t));
            area += 0.5 * r * r * dt;
            perim += (r * r + dr * dr).sqrt() * dt;
        }
        Measures { volume: area, boundary: perim }
    })
}

fn quasi_measures() -> &'static Measures {
    static CELL: OnceLock<Measures> = OnceLock::new();
    CELL.get_or_init(|| {
        let (mut vol, mut area) = (0.0, 0.0);
        for (u, w) in quasi_midpoint_samples() {
            let r = quasi_radius(&u);
            let g = quasi_radius_grad(&u);
            let gu = g[0] * u[0] + g[1] * u[1] + g[2] * u[2];
            let tang2 = (0..3).map(|i| (g[i] - gu * u[i]).powi(2)).sum::<f64>();
            vol += r.powi(3) / 3.0 * w;
            area += r * (r * r + tang2).sqrt() * w;
        }
        Measures { volume: vol, boundary: area }
    })
}

fn quasi_half_extent() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        const M: usize = 400;
        let mut best: f64 = 1.0;
        for i in 0..=M {
            let phi = PI * i as f64 / M as f64;
            for j in 0..2 * M {
                let theta = PI * j as f64 / M as f64;
                let u = [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()];
                let r = quasi_radius(&u);
                best = best.max(r * u[0].abs()).max(r * u[1].abs()).max(r * u[2].abs());
            }
        }
        best * 1.002
    })
}

impl Domain {
    pub fn new(kind: DomainKind) -> Self {
        let (dim, lo, hi) = match kind {
            DomainKind::Box2D => (2, [0.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
            DomainKind::Disk2D => (2, [-1.0, -1.0, 0.0], [1.0, 1.0, 0.0]),
            DomainKind::Star2D => (2, [-0.94, -0.94, 0.0], [0.94, 0.94, 0.0]),
            DomainKind::Ball3D => (3, [-1.0; 3], [1.0; 3]),
            DomainKind::Quasi3D => {
                let a = quasi_half_extent();
                (3, [-a; 3], [a; 3])
            }
        };
        Self { kind, dim, bbox_lo: lo, bbox_hi: hi }
    }

    /// True iff `x` lies in the open region.
    pub fn contains(&self, x: &Point) -> bool {
        match self.kind {
            DomainKind::Box2D => x[0] > 0.0 && x[0] < 1.0 && x[1] > 0.0 && x[1] < 1.0,
            DomainKind::Disk2D => x[0] * x[0] + x[1] * x[1] < 1.0,
            DomainKind::Ball3D => norm(x) < 1.0,
            DomainKind::Star2D => {
                let r = x[0].hypot(x[1]);
                r < star_radius(x[1].atan2(x[0]))
            }
            DomainKind::Quasi3D => norm(x) < quasi_radius(&direction(x)),
        }
    }

    /// Distance from `x` to the boundary measured along the ray from the
    /// origin (axis-aligned for the box). Positive inside.
    pub fn boundary_gap(&self, x: &Point) -> f64 {
        match self.kind {
            DomainKind::Box2D => x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]),
            DomainKind::Disk2D => 1.0 - x[0].hypot(x[1]),
            DomainKind::Ball3D => 1.0 - norm(x),
            DomainKind::Star2D => star_radius(x[1].atan2(x[0])) - x[0].hypot(x[1]),
            DomainKind::Quasi3D => quasi_radius(&direction(x)) - norm(x),
        }
    }

    /// Area (2D) or volume (3D) of the region.
    pub fn volume(&self) -> f64 {
        match self.kind {
            DomainKind::Box2D => 1.0,
            DomainKind::Disk2D => PI,
            DomainKind::Ball3D => 4.0 * PI / 3.0,
            DomainKind::Star2D => star_measures().volume,
            DomainKind::Quasi3D => quasi_measures().volume,
        }
    }

    /// Perimeter (2D) or surface area (3D).
    pub fn boundary_measure(&self) -> f64 {
        match self.kind {
            DomainKind::Box2D => 4.0,
            DomainKind::Disk2D => 2.0 * PI,
            DomainKind::Ball3D => 4.0 * PI,
            DomainKind::Star2D => star_measures().boundary,
            DomainKind::Quasi3D => quasi_measures().boundary,
        }
    }

    /// Side length of the enclosing cube.
    pub fn cube_side(&self) -> f64 {
        self.bbox_hi[0] - self.bbox_lo[0]
    }

    /// Boundary condition at a boundary point under `mode`.
    pub fn bc_at(&self, x: &Point, mode: BcMode) -> BcKind {
        match mode {
            BcMode::Dirichlet => BcKind::Dirichlet,
            BcMode::Neumann => BcKind::Neumann,
            BcMode::Mixed => {
                let neumann = match self.kind {
                    DomainKind::Box2D => x[1] <= 1e-12 || x[1] >= 1.0 - 1e-12,
                    DomainKind::Disk2D | DomainKind::Star2D => x[1] >= -1e-12,
                    DomainKind::Ball3D | DomainKind::Quasi3D => x[2] < 0.0,
                };
                if neumann {
                    BcKind::Neumann
                } else {
                    BcKind::Dirichlet
                }
            }
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn normal_at(&self, x: &Point) -> Point {
        match self.kind {
            DomainKind::Box2D => {
                let gaps = [x[1], 1.0 - x[0], 1.0 - x[1], x[0]];
                let normals = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];
                let k = (0..4).min_by(|&a, &b| gaps[a].partial_cmp(&gaps[b]).unwrap()).unwrap();
                normals[k]
            }
            DomainKind::Disk2D | DomainKind::Ball3D => direction(x),
            DomainKind::Star2D => {
                let t = x[1].atan2(x[0]);
                let (r, dr) = (star_radius(t), star_radius_derivative(t));
                let n = [r * t.cos() + dr * t.sin(), r * t.sin() - dr * t.cos()];
                let l = n[0].hypot(n[1]);
                [n[0] / l, n[1] / l, 0.0]
            }
            DomainKind::Quasi3D => {
                let r = norm(x);
                let u = direction(x);
                let g = quasi_radius_grad(&u);
                let gu = g[0] * u[0] + g[1] * u[1] + g[2] * u[2];
                let n = [u[0] - (g[0] - gu * u[0]) / r, u[1] - (g[1] - gu * u[1]) / r, u[2] - (g[2] - gu * u[2]) / r];
                let l = norm(&n);
                [n[0] / l, n[1] / l, n[2] / l]
            }
        }
    }

    /// `count` boundary points, equidistant in angle (2D) or from an
    /// equal-area sphere partition projected to the surface (3D).
    pub fn boundary_sample(&self, count: usize, mode: BcMode) -> Vec<BoundaryPoint> {
        let positions: Vec<Point> = match self.kind {
            DomainKind::Box2D => (0..count)
                .map(|k| {
                    let s = (k as f64 + 0.5) * 4.0 / count as f64;
                    match s as usize {
                        0 => [s, 0.0, 0.0],
                        1 => [1.0, s - 1.0, 0.0],
                        2 => [3.0 - s, 1.0, 0.0],
                        _ => [0.0, 4.0 - s, 0.0],
                    }
                })
                .collect(),
            DomainKind::Disk2D | DomainKind::Star2D => (0..count)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / count as f64;
                    let r = if self.kind == DomainKind::Disk2D { 1.0 } else { star_radius(t) };
                    [r * t.cos(), r * t.sin(), 0.0]
                })
                .collect(),
            DomainKind::Ball3D => equal_area_points(count),
            DomainKind::Quasi3D => equal_area_points(count)
                .into_iter()
                .map(|u| {
                    let r = quasi_radius(&u);
                    [r * u[0], r * u[1], r * u[2]]
                })
                .collect(),
        };
        positions
            .into_iter()
            .map(|p| BoundaryPoint { position: p, normal: self.normal_at(&p), bc: self.bc_at(&p, mode) })
            .collect()
    }

    /// Number of boundary points whose spacing matches an interior spacing `h`.
    pub fn boundary_count_for_spacing(&self, h: f64) -> usize {
        let m = self.boundary_measure() / h.powi(self.dim as i32 - 1);
        (m.round() as usize).max(4)
    }

    fn to_box(&self, unit: &[f64]) -> Point {
        let mut p = [0.0; 3];
        for i in 0..self.dim {
            p[i] = self.bbox_lo[i] + unit[i] * (self.bbox_hi[i] - self.bbox_lo[i]);
        }
        p
    }
}

/// Estimated fill distance of `n` quasi-uniform points in `domain`:
/// `side(B) (c_d n)^{-1/d}` with `c_d = vol(B) / vol(Ω)`, which equals
/// `(vol(Ω) / n)^{1/d}`.
pub fn fill_distance_estimate(domain: &Domain, n: usize) -> f64 {
    let d = domain.dim as i32;
    let cd = domain.cube_side().powi(d) / domain.volume();
    domain.cube_side() * (cd * n as f64).powf(-1.0 / d as f64)
}

/// Boundary point count matching the spacing of `n_interior` interior points.
pub fn adjust_boundary_count(n_interior: usize, domain: &Domain) -> usize {
    domain.boundary_count_for_spacing(fill_distance_estimate(domain, n_interior))
}

/// Spatial hash rejecting candidates closer than `sep` to an accepted point.
struct SeparationFilter {
    sep: f64,
    cells: HashMap<[i64; 3], Vec<Point>>,
}

impl SeparationFilter {
    fn new(sep: f64) -> Self {
        Self { sep, cells: HashMap::new() }
    }

    fn key(&self, p: &Point) -> [i64; 3] {
        [(p[0] / self.sep).floor() as i64, (p[1] / self.sep).floor() as i64, (p[2] / self.sep).floor() as i64]
    }

    fn accepts(&self, p: &Point) -> bool {
        let k = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if v.iter().any(|q| dist(p, q) < self.sep) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: Point) {
        let k = self.key(&p);
        self.cells.entry(k).or_default().push(p);
    }

    fn try_insert(&mut self, p: Point) -> bool {
        if self.accepts(&p) {
            self.insert(p);
            true
        } else {
            false
        }
    }
}

fn filter_candidates(
    domain: &Domain,
    candidates: impl Iterator<Item = Point>,
    sep: f64,
    boundary: &[Point],
) -> Vec<Point> {
    let mut filter = SeparationFilter::new(sep);
    for b in boundary {
        filter.insert(*b);
    }
    candidates.filter(|p| domain.contains(p) && filter.try_insert(*p)).collect()
}

fn interior_points(
    domain: &Domain,
    n_target: usize,
    generator: Generator,
    h: f64,
    boundary: &[Point],
) -> Result<Vec<Point>, DomainError> {
    let sep = h / 10.0;
    let cap = 100 * n_target.max(1);
    let frac = domain.volume() / domain.cube_side().powi(domain.dim as i32);
    match generator {
        Generator::Halton => {
            let mut filter = SeparationFilter::new(sep);
            for b in boundary {
                filter.insert(*b);
            }
            let mut out = Vec::with_capacity(n_target);
            let mut i = 0u64;
            while out.len() < n_target {
                i += 1;
                if i as usize > cap {
                    return Err(DomainError::GeneratorExhausted { target: n_target, kept: out.len(), candidates: cap });
                }
                let unit: Vec<f64> = [2u64, 3, 5][..domain.dim].iter().map(|&b| radical_inverse(i, b)).collect();
                let p = domain.to_box(&unit);
                if domain.contains(&p) && filter.try_insert(p) {
                    out.push(p);
                }
            }
            Ok(out)
        }
        Generator::Hammersley => {
            let run = |m: usize| {
                let cands = hammersley(m, domain.dim).into_iter().map(|u| domain.to_box(&u));
                filter_candidates(domain, cands, sep, boundary)
            };
            let mut m = ((n_target as f64 / frac).ceil() as usize).max(n_target);
            let mut kept = run(m);
            let mut tries = 0;
            while kept.len() < n_target {
                tries += 1;
                m = (m as f64 * n_target as f64 / kept.len().max(1) as f64).ceil() as usize + tries;
                if m > cap {
                    return Err(DomainError::GeneratorExhausted { target: n_target, kept: kept.len(), candidates: m });
                }
                kept = run(m);
            }
            // step down while we still have enough, to land on the smallest excess
            while m > n_target {
                let smaller = run(m - 1);
                if smaller.len() < n_target {
                    break;
                }
                m -= 1;
                kept = smaller;
                if kept.len() == n_target {
                    break;
                }
            }
            let excess = kept.len() - n_target;
            if excess > 0 {
                let stride = kept.len() as f64 / excess as f64;
                let drop: std::collections::HashSet<usize> =
                    (0..excess).map(|k| ((k as f64 + 0.5) * stride) as usize).collect();
                kept = kept.into_iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, p)| p).collect();
                kept.truncate(n_target);
            }
            Ok(kept)
        }
        Generator::Grid => {
            let d = domain.dim;
            let run = |m: usize| {
                let s = 1.0 / m as f64;
                let total = m.pow(d as u32);
                let cands = (0..total).map(move |idx| {
                    let mut unit = [0.0; 3];
                    let mut r = idx;
                    for u in unit.iter_mut().take(d) {
                        *u = ((r % m) as f64 + 0.5) * s;
                        r /= m;
                    }
                    unit
                });
                filter_candidates(domain, cands.map(|u| domain.to_box(&u)), sep, boundary)
            };
            let mut m = ((n_target as f64 / frac).powf(1.0 / d as f64).round() as usize).max(1);
            let mut best = run(m);
            loop {
                let next = run(m + 1);
                if (next.len() as i64 - n_target as i64).abs() < (best.len() as i64 - n_target as i64).abs() {
                    m += 1;
                    best = next;
                } else {
                    break;
                }
            }
            while m > 1 {
                let prev = run(m - 1);
                if (prev.len() as i64 - n_target as i64).abs() < (best.len() as i64 - n_target as i64).abs() {
                    m -= 1;
                    best = prev;
                } else {
                    break;
                }
            }
            Ok(best)
        }
    }
}

/// Interior points inside `domain`, exactly `n_target` of them for the
/// Halton and Hammersley generators and the closest restricted grid otherwise.
pub fn interior_nodes(domain: &Domain, n_target: usize, generator: Generator) -> Result<PointSet, DomainError> {
    if n_target == 0 {
        return Err(DomainError::TooSmall { what: "n_target", min: 1, got: 0 });
    }
    let h = fill_distance_estimate(domain, n_target);
    let points = interior_points(domain, n_target, generator, h, &[])?;
    let h_est = fill_distance_estimate(domain, points.len());
    Ok(PointSet { dim: domain.dim, points, h_est })
}

/// About `n_total` trial nodes: boundary nodes with spacing matched to the
/// interior, interior nodes filling up the rest.
pub fn generate_nodes(
    domain: &Domain,
    n_total: usize,
    generator: Generator,
    mode: BcMode,
) -> Result<NodeSet, DomainError> {
    if n_total < 8 {
        return Err(DomainError::TooSmall { what: "node count", min: 8, got: n_total });
    }
    let h = fill_distance_estimate(domain, n_total);
    let n_bnd = domain.boundary_count_for_spacing(h).min(n_total / 2);
    let boundary = domain.boundary_sample(n_bnd, mode);
    let bpos: Vec<Point> = boundary.iter().map(|b| b.position).collect();
    let interior = interior_points(domain, n_total - n_bnd, generator, h, &bpos)?;

    let mut points = interior;
    let ni = points.len();
    let mut kinds = vec![NodeKind::Interior; ni];
    let mut normals = vec![[0.0; 3]; ni];
    for b in boundary {
        points.push(b.position);
        kinds.push(b.bc.into());
        normals.push(b.normal);
    }
    let h = fill_distance_estimate(domain, points.len());
    Ok(NodeSet { dim: domain.dim, points, kinds, normals, h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        assert!(Domain::new(DomainKind::Disk2D).contains(&[0.0, 0.0, 0.0]));
        assert!(!Domain::new(DomainKind::Star2D).contains(&[0.9, 0.0, 0.0]));
        assert!(!Domain::new(DomainKind::Box2D).contains(&[1.0, 0.5, 0.0]));
        assert!(Domain::new(DomainKind::Quasi3D).contains(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn analytic_measures() {
        let star = Domain::new(DomainKind::Star2D);
        // 0.5 * ∫ r_S^2 = 0.5 * (0.49 * 2π + 0.0144 * 2π)
        assert!((star.volume() - 0.5 * (0.49 + 0.0144) * 2.0 * PI).abs() < 1e-10);
        let q = Domain::new(DomainKind::Quasi3D);
        assert!(q.volume() > 4.0 * PI / 3.0 && q.volume() < 4.0 * PI / 3.0 * 2f64.powf(1.5));
        assert!(q.boundary_measure() > 4.0 * PI);
    }

    #[test]
    fn fill_distance_examples() {
        let b = Domain::new(DomainKind::Box2D);
        assert!((fill_distance_estimate(&b, 10_000) - 0.01).abs() < 1e-15);
        let d = Domain::new(DomainKind::Disk2D);
        assert!((fill_distance_estimate(&d, 1000) - (PI / 1000.0).sqrt()).abs() < 1e-14);
        assert!(fill_distance_estimate(&d, 1001) < fill_distance_estimate(&d, 1000));
    }

    #[test]
    fn boundary_counts() {
        assert_eq!(Domain::new(DomainKind::Box2D).boundary_count_for_spacing(0.1), 40);
        assert_eq!(Domain::new(DomainKind::Disk2D).boundary_count_for_spacing(0.1), 63);
    }
}
