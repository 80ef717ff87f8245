//! Equal-area partition of the unit sphere `S^2` by the recursive zonal
//! construction, returning one centre point per region.

use std::f64::consts::PI;

fn cap_area(colat: f64) -> f64 {
    4.0 * PI * (colat / 2.0).sin().powi(2)
}

fn cap_colat(area: f64) -> f64 {
    2.0 * (area / (4.0 * PI)).sqrt().min(1.0).asin()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn circle_offset(n_top: usize, n_bot: usize) -> f64 {
    (1.0 / n_bot as f64 - 1.0 / n_top as f64) / 2.0 + gcd(n_top, n_bot) as f64 / (2.0 * n_top as f64 * n_bot as f64)
}

/// Region counts per zone, north cap first and south cap last, together with
/// the zone boundary colatitudes.
fn zones(n: usize) -> (Vec<usize>, Vec<f64>) {
    let area = 4.0 * PI / n as f64;
    let c_polar = cap_colat(area);
    if n == 2 {
        return (vec![1, 1], vec![c_polar, PI]);
    }
    let ideal_angle = area.sqrt();
    let n_collars = (((PI - 2.0 * c_polar) / ideal_angle).round() as usize).max(1);
    let fit = (PI - 2.0 * c_polar) / n_collars as f64;

    let mut ideal = vec![1.0];
    for i in 1..=n_collars {
        let top = c_polar + (i - 1) as f64 * fit;
        let bot = c_polar + i as f64 * fit;
        ideal.push((cap_area(bot) - cap_area(top)) / area);
    }
    ideal.push(1.0);

    let mut counts = Vec::with_capacity(ideal.len());
    let mut discrepancy = 0.0;
    for r in &ideal {
        let k = (r + discrepancy).round();
        discrepancy += r - k;
        counts.push(k as usize);
    }

    let mut colats = vec![c_polar];
    let mut subtotal = 1usize;
    for &k in &counts[1..=n_collars] {
        subtotal += k;
        colats.push(cap_colat(subtotal as f64 * area));
    }
    *colats.last_mut().unwrap() = PI - c_polar;
    colats.push(PI);
    (counts, colats)
}

/// `n` unit vectors, the centres of an equal-area partition of `S^2`.
pub fn equal_area_points(n: usize) -> Vec<[f64; 3]> {
    assert!(n >= 1);
    let from_polar = |colat: f64, lon: f64| [colat.sin() * lon.cos(), colat.sin() * lon.sin(), colat.cos()];
    if n == 1 {
        return vec![[0.0, 0.0, 1.0]];
    }
    let (counts, colats) = zones(n);
    let mut pts = vec![[0.0, 0.0, 1.0]];
    let n_collars = counts.len() - 2;
    let mut offset = 0.0;
    for c in 1..=n_collars {
        let m = counts[c];
        let colat = (colats[c - 1] + colats[c]) / 2.0;
        for k in 0..m {
            let lon = (((k as f64 + 0.5) / m as f64 + offset) * 2.0 * PI).rem_euclid(2.0 * PI);
            pts.push(from_polar(colat, lon));
        }
        let next = counts[c + 1];
        offset += circle_offset(m, next);
        offset -= offset.floor();
    }
    pts.push([0.0, 0.0, -1.0]);
    debug_assert_eq!(pts.len(), n);
    pts
}
