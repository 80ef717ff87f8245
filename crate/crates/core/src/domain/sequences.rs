//! Low-discrepancy sequences on the unit cube.

const PRIMES: [u64; 3] = [2, 3, 5];

/// Van der Corput radical inverse of `i` in the given base.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Halton points with indices `skip + 1 ..= skip + count`, bases `2, 3, 5`.
///
/// Each point is returned as a `Vec` of length `dim`.
pub fn halton(count: usize, dim: usize, skip: usize) -> Vec<Vec<f64>> {
    assert!((1..=3).contains(&dim), "halton supports 1 to 3 dimensions");
    (1..=count as u64)
        .map(|i| {
            let idx = i + skip as u64;
            PRIMES[..dim].iter().map(|&b| radical_inverse(idx, b)).collect()
        })
        .collect()
}

/// Hammersley set of `count` points: point `i` (1-based) is
/// `(i / count, φ_2(i), φ_3(i), ...)`.
pub fn hammersley(count: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!((2..=4).contains(&dim), "hammersley supports 2 to 4 dimensions");
    (1..=count as u64)
        .map(|i| {
            let mut p = Vec::with_capacity(dim);
            p.push(i as f64 / count as f64);
            p.extend(PRIMES[..dim - 1].iter().map(|&b| radical_inverse(i, b)));
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_halton_points() {
        let p = halton(3, 2, 0);
        let expect = [[0.5, 1.0 / 3.0], [0.25, 2.0 / 3.0], [0.75, 1.0 / 9.0]];
        for (a, b) in p.iter().zip(expect) {
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
        assert_eq!(halton(1, 1, 0), vec![vec![0.5]]);
    }

    #[test]
    fn skip_shifts_the_index() {
        assert_eq!(halton(2, 3, 5), halton(7, 3, 0)[5..].to_vec());
    }

    #[test]
    fn hammersley_small() {
        let p = hammersley(4, 2);
        let radical = [0.5, 0.25, 0.75, 0.125];
        for (k, q) in p.iter().enumerate() {
            assert_eq!(q[0], (k + 1) as f64 / 4.0);
            assert_eq!(q[1], radical[k]);
        }
        assert_eq!(hammersley(1, 2), vec![vec![1.0, 0.5]]);
    }
}
