//! Small numerical helpers shared by the modules.

/// Sum with a fixed binary-tree order, so the result does not depend on how
/// the terms were produced (sequentially or by a parallel map).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    dot3(v, v).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn scale3(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn normalize3(v: [f64; 3]) -> [f64; 3] {
    scale3(v, 1.0 / norm3(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn cross_is_orthogonal() {
        let c = cross3([1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]);
        assert!(dot3(c, [1.0, 2.0, 3.0]).abs() < 1e-12);
        assert!(dot3(c, [-1.0, 0.5, 2.0]).abs() < 1e-12);
    }
}

/// CSV number formatting: shortest round-trip decimal, switching to
/// exponent form for very small or very large magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}
