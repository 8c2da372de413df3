//! Fixtures shared by the benchmarks in `benches/`.

use oscihom::field::PeriodicField;
use oscihom::geometry::Curve;

/// `|sin(pi y1) sin(pi y2)|`, the standard test density.
pub fn sinsin() -> PeriodicField {
    PeriodicField::parse("abs(sin(pi*y1)*sin(pi*y2))", 2).expect("valid expression")
}

/// Segment with the irrational normal `(1, sqrt 2)/sqrt 3`.
pub fn irrational_segment() -> Curve {
    let s3 = 3f64.sqrt();
    Curve::segment([0.0, 0.0], [-2f64.sqrt() / s3, 1.0 / s3]).expect("non-degenerate segment")
}

pub fn stadium() -> Curve {
    Curve::stadium(2.0).expect("positive radius")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        assert!((super::irrational_segment().length() - 1.0).abs() < 1e-12);
        assert!(super::stadium().length() > 0.0);
        assert_eq!(super::sinsin().eval(&[0.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0);
    }
}
