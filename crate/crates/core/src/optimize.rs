//! One-dimensional minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed scalar minimization.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for a minimizer of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol`. Returns the best of the
/// evaluated interior points and the two original endpoints, so a minimum
/// sitting on the boundary is returned exactly.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    assert!(lo <= hi, "golden_section: empty bracket [{lo}, {hi}]");
    let tol = tol.max(f64::EPSILON * (lo.abs().max(hi.abs())).max(1.0));

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;

    while (b - a) > tol && iterations < 500 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }

    let mut best = if fc <= fd {
        Minimum { x: c, value: fc, iterations }
    } else {
        Minimum { x: d, value: fd, iterations }
    };
    for edge in [lo, hi] {
        let fe = f(edge);
        if fe <= best.value {
            best = Minimum { x: edge, value: fe, iterations };
        }
    }
    best
}
