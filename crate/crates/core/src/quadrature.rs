//! Numerical integration: adaptive Gauss-Kronrod and Gauss-Hermite rules.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive G7-K15 integral of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Repeatedly bisects the segment with the largest error estimate. Fails with
/// [`Error::Numerical`] reporting the achieved error if the segment budget runs out.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![kronrod15(&f, a, b)];
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= tol {
            break;
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::Numerical {
                what: "adaptive quadrature did not converge".into(),
                achieved: total_error,
                requested: tol,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("nonempty");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        segments.push(kronrod15(&f, s.a, mid));
        segments.push(kronrod15(&f, mid, s.b));
    }
    // Sum smallest first to limit cancellation of rounding.
    let mut values: Vec<f64> = segments.iter().map(|s| s.value).collect();
    values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    Ok(values.iter().sum())
}

/// Orthonormal Hermite polynomial `p_n(z)` and `p_{n-1}(z)` for the weight
/// `exp(-z^2)`.
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let (mut p1, mut p2) = (PIM4, 0.0);
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Gauss-Hermite rule for the weight `exp(-x^2)`: nodes in decreasing order and weights.
///
/// Positive roots are bracketed by sign changes on a grid a tenth of the
/// smallest root spacing (about `pi / sqrt(2n + 1)`, at the centre) and
/// polished by bracket-safeguarded Newton steps.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::domain("Gauss-Hermite rule needs at least one node"));
    }
    let nf = n as f64;
    let derivative = |z: f64| {
        let (p1, p2) = hermite_pair(n, z);
        (p1, (2.0 * nf).sqrt() * p2)
    };
    let weight = |z: f64| {
        let (_, d) = derivative(z);
        2.0 / (d * d)
    };

    let upper = (2.0 * nf + 1.0).sqrt() + 1.0;
    let h = 0.1 * std::f64::consts::PI / (2.0 * nf + 1.0).sqrt();
    let steps = (upper / h).ceil() as usize;
    let mut positive = Vec::with_capacity(n / 2);
    let mut lo = 0.5 * h;
    let mut f_lo = hermite_pair(n, lo).0;
    for step in 1..=steps {
        let hi = 0.5 * h + step as f64 * h;
        let f_hi = hermite_pair(n, hi).0;
        if f_lo.signum() != f_hi.signum() {
            positive.push(polish(&derivative, lo, hi, f_lo)?);
        }
        lo = hi;
        f_lo = f_hi;
    }
    if positive.len() != n / 2 {
        return Err(Error::Numerical {
            what: format!("found {} of {} positive Gauss-Hermite nodes", positive.len(), n / 2),
            achieved: positive.len() as f64,
            requested: (n / 2) as f64,
        });
    }

    let mut x: Vec<f64> = positive.iter().rev().copied().collect();
    if n % 2 == 1 {
        x.push(0.0);
    }
    x.extend(positive.iter().map(|r| -r));
    let w = x.iter().map(|&z| weight(z)).collect();
    Ok((x, w))
}

/// Newton iteration kept inside the sign-change bracket `[lo, hi]`.
fn polish<F: Fn(f64) -> (f64, f64)>(f: &F, mut lo: f64, mut hi: f64, f_lo: f64) -> Result<f64> {
    let lo_sign = f_lo.signum();
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = f(z);
        if v == 0.0 {
            return Ok(z);
        }
        if v.signum() == lo_sign {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - v / d;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - z).abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * z.abs() {
            return Ok(next);
        }
        z = next;
    }
    Err(Error::Numerical {
        what: "Gauss-Hermite node did not converge".into(),
        achieved: hi - lo,
        requested: 4.0 * f64::EPSILON,
    })
}
