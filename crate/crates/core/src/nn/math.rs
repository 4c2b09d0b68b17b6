//! Batched activation functions.
//!
//! The gate nonlinearities run over whole 4·hidden-wide slices, so exp is
//! implemented branch-free (Cephes rational polynomial, ~1 ulp over the
//! clamped range) and the loops vectorize. Inputs are clamped to ±700,
//! far outside where sigmoid and tanh saturate.

// standard polynomial coefficients and the Cody-Waite ln2 split, verbatim
#![allow(clippy::excessive_precision, clippy::approx_constant)]

const LOG2_E: f64 = std::f64::consts::LOG2_E;
// ln 2 split high/low so r = x - k*ln2 stays exact
const LN2_HI: f64 = 6.931_457_519_531_25e-1;
const LN2_LO: f64 = 1.428_606_820_309_417_232_12e-6;
const P0: f64 = 1.261_771_930_748_105_908_78e-4;
const P1: f64 = 3.029_944_077_074_419_613e-2;
const P2: f64 = 9.999_999_999_999_999_999_1e-1;
const Q0: f64 = 3.001_985_051_386_644_550_42e-6;
const Q1: f64 = 2.524_483_403_496_841_041_92e-3;
const Q2: f64 = 2.272_655_482_081_550_287_66e-1;
const Q3: f64 = 2.000_000_000_000_000_000_05;

/// exp(x) for x in [-700, 700]; inputs outside are clamped. exp(x) =
/// 2^k * (1 + 2 r P(r^2) / (Q(r^2) - r P(r^2))) with r = x - k ln 2.
#[inline]
pub(crate) fn exp_clamped(x: f64) -> f64 {
    let x = x.clamp(-700.0, 700.0);
    let k = (x * LOG2_E + 0.5).floor();
    let r = k.mul_add(-LN2_LO, k.mul_add(-LN2_HI, x));
    let rr = r * r;
    let p = r * P0.mul_add(rr, P1).mul_add(rr, P2);
    let q = Q0.mul_add(rr, Q1).mul_add(rr, Q2).mul_add(rr, Q3);
    let e = 1.0 + 2.0 * p / (q - p);
    e * f64::from_bits(((k as i64 + 1023) as u64) << 52)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp_clamped(-x))
}

#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    let e = exp_clamped(2.0 * x);
    (e - 1.0) / (e + 1.0)
}

/// In-place sigmoid over a slice.
pub(crate) fn sigmoid_slice(xs: &mut [f64]) {
    for x in xs {
        *x = sigmoid(*x);
    }
}

/// In-place tanh over a slice.
pub(crate) fn tanh_slice(xs: &mut [f64]) {
    for x in xs {
        *x = tanh(*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_std_over_wide_range() {
        let mut worst = 0.0f64;
        let mut x = -700.0;
        while x <= 700.0 {
            let got = exp_clamped(x);
            let want = x.exp();
            let rel = ((got - want) / want).abs();
            if rel > worst {
                worst = rel;
            }
            x += 0.0137;
        }
        assert!(worst < 1e-14, "worst rel err {worst}");
    }

    #[test]
    fn exp_exact_at_zero() {
        assert_eq!(exp_clamped(0.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
    }

    #[test]
    fn sigmoid_and_tanh_match_std() {
        let mut x = -40.0;
        while x <= 40.0 {
            let s = sigmoid(x);
            let s_std = 1.0 / (1.0 + (-x).exp());
            assert!((s - s_std).abs() < 1e-15, "sigmoid({x}): {s} vs {s_std}");
            let t = tanh(x);
            let t_std = x.tanh();
            assert!((t - t_std).abs() < 1e-14, "tanh({x}): {t} vs {t_std}");
            x += 0.0173;
        }
    }

    #[test]
    fn saturation_is_clean() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!(sigmoid(-1000.0) < 1e-300);
        assert_eq!(tanh(1000.0), 1.0);
        assert_eq!(tanh(-1000.0), -1.0);
        assert!(sigmoid(f64::MAX).is_finite());
        assert!(sigmoid(f64::MIN).is_finite());
    }

    #[test]
    fn slices_match_scalar() {
        let xs: Vec<f64> = (-50..50).map(|i| i as f64 * 0.31).collect();
        let mut s = xs.clone();
        sigmoid_slice(&mut s);
        let mut t = xs.clone();
        tanh_slice(&mut t);
        for (i, &x) in xs.iter().enumerate() {
            assert_eq!(s[i], sigmoid(x));
            assert_eq!(t[i], tanh(x));
        }
    }
}
