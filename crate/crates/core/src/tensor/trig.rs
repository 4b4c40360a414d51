//! Sine and cosine sharing one argument reduction.
//!
//! Cody-Waite reduction by π/2 in three parts followed by the classic
//! minimax kernels on `[-π/4, π/4]`. Arguments beyond `2^20·π/2` or
//! non-finite ones go to the standard library.

const TOINT: f64 = 1.5 / f64::EPSILON;
const INV_PIO2: f64 = std::f64::consts::FRAC_2_PI;
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_1T: f64 = 6.077_100_506_506_192_249_32e-11;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_2T: f64 = 2.022_266_248_795_950_631_54e-21;
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21;
const PIO2_3T: f64 = 8.478_427_660_368_899_569_97e-32;
const REDUCTION_LIMIT: f64 = 1_647_099.0;

const S1: f64 = -1.666_666_666_666_663_243_48e-1;
const S2: f64 = 8.333_333_333_322_489_461_24e-3;
const S3: f64 = -1.984_126_982_985_794_931_34e-4;
const S4: f64 = 2.755_731_370_707_006_767_89e-6;
const S5: f64 = -2.505_076_025_340_686_341_95e-8;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-2;
const C2: f64 = -1.388_888_888_887_410_957_49e-3;
const C3: f64 = 2.480_158_728_947_672_941_78e-5;
const C4: f64 = -2.755_731_435_139_066_330_35e-7;
const C5: f64 = 2.087_572_321_298_174_827_90e-9;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

fn biased_exponent(v: f64) -> i64 {
    ((v.to_bits() >> 52) & 0x7ff) as i64
}

/// `x = n·π/2 + (y0 + y1)` with `|y0 + y1| ≲ π/4`.
fn reduce(x: f64) -> (i64, f64, f64) {
    let f = x * INV_PIO2 + TOINT - TOINT;
    let n = f as i64;
    let mut r = x - f * PIO2_1;
    let mut w = f * PIO2_1T;
    let mut y0 = r - w;
    let ex = biased_exponent(x);
    if ex - biased_exponent(y0) > 16 {
        let t = r;
        w = f * PIO2_2;
        r = t - w;
        w = f * PIO2_2T - ((t - r) - w);
        y0 = r - w;
        if ex - biased_exponent(y0) > 49 {
            let t = r;
            w = f * PIO2_3;
            r = t - w;
            w = f * PIO2_3T - ((t - r) - w);
            y0 = r - w;
        }
    }
    let y1 = (r - y0) - w;
    (n, y0, y1)
}

fn kernel_sin(x: f64, y: f64) -> f64 {
    let z = x * x;
    let w = z * z;
    let r = S2 + z * (S3 + z * S4) + z * w * (S5 + z * S6);
    let v = z * x;
    x - ((z * (0.5 * y - v * r) - y) - v * S1)
}

fn kernel_cos(x: f64, y: f64) -> f64 {
    let z = x * x;
    let w = z * z;
    let r = z * (C1 + z * (C2 + z * C3)) + w * w * (C4 + z * (C5 + z * C6));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    w + (((1.0 - w) - hz) + (z * r - x * y))
}

/// `(sin x, cos x)`.
pub fn sin_cos(x: f64) -> (f64, f64) {
    if !(x.abs() < REDUCTION_LIMIT) {
        return x.sin_cos();
    }
    let (n, y0, y1) = reduce(x);
    let (s, c) = (kernel_sin(y0, y1), kernel_cos(y0, y1));
    match n & 3 {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

pub fn sin(x: f64) -> f64 {
    if !(x.abs() < REDUCTION_LIMIT) {
        return x.sin();
    }
    let (n, y0, y1) = reduce(x);
    match n & 3 {
        0 => kernel_sin(y0, y1),
        1 => kernel_cos(y0, y1),
        2 => -kernel_sin(y0, y1),
        _ => -kernel_cos(y0, y1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(x: f64) {
        let (s, c) = sin_cos(x);
        assert!((s - x.sin()).abs() <= 2.5e-16, "sin({x}): {s} vs {}", x.sin());
        assert!((c - x.cos()).abs() <= 2.5e-16, "cos({x}): {c} vs {}", x.cos());
        assert_eq!(sin(x).to_bits(), s.to_bits());
    }

    #[test]
    fn matches_std_over_wide_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scale in [1e-300, 1e-8, 0.5, 1.0, 4.0, 100.0, 3e4, 1.6e6] {
            for _ in 0..20_000 {
                check(rng.gen_range(-scale..scale));
            }
        }
    }

    #[test]
    fn special_arguments() {
        for x in [0.0, -0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, 1e7, -3e9] {
            check(x);
        }
        // Near multiples of π/2 where reduction cancels heavily.
        for k in 1..2000 {
            check(k as f64 * std::f64::consts::FRAC_PI_2);
        }
        assert!(sin_cos(f64::NAN).0.is_nan());
        assert!(sin(f64::INFINITY).is_nan());
    }
}
