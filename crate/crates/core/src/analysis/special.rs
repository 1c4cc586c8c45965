//! Log-gamma and the regularized incomplete gamma functions.

use super::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant fits the scalar type")
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x < c(0.5) {
        // Reflection.
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a: T = c(LANCZOS[0]);
    for (i, &k) in LANCZOS.iter().enumerate().skip(1) {
        a = a + c::<T>(k) / (x + T::from_usize(i).unwrap());
    }
    let t = x + c(LANCZOS_G + 0.5);
    c::<T>(0.5) * (T::TAU()).ln() + (x + c(0.5)) * t.ln() - t + a.ln()
}

/// ln(n!) for integer n.
pub fn ln_factorial<T: Real>(n: u64) -> T {
    ln_gamma(T::from_u64(n).unwrap() + T::one())
}

const MAX_ITER: usize = 1000;

fn prefactor<T: Real>(a: T, x: T) -> T {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn p_series<T: Real>(a: T, x: T) -> T {
    let mut ap = a;
    let mut del = T::one() / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap = ap + T::one();
        del = del * x / ap;
        sum = sum + del;
        if del.abs() < sum.abs() * T::epsilon() {
            break;
        }
    }
    sum * prefactor(a, x)
}

fn q_continued_fraction<T: Real>(a: T, x: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let two: T = c(2.0);
    let mut b = x + T::one() - a;
    let mut cc = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let i = T::from_usize(i).unwrap();
        let an = -i * (i - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        cc = b + an / cc;
        if cc.abs() < tiny {
            cc = tiny;
        }
        d = T::one() / d;
        let del = d * cc;
        h = h * del;
        if (del - T::one()).abs() < T::epsilon() {
            break;
        }
    }
    prefactor(a, x) * h
}

/// Regularized lower incomplete gamma P(a, x). NaN outside a > 0, x >= 0.
pub fn gamma_p<T: Real>(a: T, x: T) -> T {
    if !(a > T::zero()) || !(x >= T::zero()) {
        return T::nan();
    }
    if x == T::zero() {
        T::zero()
    } else if x < a + T::one() {
        p_series(a, x)
    } else {
        T::one() - q_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q<T: Real>(a: T, x: T) -> T {
    if !(a > T::zero()) || !(x >= T::zero()) {
        return T::nan();
    }
    if x == T::zero() {
        T::one()
    } else if x < a + T::one() {
        T::one() - p_series(a, x)
    } else {
        q_continued_fraction(a, x)
    }
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf<T: Real>(x: T, df: u32) -> T {
    if x <= T::zero() {
        return T::one();
    }
    gamma_q(T::from_u32(df).unwrap() / c(2.0), x / c(2.0))
}

/// Two-sided tail probability of a standard normal deviate.
pub fn normal_two_sided<T: Real>(z: T) -> T {
    gamma_q(c(0.5), z * z / c(2.0))
}
