//! Tail probabilities for the reference distributions used by coefficient
//! inference and the paired t-test.

use libm::erfc;
use statrs::function::beta::beta_reg;

/// Smallest p-value ever reported. Keeps `-log10(p)` at or below 300.
pub const P_VALUE_FLOOR: f64 = 1e-300;

/// Two-sided standard normal tail, `P(|Z| >= |z|)`.
pub fn normal_two_sided(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Two-sided Student-t tail, `P(|T| >= |t|)` with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Upper Student-t tail, `P(T >= t)`.
pub fn student_t_upper(t: f64, df: f64) -> f64 {
    let half = 0.5 * student_t_two_sided(t, df);
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// Clamp a p-value into `[P_VALUE_FLOOR, 1]`.
pub fn floor_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(P_VALUE_FLOOR, 1.0)
    }
}
