//! Number formatting for text output: six significant digits, trailing
//! zeros trimmed, scientific notation outside `[1e-4, 1e6)`.

use qudit_clone::C64;

pub const SIG_DIGITS: usize = 6;

pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{:.*e}", SIG_DIGITS - 1, x);
        let (mantissa, e) = s
            .split_once('e')
            .expect("scientific format has an exponent");
        return format!("{}e{e}", trim(mantissa));
    }
    let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (0.9999996 -> 1.000000)
    trim(&s).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn sig_complex(z: C64) -> String {
    if z.im == 0.0 {
        return sig(z.re);
    }
    if z.re == 0.0 {
        return format!("{}j", sig(z.im));
    }
    let sign = if z.im < 0.0 { '-' } else { '+' };
    format!("{}{sign}{}j", sig(z.re), sig(z.im.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig(0.7), "0.7");
        assert_eq!(sig(11.0 / 12.0), "0.916667");
        assert_eq!(sig(2.0), "2");
        assert_eq!(sig(-248.0321), "-248.032");
        assert_eq!(sig(0.99999996), "1");
        assert_eq!(sig(1.234e-7), "1.234e-7");
        assert_eq!(sig(123456789.0), "1.23457e8");
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(1e-4), "0.0001");
    }

    #[test]
    fn complex_entries() {
        assert_eq!(sig_complex(C64::new(0.5, 0.0)), "0.5");
        assert_eq!(sig_complex(C64::new(0.0, -0.25)), "-0.25j");
        assert_eq!(sig_complex(C64::new(0.1, -0.2)), "0.1-0.2j");
    }
}
