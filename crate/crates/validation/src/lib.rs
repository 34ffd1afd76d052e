//! Shared plumbing for the acceptance checks.
//!
//! Each check prints one verdict line straight to stderr, so the line shows
//! up even when the test harness captures output. Heavy checks take
//! [`exclusive`] first: the 256-pixel weight caches are large enough that
//! running two of them side by side can exhaust memory.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

static HEAVY: Mutex<()> = Mutex::new(());

pub fn exclusive() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Prints `criterion N [PASS|FAIL] title: detail` and returns `pass`.
pub fn verdict(number: usize, title: &str, pass: bool, detail: &str) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {number:02} [{tag}] {title}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

pub fn within(value: f64, target: f64, band: f64) -> bool {
    (value - target).abs() <= band
}

/// Index of the largest finite value, if any.
pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_skips_nan_and_keeps_first_tie() {
        assert_eq!(argmax(&[1.0, f64::NAN, 3.0, 3.0]), Some(2));
        assert_eq!(argmax(&[f64::NAN]), None);
        assert!(within(21.0, 22.06, 1.5));
        assert!(!within(19.0, 22.06, 1.5));
    }
}
