//! Named residual checks.
//!
//! Every verified law produces a [`LawCheck`]: the law's name, the worst
//! residual observed, the tolerance bound it was held to, and the verdict.
//! Validators accumulate them in a [`CheckSet`] so callers can either demand
//! that everything passed or inspect exactly which law failed.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Outcome of checking one law.
#[derive(Clone, Debug)]
pub struct LawCheck {
    /// Dotted law identifier, e.g. `"datum.compose"`.
    pub name: String,
    /// Worst residual observed across all instances of the law.
    pub residual: f64,
    /// Bound the residual was compared against.
    pub bound: f64,
    pub pass: bool,
    /// Where the worst residual occurred.
    pub context: String,
}

/// Accumulator for law checks keyed by name; keeps the worst instance of each.
#[derive(Clone, Debug, Default)]
pub struct CheckSet {
    checks: Vec<LawCheck>,
}

impl CheckSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one observation of a law; merges with an existing record of the
    /// same name by keeping the larger relative exceedance.
    pub fn record<T: Real>(&mut self, name: &str, residual: T, bound: T, context: &str) {
        let residual = residual.as_f64();
        let bound = bound.as_f64();
        let pass = residual <= bound;
        if let Some(existing) = self.checks.iter_mut().find(|c| c.name == name) {
            let worse = residual / bound.max(f64::MIN_POSITIVE)
                > existing.residual / existing.bound.max(f64::MIN_POSITIVE);
            if worse {
                existing.residual = residual;
                existing.bound = bound;
                existing.context = context.to_string();
            }
            existing.pass &= pass;
        } else {
            self.checks.push(LawCheck {
                name: name.to_string(),
                residual,
                bound,
                pass,
                context: context.to_string(),
            });
        }
    }

    /// Record a boolean observation (dimension counts and the like); the
    /// residual is 0 or 1.
    pub fn record_flag(&mut self, name: &str, ok: bool, context: &str) {
        self.record::<f64>(name, if ok { 0.0 } else { 1.0 }, 0.5, context);
    }

    pub fn extend(&mut self, other: CheckSet) {
        for c in other.checks {
            if let Some(existing) = self.checks.iter_mut().find(|e| e.name == c.name) {
                let worse = c.residual / c.bound.max(f64::MIN_POSITIVE)
                    > existing.residual / existing.bound.max(f64::MIN_POSITIVE);
                if worse {
                    existing.residual = c.residual;
                    existing.bound = c.bound;
                    existing.context = c.context;
                }
                existing.pass &= c.pass;
            } else {
                self.checks.push(c);
            }
        }
    }

    pub fn checks(&self) -> &[LawCheck] {
        &self.checks
    }

    pub fn into_checks(self) -> Vec<LawCheck> {
        self.checks
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<&LawCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Names of the failed laws.
    pub fn failed_names(&self) -> Vec<String> {
        self.failed().iter().map(|c| c.name.clone()).collect()
    }

    /// Error out on the worst failing law, if any.
    pub fn ensure_all(&self) -> Result<()> {
        let mut worst: Option<&LawCheck> = None;
        for c in &self.checks {
            if !c.pass {
                let is_worse = worst
                    .map(|w| c.residual / c.bound.max(f64::MIN_POSITIVE) > w.residual / w.bound.max(f64::MIN_POSITIVE))
                    .unwrap_or(true);
                if is_worse {
                    worst = Some(c);
                }
            }
        }
        match worst {
            None => Ok(()),
            Some(c) => Err(Error::Axiom {
                law: Box::leak(c.name.clone().into_boxed_str()),
                residual: c.residual,
                bound: c.bound,
                context: c.context.clone(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_keep_worst_instance() {
        let mut set = CheckSet::new();
        set.record("law.a", 1e-12_f64, 1e-9, "first");
        set.record("law.a", 1e-10_f64, 1e-9, "second");
        set.record("law.a", 1e-13_f64, 1e-9, "third");
        assert_eq!(set.checks().len(), 1);
        assert_eq!(set.checks()[0].context, "second");
        assert!(set.all_pass());
        set.record("law.b", 2e-9_f64, 1e-9, "broken");
        assert!(!set.all_pass());
        assert_eq!(set.failed_names(), vec!["law.b".to_string()]);
        assert!(set.ensure_all().is_err());
    }

    #[test]
    fn flags_record_as_pass_fail() {
        let mut set = CheckSet::new();
        set.record_flag("law.count", true, "ok");
        assert!(set.all_pass());
        set.record_flag("law.count", false, "bad");
        assert!(!set.all_pass());
    }
}
