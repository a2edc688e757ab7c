use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lowrank::error_proxy;

/// Explicit Runge–Kutta method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchemeKind {
    Euler,
    Rk2Midpoint,
    #[default]
    Rk4Classic,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Rk2Midpoint => "rk2_midpoint",
            SchemeKind::Rk4Classic => "rk4_classic",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(SchemeKind::Euler),
            "rk2_midpoint" => Ok(SchemeKind::Rk2Midpoint),
            "rk4_classic" => Ok(SchemeKind::Rk4Classic),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Butcher tableau of an explicit scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub kind: SchemeKind,
    /// Strictly lower triangular; row `i` has `i` entries.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Scheme {
    pub fn new(kind: SchemeKind) -> Self {
        let (a, b, c) = match kind {
            SchemeKind::Euler => (vec![vec![]], vec![1.0], vec![0.0]),
            SchemeKind::Rk2Midpoint => (vec![vec![], vec![0.5]], vec![0.0, 1.0], vec![0.0, 0.5]),
            SchemeKind::Rk4Classic => (
                vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
                vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
                vec![0.0, 0.5, 0.5, 1.0],
            ),
        };
        Self { kind, a, b, c }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn order(&self) -> usize {
        match self.kind {
            SchemeKind::Euler => 1,
            SchemeKind::Rk2Midpoint => 2,
            SchemeKind::Rk4Classic => 4,
        }
    }
}

impl From<SchemeKind> for Scheme {
    fn from(kind: SchemeKind) -> Self {
        Scheme::new(kind)
    }
}

/// Bounds and thresholds for rank adaptation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPolicy {
    pub r0: usize,
    pub r_min: usize,
    pub r_max: usize,
    pub eps_l: f64,
    pub eps_u: f64,
    /// Extra row samples beyond the rank.
    pub m: usize,
    pub adapt: bool,
}

impl RankPolicy {
    /// Fixed rank `r` with `m` oversampled rows.
    pub fn fixed(r: usize, m: usize) -> Self {
        Self { r0: r, r_min: r, r_max: r, eps_l: 0.0, eps_u: 1.0, m, adapt: false }
    }

    pub fn adaptive(r0: usize, r_min: usize, r_max: usize, eps_l: f64, eps_u: f64, m: usize) -> Self {
        Self { r0, r_min, r_max, eps_l, eps_u, m, adapt: true }
    }

    pub fn validate(&self, n: usize, s: usize) -> Result<()> {
        if !(0 < self.r_min && self.r_min <= self.r0 && self.r0 <= self.r_max && self.r_max <= n.min(s)) {
            return Err(Error::InvalidParameter(format!(
                "rank bounds need 0 < r_min <= r0 <= r_max <= min(n, s) = {}; got r_min={}, r0={}, r_max={}",
                n.min(s),
                self.r_min,
                self.r0,
                self.r_max
            )));
        }
        if self.adapt && !(self.eps_l < self.eps_u) {
            return Err(Error::InvalidParameter(format!(
                "eps_l ({}) must be below eps_u ({})",
                self.eps_l, self.eps_u
            )));
        }
        Ok(())
    }

    /// Rank for the coming step given the current singular values.
    pub fn decide(&self, sigma: &[f64]) -> Result<(f64, RankAction, usize)> {
        let eps = error_proxy(sigma)?;
        let r = sigma.len();
        if !self.adapt {
            return Ok((eps, RankAction::None, r));
        }
        if eps > self.eps_u && r < self.r_max {
            Ok((eps, RankAction::Added, r + 1))
        } else if eps < self.eps_l && r > self.r_min {
            Ok((eps, RankAction::Removed, r - 1))
        } else {
            Ok((eps, RankAction::None, r))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankAction {
    None,
    Added,
    Removed,
}

impl RankAction {
    pub fn name(self) -> &'static str {
        match self {
            RankAction::None => "none",
            RankAction::Added => "added",
            RankAction::Removed => "removed",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableaux_are_consistent() {
        for kind in [SchemeKind::Euler, SchemeKind::Rk2Midpoint, SchemeKind::Rk4Classic] {
            let s = Scheme::new(kind);
            assert!((s.b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for (i, row) in s.a.iter().enumerate() {
                assert_eq!(row.len(), i);
                assert!((row.iter().sum::<f64>() - s.c[i]).abs() < 1e-15);
            }
            assert_eq!(kind.name().parse::<SchemeKind>().unwrap(), kind);
        }
    }

    #[test]
    fn policy_transitions() {
        let p = RankPolicy::adaptive(2, 1, 3, 0.1, 0.3, 0);
        // ε = 0.6 > eps_u
        assert_eq!(p.decide(&[4.0, 3.0]).unwrap().1, RankAction::Added);
        // capped at r_max
        assert_eq!(p.decide(&[4.0, 3.0, 3.0]).unwrap().1, RankAction::None);
        // ε = 0.05/‖σ‖ < eps_l
        let (eps, act, r) = p.decide(&[1.0, 0.05]).unwrap();
        assert!(eps < 0.1);
        assert_eq!((act, r), (RankAction::Removed, 1));
        // floored at r_min
        let floor = RankPolicy::adaptive(2, 2, 3, 0.1, 0.3, 0);
        assert_eq!(floor.decide(&[1.0, 0.05]).unwrap().1, RankAction::None);
        // inside the band
        assert_eq!(p.decide(&[1.0, 0.2]).unwrap().1, RankAction::None);
        assert_eq!(RankPolicy::fixed(2, 0).decide(&[4.0, 3.0]).unwrap().1, RankAction::None);
    }
}
