use std::path::Path;

use super::Method;
use crate::error::{Error, Result};
use crate::geometry::Layout;
use crate::kernels::PolyDegree;
use crate::precision::Precision;
use crate::problems::ProblemId;

/// Parameters of a single solve.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub method: Method,
    /// Target total node count.
    pub n: usize,
    /// Stencil size for LAM and DQ.
    pub n_local: usize,
    /// Multiquadric shape.
    pub c: f64,
    pub beta: f64,
    pub precision: Precision,
    /// Shape-perturbation preconditioning of the local matrices.
    pub precond: bool,
    pub layout: Layout,
    pub seed: u64,
    pub poly: PolyDegree,
    /// Compute `cond_1(S)` for local methods.
    pub global_condition: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemId::Poisson,
            method: Method::LamDq,
            n: 622,
            n_local: 50,
            c: 1.0,
            beta: 1e-6,
            precision: Precision::Extended,
            precond: false,
            layout: Layout::Halton,
            seed: 0,
            poly: PolyDegree::Linear,
            global_condition: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key} = '{value}': {e}")))
}

pub(crate) fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key} = '{value}': expected on or off"
        ))),
    }
}

impl RunConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = parse(key, value)?,
            "method" => self.method = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "nk" | "n_local" => self.n_local = parse(key, value)?,
            "c" => self.c = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "precision" => self.precision = parse(key, value)?,
            "precond" => self.precond = parse_switch(key, value)?,
            "layout" => self.layout = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "poly" => self.poly = parse(key, value)?,
            "kappa_s" | "global_condition" => self.global_condition = parse_switch(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// `key = value` text accepted by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let on = |b: bool| if b { "on" } else { "off" };
        format!(
            "problem = {}\nmethod = {}\nn = {}\nnk = {}\nc = {:e}\nbeta = {:e}\nprecision = {}\nprecond = {}\nlayout = {}\nseed = {}\npoly = {}\nkappa_s = {}\n",
            self.problem,
            self.method,
            self.n,
            self.n_local,
            self.c,
            self.beta,
            self.precision.as_str(),
            on(self.precond),
            self.layout.as_str(),
            self.seed,
            self.poly.as_str(),
            on(self.global_condition),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n == 0 || self.n_local == 0 {
            return bad("n and nk must be positive");
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad("c must be positive");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.method == Method::Ac && self.precond {
            return bad("the local-matrix preconditioner applies to lam-dq and lam-lam only");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig {
            problem: ProblemId::CornerTarget,
            method: Method::LamLam,
            c: 7e-3,
            beta: 1e-10,
            precond: true,
            seed: 9,
            ..RunConfig::default()
        };
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_errors() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# sweep base\nn = 300  # small\n\nmethod=ac\n")
            .unwrap();
        assert_eq!((cfg.n, cfg.method), (300, Method::Ac));
        assert!(cfg.apply_text("shape = 1").is_err());
        assert!(cfg.apply_text("n 3").is_err());
        assert!(cfg.apply_text("precond = maybe").is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        for bad in [
            RunConfig {
                c: 0.0,
                ..RunConfig::default()
            },
            RunConfig {
                beta: -1.0,
                ..RunConfig::default()
            },
            RunConfig {
                n_local: 0,
                ..RunConfig::default()
            },
            RunConfig {
                method: Method::Ac,
                precond: true,
                ..RunConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
