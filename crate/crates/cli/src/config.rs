//! Run configuration: defaults, `key = value` files and command-line overrides.
//!
//! Precedence is flag > file > default. The output directory falls back to the
//! `VKCTRL_OUT` environment variable before the built-in default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use vkctrl_core::assembly::DEFAULT_LOAD_ORDER;
use vkctrl_core::control::PdasOptions;
use vkctrl_core::convergence::{StudyOptions, DEFAULT_ERROR_ORDER};
use vkctrl_core::element::gauss_1d;
use vkctrl_core::manufactured::CaseSpec;
use vkctrl_core::mesh::Region;
use vkctrl_core::solver::NewtonOptions;

pub const KEYS: [&str; 13] = [
    "case",
    "levels",
    "level",
    "alpha",
    "ua",
    "ub",
    "omega",
    "quad_assembly",
    "quad_error",
    "tol_newton",
    "tol_pdas",
    "out",
    "format",
];

/// A rejected configuration entry; reported with the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub md: bool,
    pub dat: bool,
}

/// Unvalidated settings as strings, one layer of the precedence stack.
pub type Layer = BTreeMap<String, String>;

pub fn parse_file(path: &Path) -> Result<Layer, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
    parse_text(&text)
}

/// `key = value` per line; `#` starts a comment; keys may use `-` or `_`.
pub fn parse_text(text: &str) -> Result<Layer, ConfigError> {
    let mut out = Layer::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(line, format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(bad(&key, format!("unknown key on line {}", lineno + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: CaseSpec,
    pub levels: (u32, u32),
    pub level: u32,
    pub omega: Region,
    pub quad_assembly: usize,
    pub quad_error: usize,
    pub tol_newton: f64,
    pub tol_pdas: f64,
    pub out: PathBuf,
    pub formats: Formats,
}

impl RunConfig {
    pub fn study_options(&self) -> StudyOptions {
        let newton = NewtonOptions { tol_rel: self.tol_newton, ..NewtonOptions::default() };
        StudyOptions {
            omega: self.omega,
            pdas: PdasOptions { tol_u: self.tol_pdas, newton, ..PdasOptions::default() },
            load_order: self.quad_assembly,
            error_order: self.quad_error,
            ..StudyOptions::default()
        }
    }
}

pub fn parse_levels(key: &str, s: &str) -> Result<(u32, u32), ConfigError> {
    let num = |t: &str| t.trim().parse::<u32>().map_err(|_| bad(key, format!("`{t}` is not a level")));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let l = num(s)?;
            (l, l)
        }
    };
    if a > b {
        return Err(bad(key, format!("levels must be ascending, got {a}..{b}")));
    }
    if a < 1 || b > 8 {
        return Err(bad(key, format!("levels must lie in 1..8, got {a}..{b}")));
    }
    Ok((a, b))
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ConfigError> {
    let v: f64 = s.trim().parse().map_err(|_| bad(key, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(v)
}

fn parse_positive(key: &str, s: &str) -> Result<f64, ConfigError> {
    let v = parse_f64(key, s)?;
    if v <= 0.0 {
        return Err(bad(key, "must be positive"));
    }
    Ok(v)
}

fn parse_order(key: &str, s: &str) -> Result<usize, ConfigError> {
    let n: usize = s.trim().parse().map_err(|_| bad(key, format!("`{s}` is not an integer")))?;
    gauss_1d(n).map_err(|e| bad(key, e.to_string()))?;
    Ok(n)
}

/// `whole` or `x0,x1,y0,y1`.
pub fn parse_omega(key: &str, s: &str) -> Result<Region, ConfigError> {
    if s.trim().eq_ignore_ascii_case("whole") {
        return Ok(Region::Whole);
    }
    let v: Vec<f64> = s.split(',').map(|t| parse_f64(key, t)).collect::<Result<_, _>>()?;
    match v[..] {
        [x0, x1, y0, y1] => Ok(Region::Rect { x0, x1, y0, y1 }),
        _ => Err(bad(key, "expected `whole` or `x0,x1,y0,y1`")),
    }
}

pub fn parse_formats(key: &str, s: &str) -> Result<Formats, ConfigError> {
    let mut f = Formats { csv: false, md: false, dat: false };
    for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match t {
            "csv" => f.csv = true,
            "md" => f.md = true,
            "dat" => f.dat = true,
            _ => return Err(bad(key, format!("unknown format `{t}`"))),
        }
    }
    if !(f.csv || f.md || f.dat) {
        return Err(bad(key, "no output format selected"));
    }
    Ok(f)
}

/// Merges the layers (later wins) and validates every key.
pub fn resolve(file: &Layer, flags: &Layer, env_out: Option<String>) -> Result<RunConfig, ConfigError> {
    let get = |k: &str| flags.get(k).or_else(|| file.get(k)).map(String::as_str);
    let case_name = get("case").unwrap_or("ex1");
    let mut case = CaseSpec::by_name(case_name).ok_or_else(|| bad("case", format!("unknown case `{case_name}`")))?;
    if let Some(v) = get("alpha") {
        case.alpha = parse_positive("alpha", v)?;
    }
    if let Some(v) = get("ua") {
        case.u_a = parse_f64("ua", v)?;
    }
    if let Some(v) = get("ub") {
        case.u_b = parse_f64("ub", v)?;
    }
    if case.u_a > case.u_b {
        return Err(bad("ua", format!("lower bound {} exceeds upper bound {}", case.u_a, case.u_b)));
    }
    let levels = parse_levels("levels", get("levels").unwrap_or("1..4"))?;
    let level = match get("level") {
        Some(v) => parse_levels("level", v)?.0,
        None => 1,
    };
    let out = match get("out") {
        Some(v) => PathBuf::from(v),
        None => PathBuf::from(env_out.unwrap_or_else(|| "vkctrl-out".to_string())),
    };
    Ok(RunConfig {
        case,
        levels,
        level,
        omega: parse_omega("omega", get("omega").unwrap_or("whole"))?,
        quad_assembly: match get("quad_assembly") {
            Some(v) => parse_order("quad_assembly", v)?,
            None => DEFAULT_LOAD_ORDER,
        },
        quad_error: match get("quad_error") {
            Some(v) => parse_order("quad_error", v)?,
            None => DEFAULT_ERROR_ORDER,
        },
        tol_newton: parse_positive("tol_newton", get("tol_newton").unwrap_or("1e-10"))?,
        tol_pdas: parse_positive("tol_pdas", get("tol_pdas").unwrap_or("1e-9"))?,
        out,
        formats: parse_formats("format", get("format").unwrap_or("csv,md"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn levels_syntax() {
        assert_eq!(parse_levels("levels", "1..3").unwrap(), (1, 3));
        assert_eq!(parse_levels("levels", "2..=4").unwrap(), (2, 4));
        assert_eq!(parse_levels("levels", "5").unwrap(), (5, 5));
        assert!(parse_levels("levels", "3..1").is_err());
        assert!(parse_levels("levels", "0..2").is_err());
        assert!(parse_levels("levels", "a..2").is_err());
    }

    #[test]
    fn file_syntax() {
        let l = parse_text("# comment\ncase = ex2\n\nquad-error = 9  # trailing\n").unwrap();
        assert_eq!(l.get("case").unwrap(), "ex2");
        assert_eq!(l.get("quad_error").unwrap(), "9");
        let e = parse_text("colour = red").unwrap_err();
        assert_eq!(e.key, "colour");
        assert!(parse_text("just words").is_err());
    }

    #[test]
    fn precedence() {
        let file = layer(&[("alpha", "2e-5"), ("ua", "-700"), ("tol_pdas", "1e-8")]);
        let flags = layer(&[("alpha", "3e-5")]);
        let c = resolve(&file, &flags, None).unwrap();
        assert_eq!(c.case.alpha, 3e-5);
        assert_eq!(c.case.u_a, -700.0);
        assert_eq!(c.case.u_b, -50.0);
        assert_eq!(c.tol_pdas, 1e-8);
        assert_eq!(c.out, PathBuf::from("vkctrl-out"));
        let c = resolve(&file, &flags, Some("/tmp/x".into())).unwrap();
        assert_eq!(c.out, PathBuf::from("/tmp/x"));
        let c = resolve(&file, &layer(&[("out", "here")]), Some("/tmp/x".into())).unwrap();
        assert_eq!(c.out, PathBuf::from("here"));
    }

    #[test]
    fn validation_names_key() {
        let e = resolve(&Layer::new(), &layer(&[("case", "ex9")]), None).unwrap_err();
        assert_eq!(e.key, "case");
        let e = resolve(&layer(&[("alpha", "-1")]), &Layer::new(), None).unwrap_err();
        assert_eq!(e.key, "alpha");
        let e = resolve(&Layer::new(), &layer(&[("quad_error", "40")]), None).unwrap_err();
        assert_eq!(e.key, "quad_error");
        let e = resolve(&Layer::new(), &layer(&[("format", "pdf")]), None).unwrap_err();
        assert_eq!(e.key, "format");
        let e = resolve(&Layer::new(), &layer(&[("ua", "0"), ("ub", "-1")]), None).unwrap_err();
        assert_eq!(e.key, "ua");
    }

    #[test]
    fn omega_syntax() {
        assert_eq!(parse_omega("omega", "whole").unwrap(), Region::Whole);
        assert_eq!(
            parse_omega("omega", "0,0.5,0.25,1").unwrap(),
            Region::Rect { x0: 0.0, x1: 0.5, y0: 0.25, y1: 1.0 }
        );
        assert!(parse_omega("omega", "0,1").is_err());
    }
}
