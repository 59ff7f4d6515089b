use std::fmt;
use std::str::FromStr;

use super::{indicator, lipschitz_bump, make_holder_bump, make_step_drift, DriftSpec};
use crate::error::{Error, Result};

/// Textual drift names used by configs and the CLI:
///
/// ```text
/// zero | constant:c | sign:alpha | step:[(g1,x1),...]:alpha
/// indicator:c:d | holder:gamma:radius | lipschitz_bump:radius
/// ```
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DriftId {
    Zero,
    Constant(f64),
    Sign { alpha: f64 },
    Step { levels: Vec<(f64, f64)>, alpha: f64 },
    Indicator { lo: f64, hi: f64 },
    Holder { gamma: f64, radius: f64 },
    LipschitzBump { radius: f64 },
}

impl DriftId {
    pub fn build(&self) -> Result<DriftSpec> {
        match self {
            DriftId::Zero => Ok(DriftSpec::zero()),
            DriftId::Constant(c) => Ok(DriftSpec::constant(*c)),
            DriftId::Sign { alpha } => make_step_drift(&[(1.0, 0.0)], *alpha),
            DriftId::Step { levels, alpha } => make_step_drift(levels, *alpha),
            DriftId::Indicator { lo, hi } => indicator(*lo, *hi),
            DriftId::Holder { gamma, radius } => make_holder_bump(*gamma, *radius),
            DriftId::LipschitzBump { radius } => lipschitz_bump(*radius),
        }
    }
}

fn number(input: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse("drift id", input, format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse("drift id", input, "parameters must be finite"));
    }
    Ok(v)
}

fn parse_levels(input: &str, body: &str) -> Result<Vec<(f64, f64)>> {
    let inner = body
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::parse("drift id", input, "step levels must be in [...]"))?;
    let mut levels = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let open = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::parse("drift id", input, "expected `(` in step levels"))?;
        let close = open
            .find(')')
            .ok_or_else(|| Error::parse("drift id", input, "unclosed `(` in step levels"))?;
        let (pair, tail) = open.split_at(close);
        let (g, x) = pair
            .split_once(',')
            .ok_or_else(|| Error::parse("drift id", input, "level must be (gamma,x)"))?;
        levels.push((number(input, g)?, number(input, x)?));
        rest = tail[1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(levels)
}

impl FromStr for DriftId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let fields: Vec<&str> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(':').collect()
        };
        let want = |n: usize| -> Result<()> {
            if fields.len() == n {
                Ok(())
            } else {
                Err(Error::parse(
                    "drift id",
                    s,
                    format!("`{name}` takes {n} parameter(s), got {}", fields.len()),
                ))
            }
        };
        match name {
            "zero" => {
                want(0)?;
                Ok(DriftId::Zero)
            }
            "constant" => {
                want(1)?;
                Ok(DriftId::Constant(number(s, fields[0])?))
            }
            "sign" => {
                want(1)?;
                Ok(DriftId::Sign {
                    alpha: number(s, fields[0])?,
                })
            }
            "step" => {
                let (levels, alpha) = args
                    .rsplit_once(':')
                    .ok_or_else(|| Error::parse("drift id", s, "expected step:[...]:alpha"))?;
                Ok(DriftId::Step {
                    levels: parse_levels(s, levels)?,
                    alpha: number(s, alpha)?,
                })
            }
            "indicator" => {
                want(2)?;
                Ok(DriftId::Indicator {
                    lo: number(s, fields[0])?,
                    hi: number(s, fields[1])?,
                })
            }
            "holder" => {
                want(2)?;
                Ok(DriftId::Holder {
                    gamma: number(s, fields[0])?,
                    radius: number(s, fields[1])?,
                })
            }
            "lipschitz_bump" => {
                want(1)?;
                Ok(DriftId::LipschitzBump {
                    radius: number(s, fields[0])?,
                })
            }
            other => Err(Error::parse(
                "drift id",
                s,
                format!("unknown drift family `{other}`"),
            )),
        }
    }
}

impl TryFrom<String> for DriftId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DriftId> for String {
    fn from(id: DriftId) -> String {
        id.to_string()
    }
}

impl fmt::Display for DriftId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftId::Zero => write!(f, "zero"),
            DriftId::Constant(c) => write!(f, "constant:{c}"),
            DriftId::Sign { alpha } => write!(f, "sign:{alpha}"),
            DriftId::Step { levels, alpha } => {
                write!(f, "step:[")?;
                for (i, (g, x)) in levels.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "({g},{x})")?;
                }
                write!(f, "]:{alpha}")
            }
            DriftId::Indicator { lo, hi } => write!(f, "indicator:{lo}:{hi}"),
            DriftId::Holder { gamma, radius } => write!(f, "holder:{gamma}:{radius}"),
            DriftId::LipschitzBump { radius } => write!(f, "lipschitz_bump:{radius}"),
        }
    }
}
