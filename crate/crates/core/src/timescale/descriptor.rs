use super::{Continuation, PointRule, TimeScale};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// JSON form of a time scale:
/// `{"segments": [[a, b], ...], "pattern": {...}}` with `b = null` for `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleDescriptor {
    pub segments: Vec<(f64, Option<f64>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternDescriptor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PatternDescriptor {
    Periodic {
        period: f64,
        #[serde(default)]
        cell_start: usize,
    },
    /// `rule` is one of `geometric` (with `ratio`), `power` (with `exponent`),
    /// or `explicit` (with `points`).
    Sequence {
        rule: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ratio: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exponent: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<f64>>,
    },
}

impl ScaleDescriptor {
    pub fn build(&self) -> Result<TimeScale> {
        let raw: Vec<(f64, f64)> = self.segments.iter().map(|&(a, b)| (a, b.unwrap_or(f64::INFINITY))).collect();
        match &self.pattern {
            None => TimeScale::canonicalize(&raw),
            Some(PatternDescriptor::Periodic { period, cell_start }) => TimeScale::periodic(&raw, *period, *cell_start),
            Some(PatternDescriptor::Sequence { rule, ratio, exponent, points }) => {
                let missing = |what: &str| Error::InvalidScale(format!("{rule} rule needs `{what}`"));
                let rule = match rule.as_str() {
                    "geometric" => PointRule::Geometric { ratio: ratio.ok_or_else(|| missing("ratio"))? },
                    "power" => PointRule::Power { exponent: exponent.ok_or_else(|| missing("exponent"))? },
                    "explicit" => PointRule::Explicit(points.clone().ok_or_else(|| missing("points"))?),
                    other => return Err(Error::InvalidScale(format!("unknown sequence rule `{other}`"))),
                };
                TimeScale::with_sequence(&raw, rule)
            }
        }
    }
}

impl TimeScale {
    pub fn descriptor(&self) -> ScaleDescriptor {
        let segments = self.segments.iter().map(|s| (s.left, s.right.is_finite().then_some(s.right))).collect();
        let pattern = self.continuation.as_ref().map(|c| match c {
            Continuation::Periodic { period, cell_start } => {
                PatternDescriptor::Periodic { period: *period, cell_start: *cell_start }
            }
            Continuation::Sequence(rule) => {
                let (name, ratio, exponent, points) = match rule {
                    PointRule::Geometric { ratio } => ("geometric", Some(*ratio), None, None),
                    PointRule::Power { exponent } => ("power", None, Some(*exponent), None),
                    PointRule::Explicit(p) => ("explicit", None, None, Some(p.clone())),
                };
                PatternDescriptor::Sequence { rule: name.into(), ratio, exponent, points }
            }
        });
        ScaleDescriptor { segments, pattern }
    }

    /// Parse a JSON descriptor or a builtin name:
    /// `real`, `integers[:h]`, `union`, `geometric:q`, `tower3[:n]`,
    /// `random-syndetic:seed,mu_max`.
    pub fn parse(desc: &str) -> Result<TimeScale> {
        let desc = desc.trim();
        if desc.starts_with('{') {
            let d: ScaleDescriptor =
                serde_json::from_str(desc).map_err(|e| Error::InvalidScale(format!("descriptor: {e}")))?;
            return d.build();
        }
        let (name, args) = desc.split_once(':').unwrap_or((desc, ""));
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::InvalidScale(format!("bad number `{s}` in `{desc}`")))
        };
        match name {
            "real" => Ok(TimeScale::real()),
            "integers" => TimeScale::integers(if args.is_empty() { 1.0 } else { num(args)? }),
            "union" => Ok(TimeScale::union()),
            "geometric" => TimeScale::geometric(if args.is_empty() { 2.0 } else { num(args)? }),
            "tower3" => {
                let n = if args.is_empty() { None } else { Some(num(args)? as usize) };
                TimeScale::tower3(n)
            }
            "random-syndetic" => {
                let (seed, mu) = args.split_once(',').unwrap_or((args, "1"));
                let seed =
                    seed.trim().parse::<u64>().map_err(|_| Error::InvalidScale(format!("bad seed in `{desc}`")))?;
                TimeScale::random_syndetic(seed, num(mu)?)
            }
            _ => Err(Error::InvalidScale(format!("unknown scale `{desc}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        assert_eq!(TimeScale::parse("real").unwrap(), TimeScale::real());
        assert_eq!(TimeScale::parse("integers:0.5").unwrap(), TimeScale::integers(0.5).unwrap());
        assert_eq!(TimeScale::parse("union").unwrap(), TimeScale::union());
        assert!(!TimeScale::parse("tower3").unwrap().is_syndetic());
        assert!(TimeScale::parse("random-syndetic:7,0.5").unwrap().is_syndetic());
        assert!(TimeScale::parse("cantor").is_err());
    }

    #[test]
    fn json_descriptor() {
        let ts =
            TimeScale::parse(r#"{"segments":[[0,1],[2,2]],"pattern":{"kind":"periodic","period":1,"cell_start":1}}"#)
                .unwrap();
        assert_eq!(ts, TimeScale::union());
        let ts = TimeScale::parse(r#"{"segments":[[0,null]]}"#).unwrap();
        assert_eq!(ts, TimeScale::real());
        let ts = TimeScale::parse(
            r#"{"segments":[[1,1]],"pattern":{"kind":"sequence","rule":"explicit","points":[2,4,8]}}"#,
        )
        .unwrap();
        assert_eq!(ts.forward_jump(4.0).unwrap(), 8.0);
        assert_eq!(ts.forward_jump(8.0).unwrap(), 8.0);
    }

    #[test]
    fn descriptor_roundtrip() {
        for name in ["real", "integers:0.25", "union", "geometric:3", "tower3", "random-syndetic:3,0.7"] {
            let ts = TimeScale::parse(name).unwrap();
            let json = serde_json::to_string(&ts.descriptor()).unwrap();
            assert_eq!(TimeScale::parse(&json).unwrap(), ts, "{name}");
        }
    }
}
