use clap::{Args, Parser, Subcommand, ValueEnum};
use frechet_core::{GradedMetricConfig, GradedPoint, PeriodicFunction, WeightSequence};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "frechet", version, about = "Reproducible experiments on graded metric Fréchet space models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment and write its report.
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MetricsCompare,
    ShiftBound,
    FkWitness,
    CompositionProbe,
    NeumannInvert,
    IftSolve,
    MinkowskiTame,
    Lengths,
    BallGeometry,
}

impl Experiment {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub experiment: Experiment,
    /// Truncation depth of sequence models.
    #[arg(long, default_value_t = 16)]
    pub depth: usize,
    /// Bandwidth of periodic-function models.
    #[arg(long, default_value_t = 16)]
    pub bandwidth: usize,
    /// `geometric:<r>` or an explicit comma-separated list.
    #[arg(long, default_value = "geometric:0.5")]
    pub weights: String,
    /// Number of metric levels for geometric weights (raised to the depth if smaller).
    #[arg(long, default_value_t = 64)]
    pub levels: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Number of random probes or samples.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Output directory; reports go to stdout when omitted.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Curve for `lengths`: `line:e<k>`, `line:sin<k>`, `line:pow<q>` or `affine:e<i>:e<j>`.
    #[arg(long, default_value = "line:e1")]
    pub curve: String,
    /// Map for `ift-solve`: `tau-sine` or `tau-sine:<eps>`.
    #[arg(long, default_value = "tau-sine")]
    pub map: String,
    /// Target for `ift-solve` as a sum of `<c>e<k>` terms, e.g. `0.1e1+0.05e3`.
    #[arg(long, default_value = "0.1e1")]
    pub target: String,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    Geometric { ratio: f64, levels: usize },
    List { values: Vec<f64> },
}

impl WeightSpec {
    pub fn parse(s: &str, levels: usize) -> Result<Self, ConfigError> {
        if let Some(r) = s.strip_prefix("geometric:") {
            let ratio: f64 = r.trim().parse().map_err(|_| ConfigError(format!("bad geometric ratio `{r}`")))?;
            if !(ratio > 0.0 && ratio < 1.0) {
                return err(format!("geometric ratio must lie in (0, 1), got {ratio}"));
            }
            return Ok(Self::Geometric { ratio, levels });
        }
        let values = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| ConfigError(format!("bad weight `{x}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::List { values })
    }

    pub fn build(&self) -> Result<WeightSequence, ConfigError> {
        let w = match self {
            Self::Geometric { ratio, levels } => WeightSequence::geometric(*ratio, *levels),
            Self::List { values } => WeightSequence::new(values.clone()),
        };
        w.map_err(|e| ConfigError(e.to_string()))
    }

    /// The ratio of a geometric sequence, if any.
    pub fn ratio(&self) -> Option<f64> {
        match self {
            Self::Geometric { ratio, .. } => Some(*ratio),
            Self::List { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveChoice {
    LineBasis { k: usize },
    LineSine { k: usize },
    LinePower { q: f64 },
    AffineBasis { from: usize, to: usize },
}

fn parse_basis(s: &str) -> Result<usize, ConfigError> {
    match s.strip_prefix('e').and_then(|k| k.parse::<usize>().ok()) {
        Some(k) if k >= 1 => Ok(k),
        _ => err(format!("expected a basis vector e<k> with k >= 1, got `{s}`")),
    }
}

impl CurveChoice {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["line", v] if v.starts_with("sin") => match v[3..].parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Self::LineSine { k }),
                _ => err(format!("bad sine mode in `{s}`")),
            },
            ["line", v] if v.starts_with("pow") => match v[3..].parse::<f64>() {
                Ok(q) if q.is_finite() && q > 0.0 => Ok(Self::LinePower { q }),
                _ => err(format!("bad power base in `{s}`")),
            },
            ["line", v] => Ok(Self::LineBasis { k: parse_basis(v)? }),
            ["affine", a, b] => Ok(Self::AffineBasis { from: parse_basis(a)?, to: parse_basis(b)? }),
            _ => err(format!("unknown curve `{s}`")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MapChoice {
    pub name: String,
    pub eps: f64,
}

impl MapChoice {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let (name, eps) = match s.split_once(':') {
            Some((n, e)) => (n, e.parse::<f64>().map_err(|_| ConfigError(format!("bad map parameter `{e}`")))?),
            None => (s, 0.1),
        };
        if name != "tau-sine" {
            return err(format!("unknown map `{name}`"));
        }
        if !(eps.is_finite() && eps.abs() < 1.0) {
            return err(format!("tau-sine needs |eps| < 1, got {eps}"));
        }
        Ok(Self { name: name.into(), eps })
    }
}

/// Sparse target `Σ c_k e_k`, stored as `(k, c)` pairs.
#[derive(Clone, Debug, Serialize)]
pub struct TargetSpec {
    pub terms: Vec<(usize, f64)>,
}

impl TargetSpec {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let terms = s
            .split('+')
            .map(|t| {
                let t = t.trim();
                let (c, k) = t.rsplit_once('e').ok_or_else(|| ConfigError(format!("bad target term `{t}`")))?;
                let c: f64 = c.parse().map_err(|_| ConfigError(format!("bad coefficient in `{t}`")))?;
                let k: usize = k.parse().map_err(|_| ConfigError(format!("bad index in `{t}`")))?;
                if k == 0 || !c.is_finite() {
                    return err(format!("bad target term `{t}`"));
                }
                Ok((k, c))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { terms })
    }

    pub fn point(&self, depth: usize) -> Result<GradedPoint, ConfigError> {
        let mut v = vec![0.0; depth];
        for &(k, c) in &self.terms {
            if k > depth {
                return err(format!("target index {k} exceeds depth {depth}"));
            }
            v[k - 1] += c;
        }
        Ok(GradedPoint::sequence(v))
    }
}

/// Fully resolved configuration, embedded in every report.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub depth: usize,
    pub bandwidth: usize,
    pub weights: WeightSpec,
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
}

impl ExperimentConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self, ConfigError> {
        if args.depth < 2 || args.depth > 512 {
            return err(format!("depth must lie in 2..=512, got {}", args.depth));
        }
        if args.bandwidth < 1 || args.bandwidth > 1024 {
            return err(format!("bandwidth must lie in 1..=1024, got {}", args.bandwidth));
        }
        if !(args.tol > 0.0 && args.tol.is_finite()) {
            return err(format!("tolerance must be positive, got {}", args.tol));
        }
        if args.samples == 0 {
            return err("samples must be positive");
        }
        if args.levels > 1024 {
            return err(format!("levels must be at most 1024, got {}", args.levels));
        }
        let weights = WeightSpec::parse(&args.weights, args.levels.max(args.depth))?;
        let built = weights.build()?;
        if built.len() < args.depth {
            return err(format!("need at least {} weights for depth {}, got {}", args.depth, args.depth, built.len()));
        }
        let exp = args.experiment;
        let mut cfg = Self {
            experiment: exp,
            depth: args.depth,
            bandwidth: args.bandwidth,
            weights,
            seed: args.seed,
            tol: args.tol,
            samples: args.samples,
            format: args.format,
            curve: None,
            map: None,
            target: None,
        };
        if exp == Experiment::Lengths {
            cfg.curve = Some(CurveChoice::parse(&args.curve)?);
        }
        if exp == Experiment::IftSolve {
            cfg.map = Some(MapChoice::parse(&args.map)?);
            let target = TargetSpec::parse(&args.target)?;
            target.point(args.depth)?;
            cfg.target = Some(target);
        }
        Ok(cfg)
    }

    pub fn weight_sequence(&self) -> WeightSequence {
        self.weights.build().expect("validated in resolve")
    }

    pub fn standard(&self) -> GradedMetricConfig {
        GradedMetricConfig::standard(self.weight_sequence())
    }

    pub fn supremum(&self) -> GradedMetricConfig {
        GradedMetricConfig::supremum(self.weight_sequence())
    }
}

/// A periodic function `sin(kx)` at the configured bandwidth.
pub fn sine_point(bandwidth: usize, k: usize) -> Result<GradedPoint, ConfigError> {
    PeriodicFunction::sin(bandwidth.max(k), k)
        .map(GradedPoint::function)
        .map_err(|e| ConfigError(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert!(matches!(WeightSpec::parse("geometric:0.5", 64), Ok(WeightSpec::Geometric { levels: 64, .. })));
        let l = WeightSpec::parse("0.5, 0.25,0.125", 64).unwrap();
        assert_eq!(l.build().unwrap().values(), &[0.5, 0.25, 0.125]);
        assert!(WeightSpec::parse("geometric:1", 8).is_err());
        assert!(WeightSpec::parse("0.5,x", 8).is_err());
    }

    #[test]
    fn curves() {
        assert!(matches!(CurveChoice::parse("line:e1"), Ok(CurveChoice::LineBasis { k: 1 })));
        assert!(matches!(CurveChoice::parse("line:sin3"), Ok(CurveChoice::LineSine { k: 3 })));
        assert!(matches!(CurveChoice::parse("affine:e1:e4"), Ok(CurveChoice::AffineBasis { from: 1, to: 4 })));
        assert!(CurveChoice::parse("line:e0").is_err());
        assert!(CurveChoice::parse("circle").is_err());
    }

    #[test]
    fn targets_read_coefficient_then_index() {
        let t = TargetSpec::parse("0.1e1+-2.5e3").unwrap();
        assert_eq!(t.terms, vec![(1, 0.1), (3, -2.5)]);
        let p = t.point(4).unwrap();
        assert_eq!(p.as_sequence().unwrap(), &[0.1, 0.0, -2.5, 0.0]);
        assert!(t.point(2).is_err());
        assert!(TargetSpec::parse("1e0").is_err());
    }

    #[test]
    fn maps() {
        assert_eq!(MapChoice::parse("tau-sine").unwrap().eps, 0.1);
        assert_eq!(MapChoice::parse("tau-sine:0.2").unwrap().eps, 0.2);
        assert!(MapChoice::parse("tau-sine:1.5").is_err());
        assert!(MapChoice::parse("other").is_err());
    }
}
