//! Structural causal model generators.
//!
//! The label mechanism is shared by both generators: a binary cause `A` with
//! `A ~ Bern(p_a)`, and a second label `B` that copies `A` under the
//! observational regime and is drawn as an independent `Bern(p_int)` under
//! the interventional regime. The observation `X` in the plane depends on
//! both labels, so a model predicting `A` can lean on `B`-shaped evidence
//! that evaporates once the regime switches.
//!
//! Two observation functions are provided:
//!
//! * **Circles** — an ellipse of points whose horizontal center is decided
//!   by `A` and vertical center by `B`.
//! * **Windmill** — wedge-shaped arms whose angle is decided by `A` while
//!   the radial band is decided by `B`; a sinusoidal angular offset with
//!   wavelength knob `lambda_off` bends the arms and controls task
//!   complexity.
//!
//! Everything here is a pure function of its parameters and an explicit
//! random stream, so datasets are reproducible bit-for-bit from their spec.

use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Which sampling regime produced a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// `B = A`: the spurious path is fully informative.
    Observational,
    /// `B` drawn independently of `A`.
    Interventional,
}

impl RegimeKind {
    pub fn as_csv(self) -> &'static str {
        match self {
            RegimeKind::Observational => "obs",
            RegimeKind::Interventional => "int",
        }
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        match s {
            "obs" => Ok(RegimeKind::Observational),
            "int" => Ok(RegimeKind::Interventional),
            other => Err(Error::Parse(format!("unknown regime tag `{other}`"))),
        }
    }
}

/// Sampling regime plus the interventional Bernoulli parameter.
/// `p_int` is only consulted when `kind` is interventional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub p_int: f64,
}

impl Regime {
    pub fn observational() -> Self {
        Regime {
            kind: RegimeKind::Observational,
            p_int: 0.5,
        }
    }

    pub fn interventional(p_int: f64) -> Self {
        Regime {
            kind: RegimeKind::Interventional,
            p_int,
        }
    }
}

/// One draw of the label mechanism. Values are always 0 or 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelPair {
    pub a: u8,
    pub b: u8,
}

impl LabelPair {
    /// Signed form `2*label - 1` used by the point generators.
    fn sign_a(self) -> f64 {
        2.0 * self.a as f64 - 1.0
    }

    fn sign_b(self) -> f64 {
        2.0 * self.b as f64 - 1.0
    }
}

/// One labelled observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub labels: LabelPair,
    pub x: [f64; 2],
    pub regime: RegimeKind,
}

/// Ellipse-cloud generator parameters. `r1_max` bounds the horizontal
/// half-axis and `r2_max` the vertical one; `mu1`/`mu2` shift the center by
/// `(2a-1)*mu1` horizontally and `(2b-1)*mu2` vertically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirclesParams {
    pub r1_max: f64,
    pub r2_max: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl CirclesParams {
    /// Well-separated clusters: a linear boundary reaches zero error.
    pub const EASY: Self = CirclesParams {
        r1_max: 2.0,
        r2_max: 2.0,
        mu1: 2.5,
        mu2: 2.5,
    };

    /// Centers closer than the radii: the clouds overlap and no boundary
    /// reaches zero error.
    pub const IMPOSSIBLE: Self = CirclesParams {
        r1_max: 2.0,
        r2_max: 2.0,
        mu1: 1.5,
        mu2: 1.5,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r1_max", self.r1_max),
            ("r2_max", self.r2_max),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        for (name, v) in [("r1_max", self.r1_max), ("r2_max", self.r2_max)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Windmill generator parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindmillParams {
    /// Number of wedge arms per class.
    pub n_arms: usize,
    /// Outer radius of the windmill.
    pub r_max: f64,
    /// Angular width of each arm (radians).
    pub theta_wid: f64,
    /// Amplitude of the radial angular offset (radians).
    pub theta_max_off: f64,
    /// Offset wavelength; 0 gives straight arms, larger values bend them
    /// into harder decision boundaries.
    pub lambda_off: f64,
}

impl WindmillParams {
    /// Table defaults with the complexity knob supplied by the caller.
    pub fn with_lambda(lambda_off: f64) -> Self {
        WindmillParams {
            n_arms: 4,
            r_max: 2.0,
            theta_wid: 0.9 * PI / 4.0,
            theta_max_off: PI / 6.0,
            lambda_off,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_arms < 1 {
            return Err(Error::InvalidParameter {
                name: "n_arms",
                reason: "must be >= 1".into(),
            });
        }
        for (name, v) in [
            ("r_max", self.r_max),
            ("theta_wid", self.theta_wid),
            ("theta_max_off", self.theta_max_off),
            ("lambda_off", self.lambda_off),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        if self.r_max <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "r_max",
                reason: format!("must be > 0, got {}", self.r_max),
            });
        }
        if self.theta_wid <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "theta_wid",
                reason: format!("must be > 0, got {}", self.theta_wid),
            });
        }
        Ok(())
    }
}

/// Which observation function to use, with its parameters. Serialized as
/// `{"generator": "circles", "params": {...}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", content = "params", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Circles(CirclesParams),
    Windmill(WindmillParams),
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::Circles(p) => p.validate(),
            GeneratorSpec::Windmill(p) => p.validate(),
        }
    }
}

fn default_half() -> f64 {
    0.5
}

/// Complete recipe for one dataset. This is the JSON block accepted by the
/// `gen` subcommand; `p_a` and `p_int` default to 0.5 when omitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub generator: GeneratorSpec,
    pub n: usize,
    /// Fraction of samples drawn under the observational regime.
    pub beta: f64,
    #[serde(default = "default_half")]
    pub p_a: f64,
    #[serde(default = "default_half")]
    pub p_int: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.n < 1 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "must be >= 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.beta) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be in [0, 1], got {}", self.beta),
            });
        }
        validate_probability("p_a", self.p_a)?;
        validate_probability("p_int", self.p_int)?;
        Ok(())
    }

    /// Observational sample count: `round(beta * n)`, ties away from zero.
    pub fn n_observational(&self) -> usize {
        (self.beta * self.n as f64).round() as usize
    }
}

/// Generated samples plus the spec that produced them.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub spec: DatasetSpec,
}

impl Dataset {
    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn validate_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be a probability in [0, 1], got {p}"),
        });
    }
    Ok(())
}

/// Draw one label pair. Stream layout: one uniform for `A`, then one more
/// for `B` only in the interventional regime.
pub fn sample_labels(p_a: f64, regime: Regime, rng: &mut ChaCha8Rng) -> Result<LabelPair> {
    validate_probability("p_a", p_a)?;
    let a = (rng.random::<f64>() < p_a) as u8;
    let b = match regime.kind {
        RegimeKind::Observational => a,
        RegimeKind::Interventional => {
            validate_probability("p_int", regime.p_int)?;
            (rng.random::<f64>() < regime.p_int) as u8
        }
    };
    Ok(LabelPair { a, b })
}

/// Draw one Circles observation. Stream layout: angle, then the two radius
/// uniforms.
///
/// The radius uses the polar form of an ellipse with semi-axes `(R1, R2)`,
/// `R = R1*R2 / sqrt(R2^2 cos^2 + R1^2 sin^2)`, so `R1 ~ U(0, r1_max)`
/// bounds the horizontal extent and `R2` the vertical one. A fully
/// degenerate denominator (both drawn radii zero) is defined as `R = 0`,
/// the continuous limit.
pub fn circles_point(params: &CirclesParams, labels: LabelPair, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let theta = rng.random::<f64>() * TAU;
    let r1 = rng.random::<f64>() * params.r1_max;
    let r2 = rng.random::<f64>() * params.r2_max;
    let (sin_t, cos_t) = theta.sin_cos();
    let denom_sq = (r2 * cos_t).powi(2) + (r1 * sin_t).powi(2);
    let r = if denom_sq == 0.0 {
        0.0
    } else {
        r1 * r2 / denom_sq.sqrt()
    };
    [
        labels.sign_a() * params.mu1 + r * cos_t,
        labels.sign_b() * params.mu2 + r * sin_t,
    ]
}

/// Draw one Windmill observation. Stream layout: Beta radius draw(s), arm
/// index, angular jitter uniform.
///
/// `B` picks the radial band: `R = (r_max/2) * R_B` for `b = 1` (inner) and
/// `(r_max/2) * (2 - R_B)` for `b = 0` (outer), `R_B ~ Beta(1, 2.5)`.
/// `A` picks the wedge: arm centers sit at `2*pi*i/(n_arms+1)` and `a = 1`
/// rotates them by `pi/n_arms`. A radius-dependent angular offset
/// `theta_max_off * sin(pi * lambda_off * R / r_max)` bends the arms.
pub fn windmill_point(params: &WindmillParams, labels: LabelPair, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let beta = Beta::new(1.0, 2.5).expect("fixed Beta shape parameters are valid");
    let r_b: f64 = beta.sample(rng);
    let b = labels.b as f64;
    let r = 0.5 * params.r_max * (b * r_b + (1.0 - b) * (2.0 - r_b));

    let arm = rng.random_range(0..params.n_arms) as f64;
    let theta_a = TAU * arm / (params.n_arms as f64 + 1.0);
    let u: f64 = rng.random();
    let theta_off = params.theta_max_off * (PI * params.lambda_off * r / params.r_max).sin();
    let a = labels.a as f64;
    let theta = params.theta_wid * (u - 0.5)
        + a * (theta_a + PI / params.n_arms as f64)
        + (1.0 - a) * theta_a
        + theta_off;

    let (sin_t, cos_t) = theta.sin_cos();
    [r * cos_t, r * sin_t]
}

/// Generate a full dataset: `round(beta * n)` observational samples first,
/// then the interventional remainder, all from one ChaCha8 stream seeded
/// with `spec.seed`. Deterministic: the same spec yields the same bytes.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::rng_from(spec.seed);
    let n_obs = spec.n_observational();
    let mut samples = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let regime = if i < n_obs {
            Regime::observational()
        } else {
            Regime::interventional(spec.p_int)
        };
        let labels = sample_labels(spec.p_a, regime, &mut rng)?;
        let x = match &spec.generator {
            GeneratorSpec::Circles(p) => circles_point(p, labels, &mut rng),
            GeneratorSpec::Windmill(p) => windmill_point(p, labels, &mut rng),
        };
        samples.push(Sample {
            labels,
            x,
            regime: regime.kind,
        });
    }
    Ok(Dataset {
        samples,
        spec: *spec,
    })
}

pub const CSV_HEADER: &str = "a,b,x1,x2,regime";

/// Write samples as CSV with 17-significant-digit floats (lossless for f64).
pub fn write_csv<W: Write>(samples: &[Sample], w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{}",
            s.labels.a,
            s.labels.b,
            s.x[0],
            s.x[1],
            s.regime.as_csv()
        )?;
    }
    Ok(())
}

pub fn to_csv_string(samples: &[Sample]) -> String {
    let mut buf = Vec::new();
    write_csv(samples, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

fn parse_label(field: &str, line_no: usize) -> Result<u8> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Parse(format!(
            "line {line_no}: label must be 0 or 1, got `{other}`"
        ))),
    }
}

/// Read samples back from the CSV produced by [`write_csv`]. The exact
/// header is required; floats round-trip bit-for-bit.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<Sample>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
    if header.trim_end() != CSV_HEADER {
        return Err(Error::Parse(format!(
            "bad header: expected `{CSV_HEADER}`, got `{header}`"
        )));
    }
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected 5 fields, got {}",
                fields.len()
            )));
        }
        let a = parse_label(fields[0], line_no)?;
        let b = parse_label(fields[1], line_no)?;
        let x1: f64 = fields[2]
            .parse()
            .map_err(|e| Error::Parse(format!("line {line_no}: bad x1: {e}")))?;
        let x2: f64 = fields[3]
            .parse()
            .map_err(|e| Error::Parse(format!("line {line_no}: bad x2: {e}")))?;
        let regime = RegimeKind::from_csv(fields[4])?;
        samples.push(Sample {
            labels: LabelPair { a, b },
            x: [x1, x2],
            regime,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        seed::rng_from(seed)
    }

    /// Left-hand side of the ellipse membership inequality for a sample.
    fn ellipse_lhs(p: &CirclesParams, labels: LabelPair, x: [f64; 2]) -> f64 {
        let dx = (x[0] - labels.sign_a() * p.mu1) / p.r1_max;
        let dy = (x[1] - labels.sign_b() * p.mu2) / p.r2_max;
        dx * dx + dy * dy
    }

    #[test]
    fn observational_regime_copies_a() {
        let mut r = rng(1);
        for _ in 0..1000 {
            let l = sample_labels(0.5, Regime::observational(), &mut r).unwrap();
            assert_eq!(l.a, l.b);
        }
    }

    #[test]
    fn degenerate_bernoullis_are_exact() {
        let mut r = rng(2);
        for _ in 0..200 {
            let l = sample_labels(1.0, Regime::interventional(0.0), &mut r).unwrap();
            assert_eq!((l.a, l.b), (1, 0));
        }
    }

    #[test]
    fn interventional_joint_matches_bernoulli_product() {
        // Oracle: P(a=1, b=1) = p_a * p_int exactly, by independence.
        for (p_a, p_int) in [(0.5, 0.5), (0.7, 0.3)] {
            let mut r = rng(3);
            let n = 100_000;
            let mut both = 0usize;
            for _ in 0..n {
                let l = sample_labels(p_a, Regime::interventional(p_int), &mut r).unwrap();
                if l.a == 1 && l.b == 1 {
                    both += 1;
                }
            }
            let expected = p_a * p_int;
            assert!(
                (both as f64 / n as f64 - expected).abs() < 0.01,
                "joint frequency off for p_a={p_a}, p_int={p_int}"
            );
        }
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let mut r = rng(4);
        assert!(sample_labels(-0.1, Regime::observational(), &mut r).is_err());
        assert!(sample_labels(1.1, Regime::observational(), &mut r).is_err());
        assert!(sample_labels(0.5, Regime::interventional(2.0), &mut r).is_err());
    }

    #[test]
    fn zero_radius_circles_degenerate_to_centers() {
        let p = CirclesParams {
            r1_max: 0.0,
            r2_max: 0.0,
            mu1: 2.5,
            mu2: 2.5,
        };
        let mut r = rng(5);
        let x = circles_point(&p, LabelPair { a: 1, b: 1 }, &mut r);
        assert_eq!(x, [2.5, 2.5]);
        let x = circles_point(&p, LabelPair { a: 0, b: 1 }, &mut r);
        assert_eq!(x, [-2.5, 2.5]);
    }

    #[test]
    fn easy_circles_points_stay_in_their_ellipse() {
        let p = CirclesParams::EASY;
        let labels = LabelPair { a: 0, b: 1 };
        let mut r = rng(6);
        for _ in 0..10_000 {
            let x = circles_point(&p, labels, &mut r);
            assert!(ellipse_lhs(&p, labels, x) <= 1.0 + 1e-9);
            // Center check: a=0 puts the cloud left of the axis, b=1 above.
            assert!(x[0] < -0.5 && x[1] > 0.5);
        }
    }

    #[test]
    fn unequal_radii_orient_the_ellipse_axes() {
        // r1_max bounds the horizontal extent, r2_max the vertical one.
        let p = CirclesParams {
            r1_max: 2.0,
            r2_max: 0.5,
            mu1: 0.0,
            mu2: 0.0,
        };
        let labels = LabelPair { a: 1, b: 1 };
        let mut r = rng(7);
        let mut max_abs_x1: f64 = 0.0;
        let mut max_abs_x2: f64 = 0.0;
        for _ in 0..10_000 {
            let x = circles_point(&p, labels, &mut r);
            assert!(ellipse_lhs(&p, labels, x) <= 1.0 + 1e-9);
            max_abs_x1 = max_abs_x1.max(x[0].abs());
            max_abs_x2 = max_abs_x2.max(x[1].abs());
        }
        assert!(
            max_abs_x1 > 1.5,
            "horizontal extent {max_abs_x1} should approach r1_max = 2"
        );
        assert!(
            max_abs_x2 <= 0.5 + 1e-9,
            "vertical extent {max_abs_x2} must stay within r2_max = 0.5"
        );
    }

    #[test]
    fn impossible_circles_clouds_overlap() {
        let p = CirclesParams::IMPOSSIBLE;
        let l_right = LabelPair { a: 1, b: 1 };
        let l_left = LabelPair { a: 0, b: 1 };
        let mut r = rng(8);
        let right: Vec<[f64; 2]> = (0..10_000).map(|_| circles_point(&p, l_right, &mut r)).collect();
        let left: Vec<[f64; 2]> = (0..10_000).map(|_| circles_point(&p, l_left, &mut r)).collect();
        let right_in_left = right
            .iter()
            .filter(|&&x| ellipse_lhs(&p, l_left, x) <= 1.0)
            .count();
        let left_in_right = left
            .iter()
            .filter(|&&x| ellipse_lhs(&p, l_right, x) <= 1.0)
            .count();
        assert!(right_in_left > 0 && left_in_right > 0);
    }

    #[test]
    fn windmill_mean_radii_match_beta_moments() {
        // Oracle: E[Beta(1, 2.5)] = 1/3.5, so with r_max = 2 the inner band
        // (b=1) has mean radius 1/3.5 and the outer band 2 - 1/3.5.
        let p = WindmillParams::with_lambda(0.0);
        for (b, expected) in [(1u8, 1.0 / 3.5), (0u8, 2.0 - 1.0 / 3.5)] {
            let mut r = rng(9);
            let n = 100_000;
            let mean: f64 = (0..n)
                .map(|_| {
                    let x = windmill_point(&p, LabelPair { a: 0, b }, &mut r);
                    x[0].hypot(x[1])
                })
                .sum::<f64>()
                / n as f64;
            assert!(
                (mean - expected).abs() < 0.005,
                "mean radius for b={b}: got {mean}, want {expected}"
            );
        }
    }

    #[test]
    fn windmill_points_stay_inside_outer_radius() {
        let p = WindmillParams::with_lambda(4.0);
        let mut r = rng(10);
        for i in 0..10_000 {
            let labels = LabelPair {
                a: (i % 2) as u8,
                b: ((i / 2) % 2) as u8,
            };
            let x = windmill_point(&p, labels, &mut r);
            assert!(x[0].hypot(x[1]) <= p.r_max + 1e-9);
        }
    }

    #[test]
    fn windmill_zero_lambda_gives_straight_wedges() {
        let p = WindmillParams::with_lambda(0.0);
        let spacing = TAU / (p.n_arms as f64 + 1.0);
        let rotation = PI / p.n_arms as f64;
        let mut r = rng(11);
        for a in [0u8, 1u8] {
            for _ in 0..2000 {
                let x = windmill_point(&p, LabelPair { a, b: 1 }, &mut r);
                let theta = x[1].atan2(x[0]);
                let hit = (0..p.n_arms).any(|i| {
                    let center = spacing * i as f64 + if a == 1 { rotation } else { 0.0 };
                    let mut d = (theta - center) % TAU;
                    if d > PI {
                        d -= TAU;
                    }
                    if d < -PI {
                        d += TAU;
                    }
                    d.abs() <= p.theta_wid / 2.0 + 1e-9
                });
                assert!(hit, "angle {theta} outside every arm wedge for a={a}");
            }
        }
    }

    fn circles_spec(n: usize, beta: f64, seed: u64) -> DatasetSpec {
        DatasetSpec {
            generator: GeneratorSpec::Circles(CirclesParams::EASY),
            n,
            beta,
            p_a: 0.5,
            p_int: 0.5,
            seed,
        }
    }

    #[test]
    fn dataset_blocks_are_observational_then_interventional() {
        let ds = generate_dataset(&circles_spec(1000, 0.99, 12)).unwrap();
        let n_obs = ds
            .samples
            .iter()
            .take_while(|s| s.regime == RegimeKind::Observational)
            .count();
        assert_eq!(n_obs, 990);
        assert!(ds.samples[n_obs..]
            .iter()
            .all(|s| s.regime == RegimeKind::Interventional));
        assert!(ds.samples[..n_obs]
            .iter()
            .all(|s| s.labels.a == s.labels.b));
    }

    #[test]
    fn observational_count_rounds_half_away_from_zero() {
        assert_eq!(circles_spec(5, 0.5, 0).n_observational(), 3);
        assert_eq!(circles_spec(100, 1.0, 0).n_observational(), 100);
        assert_eq!(circles_spec(100, 0.0, 0).n_observational(), 0);
    }

    #[test]
    fn dataset_generation_is_deterministic_in_seed() {
        let a = generate_dataset(&circles_spec(500, 0.7, 13)).unwrap();
        let b = generate_dataset(&circles_spec(500, 0.7, 13)).unwrap();
        let c = generate_dataset(&circles_spec(500, 0.7, 14)).unwrap();
        assert_eq!(to_csv_string(&a.samples), to_csv_string(&b.samples));
        assert_ne!(to_csv_string(&a.samples), to_csv_string(&c.samples));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let spec = DatasetSpec {
            generator: GeneratorSpec::Windmill(WindmillParams::with_lambda(2.0)),
            n: 200,
            beta: 0.5,
            p_a: 0.5,
            p_int: 0.5,
            seed: 15,
        };
        let ds = generate_dataset(&spec).unwrap();
        let text = to_csv_string(&ds.samples);
        let back = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), ds.samples.len());
        for (orig, read) in ds.samples.iter().zip(&back) {
            assert_eq!(orig.labels, read.labels);
            assert_eq!(orig.regime, read.regime);
            assert_eq!(orig.x[0].to_bits(), read.x[0].to_bits());
            assert_eq!(orig.x[1].to_bits(), read.x[1].to_bits());
        }
    }

    #[test]
    fn csv_requires_exact_header() {
        assert!(read_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(read_csv("".as_bytes()).is_err());
        assert!(read_csv("a,b,x1,x2,regime\n2,0,1.0,1.0,obs\n".as_bytes()).is_err());
        assert!(read_csv("a,b,x1,x2,regime\n1,0,1.0,1.0,weird\n".as_bytes()).is_err());
    }

    #[test]
    fn dataset_spec_json_round_trips_with_defaults() {
        let j = r#"{
            "generator": "circles",
            "params": {"r1_max": 2.0, "r2_max": 2.0, "mu1": 2.5, "mu2": 2.5},
            "n": 100,
            "beta": 0.9,
            "seed": 7
        }"#;
        let spec: DatasetSpec = serde_json::from_str(j).unwrap();
        assert_eq!(spec.p_a, 0.5);
        assert_eq!(spec.p_int, 0.5);
        let round: DatasetSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, round);

        let j = r#"{
            "generator": "windmill",
            "params": {"n_arms": 4, "r_max": 2.0, "theta_wid": 0.7068583470577035,
                       "theta_max_off": 0.5235987755982988, "lambda_off": 2.0},
            "n": 50, "beta": 0.5, "p_a": 0.4, "p_int": 0.6, "seed": 9
        }"#;
        let spec: DatasetSpec = serde_json::from_str(j).unwrap();
        assert!(matches!(spec.generator, GeneratorSpec::Windmill(_)));
        assert_eq!(spec.p_a, 0.4);
    }

    #[test]
    fn unknown_generator_name_is_rejected() {
        let j = r#"{"generator": "pinwheel", "params": {}, "n": 10, "beta": 0.5, "seed": 0}"#;
        assert!(serde_json::from_str::<DatasetSpec>(j).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = circles_spec(100, 0.5, 0);
        s.beta = 1.5;
        assert!(generate_dataset(&s).is_err());
        let mut s = circles_spec(100, 0.5, 0);
        s.n = 0;
        assert!(generate_dataset(&s).is_err());
        let mut s = circles_spec(100, 0.5, 0);
        s.generator = GeneratorSpec::Circles(CirclesParams {
            r1_max: -1.0,
            ..CirclesParams::EASY
        });
        assert!(generate_dataset(&s).is_err());
        let mut s = circles_spec(100, 0.5, 0);
        s.generator = GeneratorSpec::Windmill(WindmillParams {
            r_max: 0.0,
            ..WindmillParams::with_lambda(0.0)
        });
        assert!(generate_dataset(&s).is_err());
        let mut s = circles_spec(100, 0.5, 0);
        s.p_a = -0.2;
        assert!(generate_dataset(&s).is_err());
    }

    proptest! {
        #[test]
        fn circles_containment_holds_for_random_params(
            r1 in 0.01f64..3.0,
            r2 in 0.01f64..3.0,
            mu1 in 0.0f64..3.0,
            mu2 in 0.0f64..3.0,
            a in 0u8..2,
            b in 0u8..2,
            seed in 0u64..1000,
        ) {
            let p = CirclesParams { r1_max: r1, r2_max: r2, mu1, mu2 };
            let labels = LabelPair { a, b };
            let mut r = rng(seed);
            for _ in 0..100 {
                let x = circles_point(&p, labels, &mut r);
                prop_assert!(ellipse_lhs(&p, labels, x) <= 1.0 + 1e-9);
            }
        }

        #[test]
        fn windmill_radius_band_follows_b(
            lambda in 0.0f64..4.0,
            seed in 0u64..1000,
        ) {
            let p = WindmillParams::with_lambda(lambda);
            let mut r = rng(seed);
            for _ in 0..50 {
                let inner = windmill_point(&p, LabelPair { a: 0, b: 1 }, &mut r);
                let outer = windmill_point(&p, LabelPair { a: 0, b: 0 }, &mut r);
                prop_assert!(inner[0].hypot(inner[1]) <= 0.5 * p.r_max + 1e-9);
                let outer_r = outer[0].hypot(outer[1]);
                prop_assert!(outer_r >= 0.5 * p.r_max - 1e-9 && outer_r <= p.r_max + 1e-9);
            }
        }
    }
}
