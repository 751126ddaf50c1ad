//! Command-line front end. Every flag except `--config` may also be given as a
//! `key = value` line in the config file; flags win.

use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use super::config::Config;
use super::csvfmt::{self, format_sig9};
use super::experiment::{
    llr_crossing, power_utilization, run_confidence_curve_with, Execution, ExperimentSpec, NoiseFamily, ReadingRange,
};
use crate::adversary::{self, moving_average_detect, sequential_detect, Decision, HypothesisPair};
use crate::channel::Environment1D;
use crate::dist::NoiseDistribution;
use crate::planar::{solve_two_adversary, Scene2D};
use crate::protocol::{run_trace, ProtocolConfig};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "sighide",
    version,
    about = "Simulate, detect and bound presence hiding against RSS snoopers"
)]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a hiding protocol and write the adversary's readings as CSV.
    Simulate(SimulateArgs),
    /// Run the sequential and moving-average detectors over a CSV of readings.
    Detect(DetectArgs),
    /// Readings needed for a target confidence.
    Complexity(ComplexityArgs),
    /// Monte-Carlo confidence-vs-readings curves as CSV.
    Curve(CurveArgs),
    /// Beam direction and strength hiding a person from two adversaries.
    Solve2d(Solve2dArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// shift, random-shift or noise.
    #[arg(long)]
    protocol: Option<String>,
    /// Shift amount for `shift`.
    #[arg(long)]
    delta: Option<f64>,
    /// Shift law for `random-shift`, e.g. truncnormal:2,0.5,0,4.
    #[arg(long)]
    shift_dist: Option<NoiseDistribution>,
    /// Emission law for `noise`, e.g. normal:24,2.
    #[arg(long)]
    emission: Option<NoiseDistribution>,
    #[arg(long)]
    max_strength: Option<f64>,
    /// Strength lost per unit distance.
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    sender_pos: Option<f64>,
    #[arg(long)]
    adversary_pos: Option<f64>,
    /// Person attenuation law, e.g. point:4.
    #[arg(long)]
    interference: Option<NoiseDistribution>,
    /// Interference bits as a string of 0 and 1, cycled over the run.
    #[arg(long)]
    bits: Option<String>,
    /// Number of readings; defaults to the length of `--bits`.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// CSV with a `value` column.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Reading law without a person.
    #[arg(long)]
    h0: Option<NoiseDistribution>,
    /// Reading law with a person.
    #[arg(long)]
    h1: Option<NoiseDistribution>,
    #[arg(long)]
    p: Option<f64>,
    /// Moving-average window.
    #[arg(long)]
    window: Option<usize>,
    /// Moving-average threshold; defaults to midway between the two means.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct ComplexityArgs {
    /// laplace, normal or normal-normal.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Noise scale over interference, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    /// Unequal-variance normal: scale ratio without a person.
    #[arg(long)]
    eta1: Option<f64>,
    /// Unequal-variance normal: scale ratio with a person.
    #[arg(long)]
    eta2: Option<f64>,
    /// normal-normal: interference scale over its mean.
    #[arg(long)]
    eta_prime: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma_i: Option<f64>,
    #[arg(long)]
    mu_i: Option<f64>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    /// laplace or normal.
    #[arg(long)]
    family: Option<NoiseFamily>,
    #[arg(long, value_delimiter = ',')]
    etas: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Reading counts as start:end:step.
    #[arg(long)]
    n: Option<ReadingRange>,
    #[arg(long)]
    p: Option<f64>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct Solve2dArgs {
    /// The two adversary angles in radians.
    #[arg(long, value_delimiter = ',')]
    angles: Vec<f64>,
    /// Strength lost per radian off the beam axis.
    #[arg(long)]
    slope: Option<f64>,
    #[arg(long)]
    base_strength: Option<f64>,
    #[arg(long)]
    max_strength: Option<f64>,
    /// Person attenuation.
    #[arg(long)]
    delta: Option<f64>,
    /// Index (0 or 1) of the adversary whose path the person blocks.
    #[arg(long)]
    interfered: Option<usize>,
    /// Narrow-band half-width.
    #[arg(long)]
    tau: Option<f64>,
}

/// Merges flag values with config-file values.
struct Resolver {
    cfg: Config,
}

impl Resolver {
    fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.cfg
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    fn req<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.opt(flag, key)?
            .ok_or_else(|| Error::Config(format!("missing --{key}")))
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, flag: Vec<T>, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        self.cfg
            .get_list(key)
            .unwrap_or_default()
            .iter()
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("config key `{key}`: {e}")))
            })
            .collect()
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let r = Resolver { cfg };
    let seed = r.or(cli.seed, "seed", 0u64)?;
    let out_path = r.opt(cli.out, "out")?;

    let mut buf = Vec::new();
    match cli.command {
        Command::Simulate(a) => simulate(&r, a, seed, &mut buf, stderr)?,
        Command::Detect(a) => detect(&r, a, &mut buf)?,
        Command::Complexity(a) => complexity(&r, a, &mut buf)?,
        Command::Curve(a) => curve(&r, a, seed, &mut buf, stderr)?,
        Command::Solve2d(a) => solve2d(&r, a, &mut buf)?,
    }
    match out_path {
        Some(path) => {
            std::fs::write(&path, &buf).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?
        }
        None => stdout.write_all(&buf)?,
    }
    Ok(())
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    let bits: Vec<bool> = s
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Config(format!("bit string `{s}` may only contain 0 and 1"))),
        })
        .collect::<Result<_>>()?;
    if bits.is_empty() {
        return Err(Error::Config("bit string is empty".into()));
    }
    Ok(bits)
}

fn simulate(r: &Resolver, a: SimulateArgs, seed: u64, out: &mut Vec<u8>, stderr: &mut dyn Write) -> Result<()> {
    let protocol: String = r.req(a.protocol, "protocol")?;
    let cfg = match protocol.as_str() {
        "shift" => ProtocolConfig::Shift {
            delta: r.req(a.delta, "delta")?,
        },
        "random-shift" => ProtocolConfig::RandomShift {
            shift_dist: r.req(a.shift_dist, "shift-dist")?,
        },
        "noise" => ProtocolConfig::NoiseInjection {
            emission: r.req(a.emission, "emission")?,
        },
        other => return Err(Error::Config(format!("unknown protocol `{other}`"))),
    };
    let env = Environment1D::new(
        r.or(a.sender_pos, "sender-pos", 0.0)?,
        r.req(a.adversary_pos, "adversary-pos")?,
        r.req(a.decay, "decay")?,
        r.req(a.max_strength, "max-strength")?,
        r.req(a.interference, "interference")?,
    )?;
    let pattern = parse_bits(&r.req::<String>(a.bits, "bits")?)?;
    let steps = r.or(a.steps, "steps", pattern.len())?;
    let bits: Vec<bool> = pattern.iter().copied().cycle().take(steps).collect();

    let trace = run_trace(&cfg, &env, &bits, seed)?;
    let mut w = csvfmt::writer(&mut *out);
    w.write_record(["t", "b", "emitted", "value", "clamped"])?;
    for (t, (rd, alpha)) in trace.readings.iter().zip(&trace.emitted).enumerate() {
        w.write_record([
            t.to_string(),
            (rd.truth_b as u8).to_string(),
            format_sig9(*alpha),
            format_sig9(rd.value),
            rd.clamped.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);

    write!(
        stderr,
        "protocol={} steps={} power_utilization={}",
        cfg.name(),
        trace.len(),
        format_sig9(trace.power_utilization())
    )?;
    if let Ok(u) = power_utilization(&cfg, env.max_strength) {
        write!(stderr, " nominal_power_utilization={}", format_sig9(u))?;
    }
    writeln!(stderr)?;
    Ok(())
}

fn first_b1(decisions: &[Decision]) -> String {
    decisions
        .iter()
        .position(|d| *d == Decision::B1)
        .map_or_else(|| "none".to_string(), |i| (i + 1).to_string())
}

fn detect(r: &Resolver, a: DetectArgs, out: &mut Vec<u8>) -> Result<()> {
    let input: PathBuf = r.req(a.input, "input")?;
    let file =
        std::fs::File::open(&input).map_err(|e| Error::Config(format!("cannot open {}: {e}", input.display())))?;
    let values = csvfmt::read_values(file)?;
    let pair = HypothesisPair::new(r.req(a.h0, "h0")?, r.req(a.h1, "h1")?)?;
    let p = r.or(a.p, "p", 0.05)?;
    let window = r.or(a.window, "window", 10)?;
    let threshold = r.or(a.threshold, "threshold", (pair.h0.mean() + pair.h1.mean()) / 2.0)?;

    let report = sequential_detect(&pair, values.iter().copied(), p)?;
    let ma = moving_average_detect(&values, window, threshold)?;
    let ma_final = ma.last().copied().unwrap_or(Decision::Undecided);

    writeln!(out, "readings={}", values.len())?;
    writeln!(out, "case={}", report.case)?;
    writeln!(out, "decision={}", report.decision)?;
    writeln!(out, "readings_used={}", report.llr.n)?;
    writeln!(out, "llr={}", format_sig9(report.llr.cum_llr))?;
    writeln!(out, "confidence_b1={}", format_sig9(report.confidence_b1))?;
    writeln!(out, "ma_window={window}")?;
    writeln!(out, "ma_threshold={}", format_sig9(threshold))?;
    writeln!(out, "ma_final={ma_final}")?;
    writeln!(out, "ma_first_b1={}", first_b1(&ma))?;
    Ok(())
}

/// A zero-information pair needs infinitely many readings.
fn or_infinite(n: Result<f64>) -> Result<f64> {
    match n {
        Err(Error::PerfectHiding) => Ok(f64::INFINITY),
        other => other,
    }
}

fn complexity(r: &Resolver, a: ComplexityArgs, out: &mut Vec<u8>) -> Result<()> {
    let family: String = r.or(a.family, "family", "normal".to_string())?;
    let p = r.or(a.p, "p", 0.05)?;
    let etas = r.list(a.eta, "eta")?;
    let mut w = csvfmt::writer(&mut *out);
    let f = format_sig9;
    match family.as_str() {
        "laplace" | "normal" if !etas.is_empty() => {
            w.write_record(["family", "p", "eta", "n_required"])?;
            for eta in etas {
                let n = if family == "laplace" {
                    adversary::n_required_laplace(p, eta)?
                } else {
                    adversary::n_required_normal_equal_variance(p, eta)?
                };
                w.write_record([family.clone(), f(p), f(eta), f(n)])?;
            }
        }
        "normal" => {
            let eta1 = r.req(a.eta1, "eta1")?;
            let eta2 = r.req(a.eta2, "eta2")?;
            let n = or_infinite(adversary::n_required_normal(p, eta1, eta2))?;
            w.write_record(["family", "p", "eta1", "eta2", "n_required"])?;
            w.write_record([family.clone(), f(p), f(eta1), f(eta2), f(n)])?;
        }
        "normal-normal" => {
            let (eta, eta_prime, n) = match r.opt(a.eta_prime, "eta-prime")? {
                Some(ep) => {
                    let eta = *etas.first().ok_or_else(|| Error::Config("missing --eta".into()))?;
                    (eta, ep, adversary::n_required_normal_normal(p, eta, ep))
                }
                None => {
                    let sigma = r.req(a.sigma, "sigma")?;
                    let sigma_i = r.req(a.sigma_i, "sigma-i")?;
                    let mu_i = r.req(a.mu_i, "mu-i")?;
                    let sigma1 = sigma.hypot(sigma_i);
                    (
                        sigma1 / mu_i.abs(),
                        sigma1 / sigma,
                        adversary::n_required_normal_normal_from_params(p, sigma, sigma_i, mu_i),
                    )
                }
            };
            let n = or_infinite(n)?;
            w.write_record(["family", "p", "eta", "eta_prime", "n_required"])?;
            w.write_record([family.clone(), f(p), f(eta), f(eta_prime), f(n)])?;
        }
        "laplace" => return Err(Error::Config("missing --eta".into())),
        other => return Err(Error::Config(format!("unknown family `{other}`"))),
    }
    w.flush()?;
    Ok(())
}

fn curve(r: &Resolver, a: CurveArgs, seed: u64, out: &mut Vec<u8>, stderr: &mut dyn Write) -> Result<()> {
    let mut etas = r.list(a.etas, "etas")?;
    if etas.is_empty() {
        etas = vec![3.0, 6.0, 9.0];
    }
    let spec = ExperimentSpec {
        noise_family: r.or(a.family, "family", NoiseFamily::Normal)?,
        eta_values: etas,
        n_readings: r.or(a.n, "n", ReadingRange::new(100, 1000, 100)?)?,
        trials: r.or(a.trials, "trials", 10)?,
        p_target: r.or(a.p, "p", 0.05)?,
        seed,
    };
    let exec = match r.opt(a.threads, "threads")? {
        None => Execution::Parallel,
        Some(0) => return Err(Error::Config("threads must be at least 1".into())),
        Some(1) => Execution::Serial,
        Some(n) => Execution::Threads(n),
    };
    let points = run_confidence_curve_with(&spec, exec)?;

    let mut w = csvfmt::writer(&mut *out);
    w.write_record(["family", "eta", "n", "mean_confidence", "std_confidence", "mean_llr"])?;
    for c in &points {
        w.write_record([
            spec.noise_family.to_string(),
            format_sig9(c.eta),
            c.n.to_string(),
            format_sig9(c.mean_confidence),
            format_sig9(c.std_confidence),
            format_sig9(c.mean_llr),
        ])?;
    }
    w.flush()?;
    for &eta in &spec.eta_values {
        let crossing = llr_crossing(&points, eta, spec.p_target).map_or_else(|| "none".to_string(), |n| n.to_string());
        writeln!(stderr, "eta={} llr_crossing_n={crossing}", format_sig9(eta))?;
    }
    Ok(())
}

fn solve2d(r: &Resolver, a: Solve2dArgs, out: &mut Vec<u8>) -> Result<()> {
    let angles = r.list(a.angles, "angles")?;
    if angles.len() != 2 {
        return Err(Error::Config(format!(
            "--angles needs exactly 2 values, got {}",
            angles.len()
        )));
    }
    let base_strength = r.req(a.base_strength, "base-strength")?;
    let scene = Scene2D {
        adversary_angles: angles,
        base_strength,
        max_strength: r.or(a.max_strength, "max-strength", base_strength * 2.0)?,
        tau: r.or(a.tau, "tau", 0.1)?,
        decay_slope: r.req(a.slope, "slope")?,
        interference_delta: r.req(a.delta, "delta")?,
    };
    let sol = solve_two_adversary(&scene, r.or(a.interfered, "interfered", 0)?)?;
    match sol.reason {
        None => writeln!(
            out,
            "feasible=true theta={} alpha={}",
            format_sig9(sol.theta),
            format_sig9(sol.alpha)
        )?,
        Some(reason) => writeln!(out, "feasible=false reason={}", reason.as_str())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("sighide").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn complexity_normal() {
        let (code, out, _) = call(&["complexity", "--family", "normal", "--p", "0.05", "--eta", "6"]);
        assert_eq!(code, 0);
        assert_eq!(out, "family,p,eta,n_required\nnormal,0.05,6,211.999606\n");
    }

    #[test]
    fn complexity_normal_normal_from_params() {
        let (code, out, _) = call(&[
            "complexity",
            "--family",
            "normal-normal",
            "--sigma",
            "3",
            "--sigma-i",
            "4",
            "--mu-i",
            "5",
        ]);
        assert_eq!(code, 0);
        assert!(out.ends_with(",4.2622029\n"), "{out}");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(call(&["frobnicate"]).0, 1);
        assert_eq!(call(&["complexity", "--bogus"]).0, 1);
        assert_eq!(call(&["complexity", "--family", "cauchy", "--eta", "1"]).0, 1);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn solve2d_diagnostics() {
        let (code, out, _) = call(&[
            "solve2d",
            "--angles",
            "0,1.0472",
            "--slope",
            "1",
            "--base-strength",
            "20",
            "--delta",
            "2",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out, "feasible=false reason=angular-separation\n");
        let (code, out, _) = call(&[
            "solve2d",
            "--angles",
            "0,1.0472",
            "--slope",
            "2",
            "--base-strength",
            "20",
            "--delta",
            "1",
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with("feasible=true theta=0.2736"), "{out}");
        assert!(out.ends_with("alpha=20.5\n"), "{out}");
    }

    #[test]
    fn config_supplies_defaults_and_flags_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "# eta list\nfamily = laplace\neta = 1\neta = 6\np = 0.05\n").unwrap();
        let p = path.to_str().unwrap();
        let (code, out, _) = call(&["complexity", "--config", p]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 3);
        assert!(out.contains("laplace,0.05,6,17.6666339"));
        let (_, out, _) = call(&["complexity", "--config", p, "--family", "normal", "--eta", "6"]);
        assert_eq!(out.lines().nth(1).unwrap(), "normal,0.05,6,211.999606");
    }
}
