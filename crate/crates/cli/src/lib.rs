//! Command-line front end: validate group files, evaluate kernels on points
//! and grids, compute Green functions, run verification suites and time the
//! two kernel paths. All numeric output is CSV.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use step2heat::kernel::{GreenConfig, KernelEvaluator, QuadratureConfig};
use step2heat::special::{closed_form_e_s, ConstantSource, Fractional};
use step2heat::verification::{
    mass_check, mc_vs_kernel, pde_residual, semigroup_check, vertical_identity_check, McConfig, StencilConfig,
    TestFunction,
};
use step2heat::{Error, GroupPoint, GroupSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

/// Points evaluated per streamed block of `grid`.
const GRID_BLOCK: usize = 256;

#[derive(Debug, Parser)]
#[command(
    name = "step2heat",
    version,
    about = "Heat kernels and Green functions on step-two Carnot groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a group file; prints the violated invariant on failure.
    Validate { file: PathBuf },
    /// Heat kernel p(point, base, t).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, allow_hyphen_values = true)]
        base: Option<String>,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = KernelPath::General)]
        path: KernelPath,
    },
    /// Heat kernel on a one- or two-dimensional grid of points.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Fixed coordinates of the grid points (default: identity).
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        base: Option<String>,
        #[arg(long)]
        t: f64,
        /// `index:lo:hi:count`, varying coordinate `index` (0-based); repeat for a second axis.
        #[arg(long, required = true, allow_hyphen_values = true)]
        axis: Vec<String>,
    },
    /// Green function (s = 1) or fractional fundamental solution.
    Green {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, allow_hyphen_values = true)]
        base: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, conflicts_with_all = ["numeric", "both"])]
        closed_form: bool,
        #[arg(long, conflicts_with = "both")]
        numeric: bool,
        #[arg(long)]
        both: bool,
        /// Constant of the closed form.
        #[arg(long, value_enum, default_value_t = Constant::Fractional)]
        constant: Constant,
    },
    /// Verification suites; one CSV row per check.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Evaluations per second of the general and Heisenberg-type paths.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        evals: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Group file, or a built-in name (`heisenberg<n>`, `quaternionic`, `free<q>`).
    #[arg(long)]
    spec: String,
    /// Relative tolerance of the frequency quadrature, in (0, 0.1].
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelPath {
    General,
    Htype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Constant {
    Fractional,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Pde,
    Mass,
    Semigroup,
    Mc,
    Vertical,
    All,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
    Io(io::Error),
    /// A verification check did not pass; the table has been written.
    ChecksFailed(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) if e.is_validation() => EXIT_VALIDATION,
            Failure::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            Failure::ChecksFailed(_) => EXIT_NUMERICAL,
            Failure::Core(_) | Failure::Usage(_) | Failure::Io(_) => EXIT_USAGE,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => format!("error: {m}"),
            Failure::Core(e) => format!("error: {e}"),
            Failure::Io(e) => format!("error: {e}"),
            Failure::ChecksFailed(n) => format!("error: {n} check(s) failed"),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{}", f.message());
            f.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("STEP2HEAT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            // an already-initialized pool (repeated in-process runs) is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Validate { file } => validate(&file),
        Command::Eval {
            common,
            point,
            base,
            t,
            path,
        } => eval(&common, &point, base.as_deref(), t, path),
        Command::Grid {
            common,
            point,
            base,
            t,
            axis,
        } => grid(&common, point.as_deref(), base.as_deref(), t, &axis),
        Command::Green {
            common,
            point,
            base,
            s,
            closed_form,
            numeric: _,
            both,
            constant,
        } => {
            let mode = if both {
                GreenMode::Both
            } else if closed_form {
                GreenMode::ClosedForm
            } else {
                GreenMode::Numeric
            };
            green(&common, &point, base.as_deref(), s, mode, constant)
        }
        Command::Verify {
            common,
            suite,
            paths,
            steps,
        } => verify(&common, suite, paths, steps),
        Command::Bench { common, evals } => bench(&common, evals),
    }
}

fn load_spec(source: &str) -> std::result::Result<GroupSpec, Failure> {
    let path = Path::new(source);
    if !path.exists() {
        if let Some(spec) = GroupSpec::builtin(source) {
            return Ok(spec);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {source}: {e}")))?;
    Ok(GroupSpec::parse(&text)?)
}

fn parse_coords(text: &str) -> std::result::Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("cannot parse coordinate `{s}` in `{text}`")))
        })
        .collect()
}

fn parse_point(spec: &GroupSpec, text: Option<&str>) -> std::result::Result<GroupPoint, Failure> {
    match text {
        None => Ok(GroupPoint::identity(spec)),
        Some(t) => Ok(GroupPoint::from_coords(spec, &parse_coords(t)?)?),
    }
}

fn quadrature(common: &Common) -> std::result::Result<QuadratureConfig, Failure> {
    let cfg = QuadratureConfig::with_rel_tol(common.tol);
    cfg.validate()?;
    Ok(cfg)
}

/// The time integral runs three orders of magnitude looser than the kernel.
fn green_config(common: &Common) -> GreenConfig {
    GreenConfig {
        rel_tol: (common.tol * 1e3).min(1e-2),
        ..GreenConfig::default()
    }
}

fn output(common: &Common) -> std::result::Result<Box<dyn Write>, Failure> {
    Ok(match &common.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn coord_names(spec: &GroupSpec, prefix: &str) -> Vec<String> {
    (1..=spec.m())
        .map(|i| format!("{prefix}z{i}"))
        .chain((1..=spec.k()).map(|l| format!("{prefix}s{l}")))
        .collect()
}

fn push_coords(row: &mut String, g: &GroupPoint) {
    for x in g.coords() {
        let _ = write!(row, "{},", fmt_f64(x));
    }
}

fn validate(file: &Path) -> CmdResult {
    let text =
        std::fs::read_to_string(file).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", file.display())))?;
    let spec = GroupSpec::parse(&text)?;
    println!(
        "valid: {} (m = {}, k = {}, Q = {}, heisenberg_type = {})",
        spec.name(),
        spec.m(),
        spec.k(),
        spec.homogeneous_dimension(),
        spec.is_heisenberg_type()
    );
    Ok(())
}

fn eval(common: &Common, point: &str, base: Option<&str>, t: f64, path: KernelPath) -> CmdResult {
    let spec = load_spec(&common.spec)?;
    let g = parse_point(&spec, Some(point))?;
    let gp = parse_point(&spec, base)?;
    let ev = KernelEvaluator::new(&spec, quadrature(common)?)?;
    let v = match path {
        KernelPath::General => ev.heat(&g, &gp, t)?,
        KernelPath::Htype => ev.heisenberg_type(&g, &gp, t)?,
    };
    let mut out = output(common)?;
    let mut header = coord_names(&spec, "");
    header.extend(coord_names(&spec, "base_"));
    header.extend(["t", "value", "est_error", "imag_residue"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    let mut row = String::new();
    push_coords(&mut row, &g);
    push_coords(&mut row, &gp);
    let _ = write!(
        row,
        "{},{},{},{}",
        fmt_f64(t),
        fmt_f64(v.value),
        fmt_f64(v.est_error),
        fmt_f64(v.imag_residue)
    );
    writeln!(out, "{row}")?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    index: usize,
    lo: f64,
    hi: f64,
    count: usize,
}

impl Axis {
    fn parse(text: &str, dim: usize) -> std::result::Result<Self, Failure> {
        let bad = || Failure::Usage(format!("axis `{text}` must be index:lo:hi:count"));
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let index: usize = parts[0].parse().map_err(|_| bad())?;
        let lo: f64 = parts[1].parse().map_err(|_| bad())?;
        let hi: f64 = parts[2].parse().map_err(|_| bad())?;
        let count: usize = parts[3].parse().map_err(|_| bad())?;
        if index >= dim || count == 0 || !(lo.is_finite() && hi.is_finite()) {
            return Err(bad());
        }
        Ok(Self { index, lo, hi, count })
    }

    fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
        }
    }
}

fn grid(common: &Common, point: Option<&str>, base: Option<&str>, t: f64, axes: &[String]) -> CmdResult {
    let spec = load_spec(&common.spec)?;
    let dim = spec.m() + spec.k();
    if axes.len() > 2 {
        return Err(Failure::Usage("at most two axes".into()));
    }
    let axes: Vec<Axis> = axes
        .iter()
        .map(|a| Axis::parse(a, dim))
        .collect::<std::result::Result<_, _>>()?;
    let anchor = parse_point(&spec, point)?.coords();
    let gp = parse_point(&spec, base)?;
    let cfg = quadrature(common)?;
    // fail early on a bad configuration or time
    KernelEvaluator::new(&spec, cfg.clone())?.heat(&gp, &gp, t)?;

    let total: usize = axes.iter().map(|a| a.count).product();
    let point_at = |n: usize| -> GroupPoint {
        let mut c = anchor.clone();
        let mut rest = n;
        for a in axes.iter().rev() {
            c[a.index] = a.value(rest % a.count);
            rest /= a.count;
        }
        GroupPoint::new(c[..spec.m()].to_vec(), c[spec.m()..].to_vec())
    };

    let mut out = output(common)?;
    let mut header = coord_names(&spec, "");
    header.extend(["value", "est_error"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for start in (0..total).step_by(GRID_BLOCK) {
        let end = (start + GRID_BLOCK).min(total);
        let rows: Vec<std::result::Result<String, Error>> = (start..end)
            .into_par_iter()
            .map_init(
                || KernelEvaluator::new(&spec, cfg.clone()),
                |ev, n| {
                    let ev = ev.as_ref().map_err(Clone::clone)?;
                    let g = point_at(n);
                    let v = ev.heat(&g, &gp, t)?;
                    let mut row = String::new();
                    push_coords(&mut row, &g);
                    let _ = write!(row, "{},{}", fmt_f64(v.value), fmt_f64(v.est_error));
                    Ok(row)
                },
            )
            .collect();
        for row in rows {
            writeln!(out, "{}", row?)?;
        }
        out.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GreenMode {
    Numeric,
    ClosedForm,
    Both,
}

fn green(common: &Common, point: &str, base: Option<&str>, s: f64, mode: GreenMode, constant: Constant) -> CmdResult {
    let spec = load_spec(&common.spec)?;
    let g = parse_point(&spec, Some(point))?;
    let gp = parse_point(&spec, base)?;
    let delta = spec.multiply(&spec.inverse(&gp), &g)?;
    let cfg = quadrature(common)?;
    let gcfg = green_config(common);
    let numeric = if mode == GreenMode::ClosedForm {
        None
    } else if s == 1.0 {
        Some(KernelEvaluator::new(&spec, cfg)?.green(&g, &gp, &gcfg)?)
    } else {
        Some(Fractional::new(&spec, cfg)?.fractional_green(s, &delta.z, &delta.sigma, &gcfg)?)
    };
    let closed = if mode == GreenMode::Numeric {
        None
    } else {
        let source = match constant {
            Constant::Fractional => ConstantSource::Fractional,
            Constant::Identity => ConstantSource::GreenIdentity,
        };
        Some(closed_form_e_s(&spec, s, &delta.z, &delta.sigma, source)?)
    };
    let mut out = output(common)?;
    let mut header = vec!["s".to_string()];
    let mut row = vec![fmt_f64(s)];
    if let Some(n) = numeric {
        header.extend(["numeric", "est_error"].map(String::from));
        row.extend([fmt_f64(n.value), fmt_f64(n.est_error)]);
    }
    if let Some(c) = closed {
        header.push("closed_form".into());
        row.push(fmt_f64(c));
    }
    if let (Some(n), Some(c)) = (numeric, closed) {
        header.push("ratio".into());
        row.push(fmt_f64(n.value / c));
    }
    writeln!(out, "{}", header.join(","))?;
    writeln!(out, "{}", row.join(","))?;
    out.flush()?;
    Ok(())
}

/// One row of a verification table.
struct Check {
    name: String,
    value: f64,
    target: f64,
    tolerance: f64,
    /// `None` when the check does not apply to the group.
    pass: Option<bool>,
}

impl Check {
    fn skipped(name: &str) -> Self {
        Self {
            name: name.to_string(),
            value: f64::NAN,
            target: f64::NAN,
            tolerance: f64::NAN,
            pass: None,
        }
    }

    fn row(&self) -> String {
        let pass = match self.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "skipped",
        };
        format!(
            "{},{},{},{},{}",
            self.name,
            fmt_f64(self.value),
            fmt_f64(self.target),
            fmt_f64(self.tolerance),
            pass
        )
    }
}

fn is_planar(spec: &GroupSpec) -> bool {
    spec.m() == 2 && spec.k() == 1
}

fn verify(common: &Common, suite: Suite, paths: usize, steps: usize) -> CmdResult {
    let spec = load_spec(&common.spec)?;
    let cfg = quadrature(common)?;
    let ev = KernelEvaluator::new(&spec, cfg.clone())?;
    let want = |s: Suite| suite == Suite::All || suite == s;
    let mut checks: Vec<Check> = Vec::new();
    let e = GroupPoint::identity(&spec);

    if want(Suite::Pde) {
        let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
        let points: Vec<GroupPoint> = (0..5)
            .map(|_| {
                let c: Vec<f64> = (0..spec.m() + spec.k()).map(|_| rng.random_range(-1.0..1.0)).collect();
                GroupPoint::new(c[..spec.m()].to_vec(), c[spec.m()..].to_vec())
            })
            .collect();
        let residuals: Vec<std::result::Result<f64, Error>> = points
            .par_iter()
            .map_init(
                || KernelEvaluator::new(&spec, cfg.clone()),
                |ev, g| {
                    let ev = ev.as_ref().map_err(Clone::clone)?;
                    Ok(pde_residual(ev, g, &e, 1.0, &StencilConfig::default())?.residual)
                },
            )
            .collect();
        let mut worst: f64 = 0.0;
        for r in residuals {
            worst = worst.max(r?);
        }
        checks.push(Check {
            name: "pde_residual".into(),
            value: worst,
            target: 0.0,
            tolerance: 1e-3,
            pass: Some(worst <= 1e-3),
        });
    }
    if want(Suite::Mass) {
        checks.push(if is_planar(&spec) {
            let (mass, _) = mass_check(&ev, 1.0)?;
            Check {
                name: "mass".into(),
                value: mass,
                target: 1.0,
                tolerance: 1e-3,
                pass: Some((mass - 1.0).abs() <= 1e-3),
            }
        } else {
            Check::skipped("mass")
        });
    }
    if want(Suite::Semigroup) {
        checks.push(if is_planar(&spec) {
            let gpp = GroupPoint::new(vec![0.5, -0.3], vec![0.2]);
            let r = semigroup_check(&ev, &e, &gpp, 0.5, 0.5)?;
            Check {
                name: "semigroup".into(),
                value: r.composed,
                target: r.direct,
                tolerance: 1e-2,
                pass: Some(r.rel_error <= 1e-2),
            }
        } else {
            Check::skipped("semigroup")
        });
    }
    if want(Suite::Mc) {
        for f in [TestFunction::Gaussian, TestFunction::CosSigma] {
            let name = format!("mc_{}", f.name());
            checks.push(if is_planar(&spec) {
                let mc = McConfig {
                    n_paths: paths,
                    n_steps: steps,
                    seed: common.seed,
                    t: 0.5,
                };
                let r = mc_vs_kernel(&ev, f, &mc)?;
                Check {
                    name,
                    value: r.mc_mean,
                    target: r.kernel_value,
                    tolerance: 3.0 * (r.mc_std_error + r.kernel_error),
                    pass: Some(r.pass),
                }
            } else {
                Check::skipped(&name)
            });
        }
    }
    if want(Suite::Vertical) {
        let target = 0.5 / std::f64::consts::PI.sqrt();
        let d = std::f64::consts::FRAC_1_SQRT_2;
        for (name, nu) in [
            ("vertical_e1", [1.0, 0.0]),
            ("vertical_e2", [0.0, 1.0]),
            ("vertical_diagonal", [d, d]),
        ] {
            checks.push(if is_planar(&spec) {
                let v = vertical_identity_check(&ev, &nu)?;
                Check {
                    name: name.into(),
                    value: v,
                    target,
                    tolerance: 1e-3,
                    pass: Some((v - target).abs() <= 1e-3),
                }
            } else {
                Check::skipped(name)
            });
        }
    }

    let mut out = output(common)?;
    writeln!(out, "check,value,target,tolerance,pass")?;
    for c in &checks {
        writeln!(out, "{}", c.row())?;
    }
    out.flush()?;
    let failed = checks.iter().filter(|c| c.pass == Some(false)).count();
    if failed > 0 {
        return Err(Failure::ChecksFailed(failed));
    }
    Ok(())
}

fn bench(common: &Common, evals: usize) -> CmdResult {
    if evals == 0 {
        return Err(Failure::Usage("--evals must be positive".into()));
    }
    let spec = load_spec(&common.spec)?;
    let ev = KernelEvaluator::new(&spec, quadrature(common)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let samples: Vec<(GroupPoint, GroupPoint, f64)> = (0..evals)
        .map(|_| {
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
            let g = GroupPoint::new(draw(spec.m()), draw(spec.k()));
            let gp = GroupPoint::new(draw(spec.m()), draw(spec.k()));
            (g, gp, rng.random_range(0.5..2.0))
        })
        .collect();
    let mut out = output(common)?;
    writeln!(out, "path,evaluations,seconds,evals_per_second")?;
    let mut paths = vec![KernelPath::General];
    if spec.is_heisenberg_type() {
        paths.push(KernelPath::Htype);
    }
    for path in paths {
        let start = Instant::now();
        let mut sink = 0.0;
        for (g, gp, t) in &samples {
            sink += match path {
                KernelPath::General => ev.heat(g, gp, *t)?.value,
                KernelPath::Htype => ev.heisenberg_type(g, gp, *t)?.value,
            };
        }
        let secs = start.elapsed().as_secs_f64();
        std::hint::black_box(sink);
        let name = match path {
            KernelPath::General => "general",
            KernelPath::Htype => "heisenberg_type",
        };
        writeln!(out, "{name},{evals},{},{}", fmt_f64(secs), fmt_f64(evals as f64 / secs))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_has_seventeen_digits() {
        assert_eq!(fmt_f64(0.0625), "6.2500000000000000e-2");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(-1.0 / 3.0).len(), "-3.3333333333333331e-1".len());
    }

    #[test]
    fn axis_parsing() {
        let a = Axis::parse("2:-1:1:5", 3).unwrap();
        assert_eq!((a.index, a.count), (2, 5));
        assert_eq!(a.value(0), -1.0);
        assert_eq!(a.value(4), 1.0);
        assert_eq!(Axis::parse("0:3:9:1", 3).unwrap().value(0), 3.0);
        assert!(Axis::parse("3:0:1:2", 3).is_err());
        assert!(Axis::parse("0:0:1:0", 3).is_err());
        assert!(Axis::parse("0:0:1", 3).is_err());
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(
            Failure::Core(Error::Validation("x".into())).exit_code(),
            EXIT_VALIDATION
        );
        assert_eq!(Failure::ChecksFailed(1).exit_code(), EXIT_NUMERICAL);
        assert_eq!(Failure::Usage("x".into()).exit_code(), EXIT_USAGE);
    }

    #[test]
    fn builtin_names_resolve() {
        assert_eq!(load_spec("heisenberg2").unwrap().m(), 4);
        assert!(load_spec("no-such-group").is_err());
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run(["step2heat", "--help"]), EXIT_OK);
        assert_eq!(run(["step2heat", "bogus"]), EXIT_USAGE);
    }
}
