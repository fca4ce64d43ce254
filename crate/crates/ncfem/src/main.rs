use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ncfem::study::{self, Format, MethodChoice, StudyConfig, TestCase};
use ncfem::{report, Error, Result};

/// Convergence studies and certification runs for the decoupled
/// nonconforming discretization of `eps^2 Delta^2 u - Delta u = f`.
#[derive(Debug, Parser)]
#[command(name = "ncfem", version)]
struct Cli {
    /// TOML study configuration; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    test: Option<TestArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Comma separated list of epsilon values.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Comma separated, strictly increasing powers of two.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Degree of the error quadrature.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Single-threaded run with no timing columns, for byte-identical output.
    #[arg(long)]
    serial: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<FormatArg>>,
    /// Run the certification suite instead of a convergence study.
    #[arg(long)]
    verify: bool,
    /// Include the inf-sup estimate in the certification suite.
    #[arg(long)]
    infsup: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum TestArg {
    Smooth,
    Layer,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Interp,
    Nointerp,
    Both,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Json,
}

impl Cli {
    fn into_config(self) -> Result<(StudyConfig, bool)> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::load(path)?,
            None => StudyConfig::default(),
        };
        if let Some(t) = self.test {
            cfg.test = match t {
                TestArg::Smooth => TestCase::Smooth,
                TestArg::Layer => TestCase::Layer,
            };
        }
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::Interp => MethodChoice::Interp,
                MethodArg::Nointerp => MethodChoice::NoInterp,
                MethodArg::Both => MethodChoice::Both,
            };
        }
        if let Some(e) = self.epsilon {
            cfg.epsilons = e;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some(q) = self.quad_degree {
            cfg.quad_degree = q;
        }
        if self.serial {
            cfg.serial = true;
        }
        if let Some(o) = self.out {
            cfg.out = Some(o);
        }
        if let Some(f) = self.format {
            cfg.formats = f
                .into_iter()
                .map(|f| match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Markdown => Format::Markdown,
                    FormatArg::Json => Format::Json,
                })
                .collect();
        }
        if self.infsup {
            cfg.verify.infsup = true;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok((cfg, self.verify))
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (cfg, verify) = cli.into_config()?;
    if verify {
        let rep = study::run_verify(&cfg)?;
        print!("{}", rep.to_text());
        for p in study::write_verify(&cfg, &rep)? {
            eprintln!("wrote {}", p.display());
        }
        return Ok(rep.all_passed());
    }
    let outcome = study::run_study(&cfg)?;
    print!("{}", report::to_markdown(&outcome.report, !cfg.serial));
    for (run, err) in &outcome.failures {
        eprintln!("run {run} failed: {err}");
    }
    for p in study::write_study(&cfg, &outcome)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(outcome.succeeded())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
