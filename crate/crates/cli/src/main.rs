use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use qwrg_cli::commands::run;
use qwrg_cli::config::{Command, Format, Precision, RunConfig};
use qwrg_cli::OUT_DIR_ENV;
use qwrg_core::Family;

/// RG analysis and direct simulation of coined quantum walks on fractal networks.
#[derive(Parser, Debug)]
#[command(name = "qwrg", version, about)]
struct Cli {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// Network family: dsg, mk3 or line.
    #[arg(long)]
    family: Option<Family>,
    /// Gasket generation g (simulate).
    #[arg(long)]
    generation: Option<u32>,
    /// Ring size N (simulate on the line).
    #[arg(long)]
    size: Option<usize>,
    /// Single RG step; shorthand for --k-min K --k-max K.
    #[arg(long, conflicts_with_all = ["k_min", "k_max"])]
    k: Option<u32>,
    #[arg(long)]
    k_min: Option<u32>,
    #[arg(long)]
    k_max: Option<u32>,
    /// Laplace variable as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z: Option<(f64, f64)>,
    /// Unit-circle grid size for pole scans.
    #[arg(long)]
    grid: Option<usize>,
    /// Coin angle for the line.
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    /// Number of time steps T.
    #[arg(long = "steps", short = 'T')]
    steps: Option<usize>,
    /// Output file; defaults to a file in $QWRG_OUT_DIR when that is set.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Precision::Auto)]
    precision: Precision,
    /// Significand bits for --precision extended.
    #[arg(long)]
    bits: Option<usize>,
}

fn parse_complex(s: &str) -> Result<(f64, f64), String> {
    let (re, im) = s.split_once(',').ok_or("expected RE,IM")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((p(re)?, p(im)?))
}

impl Cli {
    fn into_config(self) -> RunConfig {
        let mut c = RunConfig::new(self.command);
        c.family = self.family;
        c.generation = self.generation;
        c.size = self.size;
        c.k_min = self.k.or(self.k_min);
        c.k_max = self.k.or(self.k_max);
        c.re_z = self.z.map(|z| z.0);
        c.im_z = self.z.map(|z| z.1);
        c.grid = self.grid;
        c.eta = self.eta;
        c.steps = self.steps;
        c.output = self.output;
        c.format = self.format;
        c.precision = self.precision;
        c.bits = self.bits;
        c
    }
}

fn default_output(cfg: &RunConfig) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV)?;
    let ext = if cfg.format == Format::Csv { "csv" } else { "json" };
    let stem = match cfg.family {
        Some(f) => format!("{}-{}", cfg.command.name(), f.name()),
        None => cfg.command.name().to_string(),
    };
    Some(Path::new(&dir).join(format!("{stem}.{ext}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut cfg = cli.into_config();
    if cfg.output.is_none() {
        cfg.output = default_output(&cfg);
    }
    let out = run(&cfg);
    let doc = &out.document;
    if let Some(path) = &cfg.output {
        let text = match &out.csv {
            Some(csv) => csv.clone(),
            None => doc.to_json(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            let _ = std::fs::create_dir_all(parent);
        }
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    if let Some(p) = &doc.payload {
        println!("{}", p.summary());
    }
    if let Some(e) = &doc.error {
        eprintln!("error ({}): {}", e.kind, e.message);
    }
    ExitCode::from(doc.exit_code() as u8)
}
