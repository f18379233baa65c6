//! Command-line front end. Parses flags into a key/value map and hands off to
//! `al_lab::cli`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "al-lab", version, about = "Ablowitz-Ladik lattice homoclinic-structure lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Floquet discriminant, spectral catalog and critical points.
    Spectrum(JobArgs),
    /// Even heteroclinic orbit, Melnikov vector and asymptotics.
    Orbit(JobArgs),
    /// Melnikov coefficients, zero surface and transversality scan.
    Melnikov(JobArgs),
    /// Resonant-annulus fixed points, phase portrait and separatrices.
    Resonance(JobArgs),
    /// Time integration with invariant monitoring.
    Evolve(JobArgs),
    /// Run the acceptance suite.
    Verify(JobArgs),
}

#[derive(Args, Default)]
struct JobArgs {
    /// key = value config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Additional key=value setting (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    ear: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    window_cap: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    z_min: Option<String>,
    #[arg(long)]
    z_max: Option<String>,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["T0", "T1"])]
    t_range: Option<Vec<String>>,
    #[arg(long)]
    t_samples: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha2: Option<String>,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["A0", "A1"])]
    a_range: Option<Vec<String>>,
    #[arg(long)]
    a_samples: Option<String>,
    #[arg(long)]
    gamma_samples: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta0: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["Y0", "Y1"])]
    y_range: Option<Vec<String>>,
    #[arg(long)]
    nxi: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    /// integrable | perturbed | plane | annulus
    #[arg(long)]
    field: Option<String>,
    /// uniform | perturbed | orbit
    #[arg(long)]
    init: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    xi0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_start: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<String>,
    #[arg(long)]
    rel_tol: Option<String>,
    #[arg(long)]
    abs_tol: Option<String>,
    #[arg(long)]
    samples: Option<String>,

    #[arg(long)]
    zero_state: bool,
    #[arg(long)]
    require_window: bool,
    #[arg(long)]
    a_equals_omega: bool,
    #[arg(long)]
    quick: bool,
}

impl JobArgs {
    fn flags(&self) -> Result<BTreeMap<String, String>, String> {
        let mut m = BTreeMap::new();
        let single = [
            ("out", &self.out),
            ("threads", &self.threads),
            ("n", &self.n),
            ("a", &self.a),
            ("omega", &self.omega),
            ("gamma", &self.gamma),
            ("p", &self.p),
            ("ear", &self.ear),
            ("window_cap", &self.window_cap),
            ("grid", &self.grid),
            ("z_min", &self.z_min),
            ("z_max", &self.z_max),
            ("t_samples", &self.t_samples),
            ("alpha1", &self.alpha1),
            ("alpha2", &self.alpha2),
            ("a_samples", &self.a_samples),
            ("gamma_samples", &self.gamma_samples),
            ("eta", &self.eta),
            ("delta0", &self.delta0),
            ("steps", &self.steps),
            ("nxi", &self.nxi),
            ("ny", &self.ny),
            ("field", &self.field),
            ("init", &self.init),
            ("b1", &self.b1),
            ("epsilon", &self.epsilon),
            ("y0", &self.y0),
            ("xi0", &self.xi0),
            ("t_start", &self.t_start),
            ("t_end", &self.t_end),
            ("rel_tol", &self.rel_tol),
            ("abs_tol", &self.abs_tol),
            ("samples", &self.samples),
        ];
        for (k, v) in single {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        }
        for (k, v) in [("t_range", &self.t_range), ("a_range", &self.a_range), ("y_range", &self.y_range)] {
            if let Some(v) = v {
                m.insert(k.to_string(), v.join(","));
            }
        }
        for (k, on) in [
            ("zero_state", self.zero_state),
            ("require_window", self.require_window),
            ("a_equals_omega", self.a_equals_omega),
            ("quick", self.quick),
        ] {
            if on {
                m.insert(k.to_string(), "true".into());
            }
        }
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| format!("--set '{s}' must be key=value"))?;
            m.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(m)
    }
}

fn main() {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", a),
        Command::Orbit(a) => ("orbit", a),
        Command::Melnikov(a) => ("melnikov", a),
        Command::Resonance(a) => ("resonance", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Verify(a) => ("verify", a),
    };
    let code = match args.flags() {
        Ok(flags) => al_lab::cli::run(name, args.config.as_deref(), &flags),
        Err(msg) => {
            eprintln!("{}", al_lab::cli::CliError::Config(msg).report());
            2
        }
    };
    std::process::exit(code);
}
