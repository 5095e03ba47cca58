use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ffgain_core::extrapolate::extrapolate_segments;
use ffgain_core::io::report::{compare_table, ffdist_entries, ffdist_table, plan_table, solution_table, Table};
use ffgain_core::io::{emit_campaign, parse_campaign, CampaignConfig, CampaignFile, ReportFormat, DEFAULT_CONFIG};
use ffgain_core::linksim::{analytic_gain, ideal_campaign, synthesize_campaign};
use ffgain_core::stats::reduce_campaign;
use ffgain_core::units::{power_to_db, wavelength};
use ffgain_core::{Campaign, GainSolution};

/// Compact-cluster three-antenna gain measurement toolkit.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Campaign configuration (TOML). The built-in campaign is used otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set simulation.seed=7`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Output file. Tables are written there as CSV, campaigns in trace format.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed of the synthetic noise.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Frequency for far-field calculations, e.g. "145 GHz".
    #[arg(long, global = true)]
    frequency: Option<String>,

    /// Table format on standard output: table or csv.
    #[arg(long, global = true, default_value = "table")]
    format: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Far-field distances of every antenna model combination.
    Ffdist,
    /// Cluster schedule with phase deviation and far-field verdicts.
    Plan,
    /// Synthesize a campaign file from the aperture coupling model.
    Simulate {
        /// Write the wide-span extrapolation segments instead of the cluster campaign.
        #[arg(long)]
        extrapolation: bool,
    },
    /// Three-antenna gains from a cluster campaign file.
    Solve {
        input: PathBuf,
    },
    /// Gains and their deviation across measurement points.
    Stats {
        input: PathBuf,
    },
    /// Gains from a file of overlapping wide-span segments.
    Extrapolate {
        input: PathBuf,
    },
    /// Cluster and extrapolation gains side by side. Without inputs both
    /// data sets are synthesized from the configuration.
    Compare {
        #[arg(long, requires = "segments")]
        campaign: Option<PathBuf>,
        #[arg(long, requires = "campaign")]
        segments: Option<PathBuf>,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let numerical = error
            .chain()
            .any(|e| e.downcast_ref::<ffgain_core::Error>().is_some_and(|e| e.is_numerical()));
        Failure {
            code: if numerical { 2 } else { 1 },
            error,
        }
    }
}

impl From<ffgain_core::Error> for Failure {
    fn from(e: ffgain_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FFGAIN_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .with_context(|| format!("FFGAIN_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn load_config(g: &Global) -> Result<CampaignConfig> {
    let text = match &g.config {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut overrides = g.set.clone();
    if let Some(seed) = g.seed {
        overrides.push(format!("simulation.seed={seed}"));
    }
    if let Some(f) = &g.frequency {
        overrides.push(format!("ffdist.frequency=\"{f}\""));
    }
    Ok(CampaignConfig::from_toml(&text, &overrides)?)
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    configure_threads()?;
    let g = &cli.global;
    let format: ReportFormat = g.format.parse()?;
    let config = load_config(g)?;
    match &cli.command {
        Command::Ffdist => {
            let table = ffdist_table(&ffdist_entries(&config.antennas), config.ffdist_frequency)?;
            emit_table(&table, format, g.out.as_deref())?;
        }
        Command::Plan => emit_table(&plan_table(&config)?, format, g.out.as_deref())?,
        Command::Simulate { extrapolation } => {
            let traces = if *extrapolation {
                let ideal = ideal_campaign(&config.antennas, &config.extrapolation_segments(), &config.grid, &config.model)?;
                ideal.realize_traces(&config.model, config.runs)?
            } else {
                let campaign = synthesize_campaign(
                    &config.antennas,
                    &config.campaign_clusters(),
                    &config.grid,
                    &config.model,
                    config.runs,
                )?;
                campaign.all_traces().into_iter().cloned().collect()
            };
            let text = emit_campaign(&CampaignFile {
                antennas: config.antennas.to_vec(),
                grid: config.grid,
                traces,
            });
            match &g.out {
                Some(p) => write(p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Solve { input } => {
            let campaign = read_campaign(input)?;
            let (_, solution) = reduce_campaign(&campaign, &config.reduction)?;
            let mut table = solution_table(&solution);
            drop_column(&mut table, "sigma_f_db");
            emit_table(&table, format, g.out.as_deref())?;
        }
        Command::Stats { input } => {
            let campaign = read_campaign(input)?;
            let (data, solution) = reduce_campaign(&campaign, &config.reduction)?;
            if data.gap_count() > 0 {
                eprintln!("warning: {} per-point gains could not be solved and were skipped", data.gap_count());
            }
            emit_table(&solution_table(&solution), format, g.out.as_deref())?;
        }
        Command::Extrapolate { input } => {
            let file = read_file(input)?;
            let solution = extrapolate_file(&config, &file)?;
            emit_table(&solution_table(&solution), format, g.out.as_deref())?;
        }
        Command::Compare { campaign, segments } => {
            let (ccm_campaign, segment_file, truth) = match (campaign, segments) {
                (Some(c), Some(s)) => (read_campaign(c)?, read_file(s)?, None),
                _ => {
                    let c = synthesize_campaign(
                        &config.antennas,
                        &config.campaign_clusters(),
                        &config.grid,
                        &config.model,
                        config.runs,
                    )?;
                    let ideal =
                        ideal_campaign(&config.antennas, &config.extrapolation_segments(), &config.grid, &config.model)?;
                    let file = CampaignFile {
                        antennas: config.antennas.to_vec(),
                        grid: config.grid,
                        traces: ideal.realize_traces(&config.model, config.runs)?,
                    };
                    (c, file, Some(analytic_truth(&config)))
                }
            };
            let (_, ccm) = reduce_campaign(&ccm_campaign, &config.reduction)?;
            let ex = extrapolate_file(&config, &segment_file)?;
            let table = compare_table(&ccm, &ex, truth.as_deref())?;
            emit_table(&table, format, g.out.as_deref())?;
        }
    }
    Ok(())
}

/// Band-averaged analytic gain of each configured antenna, in dB.
fn analytic_truth(config: &CampaignConfig) -> Vec<f64> {
    config
        .antennas
        .iter()
        .map(|a| {
            let f = config.grid.frequencies();
            f.iter()
                .map(|f| power_to_db(analytic_gain(a, wavelength(*f), config.model.aperture_field)))
                .sum::<f64>()
                / f.len() as f64
        })
        .collect()
}

fn extrapolate_file(config: &CampaignConfig, file: &CampaignFile) -> Result<GainSolution> {
    if file.antennas.len() != 3 {
        anyhow::bail!(ffgain_core::Error::Config(format!(
            "segment file lists {} antennas, expected 3",
            file.antennas.len()
        )));
    }
    let ids: [String; 3] = std::array::from_fn(|k| file.antennas[k].id().to_string());
    let options = config.extrapolation.options(&file.grid, config.reduction.averaging);
    let (solution, per_pair) = extrapolate_segments(&ids, &file.traces, &options)?;
    for (pair, p) in &per_pair {
        if let Some(fit) = p.fits.first().filter(|f| f.is_short_span()) {
            eprintln!(
                "warning: pair {pair} spans a distance ratio of {:.2}, below the recommended 3",
                fit.span_ratio
            );
        }
    }
    Ok(solution)
}

fn read_file(path: &Path) -> Result<CampaignFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_campaign(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_campaign(path: &Path) -> Result<Campaign> {
    let file = read_file(path)?;
    Campaign::new(file.antennas, file.grid, file.traces).with_context(|| format!("checking {}", path.display()))
}

fn drop_column(table: &mut Table, name: &str) {
    if let Some(k) = table.headers.iter().position(|h| h == name) {
        table.headers.remove(k);
        for row in &mut table.rows {
            row.remove(k);
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit_table(table: &Table, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    print!("{}", table.render(format));
    if let Some(p) = out {
        write(p, &table.to_csv())?;
    }
    Ok(())
}
