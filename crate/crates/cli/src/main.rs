use clap::Parser;
use rhospan_cli::args::{Cli, Command, FormatChoice};
use rhospan_cli::{commands, CliError};
use std::fs;
use std::path::PathBuf;

fn write_or_print(path: Option<&PathBuf>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, contents)?;
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Interval(args) => {
            let report = commands::cmd_interval(&args)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Data(e.to_string()))?;
            write_or_print(args.output.as_ref(), &format!("{json}\n"))
        }
        Command::Fit(args) => {
            let out = commands::cmd_fit(&args)?;
            let json = serde_json::to_string_pretty(&out.summary)
                .map_err(|e| CliError::Data(e.to_string()))?;
            match &args.output {
                Some(path) => {
                    fs::write(path, &out.table_csv)?;
                    println!("{json}");
                }
                None => {
                    // No file target: summary on stdout only.
                    println!("{json}");
                }
            }
            Ok(())
        }
        Command::Curves(args) => {
            let out = commands::cmd_curves(&args)?;
            match args.format {
                FormatChoice::Csv => write_or_print(args.output.as_ref(), &out.to_csv()),
                FormatChoice::Json => {
                    #[derive(serde::Serialize)]
                    struct CurveJson<'a> {
                        schema: u32,
                        interval: &'a commands::IntervalJson,
                        curve: &'a rhospan_core::CriterionCurve,
                    }
                    let json = serde_json::to_string_pretty(&CurveJson {
                        schema: commands::SCHEMA_VERSION,
                        interval: &out.interval,
                        curve: &out.curve,
                    })
                    .map_err(|e| CliError::Data(e.to_string()))?;
                    write_or_print(args.output.as_ref(), &format!("{json}\n"))
                }
            }
        }
        Command::Simulate(args) => {
            let reports = commands::cmd_simulate(&args)?;
            let json = serde_json::to_string_pretty(&reports)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let csv: String = std::iter::once(
                rhospan_core::CoverageReport::csv_header().to_string(),
            )
            .chain(reports.iter().map(|r| r.to_csv_body()))
            .collect();
            match &args.output {
                Some(base) => {
                    fs::write(base.with_extension("json"), format!("{json}\n"))?;
                    fs::write(base.with_extension("csv"), &csv)?;
                    Ok(())
                }
                None => match args.format {
                    FormatChoice::Json => {
                        println!("{json}");
                        Ok(())
                    }
                    FormatChoice::Csv => {
                        print!("{csv}");
                        Ok(())
                    }
                },
            }
        }
        Command::Bench(args) => {
            let table = commands::cmd_bench(&args)?;
            print!("{}", table.to_text());
            if let Some(path) = &args.output {
                fs::write(path, table.to_csv())?;
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
