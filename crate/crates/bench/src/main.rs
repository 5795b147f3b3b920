use std::process::ExitCode;

use tilemesh_bench::{
    anchored_speedups, csv, emit_csv, parse_args, run, speedups, sweep, BenchError, RunReport, SweepAxis,
};

fn print_table(reports: &[RunReport]) {
    let rel = speedups(reports);
    let anchored = anchored_speedups(reports);
    println!(
        "{:<6} {:<10} {:<6} {:>7} {:>14} {:>12} {:>12} {:>12} {:>7} {:>9}",
        "kernel", "layout", "thread", "workers", "tile", "kernel_s", "fill_s", "total_s", "fill%", "speedup"
    );
    for (i, r) in reports.iter().enumerate() {
        let c = &r.config;
        let [tx, ty, tz] = c.reported_tile();
        let tile = if tx == 0 { "off".to_string() } else { format!("{tx}x{ty}x{tz}") };
        let speedup = anchored.as_ref().map_or(rel[i], |a| a[i]);
        println!(
            "{:<6} {:<10} {:<6} {:>7} {:>14} {:>12.4} {:>12.4} {:>12.4} {:>6.1}% {:>9.3}",
            c.kernel.name(),
            csv::layout_name(c.layout),
            csv::threading_name(c.threading),
            c.workers,
            tile,
            r.kernel_seconds,
            r.fill_seconds,
            r.total_seconds,
            100.0 * r.fill_fraction(),
            speedup,
        );
    }
    println!("checksum {}", csv::format_g(reports[0].checksum, 17));
    if anchored.is_some() {
        println!("speedup relative to the 1-worker untiled run");
    } else if reports.len() > 1 {
        println!("speedup relative to the first run");
    }
}

fn main_inner() -> Result<(), BenchError> {
    let (cfg, cli) = parse_args(std::env::args_os())?;
    log::debug!("{cfg:?}");
    let axis = match (cli.sweep_tiles, cli.sweep_threads) {
        (Some(t), _) => Some(SweepAxis::Tiles(t)),
        (None, Some(w)) => Some(SweepAxis::Threads(w)),
        (None, None) => None,
    };
    let reports = match axis {
        Some(axis) => sweep(&cfg, &axis)?,
        None => vec![run(&cfg)?],
    };
    for v in reports.iter().flat_map(|r| &r.verification) {
        println!("verify {}: max relative error {:e} (tolerance {:e})", v.kernel.name(), v.max_rel_error, v.tolerance);
    }
    print_table(&reports);
    if let Some(path) = &cfg.csv {
        emit_csv(&reports, path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(BenchError::Help(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tilemesh-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
