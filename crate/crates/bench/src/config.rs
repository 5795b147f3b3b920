//! Run configuration: built-in defaults, then an optional TOML file, then flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use serde::Deserialize;
use tilemesh::{available_workers, IterConfig, Layout, Operator, TileSize, Threading, TilingMode};

use crate::error::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Heat,
    Wide4,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Heat => "heat",
            Kernel::Wide4 => "wide4",
        }
    }

    pub fn operator(&self) -> Operator {
        match self {
            Kernel::Heat => Operator::Heat,
            Kernel::Wide4 => Operator::wide4(),
        }
    }
}

impl FromStr for Kernel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heat" => Ok(Kernel::Heat),
            "wide4" => Ok(Kernel::Wide4),
            _ => Err(format!("unknown kernel '{s}' (expected heat or wide4)")),
        }
    }
}

/// Tile setting as given on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TileSetting {
    Off,
    Default,
    Size(TileSize),
}

impl TileSetting {
    pub fn mode(&self) -> TilingMode {
        match self {
            TileSetting::Off => TilingMode::Off,
            TileSetting::Default => TilingMode::Default,
            TileSetting::Size(ts) => TilingMode::Explicit(*ts),
        }
    }
}

pub fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<_> = s.split([',', 'x']).map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got '{s}'"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("bad integer '{p}' in '{s}'"))?;
    }
    Ok(out)
}

fn parse_tile_size(s: &str) -> Result<TileSize, String> {
    TileSize::from_array(parse_triple(s)?).map_err(|e| e.to_string())
}

impl FromStr for TileSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(TileSetting::Off),
            "default" => Ok(TileSetting::Default),
            _ => parse_tile_size(s).map(TileSetting::Size),
        }
    }
}

fn parse_threading(s: &str) -> Result<Threading, String> {
    match s {
        "tile" => Ok(Threading::Tile),
        "loop" => Ok(Threading::Loop),
        _ => Err(format!("unknown threading '{s}' (expected tile or loop)")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LayoutKind {
    Contiguous,
    Regional,
}

fn parse_layout(s: &str) -> Result<LayoutKind, String> {
    match s {
        "contiguous" => Ok(LayoutKind::Contiguous),
        "regional" => Ok(LayoutKind::Regional),
        _ => Err(format!("unknown layout '{s}' (expected contiguous or regional)")),
    }
}

/// Letters of the periodic directions, e.g. `xyz`, `xz`; `none` for none.
pub fn parse_periodic(s: &str) -> Result<[bool; 3], String> {
    let mut mask = [false; 3];
    if s == "none" {
        return Ok(mask);
    }
    for ch in s.chars() {
        let d = "xyz".find(ch).ok_or_else(|| format!("bad periodic mask '{s}'"))?;
        mask[d] = true;
    }
    Ok(mask)
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer, got '{s}'")),
        Ok(n) => Ok(n),
    }
}

#[derive(Clone, Debug, Parser)]
#[command(name = "tilemesh-bench", about = "Tiled stencil benchmark harness", version)]
pub struct Cli {
    #[arg(long, value_parser = parse_positive)]
    pub nx: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    pub ny: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    pub nz: Option<usize>,
    /// Largest grid extent per dimension when chopping the domain.
    #[arg(long, value_parser = parse_positive)]
    pub max_grid_size: Option<usize>,
    /// X,Y,Z, `off` or `default`.
    #[arg(long)]
    pub tile_size: Option<TileSetting>,
    #[arg(long, value_parser = parse_layout)]
    layout: Option<LayoutKind>,
    #[arg(long, value_parser = parse_tile_size)]
    pub region_size: Option<TileSize>,
    #[arg(long, value_parser = parse_positive)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub kernel: Option<Kernel>,
    #[arg(long, value_parser = parse_threading)]
    pub threading: Option<Threading>,
    /// Periodic directions, e.g. `xyz` or `none`.
    #[arg(long, value_parser = parse_periodic)]
    pub periodic: Option<[bool; 3]>,
    /// Check both kernels against closed-form solutions before timing.
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with `tile_size` and `workers` defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sweep thread counts, e.g. `1,2,4,8,12`.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, conflicts_with = "sweep_tiles")]
    pub sweep_threads: Option<Vec<usize>>,
    /// Sweep tile settings separated by `;`, e.g. `off;128,4,4;128,8,8`.
    #[arg(long, value_delimiter = ';')]
    pub sweep_tiles: Option<Vec<TileSetting>>,
}

/// Keys accepted in the optional configuration file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub tile_size: Option<String>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(path.to_owned(), e))?;
        toml::from_str(&text).map_err(|e| BenchError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub extents: [usize; 3],
    pub max_grid_size: usize,
    pub tile: TileSetting,
    pub layout: Layout,
    pub workers: usize,
    pub steps: usize,
    pub kernel: Kernel,
    pub threading: Threading,
    pub periodic: [bool; 3],
    pub verify: bool,
    pub csv: Option<PathBuf>,
    pub seed: u64,
    /// Size used for [`TileSetting::Default`].
    pub default_tile: TileSize,
}

pub const DEFAULT_REGION: [usize; 3] = [64, 64, 64];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            extents: [128; 3],
            max_grid_size: 128,
            tile: TileSetting::Default,
            layout: Layout::Contiguous,
            workers: available_workers(),
            steps: 1000,
            kernel: Kernel::Heat,
            threading: Threading::Tile,
            periodic: [true; 3],
            verify: false,
            csv: None,
            seed: 0,
            default_tile: IterConfig::default().default_tile_size,
        }
    }
}

impl RunConfig {
    pub fn iter_config(&self) -> IterConfig {
        IterConfig {
            default_tile_size: self.default_tile,
        }
    }

    /// The tiling mode actually used; loop-level threading never tiles.
    pub fn tiling_mode(&self) -> TilingMode {
        match self.threading {
            Threading::Loop => TilingMode::Off,
            Threading::Tile => self.tile.mode(),
        }
    }

    /// Tile extents reported in output; zeros when tiling is off.
    pub fn reported_tile(&self) -> [usize; 3] {
        match self.tiling_mode() {
            TilingMode::Off => [0; 3],
            TilingMode::Default => self.default_tile.as_array(),
            TilingMode::Explicit(ts) => ts.as_array(),
        }
    }

    /// Applies file settings then flags on top of the defaults.
    pub fn resolve(cli: &Cli, file: Option<&FileConfig>) -> Result<Self, BenchError> {
        let mut cfg = RunConfig::default();
        if let Some(file) = file {
            if let Some(ts) = &file.tile_size {
                cfg.tile = ts.parse().map_err(|e| BenchError::Usage(format!("config tile_size: {e}")))?;
            }
            if let Some(w) = file.workers {
                if w == 0 {
                    return Err(BenchError::Usage("config workers must be positive".into()));
                }
                cfg.workers = w;
            }
        }
        if let Some(n) = cli.nx {
            cfg.extents[0] = n;
        }
        if let Some(n) = cli.ny {
            cfg.extents[1] = n;
        }
        if let Some(n) = cli.nz {
            cfg.extents[2] = n;
        }
        if let Some(m) = cli.max_grid_size {
            cfg.max_grid_size = m;
        }
        if let Some(t) = cli.tile_size {
            cfg.tile = t;
        }
        let region = cli.region_size.unwrap_or(TileSize::from_array(DEFAULT_REGION).unwrap());
        match cli.layout {
            Some(LayoutKind::Regional) => cfg.layout = Layout::Regional(region),
            Some(LayoutKind::Contiguous) => cfg.layout = Layout::Contiguous,
            None if cli.region_size.is_some() => cfg.layout = Layout::Regional(region),
            None => {}
        }
        if let Some(w) = cli.threads {
            cfg.workers = w;
        }
        if let Some(s) = cli.steps {
            cfg.steps = s;
        }
        if let Some(k) = cli.kernel {
            cfg.kernel = k;
        }
        if let Some(t) = cli.threading {
            cfg.threading = t;
        }
        if let Some(p) = cli.periodic {
            cfg.periodic = p;
        }
        cfg.verify = cli.verify;
        cfg.csv = cli.csv.clone();
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if cfg.threading == Threading::Loop {
            cfg.tile = TileSetting::Off;
        }
        Ok(cfg)
    }
}

/// Parses command-line arguments (program name first) into a config.
pub fn parse_args<I, T>(argv: I) -> Result<(RunConfig, Cli), BenchError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => BenchError::Help(e.to_string()),
        _ => BenchError::Usage(e.to_string()),
    })?;
    let file = cli.config.as_deref().map(FileConfig::load).transpose()?;
    let cfg = RunConfig::resolve(&cli, file.as_ref())?;
    Ok((cfg, cli))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &str) -> Result<RunConfig, BenchError> {
        parse_args(std::iter::once("tilemesh-bench").chain(args.split_whitespace())).map(|(c, _)| c)
    }

    #[test]
    fn defaults_match_reference_setup() {
        let c = parse("").unwrap();
        assert_eq!(c.extents, [128; 3]);
        assert_eq!(c.steps, 1000);
        assert_eq!(c.kernel, Kernel::Heat);
        assert_eq!(c.threading, Threading::Tile);
        assert_eq!(c.periodic, [true; 3]);
        assert_eq!(c.layout, Layout::Contiguous);
    }

    #[test]
    fn reference_tiled_configuration() {
        let c = parse("--nx 128 --tile-size 128,4,4 --threads 12 --steps 1000").unwrap();
        assert_eq!(c.tile, TileSetting::Size(TileSize::new(128, 4, 4).unwrap()));
        assert_eq!(c.workers, 12);
        assert_eq!(c.reported_tile(), [128, 4, 4]);
    }

    #[test]
    fn loop_threading_turns_tiling_off() {
        let c = parse("--tile-size off --threading loop").unwrap();
        assert_eq!(c.tiling_mode(), TilingMode::Off);
        let c = parse("--tile-size 32,4,4 --threading loop").unwrap();
        assert_eq!(c.tile, TileSetting::Off);
        assert_eq!(c.reported_tile(), [0; 3]);
    }

    #[test]
    fn malformed_flags_are_usage_errors() {
        for bad in [
            "--tile-size 0,4,4",
            "--tile-size 4,4",
            "--threads 0",
            "--kernel fft",
            "--layout striped",
            "--periodic xw",
            "--bogus 1",
            "--steps many",
        ] {
            assert!(matches!(parse(bad), Err(BenchError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn regional_layout_and_periodicity() {
        let c = parse("--layout regional --region-size 32,32,64 --periodic xz").unwrap();
        assert_eq!(c.layout, Layout::Regional(TileSize::new(32, 32, 64).unwrap()));
        assert_eq!(c.periodic, [true, false, true]);
        let c = parse("--layout regional").unwrap();
        assert_eq!(c.layout, Layout::Regional(TileSize::from_array(DEFAULT_REGION).unwrap()));
        assert_eq!(parse("--periodic none").unwrap().periodic, [false; 3]);
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.toml");
        std::fs::write(&path, "tile_size = \"64,8,8\"\nworkers = 3\n").unwrap();
        let p = path.display();
        let c = parse(&format!("--config {p}")).unwrap();
        assert_eq!(c.tile, TileSetting::Size(TileSize::new(64, 8, 8).unwrap()));
        assert_eq!(c.workers, 3);
        let c = parse(&format!("--config {p} --threads 5 --tile-size off")).unwrap();
        assert_eq!((c.workers, c.tile), (5, TileSetting::Off));

        std::fs::write(&path, "colour = 1\n").unwrap();
        assert!(matches!(parse(&format!("--config {p}")), Err(BenchError::Usage(_))));
    }

    #[test]
    fn sweep_lists() {
        let (_, cli) = parse_args(["b", "--sweep-tiles", "off;128,4,4;128,8,8"]).unwrap();
        assert_eq!(cli.sweep_tiles.unwrap().len(), 3);
        let (_, cli) = parse_args(["b", "--sweep-threads", "1,2,4"]).unwrap();
        assert_eq!(cli.sweep_threads.unwrap(), vec![1, 2, 4]);
    }
}
