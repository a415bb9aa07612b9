use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use growcut_core::growcut::{AutoOr, Neighborhood};
use growcut_core::metrics::MetricsError;
use growcut_core::morphology::{apply_ops, parse_ops};
use growcut_core::phantom::{canonical_seeds, generate, PhantomError, PhantomSpec};
use growcut_core::volumetry::{read_manifest, ReportError};
use growcut_core::{
    build_report, dice, growcut_run, hausdorff, macdonald_product, mask_volume_mm3, read_labels,
    read_scalar, slice_span, write_nrrd, Axis, GrowCutConfig, GrowCutError, LabelVolume,
    MorphologyError, NrrdError, StructuringElement,
};
use serde_json::json;
use thiserror::Error;

/// Exit 1: input or output could not be read or written.
/// Exit 2: inputs were read but are invalid for the request.
#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }
}

fn nrrd_err(path: &Path) -> impl FnOnce(NrrdError) -> CliError + '_ {
    move |e| {
        let msg = format!("{}: {e}", path.display());
        if e.is_io() {
            CliError::Io(msg)
        } else {
            CliError::Invalid(msg)
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}
invalid_from!(GrowCutError, MorphologyError, MetricsError, PhantomError);

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "growcut",
    version,
    about = "GrowCut 3D segmentation and volumetry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a volume from seed labels and write the label volume.
    Segment {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// 6 or 26.
        #[arg(long, default_value = "26")]
        connectivity: u8,
        #[arg(long, default_value = "auto")]
        max_iters: AutoOr,
        /// Process the whole volume instead of the seed bounding box.
        #[arg(long)]
        no_roi: bool,
        /// Per-side ROI margin as a fraction of the seed extent.
        #[arg(long, default_value_t = 0.05)]
        roi_margin: f64,
        #[arg(long, default_value = "auto")]
        threads: AutoOr,
    },
    /// Apply morphology ops left to right to a mask.
    Morph {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma list of dilate, erode, keep-largest, min-size=N.
        #[arg(long)]
        ops: String,
        #[arg(long, default_value = "6")]
        connectivity: u8,
        /// Label treated as foreground.
        #[arg(long, default_value = "1")]
        label: u8,
    },
    /// Dice, Hausdorff and volumes of mask A against reference R.
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "1")]
        label: u8,
    },
    /// Volume and slice span of a mask.
    Volume {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value = "z")]
        axis: Axis,
        #[arg(long, default_value = "1")]
        label: u8,
        /// Also report the bidimensional product on the best slice.
        #[arg(long)]
        macdonald: bool,
    },
    /// Comparative report over manual/tool mask pairs.
    Report {
        /// CSV manifest: case_id,manual_path,tool_path,manual_time_s,tool_time_s.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value = "z")]
        axis: Axis,
        /// CSV output path; standard output when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a sphere phantom with its exact truth mask.
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write canonical seeds: a center ball labeled 1, cube faces labeled 2.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        seed_radius: f64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 20.0)]
        radius: f64,
        #[arg(long, default_value_t = 100.0)]
        inside: f32,
        #[arg(long, default_value_t = 0.0)]
        outside: f32,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(v).expect("serializable"));
}

fn load_mask(path: &Path, label: u8) -> Result<LabelVolume, CliError> {
    let vol = read_labels(path).map_err(nrrd_err(path))?;
    Ok(vol.mask_of(label))
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Segment {
            volume,
            seeds,
            out,
            connectivity,
            max_iters,
            no_roi,
            roi_margin,
            threads,
        } => {
            let config = GrowCutConfig {
                connectivity: Neighborhood::try_from(connectivity).map_err(CliError::Invalid)?,
                max_iters,
                roi_margin_fraction: roi_margin,
                use_roi: !no_roi,
                worker_count: threads,
            };
            let image = read_scalar(&volume).map_err(nrrd_err(&volume))?;
            let seed_vol = read_labels(&seeds).map_err(nrrd_err(&seeds))?;
            let res = growcut_run(&image, &seed_vol, &config)?;
            write_nrrd(&res.labels, &out).map_err(nrrd_err(&out))?;
            print_json(&res.summary());
        }
        Command::Morph {
            input,
            out,
            ops,
            connectivity,
            label,
        } => {
            let ops = parse_ops(&ops)?;
            let se = StructuringElement::new(connectivity)?;
            let mask = load_mask(&input, label)?;
            let res = apply_ops(&mask, &ops, se)?;
            write_nrrd(&res, &out).map_err(nrrd_err(&out))?;
            print_json(&json!({
                "ops": ops.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "voxels_before": mask.count_nonzero(),
                "voxels_after": res.count_nonzero(),
                "volume_mm3": mask_volume_mm3(&res),
            }));
        }
        Command::Metrics { a, b, label } => {
            let ma = load_mask(&a, label)?;
            let mb = load_mask(&b, label)?;
            let dsc = dice(&ma, &mb)?;
            let hd = hausdorff(&ma, &mb)?;
            let (va, vb) = (mask_volume_mm3(&ma), mask_volume_mm3(&mb));
            print_json(&json!({
                "dsc": dsc,
                "hd_mm": hd,
                "vol_a_mm3": va,
                "vol_r_mm3": vb,
                "ratio": if vb > 0.0 { Some(va / vb) } else { None },
            }));
        }
        Command::Volume {
            mask,
            axis,
            label,
            macdonald,
        } => {
            let m = load_mask(&mask, label)?;
            let mut v = json!({
                "volume_mm3": mask_volume_mm3(&m),
                "voxels": m.count_nonzero(),
                "slice_span": slice_span(&m, axis),
            });
            if macdonald {
                v["macdonald"] =
                    serde_json::to_value(macdonald_product(&m, axis)?).expect("serializable");
            }
            print_json(&v);
        }
        Command::Report {
            pairs,
            axis,
            csv,
            json,
        } => {
            let f = File::open(&pairs).map_err(io_err(&pairs))?;
            let base = pairs.parent().unwrap_or(Path::new("."));
            let cases = read_manifest(f, base)?;
            let report = build_report(&cases, axis);
            match csv {
                Some(p) => {
                    let f = File::create(&p).map_err(io_err(&p))?;
                    report.write_csv(BufWriter::new(f))?;
                }
                None => report.write_csv(io::stdout().lock())?,
            }
            if let Some(p) = json {
                let mut f = File::create(&p).map_err(io_err(&p))?;
                serde_json::to_writer(&mut f, &report).expect("serializable");
                f.write_all(b"\n").map_err(io_err(&p))?;
            }
        }
        Command::Phantom {
            out,
            truth,
            seeds,
            seed_radius,
            size,
            radius,
            inside,
            outside,
            noise_sigma,
            seed,
        } => {
            let spec = PhantomSpec {
                size,
                radius,
                inside,
                outside,
                noise_sigma,
                seed,
            };
            let p = generate(&spec)?;
            write_nrrd(&p.image, &out).map_err(nrrd_err(&out))?;
            write_nrrd(&p.truth, &truth).map_err(nrrd_err(&truth))?;
            let mut v = json!({
                "truth_voxels": p.truth.count_nonzero(),
                "truth_volume_mm3": mask_volume_mm3(&p.truth),
            });
            if let Some(path) = seeds {
                let s = canonical_seeds(&spec, seed_radius)?;
                write_nrrd(&s, &path).map_err(nrrd_err(&path))?;
                v["fg_seed_voxels"] = s.count_label(1).into();
                v["bg_seed_voxels"] = s.count_label(2).into();
            }
            print_json(&v);
        }
        Command::Serve {
            port,
            host,
            data_dir,
        } => {
            growcut_service::serve_blocking(SocketAddr::new(host, port), data_dir)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
