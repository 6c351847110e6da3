use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use flowseg::datasets::{generate_synthetic, scene_benchmark, ClassMap};
use flowseg::estimate::{estimate_flow, PyramidParams};
use flowseg::flow::{encode, EncodingKind, NormStrategy};
use flowseg::harness::{
    evaluate, parse_config, parse_scene_config, render_report_panels, run_comparison, train, SceneConfig, TrainConfig,
    CONFIG_KEYS,
};
use flowseg::io::{read_flo, write_flo, write_mask};
use flowseg::metrics::TableFormat;
use flowseg::nn::{load_checkpoint, predict};
use image::{GrayImage, RgbImage};

#[derive(Parser)]
#[command(name = "flowseg", version, about = "Flow-augmented semantic segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model from a config file.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the held-out split of the configured dataset.
    Eval {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Train and evaluate every `*.toml` config in a directory on shared data.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Render a `.flo` file as an encoding image.
    EncodeFlow {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "color_wheel")]
        kind: EncodingKind,
        /// Fixed magnitude cap in pixels; default is the frame maximum.
        #[arg(long)]
        cap: Option<f32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate dense flow from `prev` to `next`.
    EstimateFlow {
        #[arg(long)]
        prev: PathBuf,
        #[arg(long)]
        next: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Write a synthetic scene or benchmark as a `<seq>/{rgb,flow,seg}` tree.
    SynthGen {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render qualitative panels comparing checkpoints on held-out frames.
    Report {
        #[arg(short, long)]
        config: PathBuf,
        /// One checkpoint per variant; repeat the flag.
        #[arg(long, required = true)]
        ckpt: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of frames to render.
        #[arg(long, default_value_t = 8)]
        frames: usize,
    },
    /// List every config key.
    Keys,
}

fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(config: &Path, resume: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let outcome = train(&cfg, resume)?;
    print!("{}", outcome.log_csv());
    for ck in &outcome.checkpoints {
        println!("checkpoint {}", ck.display());
    }
    Ok(())
}

fn cmd_eval(config: &Path, ckpt: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let ev = evaluate(ckpt, &cfg)?;
    println!("{}\n{}\n{}", ev.markdown, ev.summary, ev.iou_by_class);
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        write_text(&dir.join("eval.csv"), &ev.csv)?;
        write_text(&dir.join("eval.md"), &format!("{}\n{}\n{}", ev.markdown, ev.summary, ev.iou_by_class))?;
    }
    Ok(())
}

fn cmd_compare(dir: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "toml"));
    paths.sort();
    if paths.is_empty() {
        bail!("no *.toml configs in {}", dir.display());
    }
    let configs = paths.iter().map(|p| load_config(p)).collect::<Result<Vec<_>>>()?;
    let cmp = run_comparison(&configs)?;
    let summary = cmp.summary(TableFormat::Markdown);
    let by_class = cmp.iou_by_class();
    println!("{summary}\n{by_class}");
    if let Some(out) = &configs[0].output_dir {
        fs::create_dir_all(out)?;
        write_text(&out.join("comparison.md"), &format!("{summary}\n{by_class}"))?;
        write_text(&out.join("comparison.csv"), &cmp.summary(TableFormat::Csv))?;
    }
    Ok(())
}

fn cmd_encode_flow(input: &Path, kind: EncodingKind, cap: Option<f32>, out: &Path) -> Result<()> {
    let flow = read_flo(input)?;
    let norm = cap.map_or(NormStrategy::PerFrameMax, NormStrategy::FixedCap);
    let enc = encode(&flow, kind, norm)?;
    let (w, h) = (enc.width() as u32, enc.height() as u32);
    let byte = |x: f32| x.round().clamp(0.0, 255.0) as u8;
    let plane = |c: usize| enc.channel(c).iter().map(|&x| byte(x)).collect::<Vec<u8>>();
    match enc.channels() {
        1 => GrayImage::from_raw(w, h, plane(0)).unwrap().save(out)?,
        channels => {
            // two-channel encodings fill red and green and leave blue empty
            let planes: Vec<Vec<u8>> = (0..channels).map(plane).collect();
            let data =
                (0..(w * h) as usize).flat_map(|i| [0, 1, 2].map(|c| planes.get(c).map_or(0, |p| p[i]))).collect();
            RgbImage::from_raw(w, h, data).unwrap().save(out)?
        }
    }
    Ok(())
}

fn cmd_estimate_flow(prev: &Path, next: &Path, out: &Path, levels: Option<usize>, window: Option<usize>) -> Result<()> {
    let open = |p: &Path| image::open(p).with_context(|| format!("reading {}", p.display())).map(|i| i.to_luma8());
    let defaults = PyramidParams::default();
    let params = PyramidParams {
        levels: levels.unwrap_or(defaults.levels),
        window: window.unwrap_or(defaults.window),
        ..defaults
    };
    let flow = estimate_flow(&open(prev)?, &open(next)?, &params)?;
    write_flo(&flow, out)?;
    Ok(())
}

fn cmd_synth_gen(config: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let samples = match parse_scene_config(&text)? {
        SceneConfig::Scene { spec, seed } => generate_synthetic(&spec, seed)?,
        SceneConfig::Benchmark(cfg) => scene_benchmark(&cfg)?,
    };
    let class_map = ClassMap::synthetic();
    for s in &samples {
        let stem = s.frame_id.rsplit('/').next().unwrap_or(&s.frame_id);
        let seq = out.join(&s.sequence_id);
        for sub in ["rgb", "flow", "seg"] {
            fs::create_dir_all(seq.join(sub))?;
        }
        s.rgb.save(seq.join("rgb").join(format!("{stem}.png")))?;
        if let Some(flow) = &s.flow {
            write_flo(flow, seq.join("flow").join(format!("{stem}.flo")))?;
        }
        write_mask(&s.mask, &class_map, seq.join("seg").join(format!("{stem}.png")))?;
    }
    println!("wrote {} frames to {}", samples.len(), out.display());
    Ok(())
}

fn cmd_report(config: &Path, ckpts: &[PathBuf], out: &Path, frames: usize) -> Result<()> {
    let cfg = load_config(config)?;
    let data = cfg.dataset.load()?;
    let samples = &data.test[..frames.min(data.test.len())];
    let mut predictions = Vec::new();
    for path in ckpts {
        let mut model = load_checkpoint::<f32>(path, None)?.model;
        if model.spec.num_classes != data.class_map.len() {
            bail!("{} has {} classes, dataset has {}", path.display(), model.spec.num_classes, data.class_map.len());
        }
        let masks = samples.iter().map(|s| predict(&mut model, s)).collect::<Result<Vec<_>, _>>()?;
        predictions.push((model.spec.variant.to_string(), masks));
    }
    let index = render_report_panels(samples, &predictions, &data.class_map, out)?;
    println!("{} panels, index at {}", index.panels.len(), index.index.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { config, resume } => cmd_train(&config, resume.as_deref()),
        Command::Eval { config, ckpt } => cmd_eval(&config, &ckpt),
        Command::Compare { config } => cmd_compare(&config),
        Command::EncodeFlow { input, kind, cap, out } => cmd_encode_flow(&input, kind, cap, &out),
        Command::EstimateFlow { prev, next, out, levels, window } => {
            cmd_estimate_flow(&prev, &next, &out, levels, window)
        }
        Command::SynthGen { config, out } => cmd_synth_gen(&config, &out),
        Command::Report { config, ckpt, out, frames } => cmd_report(&config, &ckpt, &out, frames),
        Command::Keys => {
            for (key, doc) in CONFIG_KEYS {
                println!("{key:32} {doc}");
            }
            Ok(())
        }
    }
}
