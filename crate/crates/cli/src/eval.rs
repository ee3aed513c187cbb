use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use snn_core::data::Dataset;
use snn_core::metrics;
use snn_core::network::read_checkpoint;

use crate::{create_dir, usage};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Encoded container to evaluate.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out/eval")]
    out: PathBuf,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| snn_core::Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(BufWriter::new(f))
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let ckpt = read_checkpoint(&args.checkpoint)?;
    let data = Dataset::load(&args.input)?;
    let net = &ckpt.network;
    if net.input_width() != data.width() {
        return Err(snn_core::Error::WidthMismatch {
            expected: net.input_width(),
            actual: data.width(),
        }
        .into());
    }
    if let Some(d) = ckpt.manifest.get("feature_manifest_digest").and_then(|v| v.as_str()) {
        if d != data.manifest.digest_hex() {
            return Err(usage(format!(
                "{} was encoded with manifest {} but the checkpoint expects {d}",
                args.input.display(),
                data.manifest.digest_hex()
            )));
        }
    }
    if net.output_width() != data.class_names().len() {
        return Err(usage(format!(
            "checkpoint has {} outputs but the data has {} classes",
            net.output_width(),
            data.class_names().len()
        )));
    }
    let preds = net.predict(&net.encode_batch(&data.features)?)?;
    let cm = metrics::confusion(&preds, &data.labels, data.class_names())?;
    let report = metrics::report(&cm)?;

    create_dir(&args.out)?;
    report.write_csv(create(&args.out.join("report.csv"))?)?;
    cm.write_counts_csv(create(&args.out.join("confusion_counts.csv"))?)?;
    cm.write_percent_csv(create(&args.out.join("confusion_percent.csv"))?)?;
    let text = report.to_text();
    let path = args.out.join("report.txt");
    std::fs::write(&path, &text).map_err(|e| snn_core::Error::Io { path, source: e })?;
    print!("{text}");
    Ok(())
}
