use std::path::{Path, PathBuf};

use ndarray::{array, Array2};
use serde::Serialize;
use serde_json::json;
use snn_core::data::{ColumnSpec, Dataset, Encoding, FeatureSpec, DEFAULT_GAMMA, MANIFEST_SCHEMA_VERSION};
use snn_core::network::{read_checkpoint, write_checkpoint, Checkpoint, InitScheme};
use snn_core::training::{self, EpochRecord, RunConfig, Samples, TrainObserver};
use snn_core::{Network, NeuronModel, NeuronModelConfig};

use crate::{create_dir, sha256_hex, usage, DatasetName};

pub const RUN_MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(clap::Args)]
pub struct Args {
    /// Flat TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Encoded training container written by `preprocess`.
    #[arg(long, required_unless_present = "dataset")]
    input: Option<PathBuf>,
    /// Use a built-in dataset instead of `--input`.
    #[arg(long, value_enum, conflicts_with = "input")]
    dataset: Option<DatasetName>,
    /// Encoded validation container.
    #[arg(long, conflicts_with = "val_fraction")]
    val: Option<PathBuf>,
    /// Hold out this stratified fraction of the training data for validation.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Neuron model; needs an analytic gradient.
    #[arg(long, default_value = "nlif-exp")]
    model: NeuronModel,
    /// Start from this checkpoint instead of a fresh initialisation.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out/run")]
    out: PathBuf,
}

#[derive(Serialize)]
struct FinalMetrics {
    epochs: usize,
    steps: u64,
    loss: f64,
    train_acc: f64,
    val_acc: Option<f64>,
    full_train_acc: f64,
}

#[derive(Serialize)]
struct RunManifest {
    schema_version: u32,
    config_digest: String,
    dataset_digest: String,
    feature_manifest_digest: String,
    seed: u64,
    model: NeuronModel,
    sizes: Vec<usize>,
    started_at: String,
    finished_at: String,
    checkpoints: Vec<PathBuf>,
    final_metrics: FinalMetrics,
}

/// The four XOR patterns as a two-column binary dataset.
pub fn xor_dataset() -> Dataset {
    let bin = |name: &str| ColumnSpec::Binary {
        name: name.into(),
        median: 0.5,
    };
    Dataset {
        features: array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]],
        labels: vec![0, 1, 1, 0],
        manifest: FeatureSpec {
            schema_version: MANIFEST_SCHEMA_VERSION,
            dataset: "xor".into(),
            encoding: Encoding::Original,
            gamma: DEFAULT_GAMMA,
            columns: vec![bin("x1"), bin("x2")],
            class_names: vec!["0".into(), "1".into()],
            width: 2,
        },
    }
}

struct Observer<'a> {
    train: Samples<'a>,
    stop_at: f64,
    checkpoint_every: usize,
    out: &'a Path,
    manifest: &'a serde_json::Value,
    written: Vec<PathBuf>,
    stop: bool,
}

impl TrainObserver for Observer<'_> {
    fn on_epoch(&mut self, net: &Network, r: &EpochRecord) -> snn_core::Result<()> {
        let val = r.val_acc.map(|v| format!(" val_acc {v:.6}")).unwrap_or_default();
        println!("epoch {} loss {:.6} train_acc {:.6}{val}", r.epoch, r.loss, r.train_acc);
        if self.checkpoint_every > 0 && r.epoch % self.checkpoint_every == 0 {
            let path = self.out.join(format!("checkpoint-epoch-{:04}.ckpt", r.epoch));
            write_checkpoint(
                &path,
                &Checkpoint {
                    network: net.clone(),
                    manifest: self.manifest.clone(),
                },
            )?;
            self.written.push(path);
        }
        if self.stop_at > 0.0 && training::accuracy(net, self.train)? >= self.stop_at {
            self.stop = true;
        }
        Ok(())
    }

    fn should_stop(&self) -> bool {
        self.stop
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let started_at = now();
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    println!(
        "config: K={} lambda={} beta={} batch_size={} learning_rate={} epochs={} seed={} hidden={:?}",
        cfg.k, cfg.lambda, cfg.beta, cfg.batch_size, cfg.learning_rate, cfg.epochs, cfg.seed, cfg.hidden
    );
    let config_digest = sha256_hex(cfg.to_toml().as_bytes());

    let data = match (&args.input, args.dataset) {
        (Some(p), _) => Dataset::load(p)?,
        (None, Some(DatasetName::Xor)) => xor_dataset(),
        (None, Some(d)) => return Err(usage(format!("{d:?} has no built-in data; pass --input"))),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let (data, val) = match (&args.val, args.val_fraction) {
        (Some(p), _) => (data, Some(Dataset::load(p)?)),
        (None, Some(f)) => {
            let (a, b) = data.stratified_split(f, cfg.seed)?;
            (a, Some(b))
        }
        (None, None) => (data, None),
    };
    if let Some(v) = &val {
        if v.manifest.digest() != data.manifest.digest() {
            return Err(usage("validation data was encoded with a different manifest"));
        }
    }
    let n_classes = data.class_names().len();

    let cfg_neuron = NeuronModelConfig::default_for(args.model);
    if !args.model.is_rational() {
        return Err(usage(format!("{} has no analytic gradient and cannot be trained", args.model)));
    }
    let mut net = match &args.checkpoint {
        Some(p) => read_checkpoint(p)?.network,
        None => {
            let mut sizes = vec![data.width()];
            sizes.extend(&cfg.hidden);
            sizes.push(n_classes);
            Network::init(cfg_neuron, &sizes, cfg.seed, InitScheme::positive_mean(cfg.beta))?
        }
    };
    if net.input_width() != data.width() {
        return Err(snn_core::Error::WidthMismatch {
            expected: net.input_width(),
            actual: data.width(),
        }
        .into());
    }
    if net.output_width() != n_classes {
        return Err(usage(format!(
            "network has {} outputs but the data has {n_classes} classes",
            net.output_width()
        )));
    }
    println!("network: {:?} ({})", net.sizes(), net.cfg().variant());

    let dataset_bytes = data.to_bytes()?;
    let ckpt_manifest = json!({
        "dataset": data.manifest.dataset,
        "feature_manifest_digest": data.manifest.digest_hex(),
        "class_names": data.class_names(),
        "width": data.width(),
        "config_digest": config_digest,
    });

    let x = net.encode_batch(&data.features)?;
    let vx: Option<Array2<f64>> = val.as_ref().map(|v| net.encode_batch(&v.features)).transpose()?;
    let samples = Samples::new(&x, &data.labels)?;
    let val_samples = match (&vx, &val) {
        (Some(vx), Some(v)) => Some(Samples::new(vx, &v.labels)?),
        _ => None,
    };

    create_dir(&args.out)?;
    let mut observer = Observer {
        train: samples,
        stop_at: cfg.stop_at_accuracy,
        checkpoint_every: cfg.checkpoint_every,
        out: &args.out,
        manifest: &ckpt_manifest,
        written: Vec::new(),
        stop: false,
    };
    let history = training::train(&mut net, samples, val_samples, &cfg.train(), &cfg.loss(), &mut observer)?;
    let mut checkpoints = std::mem::take(&mut observer.written);

    let final_path = args.out.join("model.ckpt");
    write_checkpoint(
        &final_path,
        &Checkpoint {
            network: net.clone(),
            manifest: ckpt_manifest,
        },
    )?;
    checkpoints.push(final_path);
    history.save_csv(&args.out.join("history.csv"))?;

    let last = history.epochs.last().copied().expect("at least one epoch");
    let full_train_acc = training::accuracy(&net, samples)?;
    println!("final: steps {} train accuracy {full_train_acc:.6}", history.steps);
    let manifest = RunManifest {
        schema_version: RUN_MANIFEST_SCHEMA_VERSION,
        config_digest,
        dataset_digest: sha256_hex(&dataset_bytes),
        feature_manifest_digest: data.manifest.digest_hex(),
        seed: cfg.seed,
        model: net.cfg().variant(),
        sizes: net.sizes(),
        started_at,
        finished_at: now(),
        checkpoints,
        final_metrics: FinalMetrics {
            epochs: last.epoch,
            steps: history.steps,
            loss: last.loss,
            train_acc: last.train_acc,
            val_acc: last.val_acc,
            full_train_acc,
        },
    };
    let path = args.out.join("run_manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .map_err(|e| snn_core::Error::Io { path, source: e })?;
    Ok(())
}
