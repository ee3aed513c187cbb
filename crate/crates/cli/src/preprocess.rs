use std::path::{Path, PathBuf};

use snn_core::data::{self, awid, nslkdd, Dataset, Encoding, FeatureSpec, RawRecords};

use crate::{create_dir, data_file, usage, DatasetName, Variant};

pub const AWID_TRAIN_FILE: &str = "AWID-CLS-R-Trn";
pub const AWID_TEST_FILE: &str = "AWID-CLS-R-Tst";

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    dataset: DatasetName,
    #[arg(long, value_enum, default_value = "original")]
    variant: Variant,
    /// Training split; statistics are fitted on it. Defaults to the
    /// conventional file name under the data directory.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Test split encoded with the training manifest. Without `--input`, the
    /// conventional test file is used when present.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value = "out/data")]
    out: PathBuf,
    /// Receptive fields per continuous column; overrides the dataset default
    /// and lifts the width contract.
    #[arg(long)]
    fields: Option<usize>,
    /// AWID attribute selection file (`<attribute> <kind>` per line).
    #[arg(long, conflicts_with = "awid_raw")]
    selection: Option<PathBuf>,
    /// Keep all 154 AWID attributes.
    #[arg(long)]
    awid_raw: bool,
}

enum Source {
    Kdd,
    Awid(awid::Layout),
}

impl Source {
    fn load(&self, path: &Path) -> anyhow::Result<RawRecords> {
        Ok(match self {
            Source::Kdd => nslkdd::load_nslkdd(path)?,
            Source::Awid(layout) => awid::load_awid(path, layout)?,
        })
    }
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let (source, train_name, test_name) = match args.dataset {
        DatasetName::NslKdd => (
            Source::Kdd,
            nslkdd::Split::TrainPlus.file_name(),
            nslkdd::Split::TestPlus.file_name(),
        ),
        DatasetName::Awid => {
            let layout = if args.awid_raw {
                awid::Layout::Raw155
            } else if let Some(p) = &args.selection {
                awid::Layout::Selected(awid::Selection::load(p)?)
            } else {
                awid::Layout::Selected(awid::Selection::bundled())
            };
            (Source::Awid(layout), AWID_TRAIN_FILE, AWID_TEST_FILE)
        }
        DatasetName::Xor => return Err(usage("xor is built in and needs no preprocessing")),
    };
    let default_fields = match args.dataset {
        DatasetName::NslKdd => nslkdd::RESAMPLED_FIELDS,
        _ => awid::RESAMPLED_FIELDS,
    };
    let m = args.fields.unwrap_or(default_fields);
    let encoding = match args.variant {
        Variant::Original => Encoding::Original,
        Variant::Resampled => Encoding::Resampled { m },
    };
    let mut opts = match &source {
        Source::Kdd => nslkdd::fit_options(encoding),
        Source::Awid(layout) => awid::fit_options(encoding, layout),
    };
    if args.fields.is_some() {
        opts.expected_width = None;
    }

    let (input, test) = match args.input {
        Some(p) => (p, args.test),
        None => {
            let test = args.test.or_else(|| data_file(test_name).ok().filter(|p| p.exists()));
            (data_file(train_name)?, test)
        }
    };
    let train = source.load(&input)?;
    let spec = FeatureSpec::fit(&train, &opts)?;
    create_dir(&args.out)?;
    write_split("train", &train, &spec, &args.out)?;
    if let Some(test) = &test {
        let raw = source.load(test)?;
        write_split("test", &raw, &spec, &args.out)?;
    }
    println!("width: {}", spec.width);
    println!("manifest digest: {}", spec.digest_hex());
    Ok(())
}

fn write_split(name: &str, raw: &RawRecords, spec: &FeatureSpec, out: &Path) -> anyhow::Result<()> {
    let ds: Dataset = match spec.encoding {
        Encoding::Original => spec.encode(raw)?,
        Encoding::Resampled { m } => data::encode_resampled(raw, spec, m)?,
    };
    let path = out.join(format!("{name}.snnd"));
    ds.save(&path)?;
    let totals: Vec<String> = ds
        .class_names()
        .iter()
        .zip(ds.class_totals())
        .map(|(c, n)| format!("{c}={n}"))
        .collect();
    println!(
        "{name}: {} records, width {} -> {} ({})",
        ds.len(),
        ds.width(),
        path.display(),
        totals.join(" ")
    );
    Ok(())
}
