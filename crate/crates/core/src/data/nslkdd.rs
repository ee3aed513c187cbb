//! NSL-KDD records.
//!
//! Each line holds the 41 attributes in [`COLUMNS`] order, then the attack
//! label, then optionally a difficulty score, all comma separated and without
//! a header. The three symbolic attributes are `protocol_type`, `service`
//! and `flag`; the remaining 38 are numeric.

use std::collections::HashMap;
use std::path::Path;

use super::{ColumnKind, ColumnValues, Dataset, Encoding, FeatureSpec, FitOptions, RawColumn, RawRecords, MISSING};
use crate::error::{Error, Result};

pub const COLUMNS: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

pub const PROTOCOLS: [&str; 3] = ["icmp", "tcp", "udp"];

pub const SERVICES: [&str; 70] = [
    "IRC", "X11", "Z39_50", "aol", "auth", "bgp", "courier", "csnet_ns", "ctf", "daytime", "discard", "domain",
    "domain_u", "echo", "eco_i", "ecr_i", "efs", "exec", "finger", "ftp", "ftp_data", "gopher", "harvest",
    "hostnames", "http", "http_2784", "http_443", "http_8001", "imap4", "iso_tsap", "klogin", "kshell", "ldap",
    "link", "login", "mtp", "name", "netbios_dgm", "netbios_ns", "netbios_ssn", "netstat", "nnsp", "nntp",
    "ntp_u", "other", "pm_dump", "pop_2", "pop_3", "printer", "private", "red_i", "remote_job", "rje", "shell",
    "smtp", "sql_net", "ssh", "sunrpc", "supdup", "systat", "telnet", "tftp_u", "tim_i", "time", "urh_i",
    "urp_i", "uucp", "uucp_path", "vmnet", "whois",
];

pub const FLAGS: [&str; 11] = ["OTH", "REJ", "RSTO", "RSTOS0", "RSTR", "S0", "S1", "S2", "S3", "SF", "SH"];

pub const CLASS_NAMES: [&str; 5] = ["normal", "DoS", "Probe", "R2L", "U2R"];

/// Width of the one-hot plus min-max encoding.
pub const ORIGINAL_WIDTH: usize = 122;
/// Width of the receptive-field encoding.
pub const RESAMPLED_WIDTH: usize = 312;
/// Receptive fields per continuous column giving [`RESAMPLED_WIDTH`].
pub const RESAMPLED_FIELDS: usize = 6;

const CATEGORICAL: [usize; 3] = [1, 2, 3];

const DOS: [&str; 11] = [
    "back", "land", "neptune", "pod", "smurf", "teardrop", "apache2", "udpstorm", "processtable", "mailbomb", "worm",
];
const PROBE: [&str; 6] = ["satan", "ipsweep", "nmap", "portsweep", "mscan", "saint"];
const R2L: [&str; 15] = [
    "guess_passwd",
    "ftp_write",
    "imap",
    "phf",
    "multihop",
    "warezmaster",
    "warezclient",
    "spy",
    "xlock",
    "xsnoop",
    "snmpguess",
    "snmpgetattack",
    "httptunnel",
    "sendmail",
    "named",
];
const U2R: [&str; 7] = ["buffer_overflow", "loadmodule", "rootkit", "perl", "sqlattack", "xterm", "ps"];

/// Class index of an attack label, or `None` for an unknown name.
pub fn attack_category(label: &str) -> Option<usize> {
    let l = label.trim().trim_end_matches('.');
    if l == "normal" {
        return Some(0);
    }
    [&DOS[..], &PROBE[..], &R2L[..], &U2R[..]]
        .iter()
        .position(|group| group.contains(&l))
        .map(|g| g + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    TrainPlus,
    TestPlus,
    Test21,
}

impl Split {
    /// Conventional file name of the split.
    pub fn file_name(self) -> &'static str {
        match self {
            Split::TrainPlus => "KDDTrain+.txt",
            Split::TestPlus => "KDDTest+.txt",
            Split::Test21 => "KDDTest-21.txt",
        }
    }

    /// Record count of the published split.
    pub fn expected_records(self) -> usize {
        match self {
            Split::TrainPlus => 125_973,
            Split::TestPlus => 22_544,
            Split::Test21 => 11_850,
        }
    }
}

/// Parses an NSL-KDD file. Rows must have 42 or 43 fields.
pub fn load_nslkdd(path: &Path) -> Result<RawRecords> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_nslkdd(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn parse_nslkdd(reader: impl std::io::Read, source: &str) -> Result<RawRecords> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); COLUMNS.len()];
    let mut text: Vec<Vec<String>> = vec![Vec::new(); COLUMNS.len()];
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() as usize;
        let err = |message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(err(e.to_string())),
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 42 && record.len() != 43 {
            return Err(err(format!("expected 42 or 43 fields, found {}", record.len())));
        }
        for (c, field) in record.iter().take(COLUMNS.len()).enumerate() {
            if CATEGORICAL.contains(&c) {
                text[c].push(if field.is_empty() { MISSING.to_string() } else { field.to_string() });
            } else if field == MISSING {
                numeric[c].push(f64::NAN);
            } else {
                let v = super::parse_number(field)
                    .ok_or_else(|| err(format!("column {}: cannot parse {field:?} as a number", COLUMNS[c])))?;
                numeric[c].push(v);
            }
        }
        let label = &record[41];
        let class = attack_category(label).ok_or_else(|| err(Error::UnknownLabel(label.to_string()).to_string()))?;
        labels.push(class);
    }
    let columns = COLUMNS
        .iter()
        .enumerate()
        .map(|(c, &name)| {
            if CATEGORICAL.contains(&c) {
                RawColumn {
                    name: name.to_string(),
                    kind: ColumnKind::Categorical,
                    values: ColumnValues::Text(std::mem::take(&mut text[c])),
                }
            } else {
                RawColumn {
                    name: name.to_string(),
                    kind: ColumnKind::Continuous,
                    values: ColumnValues::Numeric(std::mem::take(&mut numeric[c])),
                }
            }
        })
        .collect();
    Ok(RawRecords {
        columns,
        labels,
        class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
    })
}

/// Fit options with the bundled symbolic vocabularies and the width contract
/// of each encoding.
pub fn fit_options(encoding: Encoding) -> FitOptions {
    let mut opts = FitOptions::new("nsl-kdd", encoding);
    let vocab = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    opts.vocabularies = HashMap::from([
        ("protocol_type".to_string(), vocab(&PROTOCOLS)),
        ("service".to_string(), vocab(&SERVICES)),
        ("flag".to_string(), vocab(&FLAGS)),
    ]);
    opts.expected_width = Some(match encoding {
        Encoding::Original => ORIGINAL_WIDTH,
        Encoding::Resampled { .. } => RESAMPLED_WIDTH,
    });
    opts
}

pub(crate) fn check_width(spec: &FeatureSpec, expected: usize) -> Result<()> {
    if spec.width != expected {
        return Err(Error::WidthMismatch {
            expected,
            actual: spec.width,
        });
    }
    Ok(())
}

/// One-hot symbolic columns plus min-max scaled numeric columns, 122 wide.
pub fn encode_original_kdd(records: &RawRecords, spec: &FeatureSpec) -> Result<Dataset> {
    if spec.encoding != Encoding::Original {
        return Err(Error::Manifest(format!("expected an original-encoding manifest, got {:?}", spec.encoding)));
    }
    check_width(spec, ORIGINAL_WIDTH)?;
    spec.encode(records)
}
