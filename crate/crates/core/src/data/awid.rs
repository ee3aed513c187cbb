//! AWID records.
//!
//! Each line holds the 154 attributes in [`ATTRIBUTES`] order followed by the
//! class label, comma separated, no header. `?` marks a missing value. Numeric
//! fields may be decimal or `0x` hexadecimal.

use std::path::Path;

use super::{parse_number, ColumnKind, ColumnValues, Encoding, FitOptions, RawColumn, RawRecords, MISSING};
use crate::error::{Error, Result};

pub const ATTRIBUTES: [&str; 154] = [
    "frame.interface_id",
    "frame.dlt",
    "frame.offset_shift",
    "frame.time_epoch",
    "frame.time_delta",
    "frame.time_delta_displayed",
    "frame.time_relative",
    "frame.len",
    "frame.cap_len",
    "frame.marked",
    "frame.ignored",
    "radiotap.version",
    "radiotap.pad",
    "radiotap.length",
    "radiotap.present.tsft",
    "radiotap.present.flags",
    "radiotap.present.rate",
    "radiotap.present.channel",
    "radiotap.present.fhss",
    "radiotap.present.dbm_antsignal",
    "radiotap.present.dbm_antnoise",
    "radiotap.present.lock_quality",
    "radiotap.present.tx_attenuation",
    "radiotap.present.db_tx_attenuation",
    "radiotap.present.dbm_tx_power",
    "radiotap.present.antenna",
    "radiotap.present.db_antsignal",
    "radiotap.present.db_antnoise",
    "radiotap.present.rxflags",
    "radiotap.present.xchannel",
    "radiotap.present.mcs",
    "radiotap.present.ampdu",
    "radiotap.present.vht",
    "radiotap.present.reserved",
    "radiotap.present.rtap_ns",
    "radiotap.present.vendor_ns",
    "radiotap.present.ext",
    "radiotap.mactime",
    "radiotap.flags.cfp",
    "radiotap.flags.preamble",
    "radiotap.flags.wep",
    "radiotap.flags.frag",
    "radiotap.flags.fcs",
    "radiotap.flags.datapad",
    "radiotap.flags.badfcs",
    "radiotap.flags.shortgi",
    "radiotap.datarate",
    "radiotap.channel.freq",
    "radiotap.channel.type.turbo",
    "radiotap.channel.type.cck",
    "radiotap.channel.type.ofdm",
    "radiotap.channel.type.2ghz",
    "radiotap.channel.type.5ghz",
    "radiotap.channel.type.passive",
    "radiotap.channel.type.dynamic",
    "radiotap.channel.type.gfsk",
    "radiotap.channel.type.gsm",
    "radiotap.channel.type.sturbo",
    "radiotap.channel.type.half",
    "radiotap.channel.type.quarter",
    "radiotap.dbm_antsignal",
    "radiotap.antenna",
    "radiotap.rxflags.badplcp",
    "wlan.fc.type_subtype",
    "wlan.fc.version",
    "wlan.fc.type",
    "wlan.fc.subtype",
    "wlan.fc.ds",
    "wlan.fc.frag",
    "wlan.fc.retry",
    "wlan.fc.pwrmgt",
    "wlan.fc.moredata",
    "wlan.fc.protected",
    "wlan.fc.order",
    "wlan.duration",
    "wlan.ra",
    "wlan.da",
    "wlan.ta",
    "wlan.sa",
    "wlan.bssid",
    "wlan.frag",
    "wlan.seq",
    "wlan.bar.type",
    "wlan.ba.control.ackpolicy",
    "wlan.ba.control.multitid",
    "wlan.ba.control.cbitmap",
    "wlan.bar.compressed.tidinfo",
    "wlan.ba.bm",
    "wlan.fcs_good",
    "wlan_mgt.fixed.capabilities.ess",
    "wlan_mgt.fixed.capabilities.ibss",
    "wlan_mgt.fixed.capabilities.cfpoll.ap",
    "wlan_mgt.fixed.capabilities.privacy",
    "wlan_mgt.fixed.capabilities.preamble",
    "wlan_mgt.fixed.capabilities.pbcc",
    "wlan_mgt.fixed.capabilities.agility",
    "wlan_mgt.fixed.capabilities.spec_man",
    "wlan_mgt.fixed.capabilities.short_slot_time",
    "wlan_mgt.fixed.capabilities.apsd",
    "wlan_mgt.fixed.capabilities.radio_measurement",
    "wlan_mgt.fixed.capabilities.dsss_ofdm",
    "wlan_mgt.fixed.capabilities.del_blk_ack",
    "wlan_mgt.fixed.capabilities.imm_blk_ack",
    "wlan_mgt.fixed.listen_ival",
    "wlan_mgt.fixed.current_ap",
    "wlan_mgt.fixed.status_code",
    "wlan_mgt.fixed.timestamp",
    "wlan_mgt.fixed.beacon",
    "wlan_mgt.fixed.aid",
    "wlan_mgt.fixed.reason_code",
    "wlan_mgt.fixed.auth.alg",
    "wlan_mgt.fixed.auth_seq",
    "wlan_mgt.fixed.category_code",
    "wlan_mgt.fixed.htact",
    "wlan_mgt.fixed.chanwidth",
    "wlan_mgt.fixed.fragment",
    "wlan_mgt.fixed.sequence",
    "wlan_mgt.tagged.all",
    "wlan_mgt.ssid",
    "wlan_mgt.ds.current_channel",
    "wlan_mgt.tim.dtim_count",
    "wlan_mgt.tim.dtim_period",
    "wlan_mgt.tim.bmapctl.multicast",
    "wlan_mgt.tim.bmapctl.offset",
    "wlan_mgt.country_info.environment",
    "wlan_mgt.rsn.version",
    "wlan_mgt.rsn.gcs.type",
    "wlan_mgt.rsn.pcs.count",
    "wlan_mgt.rsn.akms.count",
    "wlan_mgt.rsn.akms.type",
    "wlan_mgt.rsn.capabilities.preauth",
    "wlan_mgt.rsn.capabilities.no_pairwise",
    "wlan_mgt.rsn.capabilities.ptksa_replay_counter",
    "wlan_mgt.rsn.capabilities.gtksa_replay_counter",
    "wlan_mgt.rsn.capabilities.mfpr",
    "wlan_mgt.rsn.capabilities.mfpc",
    "wlan_mgt.rsn.capabilities.peerkey",
    "wlan_mgt.tcprep.trsmt_pow",
    "wlan_mgt.tcprep.link_mrg",
    "wlan.wep.iv",
    "wlan.wep.key",
    "wlan.wep.icv",
    "wlan.tkip.extiv",
    "wlan.ccmp.extiv",
    "wlan.qos.tid",
    "wlan.qos.priority",
    "wlan.qos.eosp",
    "wlan.qos.ack",
    "wlan.qos.amsdupresent",
    "wlan.qos.buf_state_indicated",
    "wlan.qos.bit4",
    "wlan.qos.txop_dur_req",
    "wlan.qos.buf_state_indicated.1",
    "data.len",
];

pub const CLASS_NAMES: [&str; 4] = ["normal", "flooding", "injection", "impersonation"];

pub const ORIGINAL_WIDTH: usize = 46;
pub const RESAMPLED_WIDTH: usize = 206;
pub const RESAMPLED_FIELDS: usize = 5;

/// Record count of AWID-CLS-R-Tst.
pub const TEST_RECORDS: usize = 575_643;
/// Per-class totals of AWID-CLS-R-Tst in [`CLASS_NAMES`] order.
pub const TEST_CLASS_TOTALS: [usize; 4] = [8_097, 20_079, 16_682, 530_772];

const BUNDLED_SELECTION: &str = include_str!("../../assets/awid_original46.txt");

/// Retained attributes and their kinds, in output order.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub columns: Vec<(String, ColumnKind)>,
}

impl Selection {
    /// The shipped 46-attribute selection.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SELECTION, "bundled selection").expect("bundled selection is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Lines of `<attribute> <kind>`; `#` starts a comment.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut columns: Vec<(String, ColumnKind)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let name = parts.next().expect("non-empty line");
            let kind = match parts.next() {
                Some("continuous") => ColumnKind::Continuous,
                Some("binary") => ColumnKind::Binary,
                Some("categorical") => ColumnKind::Categorical,
                other => return Err(err(format!("attribute {name}: unknown kind {other:?}"))),
            };
            if parts.next().is_some() {
                return Err(err(format!("attribute {name}: trailing fields")));
            }
            if !ATTRIBUTES.contains(&name) {
                return Err(err(format!("attribute {name} is not part of the AWID layout")));
            }
            if columns.iter().any(|(n, _)| n == name) {
                return Err(err(format!("attribute {name} listed twice")));
            }
            columns.push((name.to_string(), kind));
        }
        if columns.is_empty() {
            return Err(Error::Manifest(format!("{source}: no attributes selected")));
        }
        Ok(Selection { columns })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    /// Only the listed attributes, typed as given.
    Selected(Selection),
    /// All 154 attributes; numeric columns are continuous, the rest
    /// categorical.
    Raw155,
}

pub fn class_index(label: &str) -> Option<usize> {
    let l = label.trim().trim_end_matches('.');
    CLASS_NAMES.iter().position(|c| c.eq_ignore_ascii_case(l))
}

pub fn load_awid(path: &Path, layout: &Layout) -> Result<RawRecords> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_awid(std::io::BufReader::new(file), &path.display().to_string(), layout)
}

enum Cells {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

pub fn parse_awid(reader: impl std::io::Read, source: &str, layout: &Layout) -> Result<RawRecords> {
    let wanted: Vec<(usize, Option<ColumnKind>)> = match layout {
        Layout::Selected(sel) => sel
            .columns
            .iter()
            .map(|(name, kind)| {
                let idx = ATTRIBUTES.iter().position(|a| a == name).expect("validated at parse");
                (idx, Some(*kind))
            })
            .collect(),
        Layout::Raw155 => (0..ATTRIBUTES.len()).map(|i| (i, None)).collect(),
    };
    let mut cells: Vec<Cells> = wanted
        .iter()
        .map(|(_, k)| match k {
            Some(ColumnKind::Categorical) => Cells::Text(Vec::new()),
            _ => Cells::Numeric(Vec::new()),
        })
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
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
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != ATTRIBUTES.len() + 1 {
            return Err(err(format!(
                "expected {} fields, found {}",
                ATTRIBUTES.len() + 1,
                record.len()
            )));
        }
        for ((idx, kind), cell) in wanted.iter().zip(cells.iter_mut()) {
            let field = record[*idx].trim();
            match cell {
                Cells::Text(v) => v.push(field.to_string()),
                Cells::Numeric(v) => {
                    if field == MISSING || field.is_empty() {
                        v.push(f64::NAN);
                    } else if let Some(x) = parse_number(field) {
                        v.push(x);
                    } else if kind.is_none() {
                        // Raw layout: the first non-numeric token turns the
                        // column categorical.
                        let mut text: Vec<String> = v.iter().map(|x| num_token(*x)).collect();
                        text.push(field.to_string());
                        *cell = Cells::Text(text);
                    } else {
                        return Err(err(format!(
                            "attribute {}: cannot parse {field:?} as a number",
                            ATTRIBUTES[*idx]
                        )));
                    }
                }
            }
        }
        let label = &record[ATTRIBUTES.len()];
        let class = class_index(label).ok_or_else(|| err(Error::UnknownLabel(label.to_string()).to_string()))?;
        labels.push(class);
    }
    let columns = wanted
        .iter()
        .zip(cells)
        .map(|((idx, kind), cell)| {
            let name = ATTRIBUTES[*idx].to_string();
            match cell {
                Cells::Numeric(v) => RawColumn {
                    name,
                    kind: kind.unwrap_or(ColumnKind::Continuous),
                    values: ColumnValues::Numeric(v),
                },
                Cells::Text(v) => RawColumn {
                    name,
                    kind: ColumnKind::Categorical,
                    values: ColumnValues::Text(v),
                },
            }
        })
        .collect();
    Ok(RawRecords {
        columns,
        labels,
        class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
    })
}

fn num_token(x: f64) -> String {
    if x.is_nan() {
        MISSING.to_string()
    } else {
        x.to_string()
    }
}

/// Fit options; selected layouts carry the 46/206 width contract.
pub fn fit_options(encoding: Encoding, layout: &Layout) -> FitOptions {
    let mut opts = FitOptions::new("awid", encoding);
    if let Layout::Selected(_) = layout {
        opts.expected_width = Some(match encoding {
            Encoding::Original => ORIGINAL_WIDTH,
            Encoding::Resampled { .. } => RESAMPLED_WIDTH,
        });
    }
    opts
}
