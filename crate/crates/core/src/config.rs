//! `key = value` configuration files.
//!
//! Unknown keys, duplicate keys and unparsable values are errors. The clock
//! and field are derived from the hyperfine constant and cycle counts unless
//! `f_GHz` / `B_mT` override them.

use std::collections::BTreeMap;
use std::path::Path;

use crate::device::{
    DeviceLayout, PhysicalParams, DEFAULT_CYCLES_PER_TA, DEFAULT_CYCLES_PER_TB, DEFAULT_DT_CYCLES,
    FREE_ELECTRON_G, P31_NUCLEAR_NEV_PER_MT, P_DONOR_HYPERFINE_NEV,
};
use crate::error::{Error, Result};

pub const KEYS: [&str; 11] = [
    "A_neV",
    "g_e_donor",
    "g_e_interface",
    "gn_muN_neV_per_mT",
    "cycles_per_TA",
    "cycles_per_TB",
    "dt_cycles",
    "f_GHz",
    "B_mT",
    "n_sites",
    "n_electrons",
];

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceConfig {
    pub params: PhysicalParams,
    pub n_sites: usize,
    pub n_electrons: usize,
    /// Raw values as given, after overrides.
    entries: BTreeMap<String, String>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self::from_entries(BTreeMap::new()).expect("defaults are valid")
    }
}

fn parse_line(raw: &str, line: usize) -> Result<Option<(String, String)>> {
    let text = raw.split('#').next().unwrap_or("").trim();
    if text.is_empty() {
        return Ok(None);
    }
    let (k, v) = text.split_once('=').ok_or_else(|| Error::Parse {
        line,
        msg: format!("expected key = value, got {text:?}"),
    })?;
    let (k, v) = (k.trim(), v.trim());
    if !KEYS.contains(&k) {
        return Err(Error::Parse {
            line,
            msg: format!("unknown key {k:?}"),
        });
    }
    if v.is_empty() {
        return Err(Error::Parse {
            line,
            msg: format!("empty value for {k}"),
        });
    }
    Ok(Some((k.to_string(), v.to_string())))
}

impl DeviceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            if let Some((k, v)) = parse_line(raw, idx + 1)? {
                if entries.insert(k.clone(), v).is_some() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        msg: format!("duplicate key {k}"),
                    });
                }
            }
        }
        Self::from_entries(entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies `key=value` overrides on top of this configuration.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut entries = self.entries.clone();
        for o in overrides {
            let bad = |msg: String| Error::InvalidArgument(format!("override {:?}: {msg}", o.as_ref()));
            let (k, v) = parse_line(o.as_ref(), 0)
                .map_err(|e| match e {
                    Error::Parse { msg, .. } => bad(msg),
                    other => other,
                })?
                .ok_or_else(|| bad("empty".into()))?;
            entries.insert(k, v);
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(entries: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            entries
                .get(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|_| Error::InvalidParams(format!("bad value {v:?} for {key}")))
                })
                .transpose()
        }
        let a = get(&entries, "A_neV")?.unwrap_or(P_DONOR_HYPERFINE_NEV);
        let g_donor = get(&entries, "g_e_donor")?.unwrap_or(FREE_ELECTRON_G);
        let g_interface = get(&entries, "g_e_interface")?.unwrap_or(g_donor);
        let gn = get(&entries, "gn_muN_neV_per_mT")?.unwrap_or(P31_NUCLEAR_NEV_PER_MT);
        let cta = get(&entries, "cycles_per_TA")?.unwrap_or(DEFAULT_CYCLES_PER_TA);
        let ctb = get(&entries, "cycles_per_TB")?.unwrap_or(DEFAULT_CYCLES_PER_TB);
        let dt = get(&entries, "dt_cycles")?.unwrap_or(DEFAULT_DT_CYCLES);

        let mut params = PhysicalParams::derive_clock(a, g_interface, gn, cta, ctb)?;
        params.g_e_donor = g_donor;
        params.g_e_interface = g_interface;
        params.dt_cycles = dt;
        if let Some(f) = get::<f64>(&entries, "f_GHz")? {
            params.clock_ghz = f;
            params.field_mt = PhysicalParams::resonant_field(f, g_interface, gn, ctb);
        }
        if let Some(b) = get::<f64>(&entries, "B_mT")? {
            params.field_mt = b;
        }
        params.validate()?;
        if params.cycles_per_ta % params.dt_cycles != 0 {
            return Err(Error::InvalidParams(format!(
                "dt_cycles {} does not divide cycles_per_TA {}",
                params.dt_cycles, params.cycles_per_ta
            )));
        }
        let n_sites = get(&entries, "n_sites")?.unwrap_or(3);
        let n_electrons = get(&entries, "n_electrons")?.unwrap_or(2);
        DeviceLayout::home(n_sites, n_electrons)?;
        Ok(Self {
            params,
            n_sites,
            n_electrons,
            entries,
        })
    }

    pub fn layout(&self) -> DeviceLayout {
        DeviceLayout::home(self.n_sites, self.n_electrons).expect("validated on construction")
    }

    /// Fully resolved values, one `key = value` per line, each prefixed
    /// with `prefix`.
    pub fn header(&self, prefix: &str) -> String {
        let p = &self.params;
        let lines = [
            format!("A_neV = {}", p.hyperfine_nev),
            format!("g_e_donor = {}", p.g_e_donor),
            format!("g_e_interface = {}", p.g_e_interface),
            format!("gn_muN_neV_per_mT = {}", p.gn_mun_nev_per_mt),
            format!("cycles_per_TA = {}", p.cycles_per_ta),
            format!("cycles_per_TB = {}", p.cycles_per_tb),
            format!("dt_cycles = {}", p.dt_cycles),
            format!("f_GHz = {}", p.clock_ghz),
            format!("B_mT = {}", p.field_mt),
            format!("n_sites = {}", self.n_sites),
            format!("n_electrons = {}", self.n_electrons),
        ];
        lines.iter().map(|l| format!("{prefix}{l}\n")).collect()
    }
}
