//! Heart-rate-variability features of an inter-beat-interval series: fifteen
//! time-domain statistics, LF/HF band powers and the Poincaré dispersions.

mod spectral;
mod time;

pub use spectral::{spectral_features, welch_psd, SpectralFeatures, HF_BAND_HZ, LF_BAND_HZ, MIN_SPECTRAL_SPAN_S};
pub use time::{poincare_features, time_features, PoincareFeatures, TimeFeatures};

use serde::{Deserialize, Serialize};

use crate::signals::IBISeries;
use crate::Result;

pub const N_FEATURES: usize = 20;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean_nn_ms",
    "sdnn_ms",
    "sdsd_ms",
    "pnn50_pct",
    "pnn20_pct",
    "nn50_count",
    "nn20_count",
    "rmssd_ms",
    "median_nn_ms",
    "range_nn_ms",
    "cvsd",
    "cvnni",
    "max_hr_bpm",
    "min_hr_bpm",
    "std_hr_bpm",
    "lf_power",
    "hf_power",
    "lf_hf_ratio",
    "sd1_ms",
    "sd2_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HRVVector {
    pub mean_nn_ms: f64,
    pub sdnn_ms: f64,
    pub sdsd_ms: f64,
    pub pnn50_pct: f64,
    pub pnn20_pct: f64,
    pub nn50_count: u32,
    pub nn20_count: u32,
    pub rmssd_ms: f64,
    pub median_nn_ms: f64,
    pub range_nn_ms: f64,
    pub cvsd: f64,
    pub cvnni: f64,
    pub max_hr_bpm: f64,
    pub min_hr_bpm: f64,
    pub std_hr_bpm: f64,
    pub lf_power: f64,
    pub hf_power: f64,
    /// 0 when `hf_power` is 0; see [`SpectralFeatures::ratio_defined`].
    pub lf_hf_ratio: f64,
    pub sd1_ms: f64,
    pub sd2_ms: f64,
    pub label: String,
    pub subject_id: u64,
}

impl HRVVector {
    pub fn features(&self) -> [f64; N_FEATURES] {
        [
            self.mean_nn_ms,
            self.sdnn_ms,
            self.sdsd_ms,
            self.pnn50_pct,
            self.pnn20_pct,
            self.nn50_count as f64,
            self.nn20_count as f64,
            self.rmssd_ms,
            self.median_nn_ms,
            self.range_nn_ms,
            self.cvsd,
            self.cvnni,
            self.max_hr_bpm,
            self.min_hr_bpm,
            self.std_hr_bpm,
            self.lf_power,
            self.hf_power,
            self.lf_hf_ratio,
            self.sd1_ms,
            self.sd2_ms,
        ]
    }

    pub fn from_features(f: &[f64; N_FEATURES], label: &str, subject_id: u64) -> Self {
        Self {
            mean_nn_ms: f[0],
            sdnn_ms: f[1],
            sdsd_ms: f[2],
            pnn50_pct: f[3],
            pnn20_pct: f[4],
            nn50_count: f[5].round() as u32,
            nn20_count: f[6].round() as u32,
            rmssd_ms: f[7],
            median_nn_ms: f[8],
            range_nn_ms: f[9],
            cvsd: f[10],
            cvnni: f[11],
            max_hr_bpm: f[12],
            min_hr_bpm: f[13],
            std_hr_bpm: f[14],
            lf_power: f[15],
            hf_power: f[16],
            lf_hf_ratio: f[17],
            sd1_ms: f[18],
            sd2_ms: f[19],
            label: label.to_string(),
            subject_id,
        }
    }
}

/// All 20 features for one clip.
pub fn extract(ibi: &IBISeries, label: &str, subject_id: u64) -> Result<HRVVector> {
    let t = time_features(ibi)?;
    let s = spectral_features(ibi)?;
    let p = poincare_features(ibi)?;
    Ok(HRVVector {
        mean_nn_ms: t.mean_nn_ms,
        sdnn_ms: t.sdnn_ms,
        sdsd_ms: t.sdsd_ms,
        pnn50_pct: t.pnn50_pct,
        pnn20_pct: t.pnn20_pct,
        nn50_count: t.nn50_count,
        nn20_count: t.nn20_count,
        rmssd_ms: t.rmssd_ms,
        median_nn_ms: t.median_nn_ms,
        range_nn_ms: t.range_nn_ms,
        cvsd: t.cvsd,
        cvnni: t.cvnni,
        max_hr_bpm: t.max_hr_bpm,
        min_hr_bpm: t.min_hr_bpm,
        std_hr_bpm: t.std_hr_bpm,
        lf_power: s.lf_power,
        hf_power: s.hf_power,
        lf_hf_ratio: if s.ratio_defined { s.lf_hf_ratio } else { 0.0 },
        sd1_ms: p.sd1_ms,
        sd2_ms: p.sd2_ms,
        label: label.to_string(),
        subject_id,
    })
}

pub mod table {
    //! Feature table CSV: 20 feature columns, then `subject_id` and `label`.

    use std::io::{Read, Write};

    use super::{HRVVector, FEATURE_NAMES, N_FEATURES};
    use crate::{Error, Result};

    pub fn write_csv<W: Write>(rows: &[HRVVector], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
        header.extend(["subject_id", "label"]);
        w.write_record(&header)?;
        for r in rows {
            let mut rec: Vec<String> = r.features().iter().map(|v| v.to_string()).collect();
            rec.push(r.subject_id.to_string());
            rec.push(r.label.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<HRVVector>> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidSeries(format!("feature table lacks column '{name}'")))
        };
        let feature_cols: Vec<usize> = FEATURE_NAMES.iter().map(|n| col(n)).collect::<Result<_>>()?;
        let (sid, lab) = (col("subject_id")?, col("label")?);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut f = [0.0; N_FEATURES];
            for (k, &c) in feature_cols.iter().enumerate() {
                f[k] = rec[c]
                    .parse()
                    .map_err(|_| Error::InvalidSeries(format!("bad number '{}'", &rec[c])))?;
            }
            let subject: u64 = rec[sid]
                .parse()
                .map_err(|_| Error::InvalidSeries(format!("bad subject id '{}'", &rec[sid])))?;
            rows.push(HRVVector::from_features(&f, &rec[lab], subject));
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_has_twenty_features_and_round_trips() {
        let ibi = IBISeries::from_intervals(
            (0..20).map(|i| 800.0 + 40.0 * ((i as f64) * 0.9).sin()).collect(),
        )
        .unwrap();
        let v = extract(&ibi, "sr", 2003).unwrap();
        assert_eq!(v.features().len(), N_FEATURES);
        assert_eq!(v, extract(&ibi, "sr", 2003).unwrap());
        let mut buf = Vec::new();
        table::write_csv(std::slice::from_ref(&v), &mut buf).unwrap();
        let back = table::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![v]);
    }
}
