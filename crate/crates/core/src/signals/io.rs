//! Series CSV (`t_s,value`) and the JSON clip container.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MultiSeries, PeakTrain, SampledSeries};
use crate::{Error, Result};

/// On-disk clip: `{rate_hz, t0_s, values[], peaks[]?, label?, subject_id?}`.
///
/// Multichannel clips keep the channel mean in `values` and the individual
/// channels in `channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipFile {
    pub rate_hz: f64,
    pub t0_s: f64,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peaks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

impl ClipFile {
    pub fn from_series(series: &SampledSeries) -> Self {
        Self {
            rate_hz: series.rate_hz(),
            t0_s: series.t0_s(),
            values: series.values().to_vec(),
            peaks: None,
            label: None,
            subject_id: None,
            channels: None,
            clip_id: None,
            snr_db: None,
        }
    }

    pub fn series(&self) -> Result<SampledSeries> {
        SampledSeries::new(self.values.clone(), self.rate_hz, self.t0_s)
    }

    /// The channel list, or the single `values` channel when absent.
    pub fn channel_series(&self) -> Result<Vec<SampledSeries>> {
        match &self.channels {
            Some(chs) => chs
                .iter()
                .map(|c| SampledSeries::new(c.clone(), self.rate_hz, self.t0_s))
                .collect(),
            None => Ok(vec![self.series()?]),
        }
    }

    pub fn multi_series(&self) -> Result<MultiSeries> {
        match &self.channels {
            Some(chs) => MultiSeries::new(chs.clone(), self.rate_hz),
            None => MultiSeries::new(vec![self.values.clone()], self.rate_hz),
        }
    }

    pub fn peak_train(&self) -> Result<Option<PeakTrain>> {
        self.peaks
            .as_ref()
            .map(|p| PeakTrain::new(p.clone(), self.rate_hz, self.values.len()))
            .transpose()
    }

    pub fn validate(&self) -> Result<()> {
        self.series()?;
        if let Some(chs) = &self.channels {
            if chs.iter().any(|c| c.len() != self.values.len()) {
                return Err(Error::Shape("channel length differs from values length".into()));
            }
        }
        self.peak_train()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let clip: ClipFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        clip.validate()?;
        Ok(clip)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t_s: f64,
    value: f64,
}

pub fn write_series_csv<W: Write>(series: &SampledSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, &value) in series.values().iter().enumerate() {
        w.serialize(Row { t_s: series.t0_s() + i as f64 / series.rate_hz(), value })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `t_s,value` rows; the rate is taken from the mean sample spacing.
pub fn read_series_csv<R: Read>(input: R) -> Result<SampledSeries> {
    let mut r = csv::Reader::from_reader(input);
    let rows: Vec<Row> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.len() < 2 {
        return Err(Error::InvalidSeries("CSV series needs at least 2 rows".into()));
    }
    let span = rows[rows.len() - 1].t_s - rows[0].t_s;
    if !(span > 0.0) {
        return Err(Error::InvalidSeries("t_s must be increasing".into()));
    }
    let rate = (rows.len() - 1) as f64 / span;
    SampledSeries::new(rows.iter().map(|r| r.value).collect(), rate, rows[0].t_s)
}
