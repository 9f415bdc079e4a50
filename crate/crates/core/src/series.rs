use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A p-channel real time series sampled at a fixed rate.
///
/// Values are stored channel-major so that a block of one channel is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiChannelSeries {
    values: Vec<Vec<f64>>,
    sampling_rate: f64,
    channel_names: Vec<String>,
}

impl MultiChannelSeries {
    pub fn new(values: Vec<Vec<f64>>, sampling_rate: f64, channel_names: Vec<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 channels, got {}",
                values.len()
            )));
        }
        if channel_names.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                values.len()
            )));
        }
        let n = values[0].len();
        if n == 0 {
            return Err(Error::InvalidSeries("series has no samples".into()));
        }
        if let Some(j) = values.iter().position(|c| c.len() != n) {
            return Err(Error::InvalidSeries(format!(
                "channel {j} has {} samples, expected {n}",
                values[j].len()
            )));
        }
        if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
            return Err(Error::InvalidSeries(format!("sampling rate {sampling_rate} must be positive")));
        }
        for (j, channel) in values.iter().enumerate() {
            if let Some(t) = channel.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidSeries(format!("non-finite value at channel {j}, sample {t}")));
            }
        }
        Ok(Self { values, sampling_rate, channel_names })
    }

    /// Builds a series with default channel names `ch1..chp`.
    pub fn from_channels(values: Vec<Vec<f64>>, sampling_rate: f64) -> Result<Self> {
        let names = (1..=values.len()).map(|j| format!("ch{j}")).collect();
        Self::new(values, sampling_rate, names)
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    pub fn n_samples(&self) -> usize {
        self.values[0].len()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.values
    }
}
