use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A point estimate with its Monte Carlo standard error. `None` marks an
/// undefined quantity (for example a ratio with a zero denominator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStatistic {
    pub name: String,
    pub value: Option<f64>,
    pub sample_size: u64,
    pub p_value: Option<f64>,
    pub degrees_of_freedom: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedCount {
    pub name: String,
    pub value: u64,
}

/// Output of every estimator and test. Field order and key order are fixed,
/// so serialization is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub experiment: String,
    pub parameters: BTreeMap<String, Value>,
    pub realizations: u64,
    pub estimates: Vec<Estimate>,
    pub ratios: Vec<Estimate>,
    pub statistics: Vec<TestStatistic>,
    pub counts: Vec<NamedCount>,
    pub flags: Vec<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl EstimatorReport {
    pub fn new(experiment: impl Into<String>, realizations: u64) -> Self {
        Self {
            experiment: experiment.into(),
            parameters: BTreeMap::new(),
            realizations,
            estimates: Vec::new(),
            ratios: Vec::new(),
            statistics: Vec::new(),
            counts: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_string(), v);
        self
    }

    pub fn estimate(&mut self, name: &str, value: f64, std_error: Option<f64>) -> &mut Self {
        self.estimates.push(Estimate {
            name: name.to_string(),
            value: finite(value),
            std_error: std_error.and_then(finite),
        });
        self
    }

    pub fn ratio(&mut self, name: &str, value: Option<f64>, std_error: Option<f64>) -> &mut Self {
        self.ratios.push(Estimate {
            name: name.to_string(),
            value: value.and_then(finite),
            std_error: std_error.and_then(finite),
        });
        self
    }

    pub fn statistic(
        &mut self,
        name: &str,
        value: Option<f64>,
        sample_size: u64,
        p_value: Option<f64>,
        dof: Option<u64>,
    ) -> &mut Self {
        self.statistics.push(TestStatistic {
            name: name.to_string(),
            value: value.and_then(finite),
            sample_size,
            p_value: p_value.and_then(finite),
            degrees_of_freedom: dof,
        });
        self
    }

    pub fn count(&mut self, name: &str, value: u64) -> &mut Self {
        self.counts.push(NamedCount {
            name: name.to_string(),
            value,
        });
        self
    }

    pub fn flag(&mut self, flag: impl Into<String>) -> &mut Self {
        let f = flag.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
        self
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn get_estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn get_ratio(&self, name: &str) -> Option<&Estimate> {
        self.ratios.iter().find(|e| e.name == name)
    }

    pub fn get_statistic(&self, name: &str) -> Option<&TestStatistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    pub fn get_count(&self, name: &str) -> Option<u64> {
        self.counts.iter().find(|c| c.name == name).map(|c| c.value)
    }
}

/// Sample mean and `sd / sqrt(R)` with the unbiased sample variance.
/// The standard error is `None` for fewer than two values.
pub fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}
