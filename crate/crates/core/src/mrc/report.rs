use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MrcRecord {
    pub module_name: String,
    pub mrc_value: f64,
    /// Accuracy (percent) on the adversarial set before and after the
    /// worst-case weight perturbation.
    pub robust_acc_before: f64,
    pub robust_acc_after: f64,
    pub robust_acc_drop: f64,
    pub forward_backward_count: f64,
}

/// Per-module MRC results in network order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MrcReport {
    pub records: Vec<MrcRecord>,
}

impl MrcReport {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, module: &str) -> Option<&MrcRecord> {
        self.records.iter().find(|r| r.module_name == module)
    }

    pub fn total_forward_backward(&self) -> f64 {
        self.records.iter().map(|r| r.forward_backward_count).sum()
    }

    /// One tab-separated line per module: name, MRC, robust accuracy
    /// before, after, drop, forward-backward count. Reals carry six
    /// significant digits.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.module_name,
                sig6(r.mrc_value),
                sig6(r.robust_acc_before),
                sig6(r.robust_acc_after),
                sig6(r.robust_acc_drop),
                sig6(r.forward_backward_count),
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(Error::Malformed(format!(
                    "MRC report line {}: expected 6 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse().map_err(|_| {
                    Error::Malformed(format!("MRC report line {}: bad number `{}`", lineno + 1, fields[i]))
                })
            };
            records.push(MrcRecord {
                module_name: fields[0].to_string(),
                mrc_value: num(1)?,
                robust_acc_before: num(2)?,
                robust_acc_after: num(3)?,
                robust_acc_drop: num(4)?,
                forward_backward_count: num(5)?,
            });
        }
        Ok(Self { records })
    }
}

/// Scientific notation with six significant digits.
pub(crate) fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}
