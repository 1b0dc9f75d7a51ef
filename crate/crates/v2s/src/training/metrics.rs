//! Append-only training metrics log.
//!
//! One CSV row per update. Critic rows leave the generator columns blank
//! and vice versa; a blank means "not computed this row", distinct from a
//! numeric zero. All numbers are written with Rust's shortest round-trip
//! float formatting, so identical runs produce identical files (modulo the
//! wall-clock column, which timing tests strip).

use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::training::update::{CriticMetrics, GenMetrics};

pub const METRICS_HEADER: &str =
    "step,phase,adv,pase,power,mfcc,total,wave_critic_loss,wave_gp,power_critic_loss,power_gp,wall_ms";

pub struct MetricsLog {
    writer: BufWriter<std::fs::File>,
    path: PathBuf,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsLog {
    /// Opens `path` for appending, writing the header only when the file is
    /// new or empty — resumed runs keep extending the same log.
    pub fn append_to(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path.to_path_buf(), e))?;
        let fresh = file
            .metadata()
            .map_err(|e| Error::io(path.to_path_buf(), e))?
            .len()
            == 0;
        let mut log = MetricsLog {
            writer: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        if fresh {
            log.write_line(METRICS_HEADER)?;
        }
        Ok(log)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.writer, "{line}")
            .and_then(|()| self.writer.flush())
            .map_err(|e| Error::io(self.path.clone(), e))
    }

    pub fn log_critic(&mut self, step: u64, m: &CriticMetrics, wall_ms: f64) -> Result<()> {
        let phase = if m.skipped { "critic_noop" } else { "critic" };
        self.write_line(&format!(
            "{step},{phase},,,,,,{},{},{},{},{wall_ms:.3}",
            opt(m.wave_loss),
            opt(m.wave_gp),
            opt(m.power_loss),
            opt(m.power_gp),
        ))
    }

    pub fn log_gen(&mut self, step: u64, m: &GenMetrics, wall_ms: f64) -> Result<()> {
        self.write_line(&format!(
            "{step},gen,{},{},{},{},{},,,,,{wall_ms:.3}",
            m.adversarial, m.perceptual, m.power, m.mfcc, m.total,
        ))
    }
}

/// Drops the trailing wall-clock field from every row — determinism tests
/// compare logs up to timing.
pub fn strip_wall_ms(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|line| match line.rfind(',') {
            Some(pos) => &line[..pos],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen_metrics() -> GenMetrics {
        GenMetrics {
            adversarial: -1.5,
            perceptual: 0.25,
            power: 2.0,
            mfcc: 0.5,
            total: 133.7,
        }
    }

    #[test]
    fn header_written_once_and_rows_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        {
            let mut log = MetricsLog::append_to(&path).unwrap();
            log.log_gen(1, &gen_metrics(), 12.5).unwrap();
        }
        {
            let mut log = MetricsLog::append_to(&path).unwrap();
            let m = CriticMetrics {
                wave_loss: Some(-0.5),
                wave_gp: Some(9.25),
                power_loss: None,
                power_gp: None,
                skipped: false,
            };
            log.log_critic(7, &m, 3.0).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "1,gen,-1.5,0.25,2,0.5,133.7,,,,,12.500");
        assert_eq!(lines[2], "7,critic,,,,,,-0.5,9.25,,,3.000");
    }

    #[test]
    fn skipped_critic_rows_are_marked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let mut log = MetricsLog::append_to(&path).unwrap();
        let m = CriticMetrics {
            wave_loss: None,
            wave_gp: None,
            power_loss: None,
            power_gp: None,
            skipped: true,
        };
        log.log_critic(3, &m, 0.1).unwrap();
        drop(log);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("3,critic_noop,"), "{text}");
    }

    #[test]
    fn strip_wall_ms_removes_only_the_last_field() {
        let stripped = strip_wall_ms("a,b,c\n1,gen,5.0,12.345\n");
        assert_eq!(stripped, "a,b\n1,gen,5.0");
    }
}
