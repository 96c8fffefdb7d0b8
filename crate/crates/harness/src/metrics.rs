//! `metrics.csv`: one row per episode.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hgac::learner::EpisodeMetrics;
use hgac::Result;

pub fn header(n_agents: usize) -> String {
    let mut cols = vec!["episode".to_string(), "team_return".to_string()];
    cols.extend((0..n_agents).map(|i| format!("agent_{i}_return")));
    cols.extend(["critic_loss", "actor_loss", "entropy", "seconds"].map(String::from));
    cols.join(",")
}

/// Rust's float formatting is locale-independent and round-trips.
pub fn row(m: &EpisodeMetrics, zero_seconds: bool) -> String {
    let mut cols = vec![m.episode.to_string(), m.team_return.to_string()];
    cols.extend(m.agent_returns.iter().map(f64::to_string));
    cols.push(m.critic_loss.to_string());
    cols.push(m.actor_loss.to_string());
    cols.push(m.entropy.to_string());
    cols.push(if zero_seconds { "0".to_string() } else { format!("{:.3}", m.seconds) });
    cols.join(",")
}

pub struct MetricsWriter {
    out: BufWriter<File>,
    zero_seconds: bool,
}

impl MetricsWriter {
    pub fn create(path: &Path, n_agents: usize, zero_seconds: bool) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header(n_agents))?;
        Ok(Self { out, zero_seconds })
    }

    pub fn write(&mut self, m: &EpisodeMetrics) -> Result<()> {
        writeln!(self.out, "{}", row(m, self.zero_seconds))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Team returns from a metrics file, in episode order.
pub fn read_team_returns(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| hgac::Error::Config(format!("malformed metrics row `{l}`")))
        })
        .collect()
}
