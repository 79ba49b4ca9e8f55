use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use brickstore_core::{Endpoint, Rgid};
use thiserror::Error;

use crate::queue::{QueueCapacities, WorkerCounts};

pub const DEFAULT_BEACON_PERIOD_MS: u64 = 2000;
pub const DEFAULT_DELTA_TS_MS: i64 = 1;
pub const DEFAULT_RECORD_PAYLOAD_SIZE: u32 = 1024;

/// Static configuration for one brick daemon, read from a `key = value`
/// file (`#` starts a comment).
#[derive(Clone, Debug, PartialEq)]
pub struct BrickConfig {
    /// Advertised address; beacons and the restart order are based on it.
    pub endpoint: Endpoint,
    /// Replica groups announced at startup, e.g. `rgids = 1/2, 3/2`.
    pub rgids: Vec<Rgid>,
    pub store_path: PathBuf,
    /// Fixed record payload capacity, set at table creation.
    pub record_payload_size: u32,
    pub beacon_period_ms: u64,
    /// Writes older than the stored timestamp by more than this are
    /// `TIMESTAMP_ERROR`s.
    pub delta_ts_ms: i64,
    pub queue_capacities: QueueCapacities,
    pub worker_counts: WorkerCounts,
    /// Static UDP beacon sinks in addition to solicited subscribers.
    pub beacon_sinks: Vec<Endpoint>,
    /// Command run by the restart agent for a remote target;
    /// `${endpoint}` is substituted. Restarting this brick itself is done
    /// in-process.
    pub supervisor_cmd: Option<String>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: missing required key {key}")]
    Missing { path: String, key: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BrickConfig {
    pub fn new(endpoint: Endpoint, rgids: Vec<Rgid>, store_path: PathBuf) -> Self {
        BrickConfig {
            endpoint,
            rgids,
            store_path,
            record_payload_size: DEFAULT_RECORD_PAYLOAD_SIZE,
            beacon_period_ms: DEFAULT_BEACON_PERIOD_MS,
            delta_ts_ms: DEFAULT_DELTA_TS_MS,
            queue_capacities: QueueCapacities::default(),
            worker_counts: WorkerCounts::default(),
            beacon_sinks: Vec::new(),
            supervisor_cmd: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut endpoint = None;
        let mut rgids = Vec::new();
        let mut store_path = None;
        let mut cfg_tail = BrickConfig::new(
            Endpoint::new(0, 0),
            Vec::new(),
            PathBuf::new(),
        );

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected key = value".into()))?;
            match key {
                "endpoint" => {
                    endpoint = Some(value.parse().map_err(|e| err(format!("{e}")))?);
                }
                "rgids" => {
                    for part in value.split(',') {
                        let part = part.trim();
                        if part.is_empty() {
                            continue;
                        }
                        rgids.push(part.parse::<Rgid>().map_err(|e| err(format!("{e}")))?);
                    }
                }
                "store_path" => store_path = Some(PathBuf::from(value)),
                "record_payload_size" => {
                    cfg_tail.record_payload_size =
                        value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "beacon_period_ms" => {
                    cfg_tail.beacon_period_ms = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "delta_ts_ms" => {
                    cfg_tail.delta_ts_ms = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "queue_capacity_read" => {
                    cfg_tail.queue_capacities.read = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "queue_capacity_put" => {
                    cfg_tail.queue_capacities.put = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "queue_capacity_ts" => {
                    cfg_tail.queue_capacities.ts = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "workers_read" => {
                    cfg_tail.worker_counts.read = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "workers_put" => {
                    cfg_tail.worker_counts.put = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "workers_ts" => {
                    cfg_tail.worker_counts.ts = value.parse().map_err(|e| err(format!("{e}")))?;
                }
                "beacon_sinks" => {
                    for part in value.split(',') {
                        let part = part.trim();
                        if part.is_empty() {
                            continue;
                        }
                        cfg_tail
                            .beacon_sinks
                            .push(part.parse().map_err(|e| err(format!("{e}")))?);
                    }
                }
                "supervisor_cmd" => cfg_tail.supervisor_cmd = Some(value.to_string()),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }

        let endpoint = endpoint.ok_or(ConfigError::Missing {
            path: origin.to_string(),
            key: "endpoint",
        })?;
        let store_path = store_path.ok_or(ConfigError::Missing {
            path: origin.to_string(),
            key: "store_path",
        })?;
        if rgids.is_empty() {
            return Err(ConfigError::Missing {
                path: origin.to_string(),
                key: "rgids",
            });
        }
        cfg_tail.endpoint = endpoint;
        cfg_tail.rgids = rgids;
        cfg_tail.store_path = store_path;
        if cfg_tail.record_payload_size == 0 {
            return Err(ConfigError::Parse {
                path: origin.to_string(),
                line: 0,
                msg: "record_payload_size must be > 0".into(),
            });
        }
        Ok(cfg_tail)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "endpoint = {}", self.endpoint);
        let rgids: Vec<String> = self.rgids.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "rgids = {}", rgids.join(", "));
        let _ = writeln!(s, "store_path = {}", self.store_path.display());
        let _ = writeln!(s, "record_payload_size = {}", self.record_payload_size);
        let _ = writeln!(s, "beacon_period_ms = {}", self.beacon_period_ms);
        let _ = writeln!(s, "delta_ts_ms = {}", self.delta_ts_ms);
        let _ = writeln!(s, "queue_capacity_read = {}", self.queue_capacities.read);
        let _ = writeln!(s, "queue_capacity_put = {}", self.queue_capacities.put);
        let _ = writeln!(s, "queue_capacity_ts = {}", self.queue_capacities.ts);
        let _ = writeln!(s, "workers_read = {}", self.worker_counts.read);
        let _ = writeln!(s, "workers_put = {}", self.worker_counts.put);
        let _ = writeln!(s, "workers_ts = {}", self.worker_counts.ts);
        if !self.beacon_sinks.is_empty() {
            let sinks: Vec<String> = self.beacon_sinks.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(s, "beacon_sinks = {}", sinks.join(", "));
        }
        if let Some(cmd) = &self.supervisor_cmd {
            let _ = writeln!(s, "supervisor_cmd = {cmd}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let mut cfg = BrickConfig::new(
            "10.0.0.1:9000".parse().unwrap(),
            vec![Rgid::new(1, 2).unwrap(), Rgid::new(3, 2).unwrap()],
            PathBuf::from("/tmp/b1.dsbr"),
        );
        cfg.beacon_sinks.push("127.0.0.1:4100".parse().unwrap());
        cfg.supervisor_cmd = Some("scripts/restart.sh ${endpoint}".into());
        let text = cfg.to_config_string();
        let back = BrickConfig::parse(&text, "test").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "endpoint = 10.0.0.1:9000\nrgids = bogus\nstore_path = /tmp/x";
        let err = BrickConfig::parse(text, "cfg").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cfg:2"), "{msg}");
    }

    #[test]
    fn missing_required_keys_are_reported() {
        let err = BrickConfig::parse("endpoint = 10.0.0.1:9000", "cfg").unwrap_err();
        assert!(err.to_string().contains("rgids") || err.to_string().contains("store_path"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored()  {
        let text = "# a brick\nendpoint = 10.0.0.1:9000 # trailing\n\nrgids = 0/0\nstore_path = /tmp/x\n";
        let cfg = BrickConfig::parse(text, "cfg").unwrap();
        assert_eq!(cfg.rgids, vec![Rgid::WHOLE]);
    }
}
