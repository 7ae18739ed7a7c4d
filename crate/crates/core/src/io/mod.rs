//! On-disk formats: config files, metrics tables, agent checkpoints and
//! trace dumps.

pub mod checkpoint;
pub mod config_file;
pub mod metrics;
pub mod traces;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint, CheckpointError};
pub use config_file::{config_to_toml, load_config, load_config_with, parse_config, ConfigError};
pub use metrics::{read_metrics, write_metrics, METRICS_HEADER};
pub use traces::{dump_traces, load_traces, TraceError};
