//! Leveled, timestamped logging.
//!
//! Records render as `- HH:MM:SS.mmm LEVEL: message` and go to standard
//! error by default; tests capture them through a memory sink. A record is
//! emitted iff its level is at or below the configured verbosity.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

/// Verbosity levels, from always-emitted to chattiest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLevel {
    Error,
    Warning,
    Info,
    Debug,
}

impl LogLevel {
    fn label(self) -> &'static str {
        match self {
            LogLevel::Error => "ERROR",
            LogLevel::Warning => "WARNING",
            LogLevel::Info => "INFO",
            LogLevel::Debug => "DEBUG",
        }
    }
}

impl fmt::Display for LogLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LogLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "error" => Ok(LogLevel::Error),
            "warning" => Ok(LogLevel::Warning),
            "info" => Ok(LogLevel::Info),
            "debug" => Ok(LogLevel::Debug),
            other => Err(format!(
                "unknown log level `{other}` (expected error|warning|info|debug)"
            )),
        }
    }
}

/// One log record.
#[derive(Debug, Clone)]
pub struct LogRecord {
    /// Wall-clock time of day, pre-rendered as `HH:MM:SS.mmm`.
    pub timestamp: String,
    pub level: LogLevel,
    pub message: String,
}

impl LogRecord {
    pub fn render(&self) -> String {
        format!("- {} {}: {}", self.timestamp, self.level, self.message)
    }
}

/// Where rendered records go.
#[derive(Clone)]
pub enum LogSink {
    Stderr,
    /// Collects rendered lines; used by tests and golden checks.
    Memory(Arc<Mutex<Vec<String>>>),
}

impl LogSink {
    pub fn memory() -> (LogSink, Arc<Mutex<Vec<String>>>) {
        let buf = Arc::new(Mutex::new(Vec::new()));
        (LogSink::Memory(buf.clone()), buf)
    }
}

/// A level filter plus a sink. Cheap to clone and share across threads.
#[derive(Clone)]
pub struct Logger {
    level: LogLevel,
    sink: LogSink,
}

impl Logger {
    pub fn new(level: LogLevel, sink: LogSink) -> Self {
        Logger { level, sink }
    }

    pub fn stderr(level: LogLevel) -> Self {
        Logger::new(level, LogSink::Stderr)
    }

    pub fn level(&self) -> LogLevel {
        self.level
    }

    pub fn log(&self, level: LogLevel, message: fmt::Arguments<'_>) {
        if level > self.level {
            return;
        }
        let record = LogRecord {
            timestamp: chrono::Local::now().format("%H:%M:%S%.3f").to_string(),
            level,
            message: message.to_string(),
        };
        let line = record.render();
        match &self.sink {
            LogSink::Stderr => {
                // One locked write per record keeps lines whole.
                let stderr = std::io::stderr();
                let mut handle = stderr.lock();
                let _ = writeln!(handle, "{line}");
            }
            LogSink::Memory(buf) => {
                buf.lock().unwrap_or_else(|e| e.into_inner()).push(line);
            }
        }
    }

    pub fn error(&self, message: fmt::Arguments<'_>) {
        self.log(LogLevel::Error, message);
    }

    pub fn warning(&self, message: fmt::Arguments<'_>) {
        self.log(LogLevel::Warning, message);
    }

    pub fn info(&self, message: fmt::Arguments<'_>) {
        self.log(LogLevel::Info, message);
    }

    pub fn debug(&self, message: fmt::Arguments<'_>) {
        self.log(LogLevel::Debug, message);
    }
}

impl Default for Logger {
    fn default() -> Self {
        Logger::stderr(LogLevel::Warning)
    }
}

/// Masks the timestamp field of a rendered record, for golden comparisons.
/// Lines that do not look like log records are returned unchanged.
pub fn mask_timestamp(line: &str) -> String {
    if let Some(rest) = line.strip_prefix("- ") {
        if rest.len() > 12 && looks_like_timestamp(&rest[..12]) {
            return format!("- XX:XX:XX.XXX{}", &rest[12..]);
        }
    }
    line.to_string()
}

fn looks_like_timestamp(s: &str) -> bool {
    let bytes = s.as_bytes();
    bytes.len() == 12
        && bytes[2] == b':'
        && bytes[5] == b':'
        && bytes[8] == b'.'
        && [0, 1, 3, 4, 6, 7, 9, 10, 11]
            .iter()
            .all(|&i| bytes[i].is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_order_from_error_to_debug() {
        assert!(LogLevel::Error < LogLevel::Warning);
        assert!(LogLevel::Warning < LogLevel::Info);
        assert!(LogLevel::Info < LogLevel::Debug);
    }

    #[test]
    fn info_suppressed_under_warning() {
        let (sink, buf) = LogSink::memory();
        let logger = Logger::new(LogLevel::Warning, sink);
        logger.info(format_args!("hidden"));
        assert!(buf.lock().unwrap().is_empty());
    }

    #[test]
    fn error_emitted_under_any_level() {
        let (sink, buf) = LogSink::memory();
        let logger = Logger::new(LogLevel::Error, sink);
        logger.error(format_args!("boom"));
        assert_eq!(buf.lock().unwrap().len(), 1);
    }

    #[test]
    fn record_shape_matches_pattern() {
        let (sink, buf) = LogSink::memory();
        let logger = Logger::new(LogLevel::Info, sink);
        logger.info(format_args!("adding worker: 1 of 2"));
        let lines = buf.lock().unwrap();
        let masked = mask_timestamp(&lines[0]);
        assert_eq!(masked, "- XX:XX:XX.XXX INFO: adding worker: 1 of 2");
    }

    #[test]
    fn mask_leaves_non_log_lines_alone() {
        assert_eq!(mask_timestamp("1"), "1");
        assert_eq!(mask_timestamp("- not a timestamp"), "- not a timestamp");
    }

    #[test]
    fn level_parses_case_insensitively() {
        assert_eq!("INFO".parse::<LogLevel>(), Ok(LogLevel::Info));
        assert_eq!("debug".parse::<LogLevel>(), Ok(LogLevel::Debug));
        assert!("verbose".parse::<LogLevel>().is_err());
    }
}
