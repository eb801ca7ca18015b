//! JSON-lines reports: a versioned header, the config echo, one line per
//! metric or result, and a trailing `meta` line carrying everything that is
//! not reproducible (timestamp, wall time).

use std::io::{self, Write};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const FORMAT: &str = "spinblind-report";
pub const VERSION: u32 = 1;

pub struct Report {
    lines: Vec<Value>,
    seed: u64,
    started: Instant,
}

impl Report {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Self {
        let mut r = Self {
            lines: Vec::new(),
            seed,
            started: Instant::now(),
        };
        r.lines.push(json!({
            "type": "header",
            "format": FORMAT,
            "version": VERSION,
            "command": command,
            "tool_version": env!("CARGO_PKG_VERSION"),
        }));
        let mut cfg = serde_json::to_value(config).expect("config serializes");
        if let Value::Object(m) = &mut cfg {
            m.insert("type".into(), "config".into());
        }
        r.lines.push(cfg);
        r
    }

    /// Metric line; `extra` fields (an object) are merged in.
    pub fn metric(&mut self, name: &str, value: impl Serialize, trials: u64, extra: Value) {
        let mut m = Map::new();
        m.insert("type".into(), "metric".into());
        m.insert("name".into(), name.into());
        m.insert("value".into(), serde_json::to_value(value).expect("metric serializes"));
        m.insert("trials".into(), trials.into());
        m.insert("seed".into(), self.seed.into());
        if let Value::Object(e) = extra {
            m.extend(e);
        }
        self.lines.push(Value::Object(m));
    }

    /// Any other line; `body` must be an object.
    pub fn line(&mut self, kind: &str, body: Value) {
        let mut m = Map::new();
        m.insert("type".into(), kind.into());
        if let Value::Object(e) = body {
            m.extend(e);
        }
        self.lines.push(Value::Object(m));
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for l in &self.lines {
            serde_json::to_writer(&mut out, l)?;
            out.write_all(b"\n")?;
        }
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = json!({
            "type": "meta",
            "timestamp_unix": ts,
            "elapsed_ms": self.started.elapsed().as_millis() as u64,
        });
        serde_json::to_writer(&mut out, &meta)?;
        out.write_all(b"\n")
    }
}

/// Normal-approximation standard error and Wilson 95% interval of a rate.
pub fn rate_stats(successes: u64, trials: u64) -> Value {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = 1.959_963_984_540_054;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / denom;
    json!({
        "successes": successes,
        "std_err": (p * (1.0 - p) / n).sqrt(),
        "ci95": [(centre - half).max(0.0), (centre + half).min(1.0)],
    })
}
