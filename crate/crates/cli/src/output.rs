//! Output directory handling and the provenance header every artifact carries.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::Overrides;
use crate::{Classify, CliResult};

pub const TOOL: &str = "viewrobust";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub overrides: Vec<String>,
}

impl Header {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C, overrides: &Overrides) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).expect("configs serialize"),
            overrides: overrides.iter().map(|(k, v)| format!("{k}={v}")).collect(),
        }
    }

    /// Lines for `#`-comment headers (CSV, PPM, checkpoints).
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("{} {} {}", self.tool, self.version, self.command),
            format!("seed: {}", self.seed),
            format!("config: {}", self.config),
            format!("overrides: {}", self.overrides.join(" ")),
        ]
    }

    pub fn comment_block(&self) -> String {
        self.lines().iter().map(|l| format!("# {l}\n")).collect()
    }

    pub fn text(&self) -> String {
        self.lines().join("\n")
    }
}

/// Output directory; all writes are relative to it.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).runtime()?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn prepare(&self, rel: &str) -> CliResult<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).runtime()?;
        }
        Ok(p)
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.prepare(rel)?;
        fs::write(&p, bytes)
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", p.display()))
            .runtime()?;
        Ok(p)
    }

    /// CSV with the header as leading `#` comments.
    pub fn write_csv(&self, rel: &str, header: &Header, body: &str) -> CliResult<PathBuf> {
        self.write_bytes(rel, format!("{}{body}", header.comment_block()).as_bytes())
    }

    /// JSON object whose first key is `"header"`.
    pub fn write_json<V: Serialize>(&self, rel: &str, header: &Header, value: &V) -> CliResult<PathBuf> {
        self.write_bytes(rel, json_with_header(header, value).as_bytes())
    }
}

/// Splices `"header"` in as the first key of the serialized object.
pub fn json_with_header<V: Serialize>(header: &Header, value: &V) -> String {
    let body = serde_json::to_string_pretty(value).expect("artifacts serialize");
    let head = serde_json::to_string_pretty(header)
        .expect("header serializes")
        .replace('\n', "\n  ");
    let rest = body
        .strip_prefix('{')
        .expect("artifact serializes to a JSON object")
        .trim_start_matches('\n');
    if rest.trim() == "}" {
        format!("{{\n  \"header\": {head}\n}}\n")
    } else {
        format!("{{\n  \"header\": {head},\n{rest}\n")
    }
}

/// Drops `#` comment lines, leaving the CSV body.
pub fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, serde::Deserialize, PartialEq, Debug)]
    struct Thing {
        a: u32,
        b: Vec<f64>,
    }

    fn header() -> Header {
        Header::new(
            "test",
            9,
            &Thing { a: 1, b: vec![] },
            &vec![("k".into(), toml::Value::Integer(2))],
        )
    }

    #[test]
    fn json_header_comes_first_and_round_trips() {
        let t = Thing {
            a: 3,
            b: vec![0.5, 1.0],
        };
        let s = json_with_header(&header(), &t);
        assert!(s.starts_with("{\n  \"header\": {"));
        let back: Thing = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["header"]["seed"], 9);
        assert_eq!(v["header"]["overrides"][0], "k=2");
    }

    #[test]
    fn csv_header_is_commented() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        let p = out.write_csv("sub/x.csv", &header(), "a,b\n1,2\n").unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert!(text.starts_with("# viewrobust "));
        assert!(text.contains("# seed: 9\n"));
        assert_eq!(strip_comments(&text), "a,b\n1,2\n");
    }
}
