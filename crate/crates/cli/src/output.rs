//! Output directory bookkeeping: CSV and SVG writers and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use neohook_core::geometry::{PLMap, Point2, Rect};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// 17 significant digits, so every value reads back bit-exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, fields: &[String]) {
        let quoted: Vec<String> = fields.iter().map(|f| quote(f)).collect();
        self.text.push_str(&quoted.join(","));
        self.text.push('\n');
    }
}

/// Map labels carry commas, so fields get RFC 4180 quoting when needed.
fn quote(f: &str) -> String {
    if f.contains([',', '"', '\n']) {
        format!("\"{}\"", f.replace('"', "\"\""))
    } else {
        f.to_owned()
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn csv(&self, name: &str, csv: Csv) -> Result<PathBuf> {
        self.write(name, &csv.text)
    }
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: String,
    pub wall_time_s: f64,
    pub threads: usize,
    pub exit_code: i32,
    pub failures: Vec<String>,
    pub files: Vec<FileEntry>,
}

fn collect(dir: &Path, root: &Path, out: &mut Vec<FileEntry>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect(&path, root, out)?;
            continue;
        }
        let rel = path.strip_prefix(root).expect("inside root").to_string_lossy().replace('\\', "/");
        if rel == MANIFEST {
            continue;
        }
        let data = fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        out.push(FileEntry { path: rel, bytes: data.len() as u64, sha256: hex::encode(Sha256::digest(&data)) });
    }
    Ok(())
}

/// Lists every file under the output directory (except the manifest itself)
/// with its digest and writes `manifest.json`.
pub fn write_manifest(dir: &OutDir, mut manifest: RunManifest) -> Result<PathBuf> {
    collect(dir.root(), dir.root(), &mut manifest.files)?;
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    dir.write(MANIFEST, &text)
}

/// A minimal SVG canvas mapping `view` onto a square image with y up.
pub struct Svg {
    view: Rect,
    scale: f64,
    body: String,
}

const PIXELS: f64 = 800.0;
const MARGIN: f64 = 10.0;

impl Svg {
    pub fn new(view: Rect) -> Svg {
        let scale = (PIXELS - 2.0 * MARGIN) / view.width().max(view.height());
        Svg { view, scale, body: String::new() }
    }

    fn px(&self, p: Point2) -> (f64, f64) {
        (MARGIN + (p.x - self.view.xmin) * self.scale, MARGIN + (self.view.ymax - p.y) * self.scale)
    }

    pub fn rect(&mut self, r: &Rect, fill: &str, stroke: &str) {
        let (x, y) = self.px(Point2::new(r.xmin, r.ymax));
        self.body.push_str(&format!(
            "<rect x=\"{x:.3}\" y=\"{y:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"0.5\"/>\n",
            r.width() * self.scale,
            r.height() * self.scale
        ));
    }

    pub fn polyline(&mut self, pts: &[Point2], stroke: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.px(*p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"0.6\"/>\n",
            coords.join(" ")
        ));
    }

    pub fn mesh(&mut self, map: &PLMap, stroke: &str) {
        let t = map.target();
        for [i, j, k] in map.mesh().triangles() {
            self.polyline(&[t[*i], t[*j], t[*k], t[*i]], stroke);
        }
    }

    pub fn finish(self) -> String {
        let h = (self.view.height() * self.scale + 2.0 * MARGIN).ceil();
        let w = (self.view.width() * self.scale + 2.0 * MARGIN).ceil();
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 3.0000000000000004] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num(3.0), "3.0000000000000000e0");
    }

    #[test]
    fn csv_quotes_commas() {
        let mut c = Csv::new(&["map", "x"]);
        c.row(&["pinch:a=-0.3,b=0.75".into(), "1".into()]);
        c.row(&["say \"hi\"".into(), "2".into()]);
        assert_eq!(c.text, "map,x\n\"pinch:a=-0.3,b=0.75\",1\n\"say \"\"hi\"\"\",2\n");
    }

    #[test]
    fn manifest_lists_files() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = OutDir::create(tmp.path()).unwrap();
        dir.write("a.csv", "x\n1\n").unwrap();
        dir.write("sub/b.svg", "<svg/>").unwrap();
        let m = RunManifest {
            tool: "neohook",
            version: "0",
            command: "test".into(),
            config: String::new(),
            wall_time_s: 0.0,
            threads: 1,
            exit_code: 0,
            failures: Vec::new(),
            files: Vec::new(),
        };
        write_manifest(&dir, m).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join(MANIFEST)).unwrap()).unwrap();
        let paths: Vec<&str> = v["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
        assert_eq!(paths, ["a.csv", "sub/b.svg"]);
        assert_eq!(v["files"][0]["sha256"].as_str().unwrap().len(), 64);
    }
}
