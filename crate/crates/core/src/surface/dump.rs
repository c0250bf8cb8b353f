//! Tab-separated cloud dump: `x y z nx ny nz f_1 .. f_d`, with `#` header
//! lines carrying the source protein and a configuration hash.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::SurfacePointCloud;

pub fn write_cloud_tsv(cloud: &SurfacePointCloud, config_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# source={} config_hash={}", cloud.source_protein, config_hash);
    let mut header = vec!["x", "y", "z", "nx", "ny", "nz"].into_iter().map(String::from).collect::<Vec<_>>();
    header.extend((1..=cloud.feature_dim).map(|i| format!("f_{i}")));
    let _ = writeln!(out, "# {}", header.join("\t"));
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        let n = cloud.normals[i];
        let mut fields: Vec<String> = p.iter().chain(n.iter()).map(|v| format!("{v:?}")).collect();
        fields.extend(cloud.feature_row(i).iter().map(|v| format!("{v:?}")));
        let _ = writeln!(out, "{}", fields.join("\t"));
    }
    out
}

pub fn parse_cloud_tsv(text: &str) -> Result<SurfacePointCloud> {
    let mut cloud = SurfacePointCloud {
        points: Vec::new(),
        normals: Vec::new(),
        features: Vec::new(),
        feature_dim: 0,
        source_protein: String::new(),
    };
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            if let Some(src) = rest.split_whitespace().find_map(|w| w.strip_prefix("source=")) {
                cloud.source_protein = src.to_string();
            }
            continue;
        }
        let vals: Vec<f64> = t
            .split('\t')
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad number `{f}`"))))
            .collect::<Result<_>>()?;
        if vals.len() < 6 {
            return Err(Error::parse(line_no, "cloud row needs at least 6 columns"));
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(Error::parse(line_no, format!("expected {w} columns, found {}", vals.len())))
            }
            _ => {}
        }
        cloud.points.push([vals[0], vals[1], vals[2]]);
        cloud.normals.push([vals[3], vals[4], vals[5]]);
        cloud.features.extend_from_slice(&vals[6..]);
    }
    cloud.feature_dim = width.map_or(0, |w| w - 6);
    Ok(cloud)
}

pub fn write_cloud(path: &Path, cloud: &SurfacePointCloud, config_hash: &str) -> Result<()> {
    std::fs::write(path, write_cloud_tsv(cloud, config_hash)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: &Path) -> Result<SurfacePointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud_tsv(&text).map_err(|e| e.in_file(path))
}
