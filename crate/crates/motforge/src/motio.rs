//! Readers and writers for the MOT Challenge text formats plus this
//! project's own feature and label-dataset files.
//!
//! Formats (one record per line, comma separated):
//!
//! * detections: `frame,id,left,top,width,height,conf,x,y,z` (id/x/y/z are -1)
//! * ground truth: `frame,id,left,top,width,height,flag,class,visibility`
//! * results: `frame,id,left,top,width,height,1,-1,-1,-1`, sorted by
//!   `(frame, id)`
//! * features: header `dim=<d>`, then `frame,detection_index,f1,...,fd`
//! * labels: CSV header, then `video_id,label,frame,left,top,width,height`
//!   with optional `f1,...,fd` columns
//! * seqinfo: `key=value` lines (`name`, `frame_count`, `frame_rate`)
//!
//! Box coordinates are written with two decimal places; parsers accept any
//! real literal. Every parse or validation failure carries its line number.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::bbox::BBox;
use crate::detection::{Detection, Feature};

#[derive(Debug, Error)]
pub enum MotioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error(
        "feature row references detection {detection_index} of frame {frame}, which does not exist"
    )]
    DanglingFeature { frame: u32, detection_index: usize },
    #[error("line {line}: feature has {got} components, header declared {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid label dataset: {0}")]
    InvalidLabels(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("missing file: {0}")]
    MissingFile(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> MotioError {
    MotioError::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(raw: &str, line: usize, what: &str) -> Result<T, MotioError> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {raw:?}")))
}

fn bbox_from_fields(l: f64, t: f64, w: f64, h: f64, line: usize) -> Result<BBox, MotioError> {
    BBox::new(l, t, w, h).map_err(|e| MotioError::Validation {
        line,
        message: e.to_string(),
    })
}

/// Ground-truth annotation for one box of one identity at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub frame: u32,
    pub identity: u32,
    pub bbox: BBox,
    pub visibility: f64,
}

/// One emitted tracker box, the payload of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedBox {
    pub frame: u32,
    pub id: u64,
    pub bbox: BBox,
}

/// A sequence with its detections and optional ground truth, as loaded from a
/// sequence directory.
#[derive(Debug, Clone)]
pub struct SequenceBundle {
    pub name: String,
    pub frame_count: u32,
    pub frame_rate: f64,
    pub detections: Vec<Detection>,
    pub ground_truth: Option<Vec<GtRecord>>,
}

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

pub fn parse_detections(reader: impl BufRead) -> Result<Vec<Detection>, MotioError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 10 {
            return Err(parse_err(
                line_no,
                format!("expected 10 fields, got {}", parts.len()),
            ));
        }
        let frame: u32 = field(parts[0], line_no, "frame")?;
        if frame == 0 {
            return Err(MotioError::Validation {
                line: line_no,
                message: "frame indices are 1-based".into(),
            });
        }
        let l: f64 = field(parts[2], line_no, "left")?;
        let t: f64 = field(parts[3], line_no, "top")?;
        let w: f64 = field(parts[4], line_no, "width")?;
        let h: f64 = field(parts[5], line_no, "height")?;
        let conf: f64 = field(parts[6], line_no, "confidence")?;
        let bbox = bbox_from_fields(l, t, w, h, line_no)?;
        out.push(Detection::new(frame, bbox, conf));
    }
    Ok(out)
}

pub fn write_detections(mut w: impl Write, detections: &[Detection]) -> Result<(), MotioError> {
    for d in detections {
        writeln!(
            w,
            "{},-1,{:.2},{:.2},{:.2},{:.2},{:.6},-1,-1,-1",
            d.frame,
            d.bbox.left(),
            d.bbox.top(),
            d.bbox.width(),
            d.bbox.height(),
            d.confidence,
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

/// Parse ground truth keeping only evaluable rows: `flag != 0` and a class in
/// `keep_classes`.
pub fn parse_ground_truth_filtered(
    reader: impl BufRead,
    keep_classes: &[u32],
) -> Result<Vec<GtRecord>, MotioError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(parse_err(
                line_no,
                format!("expected 9 fields, got {}", parts.len()),
            ));
        }
        let frame: u32 = field(parts[0], line_no, "frame")?;
        let identity: u32 = field(parts[1], line_no, "identity")?;
        if frame == 0 || identity == 0 {
            return Err(MotioError::Validation {
                line: line_no,
                message: "frame and identity must be positive".into(),
            });
        }
        let l: f64 = field(parts[2], line_no, "left")?;
        let t: f64 = field(parts[3], line_no, "top")?;
        let w: f64 = field(parts[4], line_no, "width")?;
        let h: f64 = field(parts[5], line_no, "height")?;
        let flag: i64 = field(parts[6], line_no, "flag")?;
        let class: u32 = field(parts[7], line_no, "class")?;
        let visibility: f64 = field(parts[8], line_no, "visibility")?;
        if flag == 0 || !keep_classes.contains(&class) {
            continue;
        }
        let bbox = bbox_from_fields(l, t, w, h, line_no)?;
        out.push(GtRecord {
            frame,
            identity,
            bbox,
            visibility,
        });
    }
    Ok(out)
}

/// Parse ground truth with the MOT17 pedestrian convention (class 1 only).
pub fn parse_ground_truth(reader: impl BufRead) -> Result<Vec<GtRecord>, MotioError> {
    parse_ground_truth_filtered(reader, &[1])
}

pub fn write_ground_truth(mut w: impl Write, records: &[GtRecord]) -> Result<(), MotioError> {
    for r in records {
        writeln!(
            w,
            "{},{},{:.2},{:.2},{:.2},{:.2},1,1,{:.6}",
            r.frame,
            r.identity,
            r.bbox.left(),
            r.bbox.top(),
            r.bbox.width(),
            r.bbox.height(),
            r.visibility,
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

pub fn parse_results(reader: impl BufRead) -> Result<Vec<TrackedBox>, MotioError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 10 {
            return Err(parse_err(
                line_no,
                format!("expected 10 fields, got {}", parts.len()),
            ));
        }
        let frame: u32 = field(parts[0], line_no, "frame")?;
        let id: u64 = field(parts[1], line_no, "track id")?;
        if id == 0 {
            return Err(MotioError::Validation {
                line: line_no,
                message: "track ids must be positive".into(),
            });
        }
        let l: f64 = field(parts[2], line_no, "left")?;
        let t: f64 = field(parts[3], line_no, "top")?;
        let w: f64 = field(parts[4], line_no, "width")?;
        let h: f64 = field(parts[5], line_no, "height")?;
        let bbox = bbox_from_fields(l, t, w, h, line_no)?;
        out.push(TrackedBox { frame, id, bbox });
    }
    Ok(out)
}

/// Write tracker output in frame-major order. Boxes are quantized to two
/// decimal places; `parse_results` inverts this exactly on already-quantized
/// input.
pub fn write_results(mut w: impl Write, boxes: &[TrackedBox]) -> Result<(), MotioError> {
    let mut sorted: Vec<&TrackedBox> = boxes.iter().collect();
    sorted.sort_by_key(|b| (b.frame, b.id));
    for b in sorted {
        writeln!(
            w,
            "{},{},{:.2},{:.2},{:.2},{:.2},1,-1,-1,-1",
            b.frame,
            b.id,
            b.bbox.left(),
            b.bbox.top(),
            b.bbox.width(),
            b.bbox.height(),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Attach externally computed appearance vectors to detections.
///
/// Rows are keyed by `(frame, detection_index)` where the index counts the
/// detections of that frame in their stored order. Vectors are normalized on
/// read; a row pointing at a missing detection is an error.
pub fn read_features(reader: impl BufRead, detections: &mut [Detection]) -> Result<(), MotioError> {
    let mut by_frame: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, d) in detections.iter().enumerate() {
        by_frame.entry(d.frame).or_default().push(i);
    }

    let mut lines = reader.lines().enumerate();
    let dim: usize = match lines.next() {
        None => return Ok(()),
        Some((_, line)) => {
            let line = line?;
            let line = line.trim();
            match line.strip_prefix("dim=") {
                Some(d) => field(d, 1, "feature dimension")?,
                None => return Err(parse_err(1, "expected header dim=<d>")),
            }
        }
    };

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != dim + 2 {
            return Err(MotioError::DimensionMismatch {
                line: line_no,
                expected: dim,
                got: parts.len().saturating_sub(2),
            });
        }
        let frame: u32 = field(parts[0], line_no, "frame")?;
        let det_index: usize = field(parts[1], line_no, "detection index")?;
        let mut values = Vec::with_capacity(dim);
        for p in &parts[2..] {
            values.push(field::<f64>(p, line_no, "feature component")?);
        }
        let slot = by_frame
            .get(&frame)
            .and_then(|v| v.get(det_index))
            .copied()
            .ok_or(MotioError::DanglingFeature {
                frame,
                detection_index: det_index,
            })?;
        let feature = Feature::normalized(values).map_err(|e| MotioError::Validation {
            line: line_no,
            message: e.to_string(),
        })?;
        detections[slot].feature = Some(feature);
    }
    Ok(())
}

/// Write the features of all detections that carry one. Components use
/// shortest-round-trip formatting so read-back is exact.
pub fn write_features(mut w: impl Write, detections: &[Detection]) -> Result<(), MotioError> {
    let dim = detections
        .iter()
        .find_map(|d| d.feature.as_ref().map(Feature::dim))
        .unwrap_or(0);
    writeln!(w, "dim={dim}")?;
    let mut index_in_frame: HashMap<u32, usize> = HashMap::new();
    for d in detections {
        let idx = index_in_frame.entry(d.frame).or_insert(0);
        if let Some(f) = &d.feature {
            write!(w, "{},{}", d.frame, idx)?;
            for v in f.values() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        *idx += 1;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Label datasets
// ---------------------------------------------------------------------------

/// One pseudo-labeled detection: the supervision record produced by tracklet
/// label generation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub video_id: String,
    pub label: u32,
    pub frame: u32,
    pub bbox: BBox,
    pub feature: Option<Feature>,
}

/// The generated classification dataset: labels are contiguous from 0 and no
/// label appears in two videos.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelDataset {
    pub records: Vec<LabelRecord>,
}

impl LabelDataset {
    pub fn class_count(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.label as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// Dimension of the attached features, `None` when records carry none.
    pub fn feature_dim(&self) -> Option<usize> {
        self.records
            .iter()
            .find_map(|r| r.feature.as_ref().map(Feature::dim))
    }

    pub fn validate(&self) -> Result<(), MotioError> {
        let k = self.class_count();
        let mut owner: Vec<Option<&str>> = vec![None; k];
        for r in &self.records {
            let slot = &mut owner[r.label as usize];
            match slot {
                None => *slot = Some(&r.video_id),
                Some(v) if *v != r.video_id => {
                    return Err(MotioError::InvalidLabels(format!(
                        "label {} appears in videos {:?} and {:?}",
                        r.label, v, r.video_id
                    )));
                }
                _ => {}
            }
        }
        if let Some(missing) = owner.iter().position(Option::is_none) {
            return Err(MotioError::InvalidLabels(format!(
                "labels are not contiguous: {missing} is unused but {} classes exist",
                k
            )));
        }
        let dim = self.feature_dim();
        for (i, r) in self.records.iter().enumerate() {
            if r.feature.as_ref().map(Feature::dim) != dim && r.feature.is_some() != dim.is_some() {
                return Err(MotioError::InvalidLabels(format!(
                    "record {i} feature presence/dimension differs from the rest"
                )));
            }
            if let (Some(f), Some(d)) = (&r.feature, dim) {
                if f.dim() != d {
                    return Err(MotioError::InvalidLabels(format!(
                        "record {i} feature dimension {} != {d}",
                        f.dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn write_labels(mut w: impl Write, dataset: &LabelDataset) -> Result<(), MotioError> {
    dataset.validate()?;
    let dim = dataset.feature_dim();
    write!(w, "video_id,label,frame,left,top,width,height")?;
    if let Some(d) = dim {
        for i in 1..=d {
            write!(w, ",f{i}")?;
        }
    }
    writeln!(w)?;
    for r in &dataset.records {
        write!(
            w,
            "{},{},{},{:.2},{:.2},{:.2},{:.2}",
            r.video_id,
            r.label,
            r.frame,
            r.bbox.left(),
            r.bbox.top(),
            r.bbox.width(),
            r.bbox.height(),
        )?;
        if let Some(f) = &r.feature {
            for v in f.values() {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_labels(reader: impl BufRead) -> Result<LabelDataset, MotioError> {
    let mut lines = reader.lines().enumerate();
    let dim = match lines.next() {
        None => return Ok(LabelDataset::default()),
        Some((_, line)) => {
            let line = line?;
            let cols: Vec<&str> = line.trim().split(',').collect();
            if cols.len() < 7 || cols[0] != "video_id" {
                return Err(parse_err(
                    1,
                    "expected label CSV header starting with video_id",
                ));
            }
            cols.len() - 7
        }
    };

    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 + dim {
            return Err(parse_err(
                line_no,
                format!("expected {} fields, got {}", 7 + dim, parts.len()),
            ));
        }
        let video_id = parts[0].to_string();
        let label: u32 = field(parts[1], line_no, "label")?;
        let frame: u32 = field(parts[2], line_no, "frame")?;
        let l: f64 = field(parts[3], line_no, "left")?;
        let t: f64 = field(parts[4], line_no, "top")?;
        let w: f64 = field(parts[5], line_no, "width")?;
        let h: f64 = field(parts[6], line_no, "height")?;
        let bbox = bbox_from_fields(l, t, w, h, line_no)?;
        let feature = if dim > 0 {
            let mut values = Vec::with_capacity(dim);
            for p in &parts[7..] {
                values.push(field::<f64>(p, line_no, "feature component")?);
            }
            Some(
                Feature::normalized(values).map_err(|e| MotioError::Validation {
                    line: line_no,
                    message: e.to_string(),
                })?,
            )
        } else {
            None
        };
        records.push(LabelRecord {
            video_id,
            label,
            frame,
            bbox,
            feature,
        });
    }
    let dataset = LabelDataset { records };
    dataset.validate()?;
    Ok(dataset)
}

// ---------------------------------------------------------------------------
// Sequence metadata and directory layout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SeqInfo {
    pub name: String,
    pub frame_count: u32,
    pub frame_rate: f64,
}

pub fn read_seqinfo(reader: impl BufRead) -> Result<SeqInfo, MotioError> {
    let mut name = None;
    let mut frame_count = None;
    let mut frame_rate = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected key=value"))?;
        match key.trim() {
            "name" => name = Some(value.trim().to_string()),
            "frame_count" => frame_count = Some(field(value, line_no, "frame_count")?),
            "frame_rate" => frame_rate = Some(field(value, line_no, "frame_rate")?),
            other => return Err(parse_err(line_no, format!("unknown key {other:?}"))),
        }
    }
    Ok(SeqInfo {
        name: name.ok_or_else(|| parse_err(0, "missing name"))?,
        frame_count: frame_count.ok_or_else(|| parse_err(0, "missing frame_count"))?,
        frame_rate: frame_rate.unwrap_or(30.0),
    })
}

pub fn write_seqinfo(mut w: impl Write, info: &SeqInfo) -> Result<(), MotioError> {
    writeln!(w, "name={}", info.name)?;
    writeln!(w, "frame_count={}", info.frame_count)?;
    writeln!(w, "frame_rate={}", info.frame_rate)?;
    Ok(())
}

/// Load a sequence directory: `det.txt` (required), `seqinfo.txt`, `gt.txt`
/// and `features.txt` (each optional).
pub fn load_sequence(dir: &Path) -> Result<SequenceBundle, MotioError> {
    use std::fs::File;
    use std::io::BufReader;

    let det_path = dir.join("det.txt");
    if !det_path.exists() {
        return Err(MotioError::MissingFile(det_path.display().to_string()));
    }
    let mut detections = parse_detections(BufReader::new(File::open(&det_path)?))?;

    let ground_truth = {
        let p = dir.join("gt.txt");
        if p.exists() {
            Some(parse_ground_truth(BufReader::new(File::open(&p)?))?)
        } else {
            None
        }
    };

    let feat_path = dir.join("features.txt");
    if feat_path.exists() {
        read_features(BufReader::new(File::open(&feat_path)?), &mut detections)?;
    }

    let info_path = dir.join("seqinfo.txt");
    let info = if info_path.exists() {
        read_seqinfo(BufReader::new(File::open(&info_path)?))?
    } else {
        let max_frame = detections
            .iter()
            .map(|d| d.frame)
            .chain(ground_truth.iter().flatten().map(|g| g.frame))
            .max()
            .unwrap_or(0);
        SeqInfo {
            name: dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sequence".into()),
            frame_count: max_frame,
            frame_rate: 30.0,
        }
    };

    for d in &detections {
        if d.frame > info.frame_count {
            return Err(MotioError::InvalidSequence(format!(
                "detection at frame {} exceeds frame_count {}",
                d.frame, info.frame_count
            )));
        }
    }
    for g in ground_truth.iter().flatten() {
        if g.frame > info.frame_count {
            return Err(MotioError::InvalidSequence(format!(
                "ground truth at frame {} exceeds frame_count {}",
                g.frame, info.frame_count
            )));
        }
    }

    Ok(SequenceBundle {
        name: info.name,
        frame_count: info.frame_count,
        frame_rate: info.frame_rate,
        detections,
        ground_truth,
    })
}

/// Write a sequence directory in the layout `load_sequence` reads.
pub fn save_sequence(dir: &Path, bundle: &SequenceBundle) -> Result<(), MotioError> {
    use std::fs::File;
    use std::io::BufWriter;

    std::fs::create_dir_all(dir)?;
    write_seqinfo(
        BufWriter::new(File::create(dir.join("seqinfo.txt"))?),
        &SeqInfo {
            name: bundle.name.clone(),
            frame_count: bundle.frame_count,
            frame_rate: bundle.frame_rate,
        },
    )?;
    write_detections(
        BufWriter::new(File::create(dir.join("det.txt"))?),
        &bundle.detections,
    )?;
    if let Some(gt) = &bundle.ground_truth {
        write_ground_truth(BufWriter::new(File::create(dir.join("gt.txt"))?), gt)?;
    }
    if bundle.detections.iter().any(|d| d.feature.is_some()) {
        write_features(
            BufWriter::new(File::create(dir.join("features.txt"))?),
            &bundle.detections,
        )?;
    }
    Ok(())
}
