//! OTB-style sequence directories: `img/0001.jpg ...` plus `groundtruth_rect.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tracker::Rect;

pub const GROUND_TRUTH_FILE: &str = "groundtruth_rect.txt";
pub const FRAME_DIR: &str = "img";
const FRAME_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceMeta {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub ground_truth: Vec<Rect>,
}

impl SequenceMeta {
    pub fn init_rect(&self) -> Rect {
        self.ground_truth[0]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn load_sequence(dir: &Path) -> Result<SequenceMeta> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let frames = list_frames(&dir.join(FRAME_DIR))?;
    let ground_truth = load_ground_truth(&dir.join(GROUND_TRUTH_FILE))?;
    if frames.len() != ground_truth.len() {
        return Err(Error::Data(format!(
            "{}: {} frames but {} ground-truth rects",
            dir.display(),
            frames.len(),
            ground_truth.len()
        )));
    }
    if frames.len() < 2 {
        return Err(Error::Data(format!("{}: need at least 2 frames", dir.display())));
    }
    Ok(SequenceMeta { name, frames, ground_truth })
}

/// Numbered frames in order. Numbering must be contiguous.
fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut numbered = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if !FRAME_EXTENSIONS.contains(&ext.as_str()) {
            continue;
        }
        let Some(stem) = path.file_stem().map(|s| s.to_string_lossy().into_owned()) else {
            continue;
        };
        if let Ok(n) = stem.parse::<u64>() {
            numbered.push((n, stem.len(), path));
        }
    }
    if numbered.is_empty() {
        return Err(Error::Data(format!("{}: no numbered frames", dir.display())));
    }
    numbered.sort_by_key(|(n, _, _)| *n);
    for pair in numbered.windows(2) {
        let (a, width, _) = &pair[0];
        let b = pair[1].0;
        if b == *a {
            return Err(Error::Data(format!("{}: frame {a} appears twice", dir.display())));
        }
        if b != a + 1 {
            return Err(Error::Data(format!(
                "{}: missing frame {:0width$}",
                dir.display(),
                a + 1,
                width = *width
            )));
        }
    }
    Ok(numbered.into_iter().map(|(_, _, p)| p).collect())
}

/// One `x y w h` box per line, 1-based; returned 0-based.
pub fn load_ground_truth(path: &Path) -> Result<Vec<Rect>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<Rect>> {
    let mut rects = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == '\t' || c == ' ')
            .filter(|f| !f.is_empty())
            .collect();
        let values: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match values.as_deref() {
            Some(&[x, y, w, h]) if [x, y, w, h].iter().all(|v| v.is_finite()) => {
                rects.push(Rect::new(x - 1.0, y - 1.0, w, h));
            }
            _ => return Err(Error::Data(format!("line {}: cannot parse `{line}` as x,y,w,h", i + 1))),
        }
    }
    Ok(rects)
}

/// Decodes a frame into a 3-channel tensor with values in 0..=255.
pub fn load_frame(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_raw();
    let mut data = vec![0.0f32; 3 * h * w];
    let plane = h * w;
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f32;
        }
    }
    Tensor::from_vec(h, w, 3, data)
}

/// Subdirectories of `root` that hold a ground-truth file, sorted by name.
pub fn discover_sequences(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() && path.join(GROUND_TRUTH_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}
