//! Videos are stored as directories of numbered PNG frames
//! (`frame_00000.png`, `frame_00001.png`, ...), read in file-name order.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use super::DatasetError;
use crate::error::{Error, Result};

fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(DatasetError::MissingVideo(dir.to_path_buf()).into());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("frame_") && name.ends_with(".png")
        })
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn read_video(dir: &Path) -> Result<Vec<RgbImage>> {
    let paths = frame_paths(dir)?;
    if paths.is_empty() {
        return Err(DatasetError::EmptyVideo(dir.to_path_buf()).into());
    }
    let mut frames = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let img = image::open(path).map_err(|source| Error::Image { path: path.clone(), source })?.to_rgb8();
        if let Some(first) = frames.first() {
            let first: &RgbImage = first;
            if img.dimensions() != first.dimensions() {
                return Err(DatasetError::FrameSize { path: dir.to_path_buf(), index, got: img.dimensions(), expected: first.dimensions() }.into());
            }
        }
        frames.push(img);
    }
    Ok(frames)
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

pub fn write_video(dir: &Path, frames: &[RgbImage]) -> Result<()> {
    crate::util::create_dir_all(dir)?;
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        frame.save(&path).map_err(|source| Error::Image { path, source })?;
    }
    Ok(())
}
