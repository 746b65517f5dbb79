//! File formats: binary PGM masks, 16-bit PGM intensities, raw complex
//! field dumps and `key = value` sidecars.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Plane};

const CFLD_MAGIC: &str = "CFLD1";
const CFLD_HEADER: usize = 64;

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Creates the parent directory and refuses to clobber unless `force`.
pub fn prepare_output(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Reads a file, mapping "not found" to [`Error::MissingArtifact`].
pub fn read_artifact(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn header(kind: &str, width: usize, height: usize, maxval: u32, comment: &str) -> String {
    let mut h = format!("{kind}\n");
    for line in comment.lines() {
        h.push_str("# ");
        h.push_str(line);
        h.push('\n');
    }
    h.push_str(&format!("{width} {height}\n{maxval}\n"));
    h
}

/// 8-bit P5 image of a 0/1 raster, written as 0/255.
pub fn write_mask_pgm(
    path: &Path,
    n: usize,
    bits: &[u8],
    comment: &str,
    force: bool,
) -> Result<()> {
    prepare_output(path, force)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(header("P5", n, n, 255, comment).as_bytes())?;
    let bytes: Vec<u8> = bits.iter().map(|&b| if b != 0 { 255 } else { 0 }).collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

/// 16-bit big-endian P5 image scaled so the maximum maps to 65535; the
/// scale is recorded in a `max = …` comment.
pub fn write_intensity_pgm(
    path: &Path,
    n: usize,
    intensity: &[f64],
    comment: &str,
    force: bool,
) -> Result<()> {
    prepare_output(path, force)?;
    let max = intensity.iter().copied().fold(0.0, f64::max);
    let full = format!("{comment}\nmax = {max:e}");
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(header("P5", n, n, 65535, &full).as_bytes())?;
    for &v in intensity {
        let level = if max > 0.0 {
            (v / max * 65535.0).round() as u16
        } else {
            0
        };
        out.write_all(&level.to_be_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Decoded P5 image.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub comments: Vec<String>,
    /// Samples widened to u16.
    pub data: Vec<u16>,
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let bytes = read_artifact(path)?;
    let mut pos = 0;
    let mut tokens = Vec::new();
    let mut comments = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(malformed(path, "truncated header"));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |e| pos + e);
            comments.push(
                String::from_utf8_lossy(&bytes[pos + 1..end])
                    .trim()
                    .to_string(),
            );
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
    }
    pos += 1; // single whitespace after maxval
    if tokens[0] != "P5" {
        return Err(malformed(
            path,
            format!("magic {:?}, expected P5", tokens[0]),
        ));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| malformed(path, format!("bad number {s:?}")))
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(path, format!("maxval {maxval}")));
    }
    let wide = maxval > 255;
    let need = width * height * if wide { 2 } else { 1 };
    let body = bytes
        .get(pos..pos + need)
        .ok_or_else(|| malformed(path, "truncated raster"))?;
    let data = if wide {
        body.chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        body.iter().map(|&b| b as u16).collect()
    };
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u32,
        comments,
        data,
    })
}

/// Raw dump: 64-byte space-padded text header `CFLD1 n pitch plane`, then
/// `n²` little-endian `(re, im)` f64 pairs, row-major.
pub fn write_cfld(path: &Path, field: &ComplexField, force: bool) -> Result<()> {
    prepare_output(path, force)?;
    let text = format!(
        "{CFLD_MAGIC} {} {:e} {}",
        field.n,
        field.pitch,
        field.plane.tag()
    );
    if text.len() >= CFLD_HEADER {
        return Err(malformed(path, "header does not fit in 64 bytes"));
    }
    let mut head = format!("{text:<width$}", width = CFLD_HEADER - 1).into_bytes();
    head.push(b'\n');
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&head)?;
    for v in &field.values {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cfld(path: &Path) -> Result<ComplexField> {
    let bytes = read_artifact(path)?;
    let head = bytes
        .get(..CFLD_HEADER)
        .ok_or_else(|| malformed(path, "truncated header"))?;
    let text = String::from_utf8_lossy(head);
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != CFLD_MAGIC {
        return Err(malformed(path, format!("bad header {:?}", text.trim())));
    }
    let n: usize = parts[1].parse().map_err(|_| malformed(path, "bad size"))?;
    let pitch: f64 = parts[2].parse().map_err(|_| malformed(path, "bad pitch"))?;
    let plane = Plane::from_tag(parts[3]).ok_or_else(|| malformed(path, "bad plane tag"))?;
    let body = &bytes[CFLD_HEADER..];
    if body.len() != n * n * 16 {
        return Err(malformed(
            path,
            format!("{} data bytes for n = {n}", body.len()),
        ));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    ComplexField::new(n, pitch, [0.0; 2], plane, values)
}

/// `key = value` lines in the given order.
pub fn write_meta(path: &Path, entries: &[(&str, String)], force: bool) -> Result<()> {
    prepare_output(path, force)?;
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = String::from_utf8(read_artifact(path)?).map_err(|_| malformed(path, "not UTF-8"))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| malformed(path, format!("line {}: expected key = value", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Path with `ext` appended to the file name.
pub fn with_suffix(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let bits = vec![0, 1, 1, 0, 1, 0, 0, 1, 1];
        write_mask_pgm(&p, 3, &bits, "mode = 1:1\nalpha = 0.5", false).unwrap();
        let img = read_pgm(&p).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (3, 3, 255));
        assert_eq!(img.comments, ["mode = 1:1", "alpha = 0.5"]);
        let back: Vec<u8> = img.data.iter().map(|&v| u8::from(v > 0)).collect();
        assert_eq!(back, bits);
        assert!(matches!(
            write_mask_pgm(&p, 3, &bits, "", false),
            Err(Error::WouldOverwrite(_))
        ));
        write_mask_pgm(&p, 3, &bits, "", true).unwrap();
    }

    #[test]
    fn intensity_pgm_is_big_endian() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.pgm");
        write_intensity_pgm(&p, 2, &[0.0, 0.5, 1.0, 0.25], "pattern", false).unwrap();
        let img = read_pgm(&p).unwrap();
        assert_eq!(img.data, [0, 32768, 65535, 16384]);
        assert!(img.comments.iter().any(|c| c.starts_with("max = 1e0")));
    }

    #[test]
    fn cfld_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.cfld");
        let f = ComplexField::from_fn(
            5,
            1.234_567_890_123e-7,
            [0.0; 2],
            Plane::Diffraction,
            |x, y| Complex64::new(x * 1e7, -y * 3e6),
        );
        write_cfld(&p, &f, false).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 64 + 25 * 16);
        assert_eq!(bytes[63], b'\n');
        assert_eq!(read_cfld(&p).unwrap(), f);
    }

    #[test]
    fn missing_file_is_reported() {
        let err = read_cfld(Path::new("/nonexistent/x.cfld")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }

    #[test]
    fn meta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.meta");
        write_meta(
            &p,
            &[("alpha", "0.5".into()), ("mode", "1:1".into())],
            false,
        )
        .unwrap();
        let m = read_meta(&p).unwrap();
        assert_eq!(m["alpha"], "0.5");
        assert_eq!(m["mode"], "1:1");
    }
}
