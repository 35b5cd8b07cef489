//! Readers and writers for embedding files.
//!
//! * `glove_text`: `token v1 .. vd` per line, no header.
//! * `w2v_text`: header line `N d`, then `glove_text` records.
//! * `w2v_binary`: header `N d\n`, then per record the token bytes, one
//!   space, and `d` little-endian f32 values; a newline after a record is
//!   tolerated.
//! * `native_cache`: `RHC1`, u32 N, u32 d, N tokens each prefixed by a u32
//!   byte length, then the N x d matrix as little-endian f32, row-major.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{CaseMode, PushError, VectorSpaceModel, VsmBuilder};
use crate::error::{Error, Result};

const CACHE_MAGIC: &[u8; 4] = b"RHC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsmFormat {
    GloveText,
    W2vText,
    W2vBinary,
    NativeCache,
}

impl FromStr for VsmFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glove_text" => Ok(VsmFormat::GloveText),
            "w2v_text" => Ok(VsmFormat::W2vText),
            "w2v_binary" => Ok(VsmFormat::W2vBinary),
            "native_cache" => Ok(VsmFormat::NativeCache),
            other => Err(Error::invalid(format!("unknown VSM format {other:?}"))),
        }
    }
}

impl fmt::Display for VsmFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VsmFormat::GloveText => "glove_text",
            VsmFormat::W2vText => "w2v_text",
            VsmFormat::W2vBinary => "w2v_binary",
            VsmFormat::NativeCache => "native_cache",
        })
    }
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::with_capacity(1 << 20, f))
}

pub fn load_vsm(path: impl AsRef<Path>, format: VsmFormat) -> Result<VectorSpaceModel> {
    load_vsm_with(path, format, CaseMode::default())
}

pub fn load_vsm_with(
    path: impl AsRef<Path>,
    format: VsmFormat,
    case_mode: CaseMode,
) -> Result<VectorSpaceModel> {
    let path = path.as_ref();
    let builder = match format {
        VsmFormat::GloveText => read_text(path, false)?,
        VsmFormat::W2vText => read_text(path, true)?,
        VsmFormat::W2vBinary => read_w2v_binary(path)?,
        VsmFormat::NativeCache => return read_cache(path).map(|mut v| {
            v.case_mode = case_mode;
            v
        }),
    };
    if builder.is_empty() {
        return Err(Error::Load {
            path: path.to_owned(),
            msg: "file contains no vectors".into(),
        });
    }
    let vsm = builder.finish(case_mode)?;
    log::info!(
        "loaded {} ({format}): {} tokens, d={}",
        path.display(),
        vsm.len(),
        vsm.dim()
    );
    Ok(vsm)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        msg: msg.into(),
    }
}

fn push_err(path: &Path, line: usize, token: &str, e: PushError) -> Error {
    match e {
        PushError::ZeroNorm => Error::Load {
            path: path.to_owned(),
            msg: format!("zero-norm vector for token {token:?} (line {line})"),
        },
        other => parse_err(path, line, format!("token {token:?}: {other}")),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_ascii_whitespace();
    let n = it.next().and_then(|s| s.parse::<usize>().ok());
    let d = it.next().and_then(|s| s.parse::<usize>().ok());
    match (n, d, it.next()) {
        (Some(n), Some(d), None) if d > 0 => Ok((n, d)),
        _ => Err(parse_err(path, 1, format!("malformed header {line:?}, expected `N d`"))),
    }
}

fn read_text(path: &Path, has_header: bool) -> Result<VsmBuilder> {
    let mut reader = open(path)?;
    let mut line = String::new();
    let mut lineno = 0usize;
    let mut header: Option<(usize, usize)> = None;
    let mut builder: Option<VsmBuilder> = None;
    let mut row: Vec<f32> = Vec::new();
    let mut records = 0usize;

    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| match e.kind() {
                ErrorKind::InvalidData => parse_err(path, lineno + 1, "invalid UTF-8"),
                _ => Error::io(path, e),
            })?;
        if read == 0 {
            break;
        }
        lineno += 1;
        let text = line.trim_end_matches(['\n', '\r']);
        if has_header && lineno == 1 {
            let (n, d) = parse_header(path, text)?;
            header = Some((n, d));
            builder = Some(VsmBuilder::with_capacity(model_name(path), d, n));
            continue;
        }
        let text = text.trim_end();
        if text.is_empty() {
            continue;
        }
        let mut fields = text.split(' ');
        let token = fields.next().unwrap_or_default();
        if token.is_empty() {
            return Err(parse_err(path, lineno, "record starts with a space"));
        }
        row.clear();
        for f in fields {
            let v: f32 = f
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad number {f:?}")))?;
            row.push(v);
        }
        if row.is_empty() {
            return Err(parse_err(path, lineno, "record has no values"));
        }
        let b = builder.get_or_insert_with(|| VsmBuilder::new(model_name(path), row.len()));
        b.push(token, &row)
            .map_err(|e| push_err(path, lineno, token, e))?;
        records += 1;
    }

    if let Some((n, _)) = header {
        if records != n {
            return Err(parse_err(
                path,
                lineno,
                format!("header declares {n} records, found {records}"),
            ));
        }
    }
    match builder {
        Some(b) => Ok(b),
        None => Err(Error::Load {
            path: path.to_owned(),
            msg: "empty file".into(),
        }),
    }
}

fn read_w2v_binary(path: &Path) -> Result<VsmBuilder> {
    let mut reader = open(path)?;
    let mut header = Vec::new();
    reader
        .read_until(b'\n', &mut header)
        .map_err(|e| Error::io(path, e))?;
    if header.is_empty() {
        return Err(Error::Load {
            path: path.to_owned(),
            msg: "empty file".into(),
        });
    }
    let header = String::from_utf8_lossy(&header);
    let (n, d) = parse_header(path, header.trim_end())?;
    let mut builder = VsmBuilder::with_capacity(model_name(path), d, n);
    let mut token = Vec::with_capacity(64);
    let mut raw = vec![0u8; d * 4];
    let mut row = vec![0f32; d];

    for rec in 1..=n {
        let line = rec + 1;
        token.clear();
        loop {
            let mut byte = [0u8; 1];
            match reader.read_exact(&mut byte) {
                Ok(()) => {}
                Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
                    return Err(parse_err(path, line, format!("truncated at record {rec}")));
                }
                Err(e) => return Err(Error::io(path, e)),
            }
            match byte[0] {
                b'\n' if token.is_empty() => continue,
                b' ' => break,
                b => token.push(b),
            }
        }
        if token.is_empty() {
            return Err(parse_err(path, line, format!("empty token at record {rec}")));
        }
        reader.read_exact(&mut raw).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => {
                parse_err(path, line, format!("truncated vector at record {rec}"))
            }
            _ => Error::io(path, e),
        })?;
        for (dst, src) in row.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes([src[0], src[1], src[2], src[3]]);
        }
        let tok = String::from_utf8_lossy(&token);
        builder
            .push(&tok, &row)
            .map_err(|e| push_err(path, line, &tok, e))?;
    }
    Ok(builder)
}

/// Writes `token v1 v2 ...` lines; values round-trip exactly through
/// [`load_vsm`] with [`VsmFormat::GloveText`].
pub fn write_glove_text<W: Write>(vsm: &VectorSpaceModel, out: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    for (i, t) in vsm.tokens().iter().enumerate() {
        w.write_all(t.as_bytes())?;
        for x in vsm.row(i) {
            write!(w, " {x}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_cache(vsm: &VectorSpaceModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let cache_err = |msg: String| Error::Cache {
        path: path.to_owned(),
        msg,
    };
    let n = u32::try_from(vsm.len()).map_err(|_| cache_err("too many rows".into()))?;
    let d = u32::try_from(vsm.dim()).map_err(|_| cache_err("dimension too large".into()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let io = |e| Error::io(path, e);
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&n.to_le_bytes()).map_err(io)?;
    w.write_all(&d.to_le_bytes()).map_err(io)?;
    for t in vsm.tokens() {
        let len = u32::try_from(t.len()).map_err(|_| cache_err("token too long".into()))?;
        w.write_all(&len.to_le_bytes()).map_err(io)?;
        w.write_all(t.as_bytes()).map_err(io)?;
    }
    for chunk in vsm.matrix().chunks(1 << 16) {
        let bytes: Vec<u8> = chunk.iter().flat_map(|x| x.to_le_bytes()).collect();
        w.write_all(&bytes).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<VectorSpaceModel> {
    let path = path.as_ref();
    let mut r = open(path)?;
    let cache_err = |msg: &str| Error::Cache {
        path: path.to_owned(),
        msg: msg.to_owned(),
    };
    let read = |r: &mut BufReader<File>, buf: &mut [u8], what: &str| -> Result<()> {
        r.read_exact(buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => cache_err(&format!("truncated while reading {what}")),
            _ => Error::io(path, e),
        })
    };

    let mut magic = [0u8; 4];
    read(&mut r, &mut magic, "magic")?;
    if &magic != CACHE_MAGIC {
        return Err(cache_err("bad magic bytes (not a native cache or wrong version)"));
    }
    let mut word = [0u8; 4];
    read(&mut r, &mut word, "row count")?;
    let n = u32::from_le_bytes(word) as usize;
    read(&mut r, &mut word, "dimension")?;
    let d = u32::from_le_bytes(word) as usize;
    if n == 0 || d == 0 {
        return Err(cache_err("empty model"));
    }

    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        read(&mut r, &mut word, "token length")?;
        let len = u32::from_le_bytes(word) as usize;
        let mut buf = vec![0u8; len];
        read(&mut r, &mut buf, "token")?;
        tokens.push(String::from_utf8(buf).map_err(|_| cache_err("token is not UTF-8"))?);
    }

    let mut builder = VsmBuilder::with_capacity(model_name(path), d, n);
    let mut raw = vec![0u8; d * 4];
    let mut row = vec![0f32; d];
    for t in &tokens {
        read(&mut r, &mut raw, "matrix")?;
        for (dst, src) in row.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes([src[0], src[1], src[2], src[3]]);
        }
        builder
            .push(t, &row)
            .map_err(|e| cache_err(&format!("token {t:?}: {e}")))?;
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(cache_err("trailing bytes after matrix")),
        Err(e) => return Err(Error::io(path, e)),
    }
    if builder.len() != n {
        return Err(cache_err("duplicate tokens in cache"));
    }
    builder.finish(CaseMode::default())
}
