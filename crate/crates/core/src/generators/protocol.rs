//! The `MPROBE/1` wire format and a reference server.
//!
//! All integers are little-endian `u32`, tensors are little-endian `f32` in
//! row-major order. A session opens with a handshake:
//!
//! ```text
//! client: "MPRB" version
//! server: "MPRB" version latent_dim C H W flags      (flags bit 0 = concurrent_safe)
//! ```
//!
//! followed by frames of the form `tag request_id payload_len payload`, where
//! `payload_len` counts bytes. Tags are 1 (request, `latent_dim` floats),
//! 2 (response, `C·H·W` floats) and 3 (error, UTF-8 message). A server that
//! rejects the client's version answers with an error frame in place of its
//! handshake.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{Generator, GeneratorDescriptor};
use crate::geometry::LatentPoint;
use crate::imaging::Shape;

pub const MAGIC: [u8; 4] = *b"MPRB";
pub const VERSION: u32 = 1;
pub const TAG_REQUEST: u32 = 1;
pub const TAG_RESPONSE: u32 = 2;
pub const TAG_ERROR: u32 = 3;
pub const FLAG_CONCURRENT_SAFE: u32 = 1;
/// Frames larger than this are treated as corrupt rather than allocated.
pub const MAX_PAYLOAD_BYTES: u32 = 1 << 30;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("transport I/O error: {0}")]
    Io(#[source] io::Error),
    #[error("timed out waiting for the generator")]
    Timeout,
    #[error("protocol version mismatch: expected {expected}, peer speaks {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("bad handshake magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("connection closed mid-stream")]
    Disconnected,
    #[error("generator reported an error for request {request_id}: {message}")]
    Remote { request_id: u32, message: String },
    #[error("latent dimension mismatch: server expects {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

impl From<io::Error> for ProtocolError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::UnexpectedEof
            | io::ErrorKind::BrokenPipe
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted => Self::Disconnected,
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => Self::Timeout,
            _ => Self::Io(e),
        }
    }
}

/// What the server announces about its generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerHello {
    pub latent_dim: u32,
    pub shape: [u32; 3],
    pub flags: u32,
}

impl ServerHello {
    pub fn from_descriptor(d: &GeneratorDescriptor) -> Self {
        let s = d.output_shape;
        Self {
            latent_dim: d.latent_dim as u32,
            shape: [s.channels as u32, s.height as u32, s.width as u32],
            flags: if d.concurrent_safe { FLAG_CONCURRENT_SAFE } else { 0 },
        }
    }

    pub fn concurrent_safe(&self) -> bool {
        self.flags & FLAG_CONCURRENT_SAFE != 0
    }

    pub fn output_shape(&self) -> Shape {
        Shape::new(self.shape[0] as usize, self.shape[1] as usize, self.shape[2] as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    Request { id: u32, latent: Vec<f32> },
    Response { id: u32, data: Vec<f32> },
    Error { id: u32, message: String },
}

impl Frame {
    pub fn id(&self) -> u32 {
        match self {
            Frame::Request { id, .. } | Frame::Response { id, .. } | Frame::Error { id, .. } => *id,
        }
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32, ProtocolError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn floats_to_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn bytes_to_floats(bytes: &[u8]) -> Result<Vec<f32>, ProtocolError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(ProtocolError::MalformedFrame(format!("float payload of {} bytes is not a multiple of 4", bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn write_client_hello(w: &mut impl Write, version: u32) -> Result<(), ProtocolError> {
    let mut buf = MAGIC.to_vec();
    buf.extend(version.to_le_bytes());
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads the client's magic and version. The version is returned unchecked.
pub fn read_client_hello(r: &mut impl Read) -> Result<u32, ProtocolError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(ProtocolError::BadMagic(magic));
    }
    read_u32(r)
}

pub fn write_server_hello(w: &mut impl Write, version: u32, hello: &ServerHello) -> Result<(), ProtocolError> {
    let mut buf = MAGIC.to_vec();
    for v in [version, hello.latent_dim, hello.shape[0], hello.shape[1], hello.shape[2], hello.flags] {
        buf.extend(v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads the server's reply to a client hello. An error frame in place of
/// the magic becomes a version mismatch when the server names a version
/// problem, and a remote error otherwise.
pub fn read_server_hello(r: &mut impl Read) -> Result<ServerHello, ProtocolError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        if u32::from_le_bytes(magic) == TAG_ERROR {
            let frame = read_frame_body(r, TAG_ERROR)?;
            if let Frame::Error { id, message } = frame {
                if message.contains("version") {
                    return Err(ProtocolError::VersionMismatch { expected: VERSION, got: parse_version(&message) });
                }
                return Err(ProtocolError::Remote { request_id: id, message });
            }
        }
        return Err(ProtocolError::BadMagic(magic));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(ProtocolError::VersionMismatch { expected: VERSION, got: version });
    }
    let latent_dim = read_u32(r)?;
    let shape = [read_u32(r)?, read_u32(r)?, read_u32(r)?];
    let flags = read_u32(r)?;
    if latent_dim == 0 || shape.contains(&0) {
        return Err(ProtocolError::MalformedFrame(format!(
            "server announced empty geometry: latent_dim {latent_dim}, shape {shape:?}"
        )));
    }
    Ok(ServerHello { latent_dim, shape, flags })
}

/// Best-effort extraction of the peer's version from a rejection message
/// such as `"unsupported version 0"`; the expected version if none found.
fn parse_version(message: &str) -> u32 {
    message
        .split(|c: char| !c.is_ascii_digit())
        .rfind(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .unwrap_or(VERSION)
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<(), ProtocolError> {
    let (tag, id, payload) = match frame {
        Frame::Request { id, latent } => (TAG_REQUEST, *id, floats_to_bytes(latent)),
        Frame::Response { id, data } => (TAG_RESPONSE, *id, floats_to_bytes(data)),
        Frame::Error { id, message } => (TAG_ERROR, *id, message.as_bytes().to_vec()),
    };
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&l| l <= MAX_PAYLOAD_BYTES)
        .ok_or_else(|| ProtocolError::MalformedFrame(format!("payload of {} bytes is too large", payload.len())))?;
    let mut buf = Vec::with_capacity(12 + payload.len());
    buf.extend(tag.to_le_bytes());
    buf.extend(id.to_le_bytes());
    buf.extend(len.to_le_bytes());
    buf.extend(payload);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream at a frame
/// boundary; a stream that ends inside a frame is a disconnect.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, ProtocolError> {
    let mut tag = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut tag[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(ProtocolError::Disconnected),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    read_frame_body(r, u32::from_le_bytes(tag)).map(Some)
}

fn read_frame_body(r: &mut impl Read, tag: u32) -> Result<Frame, ProtocolError> {
    let id = read_u32(r)?;
    let len = read_u32(r)?;
    if !(TAG_REQUEST..=TAG_ERROR).contains(&tag) {
        return Err(ProtocolError::MalformedFrame(format!("unknown frame tag {tag}")));
    }
    if len > MAX_PAYLOAD_BYTES {
        return Err(ProtocolError::MalformedFrame(format!("payload length {len} exceeds limit")));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(match tag {
        TAG_REQUEST => Frame::Request { id, latent: bytes_to_floats(&payload)? },
        TAG_RESPONSE => Frame::Response { id, data: bytes_to_floats(&payload)? },
        _ => Frame::Error {
            id,
            message: String::from_utf8(payload)
                .map_err(|_| ProtocolError::MalformedFrame("error message is not UTF-8".into()))?,
        },
    })
}

/// Serves `generator` over one connection until the client hangs up.
///
/// Requests are answered in order. Latents arrive as `f32` and are widened
/// to `f64`; outputs are narrowed back to `f32`. Bad requests and generator
/// failures produce error frames and the connection stays open. A client
/// speaking another version receives an error frame and the session ends
/// with [`ProtocolError::VersionMismatch`].
pub fn serve<R: Read, W: Write>(generator: &dyn Generator, mut reader: R, mut writer: W) -> Result<(), ProtocolError> {
    let version = read_client_hello(&mut reader)?;
    if version != VERSION {
        write_frame(&mut writer, &Frame::Error { id: 0, message: format!("unsupported version {version}") })?;
        return Err(ProtocolError::VersionMismatch { expected: VERSION, got: version });
    }
    let descriptor = generator.descriptor();
    write_server_hello(&mut writer, VERSION, &ServerHello::from_descriptor(descriptor))?;
    while let Some(frame) = read_frame(&mut reader)? {
        let reply = match frame {
            Frame::Request { id, latent } if latent.len() != descriptor.latent_dim => Frame::Error {
                id,
                message: format!(
                    "expected payload of {} bytes ({} floats), got {} floats",
                    descriptor.latent_dim * 4,
                    descriptor.latent_dim,
                    latent.len()
                ),
            },
            Frame::Request { id, latent } => {
                let result = LatentPoint::new(latent.iter().map(|&v| f64::from(v)).collect())
                    .map_err(|e| e.to_string())
                    .and_then(|z| generator.evaluate(&z).map_err(|e| e.to_string()));
                match result {
                    Ok(img) => Frame::Response { id, data: img.data().iter().map(|&v| v as f32).collect() },
                    Err(message) => Frame::Error { id, message },
                }
            }
            other => Frame::Error { id: other.id(), message: "server only accepts request frames".into() },
        };
        write_frame(&mut writer, &reply)?;
    }
    Ok(())
}
