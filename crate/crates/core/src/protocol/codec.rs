//! Wire frames: a 4-byte little-endian payload length followed by the
//! message as canonical JSON.

use serde_json::Value;
use thiserror::Error;

use super::{Body, Message};
use crate::scene::AvatarId;

pub const LENGTH_PREFIX: usize = 4;
/// Frames above this size are refused outright.
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("message not encodable: {0}")]
    Invalid(String),
    #[error("encoded payload of {0} bytes exceeds the frame limit")]
    TooLarge(usize),
}

/// Decode failures. Offsets count bytes from the start of the frame
/// (the length prefix included).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("incomplete frame: have {available} of {needed} bytes")]
    NeedMoreBytes { needed: usize, available: usize },
    #[error("declared frame length {length} exceeds limit {max}")]
    FrameTooLarge { length: usize, max: usize },
    #[error("malformed JSON at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("unknown message kind `{kind}` at byte {offset}")]
    UnknownKind { offset: usize, kind: String },
    #[error("schema violation at byte {offset}: {message}")]
    Schema { offset: usize, message: String },
}

impl DecodeError {
    /// Whether more input could turn this into a successful decode.
    pub fn is_incomplete(&self) -> bool {
        matches!(self, DecodeError::NeedMoreBytes { .. })
    }
}

/// Canonical JSON payload without the length prefix (the event-log line
/// format).
pub fn encode_payload(m: &Message) -> Result<Vec<u8>, EncodeError> {
    let value = m.to_value().map_err(|e| EncodeError::Invalid(e.to_string()))?;
    serde_json::to_vec(&value).map_err(|e| EncodeError::Invalid(e.to_string()))
}

pub fn encode(m: &Message) -> Result<Vec<u8>, EncodeError> {
    let payload = encode_payload(m)?;
    if payload.len() > MAX_FRAME_LEN {
        return Err(EncodeError::TooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(LENGTH_PREFIX + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Splits one frame off the front of `buf`, returning its payload and the
/// total bytes it occupies.
pub fn split_frame(buf: &[u8]) -> Result<(&[u8], usize), DecodeError> {
    if buf.len() < LENGTH_PREFIX {
        return Err(DecodeError::NeedMoreBytes { needed: LENGTH_PREFIX, available: buf.len() });
    }
    let len = u32::from_le_bytes(buf[..LENGTH_PREFIX].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_LEN {
        return Err(DecodeError::FrameTooLarge { length: len, max: MAX_FRAME_LEN });
    }
    let total = LENGTH_PREFIX + len;
    if buf.len() < total {
        return Err(DecodeError::NeedMoreBytes { needed: total, available: buf.len() });
    }
    Ok((&buf[LENGTH_PREFIX..total], total))
}

/// Decodes exactly one complete frame.
pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
    let (payload, total) = split_frame(bytes)?;
    if total != bytes.len() {
        return Err(DecodeError::Malformed { offset: total, message: "trailing bytes after frame".into() });
    }
    decode_payload(payload)
}

/// Decodes a frame payload (no length prefix). Offsets in errors are still
/// reported relative to the frame start.
pub fn decode_payload(payload: &[u8]) -> Result<Message, DecodeError> {
    let at = |pos: usize| LENGTH_PREFIX + pos;
    let mut value: Value = serde_json::from_slice(payload).map_err(|e| DecodeError::Malformed {
        offset: at(line_col_to_offset(payload, e.line(), e.column())),
        message: e.to_string(),
    })?;
    let schema = |pos: usize, message: String| DecodeError::Schema { offset: at(pos), message };

    let Some(map) = value.as_object_mut() else {
        return Err(schema(0, "frame payload must be a JSON object".into()));
    };
    let kind = match map.get("kind") {
        Some(Value::String(k)) => k.clone(),
        Some(_) => return Err(schema(key_offset(payload, "kind"), "`kind` must be a string".into())),
        None => return Err(schema(0, "missing `kind`".into())),
    };
    if !Body::KINDS.contains(&kind.as_str()) {
        return Err(DecodeError::UnknownKind { offset: at(key_offset(payload, "kind")), kind });
    }

    let seq = take_u64(map, "seq").map_err(|m| schema(key_offset(payload, "seq"), m))?;
    let ts = take_u64(map, "ts").map_err(|m| schema(key_offset(payload, "ts"), m))?;
    let sender = match map.remove("sender") {
        Some(Value::String(s)) => AvatarId(s),
        _ => return Err(schema(key_offset(payload, "sender"), "`sender` must be a string".into())),
    };
    let body: Body = serde_json::from_value(value).map_err(|e| {
        let pos = if payload_has_key(payload, "payload") { key_offset(payload, "payload") } else { 0 };
        schema(pos, e.to_string())
    })?;
    Ok(Message { seq, ts, sender, body })
}

fn take_u64(map: &mut serde_json::Map<String, Value>, key: &str) -> Result<u64, String> {
    map.remove(key).and_then(|v| v.as_u64()).ok_or_else(|| format!("`{key}` must be an unsigned integer"))
}

fn payload_has_key(payload: &[u8], key: &str) -> bool {
    find(payload, format!("\"{key}\"").as_bytes()).is_some()
}

/// Byte offset of the first `"key"` token, or 0 if absent.
fn key_offset(payload: &[u8], key: &str) -> usize {
    find(payload, format!("\"{key}\"").as_bytes()).unwrap_or(0)
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// serde_json reports 1-based line and column (in bytes); map back to a
/// byte offset.
fn line_col_to_offset(payload: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for _ in 1..line {
        match payload[offset..].iter().position(|b| *b == b'\n') {
            Some(nl) => offset += nl + 1,
            None => break,
        }
    }
    (offset + column.saturating_sub(1)).min(payload.len())
}

/// Reassembles frames from arbitrarily chunked input. One per connection.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &[u8]) {
        if self.start > 0 && self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        }
        self.buf.extend_from_slice(chunk);
    }

    /// Bytes received but not yet consumed.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }

    /// The next complete message, a per-frame decode error (the bad frame is
    /// skipped), or `None` when more bytes are needed. An oversized length
    /// prefix is unrecoverable: the buffer is dropped and the error returned.
    pub fn next_message(&mut self) -> Option<Result<Message, DecodeError>> {
        let pending = &self.buf[self.start..];
        match split_frame(pending) {
            Err(e) if e.is_incomplete() => {
                if self.start > self.buf.len() / 2 {
                    self.buf.drain(..self.start);
                    self.start = 0;
                }
                None
            }
            Err(e) => {
                self.buf.clear();
                self.start = 0;
                Some(Err(e))
            }
            Ok((payload, total)) => {
                let result = decode_payload(payload);
                self.start += total;
                Some(result)
            }
        }
    }

    pub fn drain_messages(&mut self) -> Vec<Result<Message, DecodeError>> {
        std::iter::from_fn(|| self.next_message()).collect()
    }
}

/// Splits a byte stream given as chunks into messages.
pub fn frame_stream<'a>(chunks: impl IntoIterator<Item = &'a [u8]>) -> Vec<Result<Message, DecodeError>> {
    let mut dec = FrameDecoder::new();
    let mut out = Vec::new();
    for chunk in chunks {
        dec.push(chunk);
        out.extend(dec.drain_messages());
    }
    out
}
