//! Just enough HTTP/1.1 for the mock backend: content-length bodies, one
//! request per connection, `connection: close` on every response. Chunked
//! encoding, pipelining and TLS are out of scope.

use std::io::{Read, Write};

use thiserror::Error;

/// Largest accepted request/status head.
pub const MAX_HEAD_BYTES: usize = 8 * 1024;
/// Largest accepted body.
pub const MAX_BODY_BYTES: usize = 1024 * 1024;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("malformed message: {0}")]
    Malformed(&'static str),
    #[error("head exceeds {MAX_HEAD_BYTES} bytes")]
    HeadTooLarge,
    #[error("body exceeds {MAX_BODY_BYTES} bytes")]
    BodyTooLarge,
    #[error("connection closed mid-message")]
    UnexpectedEof,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Parsed request line + headers + body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub method: String,
    pub target: String,
    /// Header names lowercased; values trimmed.
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Response {
    pub fn json(status: u16, body: Vec<u8>) -> Self {
        Response {
            status,
            content_type: "application/json",
            body,
        }
    }

    pub fn text(status: u16, body: impl Into<String>) -> Self {
        Response {
            status,
            content_type: "text/plain",
            body: body.into().into_bytes(),
        }
    }

    fn reason(&self) -> &'static str {
        match self.status {
            200 => "OK",
            400 => "Bad Request",
            404 => "Not Found",
            405 => "Method Not Allowed",
            _ => "Internal Server Error",
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(
            w,
            "HTTP/1.1 {} {}\r\ncontent-type: {}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
            self.status,
            self.reason(),
            self.content_type,
            self.body.len()
        )?;
        w.write_all(&self.body)?;
        w.flush()
    }
}

/// Byte offset just past the `\r\n\r\n` head terminator, if present.
pub fn find_head_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n").map(|p| p + 4)
}

/// Split `name: value` header lines. Shared by request and response parsing.
fn parse_header_lines<'a>(
    lines: impl Iterator<Item = &'a str>,
) -> Result<Vec<(String, String)>, HttpError> {
    let mut headers = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once(':')
            .ok_or(HttpError::Malformed("header line without colon"))?;
        if name.is_empty() || name.contains(' ') {
            return Err(HttpError::Malformed("bad header name"));
        }
        headers.push((name.to_ascii_lowercase(), value.trim().to_string()));
    }
    Ok(headers)
}

fn content_length(headers: &[(String, String)]) -> Result<usize, HttpError> {
    let Some((_, v)) = headers.iter().find(|(n, _)| n == "content-length") else {
        return Ok(0);
    };
    let len: usize = v
        .parse()
        .map_err(|_| HttpError::Malformed("bad content-length"))?;
    if len > MAX_BODY_BYTES {
        return Err(HttpError::BodyTooLarge);
    }
    Ok(len)
}

/// Parse a request head (request line + headers, excluding the terminator).
pub fn parse_request_head(head: &[u8]) -> Result<Request, HttpError> {
    let text = std::str::from_utf8(head).map_err(|_| HttpError::Malformed("head not utf-8"))?;
    let mut lines = text.split("\r\n");
    let request_line = lines.next().ok_or(HttpError::Malformed("empty head"))?;
    let mut parts = request_line.split(' ');
    let method = parts
        .next()
        .filter(|m| !m.is_empty())
        .ok_or(HttpError::Malformed("no method"))?;
    let target = parts
        .next()
        .filter(|t| !t.is_empty())
        .ok_or(HttpError::Malformed("no target"))?;
    let version = parts.next().ok_or(HttpError::Malformed("no version"))?;
    if parts.next().is_some() || !version.starts_with("HTTP/1.") {
        return Err(HttpError::Malformed("bad request line"));
    }
    if !method.bytes().all(|b| b.is_ascii_uppercase()) {
        return Err(HttpError::Malformed("bad method"));
    }
    Ok(Request {
        method: method.to_string(),
        target: target.to_string(),
        headers: parse_header_lines(lines)?,
        body: Vec::new(),
    })
}

/// Read one full request (head + content-length body) from a stream.
pub fn read_request<R: Read>(reader: &mut R) -> Result<Request, HttpError> {
    let (head, mut rest) = read_until_head_end(reader)?;
    let mut request = parse_request_head(&head)?;
    let len = content_length(&request.headers)?;
    read_exact_body(reader, &mut rest, len)?;
    request.body = rest;
    Ok(request)
}

/// Status line + headers + body of a response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

/// Parse a response head (status line + headers, excluding the terminator).
pub fn parse_response_head(head: &[u8]) -> Result<ParsedResponse, HttpError> {
    let text = std::str::from_utf8(head).map_err(|_| HttpError::Malformed("head not utf-8"))?;
    let mut lines = text.split("\r\n");
    let status_line = lines.next().ok_or(HttpError::Malformed("empty head"))?;
    let mut parts = status_line.splitn(3, ' ');
    let version = parts.next().ok_or(HttpError::Malformed("no version"))?;
    if !version.starts_with("HTTP/1.") {
        return Err(HttpError::Malformed("bad status line"));
    }
    let status: u16 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(HttpError::Malformed("bad status code"))?;
    Ok(ParsedResponse {
        status,
        headers: parse_header_lines(lines)?,
        body: Vec::new(),
    })
}

/// Read one full response from a stream. Responses without content-length
/// are read to EOF (the peer always closes after one exchange).
pub fn read_response<R: Read>(reader: &mut R) -> Result<ParsedResponse, HttpError> {
    let (head, mut rest) = read_until_head_end(reader)?;
    let mut response = parse_response_head(&head)?;
    if response.headers.iter().any(|(n, _)| n == "content-length") {
        let len = content_length(&response.headers)?;
        read_exact_body(reader, &mut rest, len)?;
    } else {
        reader.read_to_end(&mut rest)?;
    }
    response.body = rest;
    Ok(response)
}

/// Read until `\r\n\r\n`; returns (head without terminator, leftover bytes).
fn read_until_head_end<R: Read>(reader: &mut R) -> Result<(Vec<u8>, Vec<u8>), HttpError> {
    let mut buf = Vec::with_capacity(512);
    let mut chunk = [0u8; 512];
    loop {
        if let Some(end) = find_head_end(&buf) {
            let rest = buf.split_off(end);
            buf.truncate(end - 4);
            return Ok((buf, rest));
        }
        if buf.len() > MAX_HEAD_BYTES {
            return Err(HttpError::HeadTooLarge);
        }
        let n = reader.read(&mut chunk)?;
        if n == 0 {
            return Err(HttpError::UnexpectedEof);
        }
        buf.extend_from_slice(&chunk[..n]);
    }
}

fn read_exact_body<R: Read>(
    reader: &mut R,
    body: &mut Vec<u8>,
    len: usize,
) -> Result<(), HttpError> {
    if body.len() > len {
        return Err(HttpError::Malformed("body longer than content-length"));
    }
    let mut remaining = len - body.len();
    let mut chunk = [0u8; 4096];
    while remaining > 0 {
        let n = reader.read(&mut chunk[..remaining.min(4096)])?;
        if n == 0 {
            return Err(HttpError::UnexpectedEof);
        }
        body.extend_from_slice(&chunk[..n]);
        remaining -= n;
    }
    Ok(())
}
