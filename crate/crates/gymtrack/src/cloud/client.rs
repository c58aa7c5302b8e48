//! Minimal plain-HTTP client for talking to the mock backend: one
//! connection per request, good for localhost replay and tests.

use std::io::Write;
use std::net::TcpStream;
use std::time::Duration;

use thiserror::Error;

use crate::cloud::http::{read_response, HttpError, ParsedResponse};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("bad url {0:?} (want http://host[:port]/path)")]
    BadUrl(String),
    #[error("http: {0}")]
    Http(#[from] HttpError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Split `http://host[:port]/path` into (authority, path).
pub fn parse_url(url: &str) -> Result<(String, String), ClientError> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| ClientError::BadUrl(url.to_string()))?;
    let (authority, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, "/"),
    };
    if authority.is_empty() {
        return Err(ClientError::BadUrl(url.to_string()));
    }
    let authority = if authority.contains(':') {
        authority.to_string()
    } else {
        format!("{authority}:80")
    };
    Ok((authority, path.to_string()))
}

/// Send one request and read the full response.
pub fn call(method: &str, url: &str, body: Option<&[u8]>) -> Result<ParsedResponse, ClientError> {
    let (authority, path) = parse_url(url)?;
    let mut stream = TcpStream::connect(&authority)?;
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    stream.set_write_timeout(Some(Duration::from_secs(10)))?;
    let body = body.unwrap_or(&[]);
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nhost: {authority}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    stream.flush()?;
    Ok(read_response(&mut stream)?)
}
