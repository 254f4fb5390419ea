use super::{connect, ProbeConfig};
use std::io::{Read, Write};
use std::net::SocketAddr;

const MAX_RESPONSE: usize = 64 * 1024;

/// `HTTP/<d>.<d> <ddd>` followed by a space or the end of the line.
fn is_status_line(buf: &[u8]) -> bool {
    let line_end = buf.iter().position(|&b| b == b'\n').unwrap_or(buf.len());
    let line = &buf[..line_end];
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    if line.len() < 12 || !line.starts_with(b"HTTP/") {
        return false;
    }
    let v = &line[5..8];
    let code = &line[9..12];
    v[0].is_ascii_digit()
        && v[1] == b'.'
        && v[2].is_ascii_digit()
        && line[8] == b' '
        && code.iter().all(u8::is_ascii_digit)
        && (line.len() == 12 || line[12] == b' ')
}

/// GET / and report whether any well-formed HTTP response arrived. The body
/// is drained until the server closes, up to a size cap.
pub(super) fn probe(addrs: &[SocketAddr], domain: &str, config: &ProbeConfig) -> bool {
    let Ok(mut stream) = connect(addrs, config) else {
        return false;
    };
    let request = format!(
        "GET / HTTP/1.1\r\nHost: {domain}\r\nUser-Agent: certsieve/0.1\r\nAccept: */*\r\nConnection: close\r\n\r\n"
    );
    if stream.write_all(request.as_bytes()).is_err() {
        return false;
    }
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    while buf.len() < MAX_RESPONSE {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(_) => break,
        }
    }
    is_status_line(&buf)
}
