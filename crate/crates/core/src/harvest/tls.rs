use super::{connect, ProbeConfig};
use openssl::ssl::{HandshakeError, SslConnector, SslMethod, SslRef, SslStream, SslVerifyMode};
use std::io::Read;
use std::net::{SocketAddr, TcpStream};
use std::sync::{Arc, Mutex};

#[derive(Debug, Default)]
pub(super) struct TlsOutcome {
    pub leaf: Option<Vec<u8>>,
    pub chain: Vec<Vec<u8>>,
    pub error: Option<String>,
}

impl TlsOutcome {
    fn failed(error: impl Into<String>) -> Self {
        TlsOutcome {
            error: Some(error.into()),
            ..Default::default()
        }
    }
}

type Captured = Arc<Mutex<Option<Vec<u8>>>>;

// Certificate checks are deferred to feature extraction, so the handshake
// accepts anything and offers every protocol version the library allows.
fn connector(captured: Captured) -> Result<SslConnector, openssl::error::ErrorStack> {
    let mut b = SslConnector::builder(SslMethod::tls_client())?;
    b.set_security_level(0);
    b.set_cipher_list("ALL:@SECLEVEL=0")?;
    b.set_min_proto_version(None)?;
    b.set_verify_callback(SslVerifyMode::PEER, move |_preverified, ctx| {
        if ctx.error_depth() == 0 {
            if let Some(der) = ctx.current_cert().and_then(|c| c.to_der().ok()) {
                *captured.lock().unwrap() = Some(der);
            }
        }
        true
    });
    Ok(b.build())
}

fn collect(ssl: &SslRef, captured: &Captured) -> (Option<Vec<u8>>, Vec<Vec<u8>>) {
    let leaf = captured
        .lock()
        .unwrap()
        .clone()
        .or_else(|| ssl.peer_certificate().and_then(|c| c.to_der().ok()));
    let chain = ssl
        .peer_cert_chain()
        .map(|stack| {
            stack
                .iter()
                .filter_map(|c| c.to_der().ok())
                .filter(|d| Some(d) != leaf.as_ref())
                .collect()
        })
        .unwrap_or_default();
    (leaf, chain)
}

// Sends close_notify and waits for the peer to finish, so the connection is
// fully torn down before the probe slot is released.
fn close(mut stream: SslStream<TcpStream>) {
    let _ = stream.shutdown();
    let mut buf = [0u8; 1024];
    let mut drained = 0usize;
    while drained < 64 * 1024 {
        match stream.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => drained += n,
        }
    }
}

pub(super) fn probe(addrs: &[SocketAddr], domain: &str, config: &ProbeConfig) -> TlsOutcome {
    let stream = match connect(addrs, config) {
        Ok(s) => s,
        Err(e) => return TlsOutcome::failed(format!("connect: {e}")),
    };
    let captured: Captured = Arc::default();
    let connector = match connector(captured.clone()) {
        Ok(c) => c,
        Err(e) => return TlsOutcome::failed(format!("tls setup: {e}")),
    };
    let configured = match connector.configure() {
        Ok(c) => c.verify_hostname(false).use_server_name_indication(true),
        Err(e) => return TlsOutcome::failed(format!("tls setup: {e}")),
    };
    match configured.connect(domain, stream) {
        Ok(tls) => {
            let (leaf, chain) = collect(tls.ssl(), &captured);
            close(tls);
            let error = leaf.is_none().then(|| "handshake completed without a server certificate".to_string());
            TlsOutcome { leaf, chain, error }
        }
        Err(HandshakeError::Failure(mid)) | Err(HandshakeError::WouldBlock(mid)) => {
            let (leaf, chain) = collect(mid.ssl(), &captured);
            TlsOutcome {
                leaf,
                chain,
                error: Some(format!("handshake: {}", mid.error())),
            }
        }
        Err(HandshakeError::SetupFailure(e)) => TlsOutcome::failed(format!("tls setup: {e}")),
    }
}
