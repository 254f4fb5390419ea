use crate::Fixture;
use openssl::ssl::{SslAcceptor, SslMethod, SslVerifyMode, SslVersion};
use std::io::{Read, Write};
use std::net::{IpAddr, Ipv4Addr, Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

/// What a fixture domain serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    /// HTTP on the HTTP port and TLS on the HTTPS port.
    Both,
    /// TLS only; the HTTP port accepts and hangs up without a response.
    HttpsOnly,
    /// HTTP only; nothing listens on the HTTPS port.
    HttpOnly,
    /// No listeners at all.
    Dead,
    /// TLS 1.2 server that sends its certificate and then aborts the
    /// handshake by demanding a client certificate. No HTTP.
    CertThenFail,
}

/// Connection counters shared by every server in a farm.
#[derive(Debug, Default)]
pub struct ConnStats {
    current: AtomicUsize,
    max: AtomicUsize,
    total: AtomicUsize,
}

impl ConnStats {
    pub fn max_concurrent(&self) -> usize {
        self.max.load(Ordering::SeqCst)
    }

    pub fn total(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }

    /// Start a new peak measurement from the current level.
    pub fn reset_peak(&self) {
        self.max.store(self.current.load(Ordering::SeqCst), Ordering::SeqCst);
    }

    fn enter(self: &Arc<Self>) -> Guard {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.max.fetch_max(now, Ordering::SeqCst);
        self.total.fetch_add(1, Ordering::SeqCst);
        Guard(Some(self.clone()))
    }
}

// Released before the server's final write so that a client which waits for
// the server to finish can never overlap with a still-counted connection.
struct Guard(Option<Arc<ConnStats>>);

impl Guard {
    fn release(&mut self) {
        if let Some(s) = self.0.take() {
            s.current.fetch_sub(1, Ordering::SeqCst);
        }
    }
}

impl Drop for Guard {
    fn drop(&mut self) {
        self.release();
    }
}

#[derive(Debug, Clone)]
pub struct FarmDomain {
    pub name: String,
    pub ip: IpAddr,
    pub behavior: Behavior,
    pub leaf: Option<Fixture>,
    pub chain: Vec<Fixture>,
}

/// A set of loopback servers, one loopback address per domain, sharing one
/// HTTP port number and one HTTPS port number.
pub struct Farm {
    pub http_port: u16,
    pub https_port: u16,
    pub domains: Vec<FarmDomain>,
    pub stats: Arc<ConnStats>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

static NEXT_ADDR: AtomicUsize = AtomicUsize::new(0);

fn next_ip() -> Ipv4Addr {
    let n = NEXT_ADDR.fetch_add(1, Ordering::SeqCst);
    let pid = std::process::id() as usize;
    Ipv4Addr::new(127, (100 + pid % 100) as u8, ((n / 250) % 250) as u8, (n % 250 + 1) as u8)
}

fn bind_pair(ips: &[(Ipv4Addr, bool, bool)]) -> Option<(u16, u16, Vec<(Option<TcpListener>, Option<TcpListener>)>)> {
    let probe_ip = ips.first().map(|x| x.0).unwrap_or(Ipv4Addr::LOCALHOST);
    let http_port = TcpListener::bind((probe_ip, 0)).ok()?.local_addr().ok()?.port();
    let https_port = TcpListener::bind((probe_ip, 0)).ok()?.local_addr().ok()?.port();
    if http_port == https_port {
        return None;
    }
    let mut out = Vec::new();
    for &(ip, http, https) in ips {
        let h = if http { Some(TcpListener::bind((ip, http_port)).ok()?) } else { None };
        let s = if https { Some(TcpListener::bind((ip, https_port)).ok()?) } else { None };
        out.push((h, s));
    }
    Some((http_port, https_port, out))
}

impl Farm {
    /// Starts servers for `(name, behavior, leaf, chain)` tuples. TLS
    /// behaviors require a leaf certificate.
    pub fn start(specs: Vec<(String, Behavior, Option<Fixture>, Vec<Fixture>)>) -> Farm {
        let ips: Vec<Ipv4Addr> = specs.iter().map(|_| next_ip()).collect();
        let wants: Vec<(Ipv4Addr, bool, bool)> = specs
            .iter()
            .zip(&ips)
            .map(|((_, b, _, _), ip)| {
                let http = matches!(b, Behavior::Both | Behavior::HttpsOnly | Behavior::HttpOnly);
                let https = matches!(b, Behavior::Both | Behavior::HttpsOnly | Behavior::CertThenFail);
                (*ip, http, https)
            })
            .collect();
        let (http_port, https_port, listeners) = (0..20)
            .find_map(|_| bind_pair(&wants))
            .expect("could not bind fixture farm ports");

        let stats = Arc::new(ConnStats::default());
        let stop = Arc::new(AtomicBool::new(false));
        let mut threads = Vec::new();
        let mut domains = Vec::new();
        for ((name, behavior, leaf, chain), (ip, (http_l, https_l))) in
            specs.into_iter().zip(ips.into_iter().zip(listeners))
        {
            if let Some(l) = http_l {
                let reply = behavior != Behavior::HttpsOnly;
                threads.push(spawn_accept(l, stop.clone(), stats.clone(), move |s, g| {
                    serve_http(s, g, reply)
                }));
            }
            if let Some(l) = https_l {
                let leaf = leaf.clone().expect("TLS behavior needs a leaf certificate");
                let acceptor = Arc::new(build_acceptor(&leaf, &chain, behavior == Behavior::CertThenFail));
                threads.push(spawn_accept(l, stop.clone(), stats.clone(), move |s, g| {
                    serve_tls(&acceptor, s, g)
                }));
            }
            domains.push(FarmDomain {
                name,
                ip: IpAddr::V4(ip),
                behavior,
                leaf,
                chain,
            });
        }
        Farm {
            http_port,
            https_port,
            domains,
            stats,
            stop,
            threads,
        }
    }

    pub fn domain(&self, name: &str) -> &FarmDomain {
        self.domains.iter().find(|d| d.name == name).expect("unknown farm domain")
    }

    /// `(domain, ip)` pairs for resolver overrides.
    pub fn resolutions(&self) -> Vec<(String, IpAddr)> {
        self.domains.iter().map(|d| (d.name.clone(), d.ip)).collect()
    }

    pub fn http_addr(&self, name: &str) -> SocketAddr {
        SocketAddr::new(self.domain(name).ip, self.http_port)
    }
}

impl Drop for Farm {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn spawn_accept<F>(listener: TcpListener, stop: Arc<AtomicBool>, stats: Arc<ConnStats>, handler: F) -> JoinHandle<()>
where
    F: Fn(TcpStream, Guard) + Send + Sync + 'static,
{
    let handler = Arc::new(handler);
    listener.set_nonblocking(true).expect("nonblocking");
    thread::spawn(move || {
        let mut workers = Vec::new();
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let guard = stats.enter();
                    let _ = stream.set_nonblocking(false);
                    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
                    let _ = stream.set_write_timeout(Some(Duration::from_secs(5)));
                    let h = handler.clone();
                    workers.push(thread::spawn(move || h(stream, guard)));
                }
                Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    thread::sleep(Duration::from_millis(2));
                }
                Err(_) => thread::sleep(Duration::from_millis(2)),
            }
        }
        for w in workers {
            let _ = w.join();
        }
    })
}

fn serve_http(mut stream: TcpStream, mut guard: Guard, reply: bool) {
    if !reply {
        guard.release();
        let _ = stream.shutdown(Shutdown::Both);
        return;
    }
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    while !buf.windows(4).any(|w| w == b"\r\n\r\n") && buf.len() < 16 * 1024 {
        match stream.read(&mut chunk) {
            Ok(0) | Err(_) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
        }
    }
    guard.release();
    let _ = stream.write_all(b"HTTP/1.1 200 OK\r\nContent-Length: 2\r\nConnection: close\r\n\r\nok");
    let _ = stream.shutdown(Shutdown::Both);
}

fn build_acceptor(leaf: &Fixture, chain: &[Fixture], fail_after_cert: bool) -> SslAcceptor {
    let mut b = SslAcceptor::mozilla_intermediate(SslMethod::tls_server()).expect("acceptor");
    b.set_security_level(0);
    b.set_cipher_list("ALL:@SECLEVEL=0").expect("ciphers");
    b.set_certificate(&leaf.x509()).expect("certificate");
    b.set_private_key(&leaf.key).expect("private key");
    for c in chain {
        b.add_extra_chain_cert(c.x509()).expect("chain cert");
    }
    if fail_after_cert {
        b.set_max_proto_version(Some(SslVersion::TLS1_2)).expect("max proto");
        b.set_verify(SslVerifyMode::PEER | SslVerifyMode::FAIL_IF_NO_PEER_CERT);
    }
    b.build()
}

fn serve_tls(acceptor: &SslAcceptor, stream: TcpStream, mut guard: Guard) {
    match acceptor.accept(stream) {
        Ok(mut tls) => {
            guard.release();
            let _ = tls.shutdown();
            let _ = tls.get_ref().shutdown(Shutdown::Both);
        }
        Err(_) => guard.release(),
    }
}
