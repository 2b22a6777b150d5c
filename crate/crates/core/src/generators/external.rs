//! Client side of `MPROBE/1`: a [`Generator`] backed by a remote process.

use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::protocol::{self, Frame, ProtocolError, ServerHello, VERSION};
use super::{finish_output, Generator, GeneratorDescriptor, GeneratorError};
use crate::geometry::LatentPoint;
use crate::imaging::ImageTensor;

/// Where an external generator lives.
///
/// Parsed from `tcp://host:port` or `stdio:<command> [args...]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio { program: String, args: Vec<String> },
}

impl FromStr for Endpoint {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(ProtocolError::MalformedFrame("empty tcp address".into()));
            }
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace().map(String::from);
            let program = parts
                .next()
                .ok_or_else(|| ProtocolError::MalformedFrame("empty stdio command".into()))?;
            return Ok(Endpoint::Stdio { program, args: parts.collect() });
        }
        Err(ProtocolError::MalformedFrame(format!(
            "endpoint {s:?} must start with tcp:// or stdio:"
        )))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "tcp://{addr}"),
            Endpoint::Stdio { program, args } => {
                write!(f, "stdio:{program}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
        }
    }
}

struct Connection {
    reader: Box<dyn Read + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    next_id: u32,
}

impl Connection {
    fn open(endpoint: &Endpoint, timeout: Duration) -> Result<(Self, ServerHello), ProtocolError> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = connect_tcp(addr, timeout)?;
                stream.set_read_timeout(Some(timeout)).map_err(ProtocolError::Io)?;
                stream.set_write_timeout(Some(timeout)).map_err(ProtocolError::Io)?;
                stream.set_nodelay(true).map_err(ProtocolError::Io)?;
                let reader = stream.try_clone().map_err(ProtocolError::Io)?;
                Self::handshake(Box::new(BufReader::new(reader)), Box::new(BufWriter::new(stream)), None)
            }
            Endpoint::Stdio { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(ProtocolError::Io)?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Self::handshake(Box::new(BufReader::new(stdout)), Box::new(BufWriter::new(stdin)), Some(child))
            }
        }
    }

    fn handshake(
        mut reader: Box<dyn Read + Send>,
        mut writer: Box<dyn Write + Send>,
        child: Option<Child>,
    ) -> Result<(Self, ServerHello), ProtocolError> {
        let mut conn = Self { reader: Box::new(std::io::empty()), writer: Box::new(std::io::sink()), child, next_id: 1 };
        protocol::write_client_hello(&mut writer, VERSION)?;
        let hello = protocol::read_server_hello(&mut reader)?;
        conn.reader = reader;
        conn.writer = writer;
        Ok((conn, hello))
    }

    fn round_trip(&mut self, latent: Vec<f32>) -> Result<Vec<f32>, ProtocolError> {
        let id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1).max(1);
        protocol::write_frame(&mut self.writer, &Frame::Request { id, latent })?;
        match protocol::read_frame(&mut self.reader)? {
            None => Err(ProtocolError::Disconnected),
            Some(Frame::Response { id: got, data }) if got == id => Ok(data),
            Some(Frame::Error { id: got, message }) if got == id => Err(ProtocolError::Remote { request_id: id, message }),
            Some(other) => Err(ProtocolError::MalformedFrame(format!(
                "expected reply to request {id}, got {other:?}"
            ))),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn connect_tcp(addr: &str, timeout: Duration) -> Result<TcpStream, ProtocolError> {
    let mut last = None;
    for sock in addr.to_socket_addrs().map_err(ProtocolError::Io)? {
        match TcpStream::connect_timeout(&sock, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(last.map_or_else(
        || ProtocolError::MalformedFrame(format!("address {addr} resolved to nothing")),
        ProtocolError::from,
    ))
}

struct Pool {
    idle: Vec<Connection>,
    open: usize,
}

/// A generator served by another process over `MPROBE/1`.
///
/// Without the server's concurrent-safe flag all calls share one connection
/// and are serialized. With it, up to `max_connections` connections are
/// opened on demand. A connection that fails with a transport error is
/// discarded; a remote error frame leaves it usable.
pub struct ExternalGenerator {
    descriptor: GeneratorDescriptor,
    endpoint: Option<Endpoint>,
    timeout: Duration,
    max_connections: usize,
    pool: Mutex<Pool>,
    available: Condvar,
}

impl fmt::Debug for ExternalGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalGenerator")
            .field("descriptor", &self.descriptor)
            .field("endpoint", &self.endpoint)
            .field("max_connections", &self.max_connections)
            .finish()
    }
}

/// Connects to `endpoint` and performs the handshake. `timeout` bounds TCP
/// connects and each read or write; standard-stream children are not
/// timed out.
pub fn connect_external(endpoint: &Endpoint, timeout: Duration) -> Result<ExternalGenerator, ProtocolError> {
    ExternalGenerator::connect(endpoint, timeout, 1)
}

impl ExternalGenerator {
    /// Like [`connect_external`], allowing up to `max_connections` when the
    /// server declares itself concurrent-safe.
    pub fn connect(endpoint: &Endpoint, timeout: Duration, max_connections: usize) -> Result<Self, ProtocolError> {
        let (conn, hello) = Connection::open(endpoint, timeout)?;
        let max = if hello.concurrent_safe() { max_connections.max(1) } else { 1 };
        Self::from_parts(conn, hello, Some(endpoint.clone()), timeout, max)
    }

    /// Runs the handshake over an existing pair of byte streams, e.g. pipes
    /// to an in-process server. The result never opens extra connections.
    pub fn over_streams<R, W>(reader: R, writer: W) -> Result<Self, ProtocolError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (conn, hello) = Connection::handshake(Box::new(reader), Box::new(writer), None)?;
        Self::from_parts(conn, hello, None, Duration::ZERO, 1)
    }

    fn from_parts(
        conn: Connection,
        hello: ServerHello,
        endpoint: Option<Endpoint>,
        timeout: Duration,
        max_connections: usize,
    ) -> Result<Self, ProtocolError> {
        let name = endpoint.as_ref().map_or_else(|| "external".to_string(), |e| e.to_string());
        let descriptor =
            GeneratorDescriptor::new(name, hello.latent_dim as usize, hello.output_shape(), hello.concurrent_safe())
                .map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
        Ok(Self {
            descriptor,
            endpoint,
            timeout,
            max_connections,
            pool: Mutex::new(Pool { idle: vec![conn], open: 1 }),
            available: Condvar::new(),
        })
    }

    pub fn max_connections(&self) -> usize {
        self.max_connections
    }

    fn acquire(&self) -> Result<Connection, ProtocolError> {
        let mut pool = self.pool.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            if let Some(conn) = pool.idle.pop() {
                return Ok(conn);
            }
            if pool.open < self.max_connections {
                if let Some(endpoint) = &self.endpoint {
                    pool.open += 1;
                    drop(pool);
                    return match Connection::open(endpoint, self.timeout) {
                        Ok((conn, _)) => Ok(conn),
                        Err(e) => {
                            self.release(None);
                            Err(e)
                        }
                    };
                }
                if pool.open == 0 {
                    return Err(ProtocolError::Disconnected);
                }
            }
            pool = self.available.wait(pool).unwrap_or_else(|p| p.into_inner());
        }
    }

    fn release(&self, conn: Option<Connection>) {
        let mut pool = self.pool.lock().unwrap_or_else(|p| p.into_inner());
        match conn {
            Some(c) => pool.idle.push(c),
            None => pool.open -= 1,
        }
        self.available.notify_one();
    }
}

impl Generator for ExternalGenerator {
    fn descriptor(&self) -> &GeneratorDescriptor {
        &self.descriptor
    }

    fn evaluate(&self, z: &LatentPoint) -> Result<ImageTensor, GeneratorError> {
        self.descriptor.check_latent(z)?;
        let latent: Vec<f32> = z.as_slice().iter().map(|&v| v as f32).collect();
        let mut conn = self.acquire()?;
        let result = conn.round_trip(latent);
        let keep = matches!(result, Ok(_) | Err(ProtocolError::Remote { .. }));
        self.release(keep.then_some(conn));
        let data = result?;
        let expected = self.descriptor.output_len();
        if data.len() != expected {
            return Err(ProtocolError::MalformedFrame(format!(
                "response carries {} floats, shape {} needs {expected}",
                data.len(),
                self.descriptor.output_shape
            ))
            .into());
        }
        finish_output(self.descriptor.output_shape, data.into_iter().map(f64::from).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_parse_and_print() {
        let tcp: Endpoint = "tcp://127.0.0.1:9000".parse().unwrap();
        assert_eq!(tcp, Endpoint::Tcp("127.0.0.1:9000".into()));
        assert_eq!(tcp.to_string(), "tcp://127.0.0.1:9000");
        let stdio: Endpoint = "stdio:python -m bridge --stub".parse().unwrap();
        assert_eq!(
            stdio,
            Endpoint::Stdio { program: "python".into(), args: vec!["-m".into(), "bridge".into(), "--stub".into()] }
        );
        assert_eq!(stdio.to_string(), "stdio:python -m bridge --stub");
        assert!("http://x".parse::<Endpoint>().is_err());
        assert!("stdio:".parse::<Endpoint>().is_err());
    }
}
